"""Collaborative attribute exploration over incomplete three-valued contexts."""

from .context import (
    Cell,
    FormalContext,
    IncompleteContext,
    as_formal,
    completions,
    conflicts,
    derive,
    info_leq,
    join,
    meet,
    restrict,
    select_attributes,
)
from .engine import ExplorationResult, ExplorationState, new_session, run
from .expert import (
    Accept,
    Answer,
    ExpertKnowledge,
    Reject,
    Unknown,
    ei_standard,
    expert_join,
    expert_meet,
    group_join,
    knowledge_leq,
    load_expert,
    validate_expert,
)
from .implications import (
    Implication,
    Theory,
    certainly_valid,
    closure,
    cons_equal,
    cons_member,
    imp_enumerate,
    kripke_oracle,
    max_satisfiable_conclusion,
    respects,
    satisfiable,
)
from .strategies import InteractionLedger, Strategy, StrategyConfig, build_strategy

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
