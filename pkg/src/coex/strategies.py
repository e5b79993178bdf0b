"""Collaboration strategies: how a group of experts answers one question.

Every strategy maps (question, expert group, interaction function) to a
single answer that is consistent with the domain, and accounts for each
expert contact in an interaction ledger.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from .context import IncompleteContext, join
from .errors import ValidationError
from .expert import (
    Accept,
    Answer,
    ExpertKnowledge,
    Interaction,
    Reject,
    Unknown,
    answer_to_json,
    group_join,
)
from .implications import Implication

STRATEGY_KINDS = (
    "single",
    "ignorant",
    "max_knowledge",
    "broadcast",
    "iterative",
    "random_selection",
)

SETUP_KEY = "__setup__"


@dataclass
class InteractionLedger:
    """Counts of expert contacts, by expert, by question, and in total."""

    per_expert: dict[str, int] = field(default_factory=dict)
    per_question: dict[str, int] = field(default_factory=dict)
    total: int = 0

    def record(self, expert: str, question_key: str) -> None:
        self.per_expert[expert] = self.per_expert.get(expert, 0) + 1
        self.per_question[question_key] = self.per_question.get(question_key, 0) + 1
        self.total += 1

    def consistent(self) -> bool:
        return self.total == sum(self.per_expert.values()) == sum(self.per_question.values())


@dataclass(frozen=True)
class StrategyConfig:
    kind: str
    expert_order: tuple[str, ...] | None = None
    per_question_shuffle: bool = False
    rng_seed: int = 0
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValidationError(f"unknown strategy kind: {self.kind!r}")
        if self.weights is not None:
            if any(w < 0 for w in self.weights):
                raise ValidationError("weights must be non-negative")
            if abs(sum(self.weights) - 1.0) > 1e-9:
                raise ValidationError("weights must sum to 1")

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "StrategyConfig":
        try:
            kind = doc["kind"]
        except (KeyError, TypeError):
            raise ValidationError("strategy configuration needs a 'kind'") from None
        order = doc.get("order")
        shuffle = order == "per_question_shuffled"
        return StrategyConfig(
            kind=kind,
            expert_order=None if (order is None or shuffle) else tuple(order),
            per_question_shuffle=shuffle,
            rng_seed=int(doc.get("seed", 0)),
            weights=None if doc.get("weights") is None else tuple(doc["weights"]),
        )

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"kind": self.kind}
        if self.per_question_shuffle:
            doc["order"] = "per_question_shuffled"
        elif self.expert_order is not None:
            doc["order"] = list(self.expert_order)
        if self.rng_seed:
            doc["seed"] = self.rng_seed
        if self.weights is not None:
            doc["weights"] = list(self.weights)
        return doc


class Strategy:
    """A configured strategy instance with per-session state and ledger."""

    def __init__(self, config: StrategyConfig):
        self.config = config
        self.kind = config.kind
        self.ledger = InteractionLedger()
        self._rng = random.Random(config.rng_seed)
        self._combined: ExpertKnowledge | None = None

    # one expert contact, with bookkeeping
    def _ask(
        self,
        question: Implication,
        expert: ExpertKnowledge,
        interaction: Interaction,
        question_key: str,
        on_event,
    ) -> Answer:
        if on_event is not None:
            on_event({"event": "expert_asked", "question_id": question_key, "expert": expert.name})
        self.ledger.record(expert.name, question_key)
        answer = interaction(question, expert)
        if on_event is not None:
            on_event(
                {
                    "event": "expert_answered",
                    "question_id": question_key,
                    "expert": expert.name,
                    "answer": answer_to_json(answer, expert.attributes),
                }
            )
        return answer

    def _ordered(self, experts: Sequence[ExpertKnowledge]) -> list[ExpertKnowledge]:
        if self.config.per_question_shuffle:
            out = list(experts)
            self._rng.shuffle(out)
            return out
        if self.config.expert_order is not None:
            by_name = {e.name: e for e in experts}
            if sorted(by_name) != sorted(self.config.expert_order):
                raise ValidationError("expert_order is not a permutation of the group")
            return [by_name[n] for n in self.config.expert_order]
        return list(experts)

    def answer(
        self,
        question: Implication,
        experts: Sequence[ExpertKnowledge],
        interaction: Interaction,
        question_key: str,
        on_event=None,
    ) -> Answer:
        kind = self.kind
        if kind == "ignorant":
            return strat_ignorant(question)
        if kind == "single":
            if len(experts) != 1:
                raise ValidationError("the single-expert strategy needs exactly one expert")
            return self._ask(question, experts[0], interaction, question_key, on_event)
        if not experts:
            raise ValidationError(f"strategy {kind!r} needs at least one expert")
        if kind == "max_knowledge":
            if self._combined is None:
                # one up-front contact per expert to collect everything they know
                for e in experts:
                    self.ledger.record(e.name, SETUP_KEY)
                self._combined = group_join(list(experts))
            from .expert import ei_standard

            return ei_standard(question, self._combined)
        if kind == "broadcast":
            return self._broadcast(question, experts, interaction, question_key, on_event)
        if kind == "iterative":
            return self._iterative(question, experts, interaction, question_key, on_event)
        if kind == "random_selection":
            weights = self.config.weights
            if weights is not None and len(weights) != len(experts):
                raise ValidationError("weights must match the expert group size")
            chosen = self._rng.choices(list(experts), weights=weights, k=1)[0]
            return self._ask(question, chosen, interaction, question_key, on_event)
        raise ValidationError(f"unknown strategy kind: {kind!r}")

    def _broadcast(self, question, experts, interaction, question_key, on_event) -> Answer:
        """Ask everyone, merge all counterexamples, pool the known conclusions."""
        answers = [
            (e, self._ask(question, e, interaction, question_key, on_event)) for e in experts
        ]
        rejects = [a for _, a in answers if isinstance(a, Reject)]
        if rejects:
            merged: IncompleteContext = rejects[0].counterexamples
            for r in rejects[1:]:
                merged = join(merged, r.counterexamples)
            return Reject(merged)
        goal = question.residual()
        known: frozenset[str] = frozenset()
        for _, a in answers:
            known |= goal if isinstance(a, Accept) else goal - a.residual
        if known >= goal:
            return Accept()
        return Unknown(goal - known)

    def _iterative(self, question, experts, interaction, question_key, on_event) -> Answer:
        """One expert at a time; first accept or reject settles the question."""
        goal = question.residual()
        known: frozenset[str] = frozenset()
        for e in self._ordered(experts):
            a = self._ask(question, e, interaction, question_key, on_event)
            if isinstance(a, Accept):
                return Accept()
            if isinstance(a, Reject):
                return a
            known |= goal - a.residual
        if known >= goal:
            return Accept()
        return Unknown(goal - known)


def build_strategy(config: StrategyConfig | dict[str, Any]) -> Strategy:
    if isinstance(config, dict):
        config = StrategyConfig.from_json(config)
    return Strategy(config)


# ---------------------------------------------------------------------------
# the plain strategy functions


def strat_single(
    question: Implication, experts: Sequence[ExpertKnowledge], interaction: Interaction
) -> Answer:
    if len(experts) != 1:
        raise ValidationError("the single-expert strategy needs exactly one expert")
    return interaction(question, experts[0])


def strat_ignorant(question: Implication) -> Answer:
    return Unknown(question.residual())


def strat_max_knowledge(
    question: Implication, experts: Sequence[ExpertKnowledge], interaction: Interaction
) -> Answer:
    from .expert import ei_standard

    return ei_standard(question, group_join(list(experts)))


def strat_broadcast(
    question: Implication, experts: Sequence[ExpertKnowledge], interaction: Interaction
) -> Answer:
    s = Strategy(StrategyConfig("broadcast"))
    return s.answer(question, experts, interaction, question_key="q")


def strat_iterative(
    question: Implication,
    experts: Sequence[ExpertKnowledge],
    interaction: Interaction,
    order: Sequence[str] | None = None,
) -> Answer:
    s = Strategy(StrategyConfig("iterative", expert_order=None if order is None else tuple(order)))
    return s.answer(question, experts, interaction, question_key="q")


def strat_random(
    question: Implication,
    experts: Sequence[ExpertKnowledge],
    interaction: Interaction,
    seed: int = 0,
    weights: Sequence[float] | None = None,
) -> Answer:
    s = Strategy(
        StrategyConfig(
            "random_selection",
            rng_seed=seed,
            weights=None if weights is None else tuple(weights),
        )
    )
    return s.answer(question, experts, interaction, question_key="q")
