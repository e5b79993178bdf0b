"""Expert knowledge: examples plus known-valid implications, and the
standard way of asking an expert a question.

An expert is queried only through an interaction function; the standard
one answers as fully as possible: it accepts what follows from its
implications, rejects with every counterexample it can name, and
otherwise reports which conclusion attributes it cannot settle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from . import cxt
from .context import IncompleteContext, info_leq, join, meet, restrict
from .errors import IncompatibleError, ParseError, ValidationError
from .implications import (
    Implication,
    Theory,
    certainly_valid,
    closure,
    closure_mask,
    cons_member,
    implication_from_json,
    implication_to_json,
)


# -- answers ----------------------------------------------------------------


@dataclass(frozen=True)
class Accept:
    pass


@dataclass(frozen=True)
class Reject:
    counterexamples: IncompleteContext


@dataclass(frozen=True)
class Unknown:
    residual: frozenset[str]

    def __init__(self, residual: Iterable[str]):
        object.__setattr__(self, "residual", frozenset(residual))


Answer = Accept | Reject | Unknown


def answer_to_json(answer: Answer, order: Sequence[str]) -> dict[str, Any]:
    if isinstance(answer, Accept):
        return {"kind": "accept"}
    if isinstance(answer, Reject):
        return {"kind": "reject", "counterexamples": cxt.to_json(answer.counterexamples)}
    rank = {a: i for i, a in enumerate(order)}
    return {"kind": "unknown", "residual": sorted(answer.residual, key=rank.__getitem__)}


def answer_from_json(doc: dict[str, Any]) -> Answer:
    kind = doc.get("kind")
    if kind == "accept":
        return Accept()
    if kind == "reject":
        ctx, _ = cxt.from_json(doc["counterexamples"])
        return Reject(ctx)
    if kind == "unknown":
        return Unknown(doc["residual"])
    raise ParseError(f"unknown answer kind: {kind!r}")


# -- expert knowledge --------------------------------------------------------


@dataclass(frozen=True)
class ExpertKnowledge:
    name: str
    examples: IncompleteContext
    implications: Theory

    def __post_init__(self):
        if self.examples.attributes != self.implications.attributes:
            raise IncompatibleError(
                "expert examples and implications use different attribute universes"
            )

    @property
    def attributes(self) -> tuple[str, ...]:
        return self.examples.attributes


def validate_expert(
    expert: ExpertKnowledge, universe: IncompleteContext | None = None
) -> list[str]:
    """Return human-readable violations; an empty list means the expert is valid.

    With a universe the examples must be derivable from it and the known
    implications must hold in it.  Always: nothing derivable from the known
    implications may be refuted by the expert's own examples.
    """
    problems = []
    examples, theory = expert.examples, expert.implications
    if universe is not None:
        if universe.attributes != expert.attributes:
            raise IncompatibleError("expert and universe attribute lists differ")
        missing = [o for o in examples.objects if o not in universe.objects]
        if missing:
            problems.append(f"objects not in the universe: {missing}")
        elif not info_leq(examples, universe):
            bad = [
                o
                for o in examples.objects
                if not info_leq(restrict(examples, [o]), universe)
            ]
            problems.append(f"example rows claim more than the universe: {bad}")
        for imp in theory:
            if not certainly_valid(universe, imp):
                problems.append(f"known implication does not hold in the universe: {imp!r}")
    # Satisfiability of everything derivable, checked row-locally: the closure
    # of each row's certain attributes must avoid that row's blank cells.
    pairs = [(examples.attr_mask(i.premise), examples.attr_mask(i.conclusion)) for i in theory]
    for i, name in enumerate(examples.objects):
        closed = closure_mask(pairs, examples.crosses[i])
        if closed & examples.blanks[i]:
            clash = examples.attrs_from_mask(closed & examples.blanks[i])
            problems.append(
                f"row {name!r} refutes an implication derivable from the expert's theory"
                f" (attributes {sorted(clash)})"
            )
    return problems


def ei_standard(question: Implication, expert: ExpertKnowledge) -> Answer:
    """The standard expert interaction: answer as fully as possible."""
    examples, theory = expert.examples, expert.implications
    if not question.names() <= set(expert.attributes):
        raise IncompatibleError("question uses attributes the expert does not know about")
    if cons_member(theory, question):
        return Accept()
    pmask = examples.attr_mask(question.premise)
    cmask = examples.attr_mask(question.conclusion)
    hit = [
        name
        for i, name in enumerate(examples.objects)
        if examples.crosses[i] & pmask == pmask and examples.blanks[i] & cmask
    ]
    if hit:
        return Reject(restrict(examples, hit))
    residual = question.conclusion - closure(theory, question.premise)
    return Unknown(residual)


def knowledge_leq(a: ExpertKnowledge, b: ExpertKnowledge) -> bool:
    """b knows at least as much as a, in examples and in implications."""
    if a.attributes != b.attributes:
        raise IncompatibleError("experts use different attribute universes")
    if not info_leq(a.examples, b.examples):
        return False
    return all(cons_member(b.implications, imp) for imp in a.implications)


def expert_join(a: ExpertKnowledge, b: ExpertKnowledge) -> ExpertKnowledge:
    """Maximum combined knowledge: joined examples, united theories."""
    return ExpertKnowledge(
        name=f"{a.name}+{b.name}",
        examples=join(a.examples, b.examples),
        implications=a.implications.extend(b.implications),
    )


def expert_meet(a: ExpertKnowledge, b: ExpertKnowledge) -> ExpertKnowledge:
    """Shared knowledge: met examples, implications derivable from both sides."""
    shared = [
        imp
        for imp in (*a.implications, *b.implications)
        if cons_member(a.implications, imp) and cons_member(b.implications, imp)
    ]
    return ExpertKnowledge(
        name=f"{a.name}&{b.name}",
        examples=meet(a.examples, b.examples),
        implications=Theory(a.attributes, tuple(shared)),
    )


def group_join(experts: Sequence[ExpertKnowledge]) -> ExpertKnowledge:
    if not experts:
        raise ValidationError("cannot combine an empty group of experts")
    combined = experts[0]
    for e in experts[1:]:
        combined = expert_join(combined, e)
    return combined


# -- expert files -------------------------------------------------------------


def expert_to_json(expert: ExpertKnowledge) -> dict[str, Any]:
    return {
        "name": expert.name,
        "context": cxt.dumps(expert.examples),
        "implications": [implication_to_json(i, expert.attributes) for i in expert.implications],
    }


def expert_from_json(doc: dict[str, Any], base_dir: Path | None = None) -> ExpertKnowledge:
    try:
        name = doc["name"]
        source = doc["context"]
        imps = doc.get("implications", [])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"expert JSON missing field: {exc}") from None
    if isinstance(source, str):
        examples, _ = cxt.loads(source)
    elif isinstance(source, dict) and "file" in source:
        path = Path(source["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        examples, _ = cxt.loads(path.read_text(encoding="utf-8"))
    else:
        raise ParseError("expert context must be inline CXT3 text or {'file': path}")
    theory = Theory(examples.attributes, tuple(implication_from_json(d) for d in imps))
    return ExpertKnowledge(name=str(name), examples=examples, implications=theory)


def load_expert(path: str | Path) -> ExpertKnowledge:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}", line=exc.lineno) from None
    return expert_from_json(doc, base_dir=path.parent)


Interaction = Callable[[Implication, ExpertKnowledge], Answer]
