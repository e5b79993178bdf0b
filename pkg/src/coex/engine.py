"""The attribute-exploration state machine over incomplete contexts.

Questions are generated premise by premise: the engine walks the closed
sets of the accepted theory in lectic order (first session attribute most
significant) and, for the premise under the cursor, asks for the largest
still-satisfiable conclusion.  Answers feed back as accepted implications,
counterexample rows, or fictitious objects blocking re-asks of refused
implications.

Single-writer contract: one next_question/apply_answer sequence at a time;
snapshots are plain immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .context import IncompleteContext, join, restrict, select_attributes
from .errors import (
    ConflictError,
    IncompatibleError,
    InvalidCounterexampleError,
    ProtocolError,
    StateError,
    ValidationError,
)
from .expert import Accept, Answer, Reject, Unknown, answer_to_json
from .implications import (
    Implication,
    Theory,
    closure_mask,
    compile_theory,
    implication_to_json,
)

FICTITIOUS_PREFIX = "?:"


def fictitious_name(premise: Iterable[str], refuted: str, order: Sequence[str]) -> str:
    rank = {a: i for i, a in enumerate(order)}
    inside = ",".join(sorted(premise, key=rank.__getitem__))
    return f"{FICTITIOUS_PREFIX}{{{inside}}}!{{{refuted}}}"


@dataclass(frozen=True)
class FictitiousEntry:
    name: str
    premise: frozenset[str]
    refuted: str


@dataclass(frozen=True)
class HistoryEntry:
    question_id: str
    question: Implication
    answer: Answer
    source: str  # "derived" for auto-accepted questions, else the answering source


@dataclass(frozen=True)
class ExplorationResult:
    attributes: tuple[str, ...]
    accepted: Theory
    real_counterexamples: IncompleteContext
    fictitious_counterexamples: IncompleteContext
    possibly_valid: Theory
    history: tuple[HistoryEntry, ...]


def next_closed_mask(mask: int, close: Callable[[int], int], n: int) -> int | None:
    """Lectically next closed set after ``mask`` (attribute index 0 most significant)."""
    a = mask
    for i in range(n - 1, -1, -1):
        bit = 1 << i
        if a & bit:
            a &= ~bit
        else:
            prefix = bit - 1
            b = close((a & prefix) | bit)
            if b & prefix == a & prefix:
                return b
    return None


def lectic_less(a: int, b: int) -> bool:
    d = a ^ b
    return d != 0 and bool(b & (d & -d))


class ExplorationState:
    """Mutable exploration session; see the module docstring for the contract."""

    def __init__(
        self,
        attributes: Sequence[str],
        seed_examples: IncompleteContext | None = None,
        seed_theory: Theory | None = None,
    ):
        if not attributes:
            raise ValidationError("the attribute list must not be empty")
        if len(set(attributes)) != len(attributes):
            raise ValidationError("attribute names must be unique")
        self.attributes: tuple[str, ...] = tuple(attributes)
        if seed_theory is None:
            seed_theory = Theory(self.attributes)
        elif set(seed_theory.attributes) != set(self.attributes):
            raise IncompatibleError("seed theory universe differs from the session attributes")
        else:
            seed_theory = Theory(self.attributes, seed_theory.implications)
        if seed_examples is None:
            seed_examples = IncompleteContext.empty(self.attributes)
        elif set(seed_examples.attributes) != set(self.attributes):
            raise IncompatibleError("seed context attributes differ from the session attributes")
        else:
            seed_examples = select_attributes(seed_examples, self.attributes)
        self.accepted: Theory = seed_theory
        self.examples: IncompleteContext = seed_examples
        self.fictitious: tuple[FictitiousEntry, ...] = ()
        self.history: tuple[HistoryEntry, ...] = ()
        self.finished: bool = False
        self._n = len(self.attributes)
        self._pairs = compile_theory(self.accepted)
        self.cursor: int | None = closure_mask(self._pairs, 0)
        self.pending: Implication | None = None
        self._question_count = 0

    # -- helpers -------------------------------------------------------

    def _close(self, mask: int) -> int:
        return closure_mask(self._pairs, mask)

    def _accept_into_theory(self, imp: Implication) -> None:
        self.accepted = self.accepted.add(imp)
        self._pairs = compile_theory(self.accepted)

    def _advance(self) -> None:
        assert self.cursor is not None
        self.cursor = next_closed_mask(self.cursor, self._close, self._n)

    def _next_id(self) -> str:
        self._question_count += 1
        return f"q{self._question_count}"

    def _record(self, question: Implication, answer: Answer, source: str, qid: str) -> None:
        self.history += (HistoryEntry(qid, question, answer, source),)

    # -- the (E3)/(E4) step ---------------------------------------------

    def next_question(self, on_auto_accept=None) -> Implication | None:
        """Return the pending question, auto-accepting derivable ones.

        Walks closed premises from the cursor; a premise whose full
        satisfiable conclusion is already derivable from the accepted
        theory is recorded with source "derived" and skipped.  Returns
        None exactly when the session is finished.
        """
        if self.finished:
            raise StateError("exploration already finished")
        if self.pending is not None:
            return self.pending
        while self.cursor is not None:
            amask = self.cursor
            bmask = self.examples.sat_conclusion_mask(amask)
            if bmask != amask:
                question = Implication(
                    self.examples.attrs_from_mask(amask),
                    self.examples.attrs_from_mask(bmask & ~amask),
                )
                if bmask & ~self._close(amask) == 0:
                    qid = self._next_id()
                    self._record(question, Accept(), "derived", qid)
                    if on_auto_accept is not None:
                        on_auto_accept(qid, question)
                    self._advance()
                    continue
                self.pending = question
                return question
            self._advance()
        self.finished = True
        return None

    def pending_id(self) -> str:
        return f"q{self._question_count + 1}"

    # -- answer application ----------------------------------------------

    def apply_answer(self, question: Implication, answer: Answer, source: str = "expert") -> None:
        if self.finished:
            raise StateError("exploration already finished")
        if self.pending is None or question.canonical_key() != self.pending.canonical_key():
            raise StateError("answer does not match the pending question")
        if isinstance(answer, Accept):
            self._apply_accept(question)
        elif isinstance(answer, Reject):
            self._apply_reject(question, answer.counterexamples)
        elif isinstance(answer, Unknown):
            self._apply_unknown(question, answer.residual)
        else:
            raise ProtocolError(f"not an answer: {answer!r}")
        self._record(question, answer, source, self._next_id())
        self.pending = None

    def _apply_accept(self, question: Implication) -> None:
        self._accept_into_theory(question)
        self._advance()

    def _apply_reject(self, question: Implication, rows: IncompleteContext) -> None:
        if set(rows.attributes) != set(self.attributes):
            raise IncompatibleError("counterexample attributes differ from the session universe")
        rows = select_attributes(rows, self.attributes)
        if not rows.objects:
            raise InvalidCounterexampleError("a rejection must name at least one counterexample")
        pmask = rows.attr_mask(question.premise)
        cmask = rows.attr_mask(question.conclusion)
        for i, name in enumerate(rows.objects):
            if name.startswith(FICTITIOUS_PREFIX):
                raise InvalidCounterexampleError(
                    f"object name {name!r} collides with the fictitious namespace", row=name
                )
            if rows.crosses[i] & pmask != pmask:
                raise InvalidCounterexampleError(
                    f"row {name!r} does not certainly carry the premise", row=name
                )
            if not rows.blanks[i] & cmask:
                raise InvalidCounterexampleError(
                    f"row {name!r} does not refute any conclusion attribute", row=name
                )
        merged = join(self.examples, rows)  # raises ConflictError, state untouched
        self.examples = merged
        # cursor stays: the same premise is re-examined with a smaller conclusion

    def _apply_unknown(self, question: Implication, residual: frozenset[str]) -> None:
        if not residual <= question.conclusion:
            raise ProtocolError(
                f"unknown residual {sorted(residual)} is not part of the conclusion"
            )
        known = question.conclusion - residual
        stated = Implication(question.premise, known)
        if known:
            self._accept_into_theory(stated)
        closed = closure_mask(self._pairs, self.examples.attr_mask(question.premise))
        survivors = [b for b in residual if not closed >> self.examples.attribute_index(b) & 1]
        if survivors:
            order = {a: i for i, a in enumerate(self.attributes)}
            rows, names = [], []
            for b in sorted(survivors, key=order.__getitem__):
                name = fictitious_name(question.premise, b, self.attributes)
                if name in self.examples._obj_index:
                    continue  # the same refusal was recorded earlier in the session
                names.append(name)
                rows.append(
                    "".join(
                        "X" if a in question.premise else "." if a == b else "?"
                        for a in self.attributes
                    )
                )
                self.fictitious += (FictitiousEntry(name, frozenset(question.premise), b),)
            if names:
                addition = IncompleteContext.from_rows(names, self.attributes, rows)
                self.examples = join(self.examples, addition)
        # cursor stays: next_question re-derives and auto-accepts what is now known

    # -- views ------------------------------------------------------------

    def real_examples(self) -> IncompleteContext:
        return restrict(
            self.examples,
            [o for o in self.examples.objects if not o.startswith(FICTITIOUS_PREFIX)],
        )

    def fictitious_examples(self) -> IncompleteContext:
        return restrict(
            self.examples,
            [o for o in self.examples.objects if o.startswith(FICTITIOUS_PREFIX)],
        )

    def possibly_valid(self) -> Theory:
        extra = tuple(Implication(e.premise, {e.refuted}) for e in self.fictitious)
        return Theory(self.attributes, self.accepted.implications + extra)

    def result(self) -> ExplorationResult:
        return ExplorationResult(
            attributes=self.attributes,
            accepted=self.accepted,
            real_counterexamples=self.real_examples(),
            fictitious_counterexamples=self.fictitious_examples(),
            possibly_valid=self.possibly_valid(),
            history=self.history,
        )


def new_session(
    attributes: Sequence[str],
    seed_examples: IncompleteContext | None = None,
    seed_theory: Theory | None = None,
) -> ExplorationState:
    return ExplorationState(attributes, seed_examples, seed_theory)


# ---------------------------------------------------------------------------
# driving a session to completion


def run(
    state: ExplorationState,
    strategy,
    experts: Sequence,
    interaction=None,
    on_event: Callable[[dict[str, Any]], None] | None = None,
) -> ExplorationResult:
    """Drive the exploration with a collaboration strategy until it terminates.

    Events mirror the session-log schema; ``strategy`` is anything built by
    :mod:`coex.strategies`.
    """
    from .expert import ei_standard

    if interaction is None:
        interaction = ei_standard

    def emit(event: dict[str, Any]) -> None:
        if on_event is not None:
            on_event(event)

    def attrs_sorted(names: Iterable[str]) -> list[str]:
        rank = {a: i for i, a in enumerate(state.attributes)}
        return sorted(names, key=rank.__getitem__)

    def on_auto(qid: str, question: Implication) -> None:
        emit(
            {
                "event": "auto_accepted",
                "question_id": qid,
                "premise": attrs_sorted(question.premise),
                "conclusion": attrs_sorted(question.conclusion),
            }
        )

    while True:
        question = state.next_question(on_auto_accept=on_auto)
        if question is None:
            break
        qid = state.pending_id()
        emit(
            {
                "event": "question_posed",
                "question_id": qid,
                "premise": attrs_sorted(question.premise),
                "conclusion": attrs_sorted(question.conclusion),
            }
        )
        answer = strategy.answer(
            question,
            experts,
            interaction,
            question_key=qid,
            on_event=on_event,
        )
        emit(
            {
                "event": "answer_merged",
                "question_id": qid,
                "answer": answer_to_json(answer, state.attributes),
            }
        )
        state.apply_answer(question, answer, source=strategy.kind)
    emit({"event": "finished"})
    return state.result()


def result_to_json(result: ExplorationResult) -> dict[str, Any]:
    from . import cxt

    order = result.attributes
    return {
        "attributes": list(order),
        "accepted": [implication_to_json(i, order) for i in result.accepted],
        "real_counterexamples": cxt.to_json(result.real_counterexamples),
        "fictitious_counterexamples": cxt.to_json(result.fictitious_counterexamples),
        "possibly_valid": [implication_to_json(i, order) for i in result.possibly_valid],
        "history": [
            {
                "question_id": h.question_id,
                "premise": [a for a in order if a in h.question.premise],
                "conclusion": [a for a in order if a in h.question.conclusion],
                "answer": answer_to_json(h.answer, order),
                "source": h.source,
            }
            for h in result.history
        ],
    }
