"""Exploration engine: lectic question generation, answer handling, the golden run.

The Olympic run uses the session attribute order that makes the lectic
enumeration reproduce the documented eight-question transcript: female-only
first (most significant), then the event counts, male-only, games-count.
"""

import random

import pytest

from coex import cxt
from coex.context import IncompleteContext, info_leq, restrict, select_attributes
from coex.engine import (
    ExplorationState,
    fictitious_name,
    lectic_less,
    new_session,
    next_closed_mask,
    run,
)
from coex.errors import (
    ConflictError,
    InvalidCounterexampleError,
    ProtocolError,
    StateError,
    ValidationError,
)
from coex.expert import Accept, Reject, Unknown, ei_standard, group_join, load_expert
from coex.implications import (
    Implication,
    Theory,
    certainly_valid,
    cons_equal,
    cons_member,
    imp_enumerate,
)
from coex.strategies import StrategyConfig, build_strategy

from conftest import DATA, random_context, weaken

FIVE = (
    "≥ 5 events",
    "≥ 10 events",
    "female only events",
    "male only events",
    "part of ≥ 8 olympics",
)
F5, F10, FEM, MALE, OLY8 = FIVE
GOLDEN_ORDER = (FEM, F5, F10, MALE, OLY8)


@pytest.fixture(scope="module")
def universe():
    ctx, _ = cxt.loads((DATA / "universe.cxt").read_text(encoding="utf-8"))
    return ctx


@pytest.fixture(scope="module")
def experts():
    return [
        load_expert(DATA / "expert_tradition.json"),
        load_expert(DATA / "expert_watersport.json"),
        load_expert(DATA / "expert_combat.json"),
    ]


def omniscient(universe, name="oracle"):
    return_theory = imp_enumerate(universe)
    from coex.expert import ExpertKnowledge

    return ExpertKnowledge(name, universe, return_theory)


class TestLecticEnumeration:
    def test_all_subsets_in_lectic_order(self):
        got = []
        mask = 0  # closure of the empty set under the identity operator
        while mask is not None:
            got.append(mask)
            mask = next_closed_mask(mask, lambda m: m, 3)
        # index 0 is most significant: {}, {2}, {1}, {1,2}, {0}, {0,2}, {0,1}, {0,1,2}
        assert got == [0b000, 0b100, 0b010, 0b110, 0b001, 0b101, 0b011, 0b111]
        assert all(lectic_less(a, b) for a, b in zip(got, got[1:]))

    def test_respects_closure_operator(self):
        # closure forcing attribute 2 whenever 0 is present
        def close(m):
            return m | 0b100 if m & 0b001 else m

        got = []
        mask = close(0)
        while mask is not None:
            got.append(mask)
            mask = next_closed_mask(mask, close, 3)
        assert got == [0b000, 0b100, 0b010, 0b110, 0b101, 0b111]
        assert all(close(m) == m for m in got)


class TestSessionBasics:
    def test_zero_attributes_rejected(self):
        with pytest.raises(ValidationError):
            new_session([])

    def test_duplicate_attributes_rejected(self):
        with pytest.raises(ValidationError):
            new_session(["a", "a"])

    def test_first_question_has_empty_premise(self):
        state = new_session(GOLDEN_ORDER)
        q = state.next_question()
        assert q.premise == frozenset()
        assert q.conclusion == set(FIVE)

    def test_seeded_with_complete_knowledge_is_immediately_finished(self, universe):
        state = new_session(
            universe.attributes, seed_examples=universe, seed_theory=imp_enumerate(universe)
        )
        assert state.next_question() is None
        assert state.finished

    def test_next_question_on_finished_state(self):
        state = new_session(["a"])
        state.next_question()
        state.apply_answer(Implication(set(), {"a"}), Unknown({"a"}))
        assert state.next_question() is None
        with pytest.raises(StateError):
            state.next_question()


class TestApplyAnswer:
    def make_state(self):
        state = new_session(("a", "b", "c"))
        q = state.next_question()
        assert q == Implication(set(), {"a", "b", "c"})
        return state, q

    def test_accept_adds_to_theory(self):
        state, q = self.make_state()
        state.apply_answer(q, Accept())
        assert q in state.accepted
        assert state.history[-1].source == "expert"

    def test_reject_requires_contradicting_rows(self):
        state, q = self.make_state()
        bad = IncompleteContext.from_rows(["g"], ("a", "b", "c"), ["XXX"])
        with pytest.raises(InvalidCounterexampleError):
            state.apply_answer(q, Reject(bad))

    def test_reject_premise_cell_must_be_cross(self):
        state = new_session(("a", "b", "c"))
        q0 = state.next_question()
        state.apply_answer(q0, Unknown(q0.conclusion))  # everything stays open
        # drive to premise {c}: the next closed set after the empty one
        q = state.next_question()
        assert q.premise == {"c"}
        row = IncompleteContext.from_rows(["g"], ("a", "b", "c"), ["?.?"])
        with pytest.raises(InvalidCounterexampleError, match="premise"):
            state.apply_answer(q, Reject(row))

    def test_reject_conflict_leaves_state_unchanged(self):
        state, q = self.make_state()
        ok = IncompleteContext.from_rows(["g"], ("a", "b", "c"), ["X.."])
        state.apply_answer(q, Reject(ok))
        q2 = state.next_question()
        clash = IncompleteContext.from_rows(["g"], ("a", "b", "c"), [".X."])
        before = state.examples
        with pytest.raises(ConflictError):
            state.apply_answer(q2, Reject(clash))
        assert state.examples == before
        assert state.pending is not None

    def test_unknown_residual_must_be_inside_conclusion(self):
        state, q = self.make_state()
        with pytest.raises(ProtocolError):
            state.apply_answer(q, Unknown({"z"} | q.conclusion))

    def test_stale_question(self):
        state, q = self.make_state()
        with pytest.raises(StateError):
            state.apply_answer(Implication({"a"}, {"b"}), Accept())

    def test_fictitious_rows_structure(self):
        state, q = self.make_state()
        state.apply_answer(q, Unknown({"b", "c"}))
        # known part a stays: the empty premise now certainly implies a
        assert Implication(set(), {"a"}) in state.accepted
        fict = state.fictitious_examples()
        assert set(fict.objects) == {
            fictitious_name(set(), "b", ("a", "b", "c")),
            fictitious_name(set(), "c", ("a", "b", "c")),
        }
        for entry in state.fictitious:
            row = fict.row_string(entry.name)
            for i, attr in enumerate(("a", "b", "c")):
                if attr in entry.premise:
                    assert row[i] == "X"
                elif attr == entry.refuted:
                    assert row[i] == "."
                else:
                    assert row[i] == "?"


OLYMPIC_TRANSCRIPT = [
    # (premise, conclusion, answer kind, source, detail)
    ("q1", frozenset(), set(FIVE), "reject", 1),
    ("q2", frozenset(), {OLY8}, "reject", 2),
    ("q3", frozenset({F10}), {F5, FEM, MALE, OLY8}, "unknown", 3),
    ("q4", frozenset({F10}), {F5, OLY8}, "derived", 0),
    ("q5", frozenset({F5}), {MALE, OLY8}, "reject", 3),
    ("q6", frozenset({F5}), {MALE}, "accept", 2),
    ("q7", frozenset({F5, F10, MALE, OLY8}), {FEM}, "unknown", 3),
    ("q8", frozenset({FEM}), {MALE}, "reject", 2),
]

RESULT_ROWS = {
    "Aquatics – Artistic Swimming": "..X.X",
    "Aquatics – Diving": "X.XXX",
    "Aquatics – Marathon Swimming": "..XX.",
    "Aquatics – Water Polo": "..XXX",
    "Cycling – Road": "..XXX",
    "Equestrian – Dressage": "....X",
    "Equestrian – Eventing": "....X",
    "Equestrian – Jumping": "....X",
    "Football": "..XXX",
    "Hockey": "..XXX",
    "Karate – Kumite": "X.XX.",
    "Modern Pentathlon": "..XXX",
    "Surfing": "..XX.",
    "Taekwondo": "X.XX.",
    "Triathlon": "..XX.",
    "Wrestling – Greco Roman": "X..XX",
}

FICTITIOUS_ROWS = {"XX.XX", "?X.??", "?X?.?"}


def run_olympics(experts, kind="iterative", **config):
    state = new_session(GOLDEN_ORDER)
    strategy = build_strategy(
        StrategyConfig(kind=kind, expert_order=("E1", "E2", "E3"), **config)
        if kind == "iterative"
        else StrategyConfig(kind=kind, **config)
    )
    result = run(state, strategy, experts)
    return state, strategy, result


class TestOlympicGoldenRun:
    def test_transcript(self, experts):
        state, strategy, result = run_olympics(experts)
        assert len(result.history) == len(OLYMPIC_TRANSCRIPT)
        for entry, (qid, premise, conclusion, kind, asks) in zip(
            result.history, OLYMPIC_TRANSCRIPT
        ):
            assert entry.question_id == qid
            assert entry.question.premise == premise
            assert entry.question.conclusion == conclusion
            if kind == "derived":
                assert entry.source == "derived"
                assert isinstance(entry.answer, Accept)
            else:
                assert entry.source == "iterative"
                kinds = {"accept": Accept, "reject": Reject, "unknown": Unknown}
                assert isinstance(entry.answer, kinds[kind])
            assert strategy.ledger.per_question.get(qid, 0) == asks

    def test_accepted_theory_exact(self, experts):
        _, _, result = run_olympics(experts)
        expected = [
            Implication({F10}, {F5, OLY8}),
            Implication({F5}, {MALE}),
        ]
        assert [i.canonical_key() for i in result.accepted] == [
            i.canonical_key() for i in expected
        ]

    def test_result_context_exact(self, experts):
        _, _, result = run_olympics(experts)
        real = select_attributes(result.real_counterexamples, FIVE)
        assert {o: real.row_string(o) for o in real.objects} == RESULT_ROWS
        fict = select_attributes(result.fictitious_counterexamples, FIVE)
        assert len(fict.objects) == 3
        assert {fict.row_string(o) for o in fict.objects} == FICTITIOUS_ROWS

    def test_unknown_answers_add_the_documented_rows(self, experts):
        # after q3 the refusals for female/male-only are on file, after q7 the
        # fully-determined fictitious row appears
        state, _, result = run_olympics(experts)
        names = {e.name: e for e in state.fictitious}
        assert fictitious_name({F10}, FEM, GOLDEN_ORDER) in names
        assert fictitious_name({F10}, MALE, GOLDEN_ORDER) in names
        assert fictitious_name({F5, F10, MALE, OLY8}, FEM, GOLDEN_ORDER) in names

    def test_possibly_valid(self, experts):
        _, _, result = run_olympics(experts)
        accepted = {i.canonical_key() for i in result.accepted}
        possible = {i.canonical_key() for i in result.possibly_valid}
        assert accepted <= possible
        extras = possible - accepted
        assert extras == {
            Implication({F10}, {FEM}).canonical_key(),
            Implication({F10}, {MALE}).canonical_key(),
            Implication({F5, F10, MALE, OLY8}, {FEM}).canonical_key(),
        }

    def test_ledger_totals(self, experts):
        _, strategy, _ = run_olympics(experts)
        ledger = strategy.ledger
        assert ledger.total == 16
        assert ledger.consistent()
        assert ledger.per_expert == {"E1": 7, "E2": 6, "E3": 3}

    def test_soundness_against_universe(self, universe, experts):
        _, _, result = run_olympics(experts)
        uni = select_attributes(universe, GOLDEN_ORDER)
        for imp in result.accepted:
            assert certainly_valid(uni, imp)
        real = result.real_counterexamples
        assert info_leq(real, uni)


class TestEngineProperties:
    def test_monotone_state_and_termination(self, universe, experts):
        state = new_session(GOLDEN_ORDER)
        strategy = build_strategy(StrategyConfig("iterative", expert_order=("E1", "E2", "E3")))
        seen = 0
        prev_examples = state.examples
        prev_count = 0
        while True:
            q = state.next_question()
            if q is None:
                break
            seen += 1
            assert seen < 200  # termination guard
            answer = strategy.answer(q, experts, ei_standard, question_key=f"q{seen}")
            state.apply_answer(q, answer)
            assert info_leq(prev_examples, state.examples)
            assert len(state.accepted) >= prev_count
            prev_examples, prev_count = state.examples, len(state.accepted)

    def test_omniscient_expert_reaches_full_theory(self):
        rng = random.Random(61)
        for _ in range(25):
            uni = random_context(rng, 4, 4, p_unknown=0)
            expert = omniscient(uni)
            state = new_session(uni.attributes)
            strategy = build_strategy(StrategyConfig("single"))
            result = run(state, strategy, [expert])
            assert cons_equal(result.accepted, imp_enumerate(uni))

    def test_partial_experts_stay_sound(self):
        rng = random.Random(67)
        for _ in range(20):
            uni = random_context(rng, 4, 4, p_unknown=0)
            full = imp_enumerate(uni)
            from coex.expert import ExpertKnowledge

            picks = [imp for imp in full if rng.random() < 0.5]
            expert = ExpertKnowledge(
                "partial", weaken(rng, uni), Theory(uni.attributes, tuple(picks))
            )
            state = new_session(uni.attributes)
            result = run(state, build_strategy(StrategyConfig("single")), [expert])
            for imp in result.accepted:
                assert certainly_valid(uni, imp)
            assert info_leq(result.real_counterexamples, uni)
            for imp in result.possibly_valid:
                assert cons_member(result.accepted, imp) or any(
                    imp.canonical_key() == Implication(e.premise, {e.refuted}).canonical_key()
                    for e in state.fictitious
                )

    def test_ignorant_strategy_accepts_nothing(self):
        state = new_session(("a", "b", "c"))
        result = run(state, build_strategy(StrategyConfig("ignorant")), [])
        assert len(result.accepted) == 0
        assert state.finished
