"""Attribute implications: model semantics, closure, validity in incomplete contexts.

An implication "A -> B" states that every object carrying all of A also
carries all of B.  In an incomplete context it is certainly valid when it
holds in every completion and satisfiable when it holds in at least one;
both are decided row-wise without enumerating completions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Sequence

from .context import IncompleteContext, completions
from .errors import CapacityError, IncompatibleError, ParseError


@dataclass(frozen=True)
class Implication:
    premise: frozenset[str]
    conclusion: frozenset[str]

    def __init__(self, premise: Iterable[str], conclusion: Iterable[str]):
        object.__setattr__(self, "premise", frozenset(premise))
        object.__setattr__(self, "conclusion", frozenset(conclusion))

    def residual(self) -> frozenset[str]:
        """Normalized view of the conclusion: conclusion \\ premise."""
        return self.conclusion - self.premise

    def canonical_key(self) -> tuple[frozenset[str], frozenset[str]]:
        return (self.premise, self.residual())

    def names(self) -> frozenset[str]:
        return self.premise | self.conclusion

    def __repr__(self):
        return f"Implication({sorted(self.premise)} -> {sorted(self.conclusion)})"


@dataclass(frozen=True)
class Theory:
    """An ordered, duplicate-free list of implications over one attribute universe."""

    attributes: tuple[str, ...]
    implications: tuple[Implication, ...] = ()

    def __post_init__(self):
        universe = set(self.attributes)
        seen = set()
        kept = []
        for imp in self.implications:
            if not imp.names() <= universe:
                raise IncompatibleError(
                    f"implication uses attributes outside the universe: {sorted(imp.names() - universe)}"
                )
            key = imp.canonical_key()
            if key not in seen:
                seen.add(key)
                kept.append(imp)
        object.__setattr__(self, "implications", tuple(kept))

    def add(self, imp: Implication) -> "Theory":
        return Theory(self.attributes, self.implications + (imp,))

    def extend(self, imps: Iterable[Implication]) -> "Theory":
        return Theory(self.attributes, self.implications + tuple(imps))

    def __iter__(self) -> Iterator[Implication]:
        return iter(self.implications)

    def __len__(self) -> int:
        return len(self.implications)

    def __contains__(self, imp: Implication) -> bool:
        return imp.canonical_key() in {i.canonical_key() for i in self.implications}

    def sorted_names(self, names: Iterable[str]) -> list[str]:
        order = {a: i for i, a in enumerate(self.attributes)}
        return sorted(names, key=order.__getitem__)


def _masks(attributes: Sequence[str], imp: Implication) -> tuple[int, int]:
    index = {a: i for i, a in enumerate(attributes)}
    try:
        p = c = 0
        for a in imp.premise:
            p |= 1 << index[a]
        for a in imp.conclusion:
            c |= 1 << index[a]
    except KeyError as exc:
        raise IncompatibleError(f"attribute not in universe: {exc.args[0]!r}") from None
    return p, c


def respects(candidate: Iterable[str], imp: Implication) -> bool:
    """True iff the candidate set is a model of the implication."""
    cand = frozenset(candidate)
    return not imp.premise <= cand or imp.conclusion <= cand


def closure_mask(pairs: Sequence[tuple[int, int]], seed: int) -> int:
    """Fixed-point forward chaining over (premise, conclusion) mask pairs."""
    out = seed
    changed = True
    while changed:
        changed = False
        for p, c in pairs:
            if out & p == p and out | c != out:
                out |= c
                changed = True
    return out


def compile_theory(theory: Theory) -> list[tuple[int, int]]:
    index = {a: i for i, a in enumerate(theory.attributes)}
    pairs = []
    for imp in theory:
        p = c = 0
        for a in imp.premise:
            p |= 1 << index[a]
        for a in imp.conclusion:
            c |= 1 << index[a]
        pairs.append((p, c))
    return pairs


def closure(theory: Theory, seed: Iterable[str]) -> frozenset[str]:
    """Smallest superset of the seed that respects every implication."""
    index = {a: i for i, a in enumerate(theory.attributes)}
    m = 0
    for a in seed:
        if a not in index:
            raise IncompatibleError(f"attribute not in universe: {a!r}")
        m |= 1 << index[a]
    out = closure_mask(compile_theory(theory), m)
    return frozenset(a for a, i in index.items() if out >> i & 1)


def cons_member(theory: Theory, imp: Implication) -> bool:
    """Armstrong derivability, decided via the premise closure."""
    return imp.conclusion <= closure(theory, imp.premise)


def certainly_valid(ctx: IncompleteContext, imp: Implication) -> bool:
    """Valid in every completion: rows that possibly carry the premise must
    certainly carry the residual conclusion."""
    p, c = _masks(ctx.attributes, imp)
    residual = c & ~p
    for crosses, blanks in zip(ctx.crosses, ctx.blanks):
        if p & blanks == 0 and residual & ~crosses:
            return False
    return True


def satisfiable(ctx: IncompleteContext, imp: Implication) -> bool:
    """Valid in at least one completion: rows that certainly carry the
    premise must not refute any conclusion attribute."""
    p, c = _masks(ctx.attributes, imp)
    for crosses, blanks in zip(ctx.crosses, ctx.blanks):
        if crosses & p == p and c & blanks:
            return False
    return True


def max_satisfiable_conclusion(ctx: IncompleteContext, premise: Iterable[str]) -> frozenset[str]:
    """The largest B with premise -> B satisfiable (possible intent of the certain extent)."""
    return ctx.attrs_from_mask(ctx.sat_conclusion_mask(ctx.attr_mask(premise)))


def kripke_oracle(ctx: IncompleteContext, imp: Implication, mode: str, bound: int = 20) -> bool:
    """Brute-force ground truth over all completions (test facility)."""
    if mode not in ("certain", "satisfiable"):
        raise ValueError(f"mode must be 'certain' or 'satisfiable', got {mode!r}")
    p, c = _masks(ctx.attributes, imp)
    for comp in completions(ctx, bound=bound):
        valid = all(row & p != p or row & c == c for row in comp.crosses)
        if mode == "certain" and not valid:
            return False
        if mode == "satisfiable" and valid:
            return True
    return mode == "certain"


def imp_enumerate(ctx: IncompleteContext, max_attributes: int = 12) -> Theory:
    """A generating set of all certainly valid implications of the context.

    Emits A -> (certain conclusion of A) \\ A for every premise A; the
    Armstrong closure of the result equals the full set of certainly valid
    implications.  Small-instance oracle only.
    """
    n = len(ctx.attributes)
    if n > max_attributes:
        raise CapacityError(f"{n} attributes exceed the enumeration bound {max_attributes}")
    imps = []
    for amask in range(1 << n):
        concl = ctx.certain_conclusion_mask(amask) & ~amask
        if concl:
            imps.append(Implication(ctx.attrs_from_mask(amask), ctx.attrs_from_mask(concl)))
    return Theory(ctx.attributes, tuple(imps))


def cons_equal(a: Theory, b: Theory) -> bool:
    """Mutual Armstrong derivability of two implication lists."""
    return all(cons_member(b, imp) for imp in a) and all(cons_member(a, imp) for imp in b)


# ---------------------------------------------------------------------------
# serialization


def _quote(name: str) -> str:
    if '"' in name:
        raise ValueError(f"attribute name with a double quote is not serializable: {name!r}")
    return f'"{name}"' if (" " in name or not name) else name


def implication_to_text(imp: Implication, order: Sequence[str]) -> str:
    rank = {a: i for i, a in enumerate(order)}
    left = " ".join(_quote(a) for a in sorted(imp.premise, key=rank.__getitem__))
    right = " ".join(_quote(a) for a in sorted(imp.conclusion, key=rank.__getitem__))
    return f"{left} -> {right}".strip()


def _tokenize(line: str) -> list[str]:
    tokens, i = [], 0
    while i < len(line):
        ch = line[i]
        if ch.isspace():
            i += 1
        elif ch == '"':
            end = line.find('"', i + 1)
            if end < 0:
                raise ParseError("unterminated quote")
            tokens.append(line[i + 1 : end])
            i = end + 1
        else:
            j = i
            while j < len(line) and not line[j].isspace():
                j += 1
            tokens.append(line[i:j])
            i = j
    return tokens


def implication_from_text(line: str) -> Implication:
    tokens = _tokenize(line)
    if tokens.count("->") != 1:
        raise ParseError(f"expected exactly one '->' in {line!r}")
    split = tokens.index("->")
    return Implication(tokens[:split], tokens[split + 1 :])


def theory_to_text(theory: Theory) -> str:
    return "".join(implication_to_text(imp, theory.attributes) + "\n" for imp in theory)


def theory_from_text(text: str, attributes: Sequence[str]) -> Theory:
    imps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            imps.append(implication_from_text(line))
        except ParseError as exc:
            raise ParseError(str(exc), line=lineno) from None
    return Theory(tuple(attributes), tuple(imps))


def implication_to_json(imp: Implication, order: Sequence[str]) -> dict[str, Any]:
    rank = {a: i for i, a in enumerate(order)}
    return {
        "premise": sorted(imp.premise, key=rank.__getitem__),
        "conclusion": sorted(imp.conclusion, key=rank.__getitem__),
    }


def implication_from_json(doc: dict[str, Any]) -> Implication:
    try:
        return Implication(doc["premise"], doc["conclusion"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"implication JSON missing field: {exc}") from None
