"""Three-valued contexts: cells, derivation operators, information orders.

A context cell is either a cross (the object is known to have the
attribute), a blank (known not to have it) or unknown.  Contexts are
immutable; every operation returns a fresh value.  Rows are stored as a
pair of bitmasks (crosses, blanks) over the attribute index, which keeps
the derivation operators and lattice operations cheap.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

from .errors import CapacityError, ConflictError, IncompatibleError, NameResolutionError


class Cell(enum.Enum):
    """One table entry of a three-valued context."""

    CROSS = "X"
    BLANK = "."
    UNKNOWN = "?"

    @property
    def char(self) -> str:
        return self.value

    def info_leq(self, other: "Cell") -> bool:
        """Information order: unknown below both determined values."""
        return self is other or self is Cell.UNKNOWN

    def trueness_rank(self) -> int:
        """Total trueness order: blank < unknown < cross."""
        return {Cell.BLANK: 0, Cell.UNKNOWN: 1, Cell.CROSS: 2}[self]

    def meet(self, other: "Cell") -> "Cell":
        return self if self is other else Cell.UNKNOWN

    def join(self, other: "Cell") -> "Cell":
        """Supremum in the information order; conflicting values have none."""
        if self is other or other is Cell.UNKNOWN:
            return self
        if self is Cell.UNKNOWN:
            return other
        raise ConflictError("cross and blank have no common upper bound")


_CHAR_TO_CELL = {c.value: c for c in Cell}


def _check_unique(names: Sequence[str], kind: str) -> None:
    if len(set(names)) != len(names):
        seen = set()
        dup = next(n for n in names if n in seen or seen.add(n))
        raise ValueError(f"duplicate {kind} name: {dup!r}")


@dataclass(frozen=True)
class IncompleteContext:
    """Named objects x named attributes with cells in {cross, blank, unknown}.

    ``crosses[i]`` / ``blanks[i]`` are bitmasks over attribute indexes for
    the i-th object; a bit set in neither means the cell is unknown.
    """

    objects: tuple[str, ...]
    attributes: tuple[str, ...]
    crosses: tuple[int, ...]
    blanks: tuple[int, ...]

    def __post_init__(self):
        _check_unique(self.objects, "object")
        _check_unique(self.attributes, "attribute")
        if len(self.crosses) != len(self.objects) or len(self.blanks) != len(self.objects):
            raise ValueError("cell matrix does not match the object list")
        full = self.full_mask
        for name, c, b in zip(self.objects, self.crosses, self.blanks):
            if c & b:
                raise ValueError(f"row {name!r} marks a cell as both cross and blank")
            if (c | b) & ~full:
                raise ValueError(f"row {name!r} has cells outside the attribute list")

    # -- construction -------------------------------------------------

    @classmethod
    def from_rows(
        cls,
        objects: Sequence[str],
        attributes: Sequence[str],
        rows: Sequence[str | Sequence[Cell]],
    ) -> "IncompleteContext":
        """Build a context from per-object rows of cells or 'X.?' strings."""
        crosses, blanks = [], []
        for obj, row in zip(objects, rows):
            if len(row) != len(attributes):
                raise ValueError(f"row {obj!r} has {len(row)} cells, expected {len(attributes)}")
            c = b = 0
            for i, cell in enumerate(row):
                if isinstance(cell, str):
                    try:
                        cell = _CHAR_TO_CELL[cell]
                    except KeyError:
                        raise ValueError(f"row {obj!r}: invalid cell character {cell!r}") from None
                if cell is Cell.CROSS:
                    c |= 1 << i
                elif cell is Cell.BLANK:
                    b |= 1 << i
            crosses.append(c)
            blanks.append(b)
        if len(rows) != len(objects):
            raise ValueError("row count does not match object count")
        return cls(tuple(objects), tuple(attributes), tuple(crosses), tuple(blanks))

    @classmethod
    def empty(cls, attributes: Sequence[str]) -> "IncompleteContext":
        """The zero-object context over the given attributes."""
        return cls((), tuple(attributes), (), ())

    # -- indexed access ------------------------------------------------

    @cached_property
    def _obj_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.objects)}

    @cached_property
    def _attr_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.attributes)}

    @property
    def full_mask(self) -> int:
        return (1 << len(self.attributes)) - 1

    def object_index(self, name: str) -> int:
        try:
            return self._obj_index[name]
        except KeyError:
            raise NameResolutionError(f"unknown object: {name!r}") from None

    def attribute_index(self, name: str) -> int:
        try:
            return self._attr_index[name]
        except KeyError:
            raise NameResolutionError(f"unknown attribute: {name!r}") from None

    def attr_mask(self, names: Iterable[str]) -> int:
        m = 0
        for name in names:
            m |= 1 << self.attribute_index(name)
        return m

    def attrs_from_mask(self, mask: int) -> frozenset[str]:
        return frozenset(a for i, a in enumerate(self.attributes) if mask >> i & 1)

    def cell(self, obj: str, attr: str) -> Cell:
        i, j = self.object_index(obj), self.attribute_index(attr)
        if self.crosses[i] >> j & 1:
            return Cell.CROSS
        if self.blanks[i] >> j & 1:
            return Cell.BLANK
        return Cell.UNKNOWN

    def row_string(self, obj: str) -> str:
        i = self.object_index(obj)
        c, b = self.crosses[i], self.blanks[i]
        return "".join(
            "X" if c >> j & 1 else "." if b >> j & 1 else "?" for j in range(len(self.attributes))
        )

    def unknown_count(self) -> int:
        full = self.full_mask
        return sum((full & ~(c | b)).bit_count() for c, b in zip(self.crosses, self.blanks))

    def is_complete(self) -> bool:
        return self.unknown_count() == 0

    # -- mask-level derivation (used heavily by the exploration engine) --

    def certain_extent_mask(self, amask: int) -> int:
        out = 0
        for i, c in enumerate(self.crosses):
            if c & amask == amask:
                out |= 1 << i
        return out

    def possible_extent_mask(self, amask: int) -> int:
        out = 0
        for i, b in enumerate(self.blanks):
            if b & amask == 0:
                out |= 1 << i
        return out

    def certain_intent_mask(self, omask: int) -> int:
        out = self.full_mask
        for i, c in enumerate(self.crosses):
            if omask >> i & 1:
                out &= c
        return out

    def possible_intent_mask(self, omask: int) -> int:
        out = self.full_mask
        for i, b in enumerate(self.blanks):
            if omask >> i & 1:
                out &= ~b
        return out & self.full_mask

    def sat_conclusion_mask(self, amask: int) -> int:
        """Largest conclusion satisfiable with the given premise (box-diamond)."""
        return self.possible_intent_mask(self.certain_extent_mask(amask))

    def certain_conclusion_mask(self, amask: int) -> int:
        """Largest conclusion certainly following from the premise (diamond-box)."""
        return self.certain_intent_mask(self.possible_extent_mask(amask))


class FormalContext(IncompleteContext):
    """A complete context: every cell is determined."""

    def __post_init__(self):
        super().__post_init__()
        if not self.is_complete():
            raise ValueError("formal context must not contain unknown cells")


def as_formal(ctx: IncompleteContext) -> FormalContext:
    if isinstance(ctx, FormalContext):
        return ctx
    return FormalContext(ctx.objects, ctx.attributes, ctx.crosses, ctx.blanks)


def as_incomplete(ctx: IncompleteContext) -> IncompleteContext:
    """Drop the completeness guarantee (plain value copy)."""
    return IncompleteContext(ctx.objects, ctx.attributes, ctx.crosses, ctx.blanks)


# ---------------------------------------------------------------------------
# operations


def derive(
    ctx: IncompleteContext,
    side: str,
    subset: Iterable[str],
    mode: str,
) -> frozenset[str]:
    """Certain/possible derivation: intent of an object set or extent of an attribute set.

    ``side`` names what the subset consists of (``"objects"`` or
    ``"attributes"``); the result lies on the opposite side.
    """
    if mode not in ("certain", "possible"):
        raise ValueError(f"mode must be 'certain' or 'possible', got {mode!r}")
    if side == "objects":
        omask = 0
        for name in subset:
            omask |= 1 << ctx.object_index(name)
        amask = ctx.certain_intent_mask(omask) if mode == "certain" else ctx.possible_intent_mask(omask)
        return ctx.attrs_from_mask(amask)
    if side == "attributes":
        amask = ctx.attr_mask(subset)
        omask = ctx.certain_extent_mask(amask) if mode == "certain" else ctx.possible_extent_mask(amask)
        return frozenset(o for i, o in enumerate(ctx.objects) if omask >> i & 1)
    raise ValueError(f"side must be 'objects' or 'attributes', got {side!r}")


def restrict(ctx: IncompleteContext, objs: Iterable[str]) -> IncompleteContext:
    """Restrict to a subset of objects, keeping the context's object order."""
    wanted = set(objs)
    for name in wanted:
        ctx.object_index(name)
    keep = [i for i, o in enumerate(ctx.objects) if o in wanted]
    return IncompleteContext(
        tuple(ctx.objects[i] for i in keep),
        ctx.attributes,
        tuple(ctx.crosses[i] for i in keep),
        tuple(ctx.blanks[i] for i in keep),
    )


def select_attributes(ctx: IncompleteContext, attributes: Sequence[str]) -> IncompleteContext:
    """Project/reorder columns to the given attribute sequence.

    Cross-context operations require identical attribute sequences; this is
    the explicit reorder step.
    """
    _check_unique(attributes, "attribute")
    idx = [ctx.attribute_index(a) for a in attributes]
    crosses, blanks = [], []
    for c, b in zip(ctx.crosses, ctx.blanks):
        nc = nb = 0
        for j, i in enumerate(idx):
            nc |= (c >> i & 1) << j
            nb |= (b >> i & 1) << j
        crosses.append(nc)
        blanks.append(nb)
    return IncompleteContext(ctx.objects, tuple(attributes), tuple(crosses), tuple(blanks))


def _require_same_attributes(a: IncompleteContext, b: IncompleteContext) -> None:
    if a.attributes != b.attributes:
        raise IncompatibleError(
            f"attribute lists differ: {list(a.attributes)} vs {list(b.attributes)}"
        )


def info_leq(a: IncompleteContext, b: IncompleteContext) -> bool:
    """Generalized information order: b knows at least everything a knows."""
    _require_same_attributes(a, b)
    for i, name in enumerate(a.objects):
        j = b._obj_index.get(name)
        if j is None:
            return False
        if a.crosses[i] & ~b.crosses[j] or a.blanks[i] & ~b.blanks[j]:
            return False
    return True


def conflicts(a: IncompleteContext, b: IncompleteContext) -> frozenset[tuple[str, str]]:
    """(object, attribute) pairs where one context has a cross and the other a blank."""
    _require_same_attributes(a, b)
    out = []
    for i, name in enumerate(a.objects):
        j = b._obj_index.get(name)
        if j is None:
            continue
        clash = (a.crosses[i] & b.blanks[j]) | (a.blanks[i] & b.crosses[j])
        while clash:
            bit = clash & -clash
            out.append((name, a.attributes[bit.bit_length() - 1]))
            clash &= clash - 1
    return frozenset(out)


def meet(a: IncompleteContext, b: IncompleteContext) -> IncompleteContext:
    """Generalized information infimum: shared objects, cell-wise agreement."""
    _require_same_attributes(a, b)
    objects, crosses, blanks = [], [], []
    for i, name in enumerate(a.objects):
        j = b._obj_index.get(name)
        if j is None:
            continue
        objects.append(name)
        crosses.append(a.crosses[i] & b.crosses[j])
        blanks.append(a.blanks[i] & b.blanks[j])
    return IncompleteContext(tuple(objects), a.attributes, tuple(crosses), tuple(blanks))


def join(a: IncompleteContext, b: IncompleteContext) -> IncompleteContext:
    """Generalized information supremum; raises ConflictError on contradictions.

    Object order: a's objects first, then b's unseen objects in b's order.
    """
    _require_same_attributes(a, b)
    clash = conflicts(a, b)
    if clash:
        raise ConflictError(f"contexts conflict on {sorted(clash)}", clash)
    objects, crosses, blanks = list(a.objects), list(a.crosses), list(a.blanks)
    index = {name: i for i, name in enumerate(objects)}
    for j, name in enumerate(b.objects):
        i = index.get(name)
        if i is None:
            objects.append(name)
            crosses.append(b.crosses[j])
            blanks.append(b.blanks[j])
        else:
            crosses[i] |= b.crosses[j]
            blanks[i] |= b.blanks[j]
    return IncompleteContext(tuple(objects), a.attributes, tuple(crosses), tuple(blanks))


def completions(ctx: IncompleteContext, bound: int = 20) -> Iterator[FormalContext]:
    """Enumerate every completion of the context (test/oracle facility).

    Unknown cells are indexed row-major; completion k resolves cell i to a
    cross iff bit i of k is set, so the order is deterministic.
    """
    full = ctx.full_mask
    holes = [
        (i, j)
        for i in range(len(ctx.objects))
        for j in range(len(ctx.attributes))
        if (full & ~(ctx.crosses[i] | ctx.blanks[i])) >> j & 1
    ]
    if len(holes) > bound:
        raise CapacityError(f"{len(holes)} unknown cells exceed the completion bound {bound}")
    for k in range(1 << len(holes)):
        crosses, blanks = list(ctx.crosses), list(ctx.blanks)
        for bit, (i, j) in enumerate(holes):
            if k >> bit & 1:
                crosses[i] |= 1 << j
            else:
                blanks[i] |= 1 << j
        yield FormalContext(ctx.objects, ctx.attributes, tuple(crosses), tuple(blanks))
