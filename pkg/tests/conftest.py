"""Shared fixtures: the running Olympic-disciplines examples and data paths."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from coex.context import IncompleteContext

DATA = Path(__file__).resolve().parent.parent / "data" / "olympics2020"

ABCDE = ("a", "b", "c", "d", "e")


@pytest.fixture
def fig2():
    """The four-discipline incomplete context used throughout the examples:
    a ~ at least 10 events, b ~ at least 5, c/d ~ female/male only, e ~ long part of the games."""
    return IncompleteContext.from_rows(
        ["Aquatics – Swimming", "Badminton", "Gymnastics – Rhythmic", "Taekwondo"],
        ABCDE,
        ["XXXXX", ".XXXX", "..X.X", "??XX?"],
    )


def taekwondo_row(cells: str) -> IncompleteContext:
    return IncompleteContext.from_rows(["Taekwondo"], ABCDE, [cells])


@pytest.fixture
def k1():
    return taekwondo_row("??X??")


@pytest.fixture
def k2():
    return taekwondo_row("??XX?")


@pytest.fixture
def k3():
    return taekwondo_row(".XX??")


@pytest.fixture
def k4():
    return taekwondo_row(".XXX?")


def random_context(rng: random.Random, objects: int, attributes: int, p_unknown=1 / 3):
    names = [f"g{i}" for i in range(objects)]
    attrs = [f"m{j}" for j in range(attributes)]
    rows = [
        "".join(rng.choices("X.?", weights=[(1 - p_unknown) / 2, (1 - p_unknown) / 2, p_unknown])[0]
                for _ in attrs)
        for _ in names
    ]
    return IncompleteContext.from_rows(names, attrs, rows)


def weaken(rng: random.Random, ctx: IncompleteContext, p_drop=0.4, p_keep_row=0.8):
    """A random context derived from ctx: drop rows, blur cells to unknown."""
    keep = [o for o in ctx.objects if rng.random() < p_keep_row]
    rows = []
    for o in keep:
        row = ctx.row_string(o)
        rows.append("".join("?" if rng.random() < p_drop else ch for ch in row))
    return IncompleteContext.from_rows(keep, ctx.attributes, rows)
