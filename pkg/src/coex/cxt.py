"""CXT3 file format and the JSON context form.

CXT3 is line-oriented UTF-8 with LF endings: magic "B3", a context name
(possibly empty), |G|, |M|, the object names, the attribute names, then
one data line per object using exactly the characters X . ? — no trailing
whitespace anywhere.  Serialization and parsing round-trip byte-exactly.
"""

from __future__ import annotations

from typing import Any

from .context import IncompleteContext, as_formal
from .errors import ParseError

MAGIC = "B3"


def dumps(ctx: IncompleteContext, name: str = "") -> str:
    if "\n" in name:
        raise ValueError("context name must be a single line")
    for label in (*ctx.objects, *ctx.attributes):
        if "\n" in label or label != label.strip() or not label:
            raise ValueError(f"name not serializable in CXT3: {label!r}")
    lines = [MAGIC, name, str(len(ctx.objects)), str(len(ctx.attributes))]
    lines.extend(ctx.objects)
    lines.extend(ctx.attributes)
    lines.extend(ctx.row_string(o) for o in ctx.objects)
    return "\n".join(lines) + "\n"


def loads(text: str) -> tuple[IncompleteContext, str]:
    """Parse CXT3 text; returns the context and its name line."""
    if not text.endswith("\n"):
        raise ParseError("missing final newline")
    lines = text.split("\n")[:-1]

    def need(i: int, what: str) -> str:
        if i >= len(lines):
            raise ParseError(f"unexpected end of file, expected {what}", line=i + 1)
        return lines[i]

    if need(0, "magic") != MAGIC:
        raise ParseError(f"bad magic {lines[0]!r}, expected {MAGIC!r}", line=1)
    name = need(1, "context name")
    try:
        n_obj = int(need(2, "object count"))
        n_att = int(need(3, "attribute count"))
    except ValueError:
        raise ParseError("object/attribute count is not an integer", line=3) from None
    if n_obj < 0 or n_att < 0:
        raise ParseError("negative count", line=3)
    objects = [need(4 + i, "object name") for i in range(n_obj)]
    attributes = [need(4 + n_obj + i, "attribute name") for i in range(n_att)]
    rows = []
    for i in range(n_obj):
        lineno = 4 + n_obj + n_att + i
        row = need(lineno, "data row")
        if len(row) != n_att:
            raise ParseError(f"data row has {len(row)} cells, expected {n_att}", line=lineno + 1)
        for col, ch in enumerate(row):
            if ch not in "X.?":
                raise ParseError(f"invalid cell character {ch!r}", line=lineno + 1, column=col + 1)
        rows.append(row)
    if len(lines) != 4 + n_obj + n_att + n_obj:
        raise ParseError("trailing content after data rows", line=4 + n_obj + n_att + n_obj + 1)
    try:
        return IncompleteContext.from_rows(objects, attributes, rows), name
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def dumps_formal(ctx: IncompleteContext, name: str = "") -> str:
    """Serialize insisting on completeness (no '?' in the output)."""
    return dumps(as_formal(ctx), name)


# ---------------------------------------------------------------------------
# JSON form


def to_json(ctx: IncompleteContext, name: str = "") -> dict[str, Any]:
    doc: dict[str, Any] = {
        "objects": list(ctx.objects),
        "attributes": list(ctx.attributes),
        "rows": [ctx.row_string(o) for o in ctx.objects],
    }
    if name:
        doc["name"] = name
    return doc


def from_json(doc: dict[str, Any]) -> tuple[IncompleteContext, str]:
    try:
        objects = list(doc["objects"])
        attributes = list(doc["attributes"])
        rows = list(doc["rows"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"context JSON missing field: {exc}") from None
    try:
        return IncompleteContext.from_rows(objects, attributes, rows), str(doc.get("name", ""))
    except ValueError as exc:
        raise ParseError(str(exc)) from None
