"""Payload grammar: UTF-8 lines of ``name=TYPE:value`` tag assignments.

Types: B (bool, ``0``/``1``), I (decimal int), F (decimal with ``.``),
S (percent-encoded string). Control lines start with ``@`` (``@req=<seq>``,
``@tick=<n>``, ``@ts=<ms>``) and response lines like ``applied=1``,
``code=ReadOnly`` or ``mission=I:4`` use the same shapes; everything is
line-oriented so a payload remains greppable on the wire.
"""

from __future__ import annotations

from urllib.parse import quote, unquote

from ..plc.tags import TagType


class PayloadError(ValueError):
    pass


def serialize_value(vtype: TagType, value) -> str:
    if vtype is TagType.BOOL:
        return "B:1" if value else "B:0"
    if vtype is TagType.INT32:
        return f"I:{value}"
    if vtype is TagType.FLOAT64:
        text = repr(float(value))
        if "." not in text and "e" not in text and "E" not in text:
            text += ".0"
        return f"F:{text}"
    return "S:" + quote(str(value), safe="")


def parse_value(text: str) -> tuple[TagType, bool | int | float | str]:
    if ":" not in text:
        raise PayloadError(f"missing type tag in {text!r}")
    code, raw = text.split(":", 1)
    if code == "B":
        if raw == "0":
            return TagType.BOOL, False
        if raw == "1":
            return TagType.BOOL, True
        raise PayloadError(f"bool must be 0|1, got {raw!r}")
    if code == "I":
        try:
            return TagType.INT32, int(raw)
        except ValueError:
            raise PayloadError(f"bad int {raw!r}") from None
    if code == "F":
        if "." not in raw and "e" not in raw and "E" not in raw:
            raise PayloadError(f"float needs a '.', got {raw!r}")
        try:
            value = float(raw)
        except ValueError:
            raise PayloadError(f"bad float {raw!r}") from None
        if value != value or value in (float("inf"), float("-inf")):
            raise PayloadError("float must be finite")
        return TagType.FLOAT64, value
    if code == "S":
        return TagType.STRING, unquote(raw)
    raise PayloadError(f"unknown type code {code!r}")


def serialize_assignments(assignments: list[tuple[str, TagType, object]]) -> str:
    return "\n".join(f"{name}={serialize_value(t, v)}" for name, t, v in assignments)


def parse_assignments(text: str) -> list[tuple[str, TagType, bool | int | float | str]]:
    """Parse assignment lines; control/response lines are not accepted here.

    Duplicate names in one payload are rejected.
    """
    out = []
    seen = set()
    for line in text.split("\n"):
        if not line:
            continue
        if "=" not in line:
            raise PayloadError(f"bad assignment line {line!r}")
        name, value = line.split("=", 1)
        if not name or name.startswith("@"):
            raise PayloadError(f"bad tag name {name!r}")
        if name in seen:
            raise PayloadError(f"duplicate name {name!r}")
        seen.add(name)
        vtype, parsed = parse_value(value)
        out.append((name, vtype, parsed))
    return out


def split_control(text: str) -> tuple[dict[str, str], str]:
    """Split leading ``@key=value`` control lines from the payload body."""
    control: dict[str, str] = {}
    lines = text.split("\n")
    i = 0
    while i < len(lines) and lines[i].startswith("@") and "=" in lines[i]:
        key, value = lines[i][1:].split("=", 1)
        control[key] = value
        i += 1
    return control, "\n".join(lines[i:])
