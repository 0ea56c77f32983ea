"""The tag table: named, typed I/O points with quality and timestamps.

Names and types are fixed once the table is frozen at PLC start; values change
through typed writes that record the tick and maintain a dirty set the tag
server drains when publishing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class TagType(enum.Enum):
    BOOL = "B"
    INT32 = "I"
    FLOAT64 = "F"
    STRING = "S"


class Quality(enum.Enum):
    GOOD = "Good"
    STALE = "Stale"


INT32_MIN, INT32_MAX = -(2**31), 2**31 - 1


@dataclass
class TagValue:
    vtype: TagType
    value: bool | int | float | str
    quality: Quality = Quality.GOOD
    timestamp: int = 0  # tick index


def check_value(vtype: TagType, value) -> bool | int | float | str:
    if vtype is TagType.BOOL:
        if isinstance(value, bool):
            return value
        raise TypeError(f"expected bool, got {type(value).__name__}")
    if vtype is TagType.INT32:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"expected int, got {type(value).__name__}")
        if not (INT32_MIN <= value <= INT32_MAX):
            raise ValueError("INT32 out of range")
        return value
    if vtype is TagType.FLOAT64:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError(f"expected float, got {type(value).__name__}")
        value = float(value)
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError("FLOAT64 must be finite")
        return value
    if isinstance(value, str):
        if len(value.encode("utf-8")) > 255:
            raise ValueError("STRING exceeds 255 bytes")
        return value
    raise TypeError(f"expected str, got {type(value).__name__}")


class UnknownTag(KeyError):
    pass


class FrozenTable(RuntimeError):
    pass


class TagTable:
    def __init__(self):
        self._tags: dict[str, TagValue] = {}
        self._writable: set[str] = set()
        self._frozen = False
        self.dirty: set[str] = set()

    def declare(self, name: str, vtype: TagType, initial, writable: bool = False):
        if self._frozen:
            raise FrozenTable(name)
        if name in self._tags:
            raise ValueError(f"duplicate tag {name}")
        self._tags[name] = TagValue(vtype, check_value(vtype, initial))
        if writable:
            self._writable.add(name)

    def freeze(self):
        self._frozen = True

    def __contains__(self, name: str) -> bool:
        return name in self._tags

    def __len__(self) -> int:
        return len(self._tags)

    def names(self) -> list[str]:
        return list(self._tags)

    def get(self, name: str) -> TagValue:
        try:
            return self._tags[name]
        except KeyError:
            raise UnknownTag(name) from None

    def value(self, name: str):
        return self.get(name).value

    def writable(self, name: str) -> bool:
        return name in self._writable

    def set(self, name: str, value, tick: int, quality: Quality = Quality.GOOD) -> bool:
        """Typed write; returns True when the stored value actually changed."""
        tag = self.get(name)
        value = check_value(tag.vtype, value)
        changed = tag.value != value or tag.quality != quality
        if changed:
            tag.value = value
            tag.quality = quality
            tag.timestamp = tick
            self.dirty.add(name)
        return changed

    def mark_stale(self, name: str):
        tag = self.get(name)
        if tag.quality is not Quality.STALE:
            tag.quality = Quality.STALE
            self.dirty.add(name)

    def drain_dirty(self) -> list[str]:
        names = sorted(self.dirty)
        self.dirty.clear()
        return names

    def match(self, pattern: str) -> list[str]:
        """Exact name or prefix filter ending in '*'."""
        if pattern.endswith("*"):
            prefix = pattern[:-1]
            return [n for n in self._tags if n.startswith(prefix)]
        return [pattern] if pattern in self._tags else []

    def snapshot(self) -> dict[str, TagValue]:
        return {
            n: TagValue(t.vtype, t.value, t.quality, t.timestamp)
            for n, t in self._tags.items()
        }
