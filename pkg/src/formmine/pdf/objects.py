"""Primitive PDF object types shared by the parser and the writer.

Names are stored without their leading slash; dictionaries are plain dicts
keyed by name strings; strings are bytes (decoding is a text-layer concern).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


class Name(str):
    """A PDF name token (``/Foo`` is stored as ``Name("Foo")``)."""

    __slots__ = ()

    def __repr__(self) -> str:
        return f"/{str(self)}"


@dataclass(frozen=True, slots=True)
class Ref:
    """Indirect object reference (``num gen R``)."""

    num: int
    gen: int = 0

    def __repr__(self) -> str:
        return f"{self.num} {self.gen} R"


@dataclass(slots=True)
class Stream:
    """A stream object: its dictionary plus the raw (still encoded) bytes."""

    dict: dict[str, Any]
    raw: bytes
    _decoded: bytes | None = field(default=None, repr=False)

    def get(self, key: str, default: Any = None) -> Any:
        return self.dict.get(key, default)


def is_name(obj: Any, value: str | None = None) -> bool:
    if not isinstance(obj, Name):
        return False
    return value is None or str(obj) == value
