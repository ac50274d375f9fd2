"""Finitely supported real sequences and linear functionals on them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Mapping, Sequence, Tuple, Union

Scalar = Union[Fraction, float]

RATIONAL = "rational"
FLOAT = "float"


def to_scalar(value, mode: str = RATIONAL) -> Scalar:
    """Convert ints, floats, ``Fraction`` or ``"p/q"`` strings."""
    if mode == FLOAT:
        if isinstance(value, str):
            return float(Fraction(value))
        return float(value)
    if mode != RATIONAL:
        raise ValueError(f"unknown scalar mode {mode!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a scalar")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("non-finite scalar")
        # decimal reading: 0.1 means 1/10
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {value!r} to a scalar")


def scalar_to_json(value: Scalar):
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    if isinstance(value, Fraction):
        return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    return float(value)


def sign(value) -> int:
    return (value > 0) - (value < 0)


@dataclass(frozen=True)
class Vector:
    """Sparse vector; ``entries`` is sorted by index and holds no zeros."""
    entries: Tuple[Tuple[int, Scalar], ...] = ()

    def __post_init__(self):
        merged: Dict[int, Scalar] = {}
        for i, v in self.entries:
            i = int(i)
            if i < 1:
                raise ValueError(f"indices start at 1, got {i}")
            merged[i] = merged.get(i, 0) + v
        clean = tuple(sorted((i, v) for i, v in merged.items() if v != 0))
        object.__setattr__(self, "entries", clean)

    @classmethod
    def from_mapping(cls, data: Mapping[int, object], mode: str = RATIONAL) -> "Vector":
        return cls(tuple((int(i), to_scalar(v, mode)) for i, v in data.items()))

    @classmethod
    def from_json(cls, data: dict, mode: str = RATIONAL) -> "Vector":
        return cls(tuple((int(i), to_scalar(v, mode)) for i, v in data.get("entries", [])))

    def to_json(self) -> dict:
        return {"entries": [[i, scalar_to_json(v)] for i, v in self.entries]}

    def as_dict(self) -> Dict[int, Scalar]:
        return dict(self.entries)

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(i for i, _ in self.entries)

    @property
    def values(self) -> Tuple[Scalar, ...]:
        return tuple(v for _, v in self.entries)

    def __getitem__(self, index: int) -> Scalar:
        for i, v in self.entries:
            if i == index:
                return v
        return 0

    def __len__(self):
        return len(self.entries)

    def __bool__(self):
        return bool(self.entries)

    def __add__(self, other: "Vector") -> "Vector":
        return add(self, other)

    def __sub__(self, other: "Vector") -> "Vector":
        return add(self, scale(-1, other))

    def __neg__(self) -> "Vector":
        return scale(-1, self)

    def __rmul__(self, c) -> "Vector":
        return scale(c, self)

    def with_mode(self, mode: str) -> "Vector":
        return Vector(tuple((i, to_scalar(v, mode)) for i, v in self.entries))

    def sup(self) -> Scalar:
        return max((abs(v) for _, v in self.entries), default=0)

    def l1(self) -> Scalar:
        return sum((abs(v) for _, v in self.entries), 0)


def basis_vector(n: int, value=1) -> Vector:
    return Vector(((n, value),))


def scale(c, x: Vector) -> Vector:
    return Vector(tuple((i, c * v) for i, v in x.entries))


def add(x: Vector, y: Vector) -> Vector:
    return Vector(x.entries + y.entries)


def restrict(x: Vector, where) -> Vector:
    """Keep coordinates in an interval ``(lo, hi)`` / ``Interval`` or in a set of indices."""
    if isinstance(where, Interval):
        lo, hi = where.lo, where.hi
        return Vector(tuple((i, v) for i, v in x.entries if lo <= i <= hi))
    if isinstance(where, tuple) and len(where) == 2 and not isinstance(where, frozenset):
        lo, hi = where
        return Vector(tuple((i, v) for i, v in x.entries if lo <= i <= hi))
    keep = set(where)
    return Vector(tuple((i, v) for i, v in x.entries if i in keep))


def combine(coeffs: Sequence[Scalar], vectors: Sequence[Vector]) -> Vector:
    entries = []
    for c, v in zip(coeffs, vectors):
        if c:
            entries.extend((i, c * a) for i, a in v.entries)
    return Vector(tuple(entries))


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def __post_init__(self):
        if not (1 <= self.lo <= self.hi):
            raise ValueError(f"bad interval [{self.lo}, {self.hi}]")


@dataclass
class Functional:
    """Linear functional with finitely many nonzero weights.

    ``provenance`` records the admissible structure that produced it so that
    the weights can be re-derived independently.
    """
    terms: Dict[int, Scalar] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __call__(self, x: Vector) -> Scalar:
        t = self.terms
        return sum((t[i] * v for i, v in x.entries if i in t), 0)

    def cleaned(self) -> "Functional":
        return Functional({i: w for i, w in sorted(self.terms.items()) if w != 0}, self.provenance)

    def to_json(self) -> dict:
        return {"terms": [[i, scalar_to_json(w)] for i, w in sorted(self.terms.items()) if w != 0],
                "provenance": self.provenance}

    @classmethod
    def from_json(cls, data: dict, mode: str = RATIONAL) -> "Functional":
        return cls({int(i): to_scalar(w, mode) for i, w in data.get("terms", [])},
                   data.get("provenance", {}))


def add_terms(acc: Dict[int, Scalar], terms: Mapping[int, Scalar], c=1) -> None:
    for i, w in terms.items():
        acc[i] = acc.get(i, 0) + c * w
