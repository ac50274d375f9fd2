"""Ordinals below omega^omega in Cantor normal form.

An ordinal is stored as a tuple of ``(exponent, coefficient)`` pairs with
strictly decreasing exponents and positive coefficients. The textual wire
format is ``w^2*3+w+4``; ``0`` denotes zero.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, Tuple, Union


class OrdinalError(ValueError):
    pass


class OrdinalSyntaxError(OrdinalError):
    def __init__(self, text: str, pos: int, msg: str):
        super().__init__(f"{msg} at position {pos} in {text!r}")
        self.text = text
        self.pos = pos


class CanonicalFormError(OrdinalError):
    pass


@total_ordering
@dataclass(frozen=True)
class Ordinal:
    terms: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        terms = tuple((int(e), int(c)) for e, c in self.terms)
        prev = None
        for e, c in terms:
            if e < 0 or c < 1:
                raise CanonicalFormError(f"bad term w^{e}*{c}")
            if prev is not None and e >= prev:
                raise CanonicalFormError(
                    f"exponents must strictly decrease: {list(terms)}")
            prev = e
        object.__setattr__(self, "terms", terms)

    @classmethod
    def of(cls, value: Union["Ordinal", int, str]) -> "Ordinal":
        if isinstance(value, Ordinal):
            return value
        if isinstance(value, bool):
            raise TypeError("bool is not an ordinal")
        if isinstance(value, int):
            if value < 0:
                raise OrdinalError("negative ordinal")
            return cls(((0, value),)) if value else cls()
        if isinstance(value, str):
            return parse(value)
        raise TypeError(f"cannot make an ordinal from {value!r}")

    @classmethod
    def omega_power(cls, k: int, coeff: int = 1) -> "Ordinal":
        return cls(((k, coeff),))

    def __lt__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return compare(self, other) < 0

    def __eq__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def __str__(self):
        return render(self)

    def __repr__(self):
        return f"Ordinal({render(self)!r})"

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_finite(self) -> bool:
        return not self.terms or self.terms[0][0] == 0

    def __int__(self):
        if not self.is_finite:
            raise OrdinalError(f"{self} is infinite")
        return self.terms[0][1] if self.terms else 0

    @property
    def degree(self) -> int:
        """Leading exponent; 0 for finite ordinals (including zero)."""
        return self.terms[0][0] if self.terms else 0

    def coefficient(self, exponent: int) -> int:
        for e, c in self.terms:
            if e == exponent:
                return c
        return 0

    def successor(self) -> "Ordinal":
        return _add_term(self.terms, 0, 1)


def _coerce(value):
    if isinstance(value, Ordinal):
        return value
    if isinstance(value, int) and not isinstance(value, bool) and value >= 0:
        return Ordinal.of(value)
    return NotImplemented


def _add_term(terms: Iterable[Tuple[int, int]], exponent: int, coeff: int) -> Ordinal:
    """Ordinal sum ``alpha + w^exponent * coeff`` (absorbs smaller terms)."""
    kept = [(e, c) for e, c in terms if e >= exponent]
    if kept and kept[-1][0] == exponent:
        kept[-1] = (exponent, kept[-1][1] + coeff)
    elif coeff:
        kept.append((exponent, coeff))
    return Ordinal(tuple(kept))


_TERM = re.compile(r"\s*(?:(w)(?:\^(\d+))?(?:\*(\d+))?|(\d+))\s*")


def parse(text: str) -> Ordinal:
    """Parse a CNF string such as ``"w^2*3+w+4"``."""
    if not isinstance(text, str):
        raise TypeError("expected a string")
    pos = 0
    terms = []
    n = len(text)
    if not text.strip():
        raise OrdinalSyntaxError(text, 0, "empty ordinal")
    while True:
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            raise OrdinalSyntaxError(text, pos, "expected a term")
        if m.group(1):
            exp = int(m.group(2)) if m.group(2) is not None else 1
            coeff = int(m.group(3)) if m.group(3) is not None else 1
        else:
            exp, coeff = 0, int(m.group(4))
        if coeff == 0 and m.group(1):
            raise OrdinalSyntaxError(text, m.start(3), "zero coefficient")
        terms.append((exp, coeff))
        pos = m.end()
        if pos == n:
            break
        if text[pos] != "+":
            raise OrdinalSyntaxError(text, pos, "expected '+'")
        pos += 1
    if len(terms) == 1 and terms[0] == (0, 0):
        return Ordinal()
    if any(c == 0 for _, c in terms):
        raise CanonicalFormError(f"zero summand in {text!r}")
    for (e1, _), (e2, _) in zip(terms, terms[1:]):
        if e2 >= e1:
            raise CanonicalFormError(
                f"exponents must strictly decrease in {text!r}")
    return Ordinal(tuple(terms))


def render(a: Ordinal) -> str:
    if not a.terms:
        return "0"
    parts = []
    for e, c in a.terms:
        if e == 0:
            parts.append(str(c))
            continue
        base = "w" if e == 1 else f"w^{e}"
        parts.append(base if c == 1 else f"{base}*{c}")
    return "+".join(parts)


def compare(a: Ordinal, b: Ordinal) -> int:
    """Return -1, 0 or 1."""
    for (ea, ca), (eb, cb) in zip(a.terms, b.terms):
        if ea != eb:
            return -1 if ea < eb else 1
        if ca != cb:
            return -1 if ca < cb else 1
    la, lb = len(a.terms), len(b.terms)
    return (la > lb) - (la < lb)


ZERO = "zero"
SUCCESSOR = "successor"
LIMIT = "limit"


def classify(a: Ordinal) -> Tuple[str, Union[Ordinal, None]]:
    """Return ``("zero", None)``, ``("successor", predecessor)`` or ``("limit", None)``."""
    if not a.terms:
        return ZERO, None
    e, c = a.terms[-1]
    if e > 0:
        return LIMIT, None
    head = a.terms[:-1]
    pred = head + ((0, c - 1),) if c > 1 else head
    return SUCCESSOR, Ordinal(pred)


def fundamental_sequence(lam: Ordinal, n: int) -> Ordinal:
    """n-th term of the canonical sequence increasing to the limit ``lam``.

    With ``lam = alpha + w^k*c``: ``alpha + w^k*(c-1) + w^(k-1)*n``.
    """
    kind, _ = classify(lam)
    if kind != LIMIT:
        raise OrdinalError(f"{lam} is not a limit ordinal")
    if n < 1:
        raise OrdinalError("fundamental sequence is indexed from 1")
    k, c = lam.terms[-1]
    head = lam.terms[:-1]
    if c > 1:
        head = head + ((k, c - 1),)
    return Ordinal(head + ((k - 1, n),))
