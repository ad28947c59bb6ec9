"""
Exact arithmetic in the cyclotomic field Q(zeta), zeta = exp(i*pi/4).

An element is c0 + c1*zeta + c2*zeta^2 + c3*zeta^3 with rational
coefficients and zeta^4 = -1. Values are immutable.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Any, Dict, Iterable, Tuple, Union

Scalar = Union[int, Fraction]

_HALF_SQRT2 = math.sqrt(2.0) / 2.0


def _sign_of_sqrt2_form(p: Fraction, q: Fraction) -> int:
    """Exact sign of p + q*sqrt(2)."""
    if p >= 0 and q >= 0:
        return 0 if p == 0 and q == 0 else 1
    if p <= 0 and q <= 0:
        return -1
    if p > 0:
        return 1 if p * p > 2 * q * q else -1
    return 1 if 2 * q * q > p * p else -1


class Q8Number:
    __slots__ = ("_c",)

    def __init__(self, c0: Scalar = 0, c1: Scalar = 0, c2: Scalar = 0, c3: Scalar = 0) -> None:
        self._c: Tuple[Fraction, Fraction, Fraction, Fraction] = (
            Fraction(c0),
            Fraction(c1),
            Fraction(c2),
            Fraction(c3),
        )

    @property
    def coefficients(self) -> Tuple[Fraction, Fraction, Fraction, Fraction]:
        return self._c

    @classmethod
    def from_scalar(cls, x: Scalar) -> Q8Number:
        return cls(x, 0, 0, 0)

    @classmethod
    def from_sqrt2_form(cls, p: Scalar, q: Scalar) -> Q8Number:
        """p + q*sqrt(2), with sqrt(2) = zeta - zeta^3."""
        return cls(p, q, 0, -q)

    @classmethod
    def zeta_power(cls, k: int) -> Q8Number:
        k %= 8
        coeffs = [0, 0, 0, 0]
        if k < 4:
            coeffs[k] = 1
        else:
            coeffs[k - 4] = -1
        return cls(*coeffs)

    @classmethod
    def parse(cls, items: Iterable[str]) -> Q8Number:
        values = [Fraction(item) for item in items]
        if len(values) != 4:
            raise ValueError(f"expected 4 coefficients, got {len(values)}")
        return cls(*values)

    @staticmethod
    def _coerce(other: Any) -> Q8Number:
        if isinstance(other, Q8Number):
            return other
        if isinstance(other, (int, Fraction)):
            return Q8Number(other)
        return NotImplemented

    def __repr__(self) -> str:
        return "Q8Number({}, {}, {}, {})".format(*(str(c) for c in self._c))

    def __str__(self) -> str:
        terms = []
        for power, c in enumerate(self._c):
            if c == 0:
                continue
            basis = "" if power == 0 else ("ζ" if power == 1 else f"ζ^{power}")
            terms.append(f"{c}{'·' if basis else ''}{basis}")
        return " + ".join(terms) if terms else "0"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Q8Number(other)
        if not isinstance(other, Q8Number):
            return NotImplemented
        return self._c == other._c

    def __hash__(self) -> int:
        return hash(self._c)

    def __bool__(self) -> bool:
        return any(self._c)

    def __neg__(self) -> Q8Number:
        return Q8Number(*(-c for c in self._c))

    def __add__(self, other: Any) -> Q8Number:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return Q8Number(*(a + b for a, b in zip(self._c, other._c)))

    def __radd__(self, other: Any) -> Q8Number:
        return self + other

    def __sub__(self, other: Any) -> Q8Number:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return Q8Number(*(a - b for a, b in zip(self._c, other._c)))

    def __rsub__(self, other: Any) -> Q8Number:
        return -(self - other)

    def __mul__(self, other: Any) -> Q8Number:
        if isinstance(other, (int, Fraction)):
            return Q8Number(*(c * other for c in self._c))
        if not isinstance(other, Q8Number):
            return NotImplemented
        out = [Fraction(0)] * 4
        for i, a in enumerate(self._c):
            if a == 0:
                continue
            for j, b in enumerate(other._c):
                if b == 0:
                    continue
                k = i + j
                # zeta^4 = -1
                if k < 4:
                    out[k] += a * b
                else:
                    out[k - 4] -= a * b
        return Q8Number(*out)

    def __rmul__(self, other: Any) -> Q8Number:
        return self * other

    def __pow__(self, exponent: int) -> Q8Number:
        if exponent < 0:
            raise ValueError("negative powers are not supported")
        result = Q8Number(1)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def conj(self) -> Q8Number:
        """Complex conjugation, zeta -> zeta^-1 = -zeta^3."""
        c0, c1, c2, c3 = self._c
        return Q8Number(c0, -c3, -c2, -c1)

    @property
    def re(self) -> Q8Number:
        c0, c1, _, c3 = self._c
        half = (c1 - c3) / 2
        return Q8Number(c0, half, 0, -half)

    @property
    def im(self) -> Q8Number:
        _, c1, c2, c3 = self._c
        half = (c1 + c3) / 2
        return Q8Number(c2, half, 0, -half)

    def parts(self) -> Tuple[Q8Number, Q8Number, complex]:
        return self.re, self.im, self.to_complex()

    def is_real(self) -> bool:
        return self._c[2] == 0 and self._c[3] == -self._c[1]

    def sqrt2_form(self) -> Tuple[Fraction, Fraction]:
        """(p, q) with self = p + q*sqrt(2); only for real elements."""
        if not self.is_real():
            raise ValueError(f"{self!r} is not in the real subfield")
        return self._c[0], self._c[1]

    def sign(self) -> int:
        p, q = self.sqrt2_form()
        return _sign_of_sqrt2_form(p, q)

    def real_inverse(self) -> Q8Number:
        """Inverse of a nonzero element of Q(sqrt 2)."""
        p, q = self.sqrt2_form()
        norm = p * p - 2 * q * q
        if norm == 0:
            raise ZeroDivisionError("inverse of zero")
        return Q8Number.from_sqrt2_form(p / norm, -q / norm)

    def to_complex(self) -> complex:
        c0, c1, c2, c3 = (float(c) for c in self._c)
        return complex(c0 + (c1 - c3) * _HALF_SQRT2, c2 + (c1 + c3) * _HALF_SQRT2)

    def to_payload(self) -> Dict[str, Any]:
        value = self.to_complex()
        return {
            "coefficients": [f"{c.numerator}/{c.denominator}" for c in self._c],
            "re": value.real,
            "im": value.imag,
        }


ZERO = Q8Number(0)
ONE = Q8Number(1)
ZETA = Q8Number(0, 1, 0, 0)
I_UNIT = Q8Number(0, 0, 1, 0)
SQRT2 = Q8Number.from_sqrt2_form(0, 1)
X_CRIT = Q8Number.from_sqrt2_form(-1, 1)


def q8_arith(a: Q8Number, b: Q8Number, kind: str) -> Q8Number:
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    raise ValueError(f"unknown operation: {kind}")


def q8_parts(a: Q8Number) -> Tuple[Q8Number, Q8Number, complex]:
    return a.parts()
