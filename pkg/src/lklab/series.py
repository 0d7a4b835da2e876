"""Truncated power series, Laurent tails and polynomials.

All objects keep an explicit truncation order ``N``; products and other
operations silently drop coefficients beyond ``N``.  Coefficients are stored
as complex128 arrays, except that integer inputs keep an integer dtype so
that purely combinatorial identities can be checked exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_ORDER = 32


def _as_coeffs(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError("coefficients must be a 1-d sequence")
    if np.issubdtype(arr.dtype, np.integer):
        return arr.astype(np.int64)
    return arr.astype(np.complex128)


@dataclass(frozen=True, eq=False)
class TruncatedSeries:
    """Power series ``sum_{k=0}^{N} coeffs[k] z^k`` known up to ``z^N``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = _as_coeffs(self.coeffs)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if len(c) < 1:
            raise ValueError("a series needs at least the constant term")

    @classmethod
    def from_coeffs(cls, values, order: int | None = None) -> "TruncatedSeries":
        """Build a series, zero-padding or cutting ``values`` to ``order``."""
        c = _as_coeffs(values)
        if order is not None:
            out = np.zeros(order + 1, dtype=c.dtype)
            n = min(order + 1, len(c))
            out[:n] = c[:n]
            c = out
        return cls(c)

    @classmethod
    def zero(cls, order: int = DEFAULT_ORDER) -> "TruncatedSeries":
        return cls(np.zeros(order + 1, dtype=np.complex128))

    @classmethod
    def one(cls, order: int = DEFAULT_ORDER) -> "TruncatedSeries":
        c = np.zeros(order + 1, dtype=np.complex128)
        c[0] = 1.0
        return cls(c)

    @classmethod
    def monomial(cls, k: int, order: int = DEFAULT_ORDER, coeff=1) -> "TruncatedSeries":
        dtype = np.int64 if isinstance(coeff, (int, np.integer)) else np.complex128
        c = np.zeros(order + 1, dtype=dtype)
        if k <= order:
            c[k] = coeff
        return cls(c)

    @property
    def trunc_order(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, k):
        return self.coeffs[k]

    def _check(self, other: "TruncatedSeries"):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        if other.trunc_order != self.trunc_order:
            raise ValueError(
                f"mismatched truncation orders {self.trunc_order} and {other.trunc_order}"
            )
        return None

    def __add__(self, other):
        if np.isscalar(other):
            c = self.coeffs.astype(np.result_type(self.coeffs, np.asarray(other)))
            c[0] += other
            return TruncatedSeries(c)
        if self._check(other) is NotImplemented:
            return NotImplemented
        return TruncatedSeries(self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return TruncatedSeries(self.coeffs * other)
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return series_mul(self, other)

    __rmul__ = __mul__

    def __call__(self, z):
        # Horner evaluation of the retained polynomial
        z = np.asarray(z)
        out = np.zeros_like(z, dtype=np.complex128)
        for c in self.coeffs[::-1]:
            out = out * z + c
        return out

    def derivative(self) -> "TruncatedSeries":
        """Derivative, kept at the same order (the top coefficient becomes 0)."""
        n = self.trunc_order
        d = np.zeros_like(self.coeffs)
        d[:n] = self.coeffs[1:] * np.arange(1, n + 1)
        return TruncatedSeries(d)

    def integral(self) -> "TruncatedSeries":
        """Antiderivative vanishing at 0, truncated to the same order."""
        n = self.trunc_order
        out = np.zeros(n + 1, dtype=np.complex128)
        out[1:] = self.coeffs[:n] / np.arange(1, n + 1)
        return TruncatedSeries(out)

    def truncate(self, order: int) -> "TruncatedSeries":
        return TruncatedSeries.from_coeffs(self.coeffs, order)

    def allclose(self, other: "TruncatedSeries", atol=1e-12, rtol=0.0) -> bool:
        return self.trunc_order == other.trunc_order and np.allclose(
            self.coeffs, other.coeffs, atol=atol, rtol=rtol
        )

    def to_json(self) -> list:
        return series_to_pairs(self.coeffs)

    @classmethod
    def from_json(cls, pairs) -> "TruncatedSeries":
        return cls(pairs_to_array(pairs))

    def __repr__(self):
        return f"TruncatedSeries(order={self.trunc_order}, coeffs={np.array2string(self.coeffs, precision=4)})"


@dataclass(frozen=True, eq=False)
class LaurentTail:
    """Exterior-type series ``lead*z + c_0 + sum_{k=1}^{N} c_k z^{-k}``."""

    lead: complex
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lead", complex(self.lead))
        c = np.asarray(self.coeffs, dtype=np.complex128)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def trunc_order(self) -> int:
        return len(self.coeffs) - 1

    def as_laurent(self) -> "LaurentSeries":
        """Same data as a :class:`LaurentSeries` with top degree 1."""
        s = np.concatenate([[self.lead], self.coeffs])
        return LaurentSeries(1, TruncatedSeries(s))

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        w = 1.0 / z
        out = np.zeros_like(z)
        for c in self.coeffs[::-1]:
            out = out * w + c
        return self.lead * z + out


@dataclass(frozen=True, eq=False)
class LaurentSeries:
    """Laurent series ``z^top * S(1/z)``, i.e. coefficient of ``z^k`` is ``S[top-k]``.

    Used for polynomials evaluated on exterior maps, where only the part from
    ``z^top`` down to ``z^(top-N)`` is known.
    """

    top: int
    series: TruncatedSeries

    def coeff(self, k: int):
        j = self.top - k
        if j < 0 or j > self.series.trunc_order:
            if j < 0:
                return 0.0
            raise IndexError(f"z^{k} lies beyond the retained window")
        return self.series[j]

    @property
    def bottom(self) -> int:
        return self.top - self.series.trunc_order

    def __mul__(self, other: "LaurentSeries") -> "LaurentSeries":
        n = min(self.series.trunc_order, other.series.trunc_order)
        prod = series_mul(self.series.truncate(n), other.series.truncate(n))
        return LaurentSeries(self.top + other.top, prod)

    def __add__(self, other: "LaurentSeries") -> "LaurentSeries":
        top = max(self.top, other.top)
        bottom = max(self.bottom, other.bottom)
        n = top - bottom
        out = np.zeros(n + 1, dtype=np.complex128)
        for s in (self, other):
            sh = top - s.top
            m = min(n - sh, s.series.trunc_order)
            out[sh:sh + m + 1] += s.series.coeffs[: m + 1]
        return LaurentSeries(top, TruncatedSeries(out))

    def add_constant(self, c) -> "LaurentSeries":
        if self.top < 0:
            raise ValueError("constant term lies above the retained window")
        out = self.series.coeffs.astype(np.complex128)
        out[self.top] += c
        return LaurentSeries(self.top, TruncatedSeries(out))

    def negative_part(self, kmax: int) -> np.ndarray:
        """Coefficients of ``z^-1 .. z^-kmax``."""
        return np.array([self.coeff(-k) for k in range(1, kmax + 1)])


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Ordinary polynomial ``sum_k coeffs[k] y^k`` with trailing zeros stripped."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        nz = np.nonzero(c)[0]
        c = c[: nz[-1] + 1] if len(nz) else np.zeros(1, dtype=np.complex128)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, y):
        y = np.asarray(y, dtype=np.complex128)
        out = np.zeros_like(y)
        for c in self.coeffs[::-1]:
            out = out * y + c
        return out


# --- core operations -------------------------------------------------------


def series_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product truncated at the common order."""
    if a.trunc_order != b.trunc_order:
        raise ValueError(f"mismatched truncation orders {a.trunc_order} and {b.trunc_order}")
    n = a.trunc_order
    return TruncatedSeries(np.convolve(a.coeffs, b.coeffs)[: n + 1])


def series_reciprocal(a: TruncatedSeries) -> TruncatedSeries:
    """``1/a`` up to the order of ``a``; needs ``a(0) != 0``."""
    c = a.coeffs.astype(np.complex128)
    if c[0] == 0:
        raise ZeroDivisionError("series with zero constant term has no reciprocal")
    n = a.trunc_order
    b = np.zeros(n + 1, dtype=np.complex128)
    b[0] = 1.0 / c[0]
    for k in range(1, n + 1):
        b[k] = -np.dot(c[1 : k + 1], b[k - 1 :: -1][:k]) / c[0]
    return TruncatedSeries(b)


def series_log(a: TruncatedSeries) -> TruncatedSeries:
    """``log a`` for ``a(0) = 1``, from ``(log a)' = a'/a`` solved coefficientwise."""
    c = a.coeffs.astype(np.complex128)
    if abs(c[0] - 1.0) > 1e-14:
        raise ValueError("series_log needs constant term 1")
    n = a.trunc_order
    # k L_k = k c_k - sum_{j=1}^{k-1} j L_j c_{k-j}
    L = np.zeros(n + 1, dtype=np.complex128)
    for k in range(1, n + 1):
        j = np.arange(1, k)
        L[k] = c[k] - np.dot(j * L[1:k], c[k - 1 : 0 : -1]) / k
    return TruncatedSeries(L)


def series_exp(a: TruncatedSeries) -> TruncatedSeries:
    """``exp a`` for ``a(0) = 0``, from ``E' = a' E``."""
    c = a.coeffs.astype(np.complex128)
    if abs(c[0]) > 1e-14:
        raise ValueError("series_exp needs constant term 0")
    n = a.trunc_order
    E = np.zeros(n + 1, dtype=np.complex128)
    E[0] = 1.0
    for k in range(1, n + 1):
        j = np.arange(1, k + 1)
        E[k] = np.dot(j * c[1 : k + 1], E[k - 1 :: -1][:k]) / k
    return TruncatedSeries(E)


def poly_eval_on_tail(p: Polynomial, g: LaurentTail) -> LaurentSeries:
    """``p(g(z))`` by Horner's rule, known from ``z^deg(p)`` down to ``z^(deg(p)-N-1)``."""
    if g.trunc_order < p.degree:
        raise ValueError("truncation order of g is too small for this polynomial degree")
    gl = g.as_laurent()
    acc = LaurentSeries(0, TruncatedSeries.from_coeffs([p.coeffs[-1]], gl.series.trunc_order))
    for c in p.coeffs[-2::-1]:
        acc = (acc * gl).add_constant(c)
    return acc


def witt_action(n: int, a: TruncatedSeries) -> TruncatedSeries:
    """Apply ``l_n = -z^(n+1) d/dz`` to ``a``; overflow beyond ``z^N`` is dropped."""
    if n < 0:
        raise ValueError("only the positive part of the Witt algebra is implemented")
    N = a.trunc_order
    k = np.arange(N + 1)
    d = a.coeffs * k  # coefficient of z^(k-1) in a' is k a_k, moved to z^(k+n)
    out = np.zeros_like(a.coeffs)
    src = np.arange(1, N + 1)
    dst = src + n
    keep = dst <= N
    out[dst[keep]] = -d[src[keep]]
    return TruncatedSeries(out)


# --- JSON interchange ------------------------------------------------------


def series_to_pairs(values: Sequence[complex]) -> list:
    return [[float(np.real(v)), float(np.imag(v))] for v in values]


def pairs_to_array(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim == 1:
        return arr.astype(np.complex128)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("expected a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def dumps_series(a: TruncatedSeries) -> str:
    return json.dumps(a.to_json())
