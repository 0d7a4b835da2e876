"""Bounded-variation driving paths and Stieltjes integration against them.

Paths are either piecewise linear (:class:`PiecewisePath`) or piecewise
polynomial (:class:`PolyPath`, produced by iterated integration of piecewise
linear paths).  Integrals ``int g(u) dx(u)`` are computed on a grid whose
breakpoints contain every path knot, so that each path is a polynomial on
every grid cell; on each cell the integrand is collocated at Gauss-Legendre
nodes and integrated with the exact Legendre antiderivative matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as L
from numpy.polynomial import polynomial as P

from .series import pairs_to_array, series_to_pairs

QUAD_ORDER = 16


@dataclass(frozen=True, eq=False)
class PiecewisePath:
    """Piecewise-linear interpolant of ``values`` at increasing ``knots`` (first knot 0)."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=np.complex128)
        if k.ndim != 1 or len(k) < 2 or len(v) != len(k):
            raise ValueError("a path needs at least two knots and one value per knot")
        if k[0] != 0.0:
            raise ValueError("the first knot must be 0")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        k.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    @classmethod
    def linear(cls, rate: complex, T: float, offset: complex = 0.0) -> "PiecewisePath":
        return cls([0.0, T], [offset, offset + rate * T])

    @classmethod
    def zero(cls, T: float) -> "PiecewisePath":
        return cls([0.0, T], [0.0, 0.0])

    @property
    def T(self) -> float:
        return float(self.knots[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    def _check_times(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-15) or np.any(t > self.T * (1 + 1e-12) + 1e-15):
            raise ValueError(f"times outside [0, {self.T}]")
        return np.clip(t, 0.0, self.T)

    def __call__(self, t):
        t = self._check_times(t)
        return np.interp(t, self.knots, self.values.real) + 1j * np.interp(
            t, self.knots, self.values.imag
        )

    def derivative(self, t):
        """Slope at interior points ``t`` (right derivative at knots)."""
        t = self._check_times(t)
        idx = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, len(self.knots) - 2)
        return self.slopes[idx]

    def cumulative_variation(self, t):
        """``||y||_{1-var(0,t)}``, piecewise linear in ``t`` with slopes ``|y'|``."""
        seg = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(self.values)))])
        return np.interp(self._check_times(t), self.knots, seg)

    def to_json(self) -> dict:
        return {"knots": [float(k) for k in self.knots], "values": series_to_pairs(self.values)}

    @classmethod
    def from_json(cls, doc: dict) -> "PiecewisePath":
        return cls(doc["knots"], pairs_to_array(doc["values"]))


@dataclass(frozen=True, eq=False)
class PolyPath:
    """Piecewise polynomial path.

    On ``[knots[a], knots[a+1]]`` the value is ``sum_j coeffs[a, j] (t - knots[a])^j``.
    """

    knots: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 2 or c.shape[0] != len(k) - 1:
            raise ValueError("need one coefficient row per segment")
        if k[0] != 0.0 or np.any(np.diff(k) <= 0):
            raise ValueError("knots must start at 0 and increase strictly")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "coeffs", c)

    @property
    def T(self) -> float:
        return float(self.knots[-1])

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-15) or np.any(t > self.T * (1 + 1e-12) + 1e-15):
            raise ValueError(f"times outside [0, {self.T}]")
        t = np.clip(t, 0.0, self.T)
        idx = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, len(self.knots) - 2)
        return t, idx

    def __call__(self, t):
        t, idx = self._locate(t)
        x = t - self.knots[idx]
        out = np.zeros(np.shape(t), dtype=np.complex128)
        for j in range(self.coeffs.shape[1] - 1, -1, -1):
            out = out * x + self.coeffs[idx, j]
        return out

    def derivative(self, t):
        t, idx = self._locate(t)
        x = t - self.knots[idx]
        out = np.zeros(np.shape(t), dtype=np.complex128)
        for j in range(self.coeffs.shape[1] - 1, 0, -1):
            out = out * x + j * self.coeffs[idx, j]
        return out

    @property
    def values(self) -> np.ndarray:
        return self(self.knots)

    def to_json(self) -> dict:
        return {
            "knots": [float(k) for k in self.knots],
            "poly": [series_to_pairs(row) for row in self.coeffs],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PolyPath":
        return cls(doc["knots"], np.array([pairs_to_array(r) for r in doc["poly"]]))


def path_from_json(doc: dict):
    return PolyPath.from_json(doc) if "poly" in doc else PiecewisePath.from_json(doc)


def iterated_integral_path(paths) -> PolyPath:
    """Exact ``t -> int_{0<s_1<...<s_n<t} dy_1(s_1)...dy_n(s_n)`` for piecewise-linear ``y_i``."""
    if not paths:
        raise ValueError("need at least one path")
    T = min(p.T for p in paths)
    knots = merge_knots([p.knots for p in paths], T)
    h = np.diff(knots)
    mids = 0.5 * (knots[:-1] + knots[1:])
    slopes = [p.derivative(mids) for p in paths]
    n = len(paths)
    # level 1: I_1(t) = y_1(t) - y_1(0)
    cur = np.zeros((len(h), n + 1), dtype=np.complex128)
    cur[:, 1] = slopes[0]
    start = np.concatenate([[0.0], np.cumsum(slopes[0] * h)])
    cur[:, 0] = start[:-1]
    for level in range(1, n):
        nxt = np.zeros_like(cur)
        # local antiderivative of cur * slope, then shift by the running value
        nxt[:, 1:] = (cur[:, :-1] * slopes[level][:, None]) / np.arange(1, n + 1)
        inc = np.array([P.polyval(h[a], nxt[a]) for a in range(len(h))])
        start = np.concatenate([[0.0], np.cumsum(inc)])
        nxt[:, 0] = start[:-1]
        cur = nxt
    return PolyPath(knots, cur)


def merge_knots(knot_lists, T: float, extra=()) -> np.ndarray:
    pts = [np.asarray(k, dtype=float) for k in knot_lists] + [np.asarray(extra, dtype=float)]
    allk = np.concatenate(pts + [np.array([0.0, T])])
    allk = allk[(allk >= 0.0) & (allk <= T)]
    allk = np.unique(allk)
    # merge near-duplicates produced by float round-off
    keep = np.concatenate([[True], np.diff(allk) > 1e-14 * max(T, 1.0)])
    allk = allk[keep]
    allk[-1] = T
    return allk


@lru_cache(maxsize=8)
def _gauss_rule(q: int):
    x, w = L.leggauss(q)
    V = L.legvander(x, q - 1)
    # antiderivatives of P_k from -1, evaluated at the nodes
    Vint = np.zeros_like(V)
    for k in range(q):
        e = np.zeros(q)
        e[k] = 1.0
        Vint[:, k] = L.legval(x, L.legint(e, lbnd=-1))
    S = Vint @ np.linalg.inv(V)
    return x, w, S


@dataclass(eq=False)
class StieltjesGrid:
    """Collocation grid on ``[0, T]`` with Gauss-Legendre nodes in every cell."""

    breaks: np.ndarray
    order: int = QUAD_ORDER
    nodes: np.ndarray = field(init=False)
    _w: np.ndarray = field(init=False, repr=False)
    _S: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        if b[0] != 0.0 or np.any(np.diff(b) <= 0):
            raise ValueError("breaks must start at 0 and increase")
        self.breaks = b
        x, w, S = _gauss_rule(self.order)
        h = np.diff(b)
        self.nodes = b[:-1, None] + 0.5 * h[:, None] * (x[None, :] + 1.0)
        self._w = 0.5 * h[:, None] * w[None, :]
        self._S = S
        self._half = 0.5 * h

    @classmethod
    def for_paths(cls, paths, T: float, extra=(), min_cells: int = 8, order: int = QUAD_ORDER):
        knots = merge_knots([p.knots for p in paths], T, extra)
        # split long cells so that every cell is at most T/min_cells
        fine = np.linspace(0.0, T, min_cells + 1)
        knots = merge_knots([knots, fine], T)
        return cls(knots, order)

    @property
    def T(self) -> float:
        return float(self.breaks[-1])

    def derivative_at_nodes(self, path) -> np.ndarray:
        return path.derivative(self.nodes)

    def values_at_nodes(self, path) -> np.ndarray:
        return path(self.nodes)

    def cumulative(self, f: np.ndarray):
        """Antiderivative ``F(u) = int_0^u f``; returns (values at nodes, values at breaks)."""
        local = (f @ self._S.T) * self._half[:, None]
        totals = np.sum(f * self._w, axis=1)
        at_breaks = np.concatenate([[0.0], np.cumsum(totals)])
        return at_breaks[:-1, None] + local, at_breaks

    def break_index(self, t) -> np.ndarray:
        """Indices of ``t`` among the breaks (``t`` must be breakpoints)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.breaks, t)
        idx = np.clip(idx, 0, len(self.breaks) - 1)
        lo = np.clip(idx - 1, 0, None)
        pick = np.where(np.abs(self.breaks[lo] - t) < np.abs(self.breaks[idx] - t), lo, idx)
        if np.any(np.abs(self.breaks[pick] - t) > 1e-12 * max(self.T, 1.0)):
            raise ValueError("requested times are not breakpoints of the grid")
        return pick
