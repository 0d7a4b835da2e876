"""Control functions, 1-variation and certification of controlled drivings.

A control function is a continuous, superadditive ``omega(s, t) >= 0`` with
``omega(t, t) = 0``.  :func:`certify_lk_controlled` checks the two
inequalities a driving must satisfy to be controlled by ``omega``: for every
composition ``(i_1, ..., i_p)`` of ``n`` the weighted iterated integral

    e^{n x_0(t)} int_{0<u_1<...<u_p<t} e^{-i_1 x_0(u_1)} dx_{i_1}(u_1) ... e^{-i_p x_0(u_p)} dx_{i_p}(u_p)

is at most ``omega(0,t)^n / n!`` in modulus, and its increments over
``[s, t]`` are at most ``omega(s,t) omega(0,T)^(n-1) / (n-1)!``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np

from .paths import PiecewisePath, StieltjesGrid, path_from_json

N_MAX_CAP = 8


def one_variation(y: PiecewisePath, s, t):
    """Exact 1-variation of a piecewise-linear path over ``[s, t]``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s > t):
        raise ValueError("need s <= t")
    return y.cumulative_variation(t) - y.cumulative_variation(s)


@dataclass(frozen=True, eq=False)
class ControlFunction:
    """Behavioural control function, evaluable at arbitrary ``0 <= s <= t``.

    ``kind`` is one of ``from_path_variation``, ``linear_rate``, ``composed``,
    ``scaled``, ``sum`` or ``custom``; ``params`` holds the per-kind data.
    """

    kind: str
    params: dict = field(default_factory=dict)

    @classmethod
    def from_path_variation(cls, *paths: PiecewisePath) -> "ControlFunction":
        return cls("from_path_variation", {"paths": tuple(paths)})

    @classmethod
    def linear_rate(cls, rate: float) -> "ControlFunction":
        if rate < 0:
            raise ValueError("rate must be nonnegative")
        return cls("linear_rate", {"rate": float(rate)})

    @classmethod
    def composed(cls, omega0: "ControlFunction", omega: "ControlFunction") -> "ControlFunction":
        return cls("composed", {"omega0": omega0, "omega": omega})

    @classmethod
    def scaled(cls, c: float, omega: "ControlFunction") -> "ControlFunction":
        if c <= 0:
            raise ValueError("scale must be positive")
        return cls("scaled", {"c": float(c), "omega": omega})

    @classmethod
    def sum(cls, *omegas: "ControlFunction") -> "ControlFunction":
        return cls("sum", {"terms": tuple(omegas)})

    @classmethod
    def custom(cls, fn: Callable, name: str = "custom") -> "ControlFunction":
        """Wrap an arbitrary ``fn(s, t)``; no axioms are assumed."""
        return cls("custom", {"fn": fn, "name": name})

    def __call__(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any(s > t + 1e-15):
            raise ValueError("control functions are defined for s <= t only")
        k, p = self.kind, self.params
        if k == "from_path_variation":
            return sum(one_variation(y, s, np.maximum(s, t)) for y in p["paths"])
        if k == "linear_rate":
            return p["rate"] * np.maximum(t - s, 0.0)
        if k == "composed":
            w0 = p["omega0"](s, t)
            return np.exp(w0) * (w0 + p["omega"](s, t))
        if k == "scaled":
            return p["c"] * p["omega"](s, t)
        if k == "sum":
            return sum(w(s, t) for w in p["terms"])
        if k == "custom":
            return np.asarray(p["fn"](s, t), dtype=float)
        raise ValueError(f"unknown control kind {k!r}")

    def to_json(self) -> dict:
        k, p = self.kind, self.params
        if k == "from_path_variation":
            return {"kind": k, "paths": [y.to_json() for y in p["paths"]]}
        if k == "linear_rate":
            return {"kind": k, "rate": p["rate"]}
        if k == "composed":
            return {"kind": k, "omega0": p["omega0"].to_json(), "omega": p["omega"].to_json()}
        if k == "scaled":
            return {"kind": k, "c": p["c"], "omega": p["omega"].to_json()}
        if k == "sum":
            return {"kind": k, "terms": [w.to_json() for w in p["terms"]]}
        raise ValueError("custom controls cannot be serialised")

    @classmethod
    def from_json(cls, doc: dict) -> "ControlFunction":
        k = doc["kind"]
        if k == "from_path_variation":
            return cls.from_path_variation(*[path_from_json(d) for d in doc["paths"]])
        if k == "linear_rate":
            return cls.linear_rate(doc["rate"])
        if k == "composed":
            return cls.composed(cls.from_json(doc["omega0"]), cls.from_json(doc["omega"]))
        if k == "scaled":
            return cls.scaled(doc["c"], cls.from_json(doc["omega"]))
        if k == "sum":
            return cls.sum(*[cls.from_json(d) for d in doc["terms"]])
        raise ValueError(f"unknown control kind {k!r}")


def compose_control(omega0: ControlFunction, omega: ControlFunction) -> ControlFunction:
    """``omega'(s,t) = exp(omega0(s,t)) * (omega0(s,t) + omega(s,t))``."""
    return ControlFunction.composed(omega0, omega)


@dataclass
class SuperadditivityReport:
    max_violation: float
    max_diagonal: float
    worst_triple: tuple
    n_triples: int

    def passed(self, tol: float = 1e-12) -> bool:
        return self.max_violation <= tol and self.max_diagonal <= tol


def check_superadditive(omega: ControlFunction, grid=None, triples=None) -> SuperadditivityReport:
    """Largest violation of ``omega(s,u) + omega(u,t) <= omega(s,t)`` and of ``omega(t,t) = 0``.

    Either a time ``grid`` (all ordered triples are used) or explicit
    ``triples`` of shape (k, 3) must be given.
    """
    if triples is None:
        if grid is None or len(grid) == 0:
            raise ValueError("empty grid")
        g = np.sort(np.asarray(grid, dtype=float))
        i, j, k = np.meshgrid(np.arange(len(g)), np.arange(len(g)), np.arange(len(g)), indexing="ij")
        mask = (i <= j) & (j <= k)
        triples = np.stack([g[i[mask]], g[j[mask]], g[k[mask]]], axis=1)
        diag_pts = g
    else:
        triples = np.sort(np.asarray(triples, dtype=float), axis=1)
        if len(triples) == 0:
            raise ValueError("empty grid")
        diag_pts = np.unique(triples)
    s, u, t = triples.T
    viol = omega(s, u) + omega(u, t) - omega(s, t)
    w = int(np.argmax(viol))
    diag = np.abs(omega(diag_pts, diag_pts))
    return SuperadditivityReport(
        max_violation=float(max(viol[w], 0.0)),
        max_diagonal=float(np.max(diag)),
        worst_triple=tuple(float(x) for x in triples[w]),
        n_triples=len(triples),
    )


def sample_triples(rng: np.random.Generator, T: float, n: int) -> np.ndarray:
    return np.sort(rng.uniform(0.0, T, size=(n, 3)), axis=1)


# --- compositions and the controlling constant -----------------------------


def compositions(n: int) -> Iterator[tuple]:
    """All ordered tuples of positive integers summing to ``n``."""
    if n == 0:
        yield ()
        return
    for first in range(1, n + 1):
        for rest in compositions(n - first):
            yield (first,) + rest


def interleaving_count(comp: tuple) -> int:
    """Number of time orderings of the variables of a composed iterated integral.

    Block ``j`` of a composition contributes a chain of ``i_j`` integration
    variables ending at ``u_j``, and ``u_1 < ... < u_p``.  This poset is a
    rooted tree, so its linear extensions number ``n! / prod(subtree sizes)``.
    """
    n = sum(comp)
    denom = 1
    partial = 0
    for i in comp:
        partial += i
        denom *= math.factorial(i - 1) * partial
    return math.factorial(n) // denom


@lru_cache(maxsize=None)
def max_interleaving(n: int) -> int:
    return max(interleaving_count(c) for c in compositions(n))


def cor44_constant(omega0_0T: float, omega_0T: float, n_max: int = N_MAX_CAP) -> float:
    """Constant ``c`` making ``c (omega0 + omega) exp(omega0)`` control a generated driving.

    Valid for the inequalities up to level ``n_max``: each needs
    ``c^n >= R(n) exp(omega0(0,T)) max(1, omega(0,T))`` with ``R(n)`` the
    largest :func:`interleaving_count` among compositions of ``n``.
    """
    K = math.exp(omega0_0T) * max(1.0, omega_0T)
    return max((max_interleaving(n) * K) ** (1.0 / n) for n in range(1, n_max + 1))


# --- certification ---------------------------------------------------------


@dataclass
class CertificationReport:
    n_max: int
    T: float
    max_ratio_bound: dict
    max_ratio_increment: dict
    rows: list = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        vals = list(self.max_ratio_bound.values()) + list(self.max_ratio_increment.values())
        return max(vals) if vals else 0.0

    def passed(self, tol: float = 1e-9) -> bool:
        return self.max_ratio <= 1.0 + tol


def weighted_iterated_integrals(driving, comps, times, order: int | None = None) -> dict:
    """``e^{n x_0(t)} int e^{-i_1 x_0} dx_{i_1} ... e^{-i_p x_0} dx_{i_p}`` at ``times``.

    Returns ``{composition: values at times}``.  Indices beyond the driving's
    last path are treated as zero paths.
    """
    times = np.asarray(times, dtype=float)
    xk = driving.xk
    paths = [driving.x0] + list(xk)
    kw = {} if order is None else {"order": order}
    grid = StieltjesGrid.for_paths(paths, driving.T, extra=times, **kw)
    x0n = grid.values_at_nodes(driving.x0).real
    x0b = driving.x0(grid.breaks).real
    idx = grid.break_index(times)
    dx_cache = {}

    def dx(i):
        if i not in dx_cache:
            dx_cache[i] = grid.derivative_at_nodes(xk[i - 1]) * np.exp(-i * x0n)
        return dx_cache[i]

    memo = {(): (np.ones_like(grid.nodes, dtype=np.complex128), None)}

    def prefix(pre):
        if pre in memo:
            return memo[pre]
        inner, _ = prefix(pre[:-1])
        memo[pre] = grid.cumulative(inner * dx(pre[-1]))
        return memo[pre]

    out = {}
    for comp in comps:
        n = sum(comp)
        if any(i > len(xk) for i in comp):
            out[comp] = np.zeros(len(times), dtype=np.complex128)
            continue
        _, at_breaks = prefix(tuple(comp))
        out[comp] = np.exp(n * x0b[idx]) * at_breaks[idx]
    return out


def certify_lk_controlled(
    driving,
    omega: ControlFunction,
    grid,
    n_max: int = N_MAX_CAP,
    T: float | None = None,
    keep_rows: bool = True,
    n_cap: int = N_MAX_CAP,
) -> CertificationReport:
    """Check both controlling inequalities for every composition of ``n <= n_max``.

    ``T`` defaults to the driving's horizon; the increment bound uses
    ``omega(0, T)``.  Ratios are ``lhs / bound`` (0 when both vanish).
    """
    if n_max > n_cap:
        raise ValueError(f"n_max={n_max} exceeds the composition enumeration cap {n_cap}")
    grid = np.unique(np.asarray(grid, dtype=float))
    T = driving.T if T is None else float(T)
    if grid[0] < 0 or grid[-1] > driving.T + 1e-12:
        raise ValueError("grid outside the driving's domain")
    w0t = omega(np.zeros_like(grid), grid)
    w0T = float(omega(0.0, T))
    si, ti = np.triu_indices(len(grid), k=1)
    wst = omega(grid[si], grid[ti])

    comps = [c for n in range(1, n_max + 1) for c in compositions(n)]
    vals = weighted_iterated_integrals(driving, comps, grid)

    rb, ri, rows = {}, {}, []
    for comp in comps:
        n = sum(comp)
        v = vals[comp]
        lhs1 = np.abs(v)
        b1 = w0t**n / math.factorial(n)
        r1 = _ratio(lhs1, b1)
        lhs2 = np.abs(v[ti] - v[si])
        b2 = wst * w0T ** (n - 1) / math.factorial(n - 1)
        r2 = _ratio(lhs2, b2)
        rb[n] = max(rb.get(n, 0.0), float(np.max(r1)))
        ri[n] = max(ri.get(n, 0.0), float(np.max(r2)) if len(r2) else 0.0)
        if keep_rows:
            label = "-".join(map(str, comp))
            rows.extend(
                (n, label, 0.0, float(t), float(l), float(b), float(r), 1)
                for t, l, b, r in zip(grid, lhs1, b1, r1)
            )
            rows.extend(
                (n, label, float(grid[a]), float(grid[c]), float(l), float(b), float(r), 2)
                for a, c, l, b, r in zip(si, ti, lhs2, b2, r2)
            )
    return CertificationReport(n_max, T, rb, ri, rows)


CERTIFY_COLUMNS = ("n", "composition", "s", "t", "lhs", "bound", "ratio", "inequality")


def _ratio(lhs, bound):
    lhs = np.asarray(lhs, dtype=float)
    bound = np.broadcast_to(np.asarray(bound, dtype=float), lhs.shape)
    out = np.zeros_like(lhs)
    pos = bound > 0
    out[pos] = lhs[pos] / bound[pos]
    out[~pos & (lhs > 1e-300)] = np.inf
    return out
