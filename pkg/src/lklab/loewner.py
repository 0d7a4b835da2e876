"""Taylor-coefficient flows of the controlled Loewner-Kufarev equation.

Writing ``f_t(z) = sum_n a_n(t) z^n``, the equation reads coefficientwise

    da_n = n a_n dx_0 + sum_{k=1}^{n-1} k a_k dx_{n-k},    a_1 = e^{x_0}.

With ``u_n = e^{-n x_0} a_n`` this becomes the triangular system
``du_n = sum_k k u_k e^{-(n-k) x_0} dx_{n-k}``, ``u_1 = 1``, which is solved
level by level as plain Stieltjes integrals.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .control import (
    N_MAX_CAP,
    ControlFunction,
    compose_control,
    compositions,
    cor44_constant,
    one_variation,
    weighted_iterated_integrals,
)
from .paths import PiecewisePath, StieltjesGrid, iterated_integral_path, path_from_json
from .series import TruncatedSeries

DEFAULT_N = 24
DEFAULT_GRID = 64
MAX_N = 64
CLOSED_FORM_CAP = 8


@dataclass(frozen=True, eq=False)
class DrivingSpec:
    """Real ``x0`` and complex ``x_1, ..., x_K`` on a common horizon."""

    x0: object
    xk: tuple
    generator_meta: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "xk", tuple(self.xk))
        if len(self.xk) < 1:
            raise ValueError("a driving needs at least x_1")
        if abs(complex(self.x0(0.0))) > 1e-14:
            raise ValueError("x_0(0) must vanish")
        if np.max(np.abs(np.imag(self.x0(self.x0.knots)))) > 1e-14:
            raise ValueError("x_0 must be real")
        T = self.x0.T
        if any(abs(p.T - T) > 1e-12 * max(T, 1.0) for p in self.xk):
            raise ValueError("all driving paths must share the horizon of x_0")

    @property
    def T(self) -> float:
        return self.x0.T

    @property
    def K(self) -> int:
        return len(self.xk)

    @property
    def paths(self) -> list:
        return [self.x0, *self.xk]

    def to_json(self) -> dict:
        return {"x0": self.x0.to_json(), "xk": [p.to_json() for p in self.xk]}

    @classmethod
    def from_json(cls, doc: dict) -> "DrivingSpec":
        return cls(path_from_json(doc["x0"]), [path_from_json(d) for d in doc["xk"]])


@dataclass(frozen=True, eq=False)
class FlowState:
    """Coefficients ``a[0..N]`` of ``f_t`` (``a[0] = 0``) at time ``t``."""

    t: float
    a: np.ndarray

    @property
    def trunc_order(self) -> int:
        return len(self.a) - 1

    @property
    def series(self) -> TruncatedSeries:
        return TruncatedSeries(self.a)

    @property
    def normalized(self) -> np.ndarray:
        """``c_n = a_n / a_1``, so ``c_1 = 1``."""
        return self.a / self.a[1]

    @property
    def log_a1(self) -> complex:
        return complex(np.log(self.a[1]))


def _check_generator_path(y, omega, label):
    pts = np.unique(np.concatenate([y.knots, np.linspace(0.0, y.T, 33)]))
    si, ti = np.triu_indices(len(pts), k=1)
    var = one_variation(y, pts[si], pts[ti])
    bound = omega(pts[si], pts[ti])
    excess = np.max(var - bound)
    if excess > 1e-12 * max(1.0, float(np.max(bound))):
        raise ValueError(f"generator path {label} is not controlled by omega (excess {excess:.3g})")


def make_driving(
    y_paths,
    omega: ControlFunction,
    x0: PiecewisePath,
    omega0: ControlFunction | None = None,
    n_max: int | None = None,
) -> DrivingSpec:
    """Build ``x_n(t) = int_{0<s_1<...<s_n<t} dy^n_1 ... dy^n_n`` from generator paths.

    ``y_paths[n-1]`` must hold the ``n`` paths ``y^n_1..y^n_n``.  Each is
    checked against ``omega``.  The resulting ``x_n`` are exact piecewise
    polynomials.  ``generator_meta`` records the inputs and a control that
    certifies the driving up to level ``n_max`` (default: the
    composition-enumeration cap).
    """
    if omega0 is None:
        omega0 = ControlFunction.from_path_variation(x0)
    _check_generator_path(x0, omega0, "x0")
    xk = []
    for n, ys in enumerate(y_paths, start=1):
        if len(ys) != n:
            raise ValueError(f"level {n} needs {n} generator paths, got {len(ys)}")
        for i, y in enumerate(ys, start=1):
            _check_generator_path(y, omega, f"y^{n}_{i}")
        xk.append(iterated_integral_path(list(ys)))
    if not xk:
        raise ValueError("no generator paths given")
    T = x0.T
    n_max = N_MAX_CAP if n_max is None else n_max
    c = cor44_constant(float(omega0(0.0, T)), float(omega(0.0, T)), n_max)
    meta = {
        "y_paths": [list(ys) for ys in y_paths],
        "omega": omega,
        "omega0": omega0,
        "c": c,
        "n_max": n_max,
        "certifying_control": ControlFunction.scaled(c, compose_control(omega0, omega)),
    }
    return DrivingSpec(x0, xk, meta)


def _solve_grid(driving: DrivingSpec, t_grid, min_cells: int):
    return StieltjesGrid.for_paths(driving.paths, driving.T, extra=t_grid, min_cells=min_cells)


def solve_coefficients(
    driving: DrivingSpec, t_grid, N: int = DEFAULT_N, min_cells: int = 16
) -> list[FlowState]:
    """Coefficients ``a_1..a_N`` of ``f_t`` at each time of ``t_grid``."""
    if not 1 <= N <= MAX_N:
        raise ValueError(f"N must lie in [1, {MAX_N}]")
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0) or np.any(t_grid > driving.T * (1 + 1e-12)):
        raise ValueError("t_grid outside the driving's domain")
    t_grid = np.clip(t_grid, 0.0, driving.T)
    grid = _solve_grid(driving, t_grid, min_cells)
    x0n = grid.values_at_nodes(driving.x0).real
    dxk = [grid.derivative_at_nodes(p) for p in driving.xk]
    # e^{-j x0} dx_j at the nodes
    weighted = [np.exp(-j * x0n) * dxk[j - 1] for j in range(1, driving.K + 1)]

    u_nodes = [None, np.ones_like(grid.nodes, dtype=np.complex128)]
    u_breaks = [None, np.ones(len(grid.breaks), dtype=np.complex128)]
    for n in range(2, N + 1):
        integrand = np.zeros_like(grid.nodes, dtype=np.complex128)
        for k in range(max(1, n - driving.K), n):
            integrand += k * u_nodes[k] * weighted[n - k - 1]
        un, ub = grid.cumulative(integrand)
        u_nodes.append(un)
        u_breaks.append(ub)

    idx = grid.break_index(t_grid)
    x0t = driving.x0(t_grid).real
    states = []
    for j, t in enumerate(t_grid):
        a = np.zeros(N + 1, dtype=np.complex128)
        for n in range(1, N + 1):
            a[n] = np.exp(n * x0t[j]) * u_breaks[n][idx[j]]
        states.append(FlowState(float(t), a))
    return states


def composition_weight(comp: tuple) -> int:
    """``prod_j (1 + i_1 + ... + i_{j-1})``."""
    w, s = 1, 0
    for i in comp:
        w *= 1 + s
        s += i
    return w


def coeff_closed_form(driving: DrivingSpec, t, n: int, cap: int = CLOSED_FORM_CAP):
    """``a_n(t)`` as a weighted sum of iterated integrals over compositions of ``n - 1``.

    Independent of :func:`solve_coefficients`; intended as its oracle.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n > cap:
        raise ValueError(f"n={n} exceeds the composition enumeration cap {cap}")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    x0t = driving.x0(t_arr).real
    if n == 1:
        out = np.exp(x0t).astype(np.complex128)
    else:
        comps = list(compositions(n - 1))
        vals = weighted_iterated_integrals(driving, comps, t_arr)
        # vals carry e^{(n-1) x0(t)}; one more factor gives e^{n x0(t)}
        out = np.exp(x0t) * sum(composition_weight(c) * vals[c] for c in comps)
    return out if np.ndim(t) else complex(out[0])


# --- coefficient bounds ----------------------------------------------------


@lru_cache(maxsize=None)
def weighted_bound_factor(n: int) -> int:
    """Sum of :func:`composition_weight` over all compositions of ``n``.

    Splitting off the last part ``k`` gives ``W(n) = sum_k (n - k + 1) W(n - k)``.
    """
    if n == 0:
        return 1
    return sum((n - k + 1) * weighted_bound_factor(n - k) for k in range(1, n + 1))


@dataclass
class CoeffBoundReport:
    rows: list = field(default_factory=list)
    max_ratio: float = 0.0
    max_weighted_ratio: float = 0.0
    partial_sums: dict = field(default_factory=dict)
    boundedness_bound: dict = field(default_factory=dict)
    univalence_sum: dict = field(default_factory=dict)
    log_a1: dict = field(default_factory=dict)

    def passed(self, tol: float = 1e-9) -> bool:
        return self.max_ratio <= 1 + tol

    @property
    def univalence_surrogate_holds(self) -> bool:
        return all(v < 1.0 for v in self.univalence_sum.values())


def check_coeff_bounds(states, omega: ControlFunction, weighted_cap: int = 20) -> CoeffBoundReport:
    """Compare normalised coefficients against ``|c_{n+1}(t)| <= n (4 omega(0,t))^n / 4``.

    ``c_{n+1}`` is the coefficient of ``z^{n+1}`` in ``f_t / a_1(t)``; it is
    built from compositions of ``n``.  The sharper weighted-composition bound
    ``sum_comp weight * omega^n / n!`` is reported alongside for
    ``n <= weighted_cap``.  Per time, ``sum |c_n|`` is compared with
    ``1 + omega / (1 - 4 omega)^2`` when ``omega < 1/4``.
    """
    rep = CoeffBoundReport()
    for st in states:
        w = float(omega(0.0, st.t))
        c = st.normalized
        absc = np.abs(c)
        for n in range(1, st.trunc_order):
            bound = n * (4 * w) ** n / 4
            ratio = _safe_ratio(absc[n + 1], bound)
            wb = (
                weighted_bound_factor(n) * w**n / math.factorial(n)
                if n <= weighted_cap
                else float("nan")
            )
            wr = _safe_ratio(absc[n + 1], wb) if n <= weighted_cap else float("nan")
            rep.rows.append((st.t, n + 1, float(absc[n + 1]), bound, ratio, wb, wr))
            rep.max_ratio = max(rep.max_ratio, ratio)
            if n <= weighted_cap:
                rep.max_weighted_ratio = max(rep.max_weighted_ratio, wr)
        rep.partial_sums[st.t] = float(np.sum(absc[1:]))
        rep.boundedness_bound[st.t] = 1 + w / (1 - 4 * w) ** 2 if w < 0.25 else float("inf")
        rep.univalence_sum[st.t] = float(np.sum(np.arange(2, len(c)) * absc[2:]))
        rep.log_a1[st.t] = st.log_a1
    return rep


def _safe_ratio(lhs, bound):
    if bound > 0:
        return float(lhs / bound)
    return 0.0 if lhs <= 1e-300 else float("inf")


# --- flows on disk ---------------------------------------------------------


@dataclass
class Flow:
    """A named driving with the control that certifies it."""

    name: str
    driving: DrivingSpec
    control: ControlFunction
    t_grid: np.ndarray
    N: int = DEFAULT_N


def _paths_from(docs):
    return [path_from_json(d) for d in docs]


def load_flow(source) -> Flow:
    """Read a flow config from a path or a parsed dict.

    Either ``xk`` (explicit driving paths plus ``control``) or ``generator``
    (``y`` paths per level plus ``omega``; the certifying control is built
    from them) must be present.
    """
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = source
    x0 = path_from_json(doc["x0"]) if "x0" in doc else PiecewisePath.zero(float(doc["T"]))
    if "generator" in doc:
        g = doc["generator"]
        omega = ControlFunction.from_json(g["omega"])
        omega0 = ControlFunction.from_json(g["omega0"]) if "omega0" in g else None
        driving = make_driving([_paths_from(ys) for ys in g["y"]], omega, x0, omega0)
        control = driving.generator_meta["certifying_control"]
    else:
        driving = DrivingSpec(x0, _paths_from(doc["xk"]))
        control = ControlFunction.from_json(doc["control"])
    n_grid = int(doc.get("grid", DEFAULT_GRID))
    t_grid = np.linspace(0.0, driving.T, n_grid)
    return Flow(doc.get("name", "flow"), driving, control, t_grid, int(doc.get("N", DEFAULT_N)))


STATE_COLUMNS = ("t", "n", "re", "im")


def write_states_csv(states, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATE_COLUMNS)
        for st in states:
            for n in range(1, st.trunc_order + 1):
                z = st.a[n]
                w.writerow([format(st.t, ".17g"), n, format(z.real, ".17g"), format(z.imag, ".17g")])


def read_states_csv(path) -> list[FlowState]:
    by_t: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            by_t.setdefault(float(row["t"]), {})[int(row["n"])] = complex(
                float(row["re"]), float(row["im"])
            )
    states = []
    for t in sorted(by_t):
        d = by_t[t]
        a = np.zeros(max(d) + 1, dtype=np.complex128)
        for n, z in d.items():
            a[n] = z
        states.append(FlowState(t, a))
    return states
