"""Exterior maps, Grunsky coefficients, Faber polynomials and the Grunsky operator.

Sign convention: for the exterior map ``F(z) = 1/f(1/z)``,

    log((F(z) - F(w)) / (z - w)) = log L - sum_{m,n>=1} b_{m,n} z^{-m} w^{-n},

where ``L`` is the leading coefficient of ``F``.  With this choice
``b_{1,1} = a_2^2 - a_3`` for ``f = z + a_2 z^2 + a_3 z^3 + ...`` and
``Phi_n(F(z)) = z^n + n sum_k b_{n,k} z^{-k}``.  Indices are stored as
positive integers; ``b[m-1, n-1]`` is the coefficient written ``b_{-m,-n}``
elsewhere.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .control import ControlFunction
from .paths import StieltjesGrid
from .series import (
    LaurentTail,
    Polynomial,
    TruncatedSeries,
    poly_eval_on_tail,
    series_reciprocal,
)

DEFAULT_M = 12


def exterior_map(f: TruncatedSeries) -> LaurentTail:
    """``F(z) = 1/f(1/z) = z/a_1 + c_0 + sum_{k=1}^{N-2} c_k z^{-k}`` from ``f`` of order ``N``."""
    a = np.asarray(f.coeffs, dtype=np.complex128)
    N = len(a) - 1
    if N < 2:
        raise ValueError("need series order at least 2")
    if abs(a[0]) > 0:
        raise ValueError("f(0) must vanish")
    if a[1] == 0:
        raise ZeroDivisionError("f'(0) vanishes")
    # f(z) = a_1 z (1 + d_1 z + ...), d_j = a_{j+1}/a_1
    S = series_reciprocal(TruncatedSeries(a[1:] / a[1]))
    return LaurentTail(1.0 / a[1], S.coeffs[1:] / a[1])


@dataclass(frozen=True, eq=False)
class GrunskyTable:
    """``b[m-1, n-1]`` for ``1 <= m, n <= M``."""

    b: np.ndarray
    source: str = ""
    log_lead: complex = 0.0

    @property
    def M(self) -> int:
        return self.b.shape[0]

    def __getitem__(self, mn):
        m, n = mn
        if m < 1 or n < 1:
            raise IndexError("Grunsky indices start at 1")
        return self.b[m - 1, n - 1]


def required_order(M: int) -> int:
    """Series order needed for an exact ``M x M`` table."""
    return 2 * M + 1


def _mul2(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Product of bivariate series truncated at degree ``M`` in each variable."""
    K = A.shape[0]
    out = np.zeros_like(A)
    for i, j in zip(*np.nonzero(A)):
        out[i:, j:] += A[i, j] * B[: K - i, : K - j]
    return out


def grunsky_coefficients(f: TruncatedSeries, M: int = DEFAULT_M, source: str = "") -> GrunskyTable:
    """Table of ``b_{m,n}``, ``m, n <= M``.

    With ``u = 1/z``, ``v = 1/w`` the difference quotient is ``L (1 - X)`` where
    ``X = sum c_{m+n-1}/L u^m v^n``; the table is read off ``sum_k X^k / k``.
    Coefficient ``b_{m,n}`` involves ``a_1 .. a_{m+n+1}``, so the series order
    must be at least ``2M + 1``.
    """
    if M < 1:
        raise ValueError("M must be positive")
    if f.trunc_order < required_order(M):
        raise ValueError(f"series order {f.trunc_order} is too small for M={M}; need {required_order(M)}")
    F = exterior_map(f.truncate(required_order(M)))
    L = F.lead
    c = F.coeffs  # c[k] multiplies z^{-k}
    X = np.zeros((M + 1, M + 1), dtype=np.complex128)
    m, n = np.meshgrid(np.arange(1, M + 1), np.arange(1, M + 1), indexing="ij")
    X[1:, 1:] = c[m + n - 1] / L
    acc = X.copy()
    power = X
    # X has no terms below u v, so X^k vanishes under truncation once k > M
    for k in range(2, M + 1):
        power = _mul2(power, X)
        acc += power / k
    return GrunskyTable(acc[1:, 1:], source, complex(np.log(L)))


def faber_polynomial(f: TruncatedSeries, n: int) -> Polynomial:
    """``Phi_n`` with ``Phi_n(F(z)) = z^n + O(1/z)``.

    Matches the coefficients of ``z^n .. z^0`` against powers of ``F``; the
    system is upper triangular with diagonal ``L^j``.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    F = exterior_map(f)
    if n > F.trunc_order:
        raise ValueError("series order too small for this degree")
    Fl = F.as_laurent()
    powers = [None] * (n + 1)
    cur = None
    for j in range(1, n + 1):
        cur = Fl if cur is None else cur * Fl
        powers[j] = cur
    # U[i, j] = coefficient of z^i in F^j
    U = np.zeros((n + 1, n + 1), dtype=np.complex128)
    U[0, 0] = 1.0
    for j in range(1, n + 1):
        for i in range(0, j + 1):
            U[i, j] = powers[j].coeff(i)
    rhs = np.zeros(n + 1, dtype=np.complex128)
    rhs[n] = 1.0
    p = _solve_upper(U, rhs)
    return Polynomial(p)


def _solve_upper(U, rhs):
    n = len(rhs)
    x = np.zeros(n, dtype=np.complex128)
    for i in range(n - 1, -1, -1):
        if U[i, i] == 0:
            raise np.linalg.LinAlgError("singular triangular system")
        x[i] = (rhs[i] - U[i, i + 1:] @ x[i + 1:]) / U[i, i]
    return x


def faber_negative_part(f: TruncatedSeries, n: int, kmax: int) -> np.ndarray:
    """Coefficients of ``z^-1 .. z^-kmax`` in ``Phi_n(F(z))``."""
    return poly_eval_on_tail(faber_polynomial(f, n), exterior_map(f)).negative_part(kmax)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense truncation of an operator on ``l^2`` of the negative modes ``-1..-M``."""

    entries: np.ndarray
    rows: str = "-N"
    cols: str = "-N"

    @property
    def M(self) -> int:
        return self.entries.shape[0]

    @property
    def adjoint(self) -> "OperatorMatrix":
        return OperatorMatrix(self.entries.conj().T, self.cols, self.rows)

    def norm(self) -> float:
        return op_norm(self.entries)


def op_norm(X: np.ndarray) -> float:
    if X.size == 0:
        return 0.0
    return float(np.linalg.norm(X, 2))


def grunsky_operator(tbl: GrunskyTable) -> OperatorMatrix:
    """``B[k-1, n-1] = sqrt(k n) b_{k,n}``."""
    r = np.sqrt(np.arange(1, tbl.M + 1, dtype=float))
    return OperatorMatrix(tbl.b * np.outer(r, r))


def b11_flow_formula(driving, times) -> np.ndarray:
    """``b_{1,1}(t) = -e^{2 x_0(t)} int_0^t e^{-2 x_0} dx_2`` straight from the driving."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if driving.K < 2:
        return np.zeros(len(times), dtype=np.complex128)
    grid = StieltjesGrid.for_paths(driving.paths, driving.T, extra=times)
    x0n = grid.values_at_nodes(driving.x0).real
    _, at = grid.cumulative(np.exp(-2 * x0n) * grid.derivative_at_nodes(driving.xk[1]))
    return -np.exp(2 * driving.x0(times).real) * at[grid.break_index(times)]


# --- inequalities and bounds ------------------------------------------------


@dataclass
class GrunskyInequalityReport:
    sigma_max: float
    max_form_ratio: float
    tail_allowance: float = 0.0

    def passed(self, tol: float = 1e-8) -> bool:
        limit = 1.0 + tol + self.tail_allowance
        return self.sigma_max <= limit and self.max_form_ratio <= limit


def verify_grunsky_inequality(
    B: OperatorMatrix, trials: int = 64, rng=None, tail_allowance: float = 0.0
) -> GrunskyInequalityReport:
    """Largest singular value and the raw ratio

    ``sum_k k |sum_l b_{k,l} lam_l|^2 / sum_k |lam_k|^2 / k``

    over random complex ``lam``.
    """
    rng = np.random.default_rng(rng)
    M = B.M
    k = np.arange(1, M + 1, dtype=float)
    r = np.sqrt(k)
    b = B.entries / np.outer(r, r)
    lam = rng.normal(size=(trials, M)) + 1j * rng.normal(size=(trials, M))
    lhs = np.sum(k * np.abs(lam @ b.T) ** 2, axis=1)
    rhs = np.sum(np.abs(lam) ** 2 / k, axis=1)
    ratio = float(np.max(lhs / rhs)) if trials else 0.0
    return GrunskyInequalityReport(B.norm(), ratio, tail_allowance)


def bound_ii(m, n, w):
    """``(8 w)^{m+n} / (16 (m+n)(m+n-1)(m+n-2))`` for ``m + n >= 3``."""
    s = np.asarray(m) + np.asarray(n)
    return (8.0 * w) ** s / (16.0 * s * (s - 1) * (s - 2))


def bound_iii(m, n, wst, wT):
    s = np.asarray(m) + np.asarray(n)
    return wst * (8.0 * wT) ** (s - 1) / (16.0 * (s - 1) * (s - 2))


def grunsky_tail_bound(w: float, M: int, rel: float = 1e-18, max_degree: int = 100000) -> float:
    """Upper bound on the Hilbert-Schmidt norm of ``B`` outside the ``M x M`` block.

    Sums ``m n bound_ii(m, n)^2`` over ``max(m, n) > M`` degree by degree until
    the geometric terms become negligible.
    """
    q = 8.0 * w
    if q >= 1.0:
        return float("inf")
    if w == 0.0:
        return 0.0
    total = 0.0
    for s in range(M + 2, max_degree):
        m = np.arange(1, s)
        n = s - m
        mask = np.maximum(m, n) > M
        term = float(np.sum(m[mask] * n[mask] * bound_ii(m[mask], n[mask], w) ** 2))
        total += term
        if term <= rel * total and s > 2 * M + 4:
            break
    return float(np.sqrt(total))


@dataclass
class GrunskyBoundReport:
    max_ratio_i: float = 0.0
    max_ratio_i_increment: float = 0.0
    max_ratio_ii: float = 0.0
    max_ratio_iii: float = 0.0
    rows: list = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        return max(self.max_ratio_i, self.max_ratio_i_increment, self.max_ratio_ii, self.max_ratio_iii)

    def passed(self, tol: float = 1e-9) -> bool:
        return self.max_ratio <= 1.0 + tol


def _ratio(lhs, bound):
    lhs = np.asarray(lhs, dtype=float)
    bound = np.broadcast_to(np.asarray(bound, dtype=float), lhs.shape)
    out = np.zeros_like(lhs)
    pos = bound > 0
    out[pos] = lhs[pos] / bound[pos]
    out[~pos & (lhs > 1e-300)] = np.inf
    return out


def check_grunsky_bounds(
    times,
    tables,
    omega: ControlFunction,
    T: float | None = None,
    max_degree: int = 12,
    pairs=None,
) -> GrunskyBoundReport:
    """Ratios of measured Grunsky data to their ``omega`` bounds.

    Pointwise bounds are checked at every time; increment bounds on ``pairs``
    (index pairs ``(i, j)`` with ``times[i] < times[j]``, default all pairs).
    Rows are ``(kind, m, n, s, t, lhs, bound, ratio)``.
    """
    times = np.asarray(times, dtype=float)
    T = float(times[-1]) if T is None else float(T)
    wT = float(omega(0.0, T))
    M = min(tbl.M for tbl in tables)
    bs = np.array([tbl.b[:M, :M] for tbl in tables])
    mm, nn = np.meshgrid(np.arange(1, M + 1), np.arange(1, M + 1), indexing="ij")
    sel = (mm + nn >= 3) & (mm + nn <= max_degree)
    rep = GrunskyBoundReport()
    w0t = omega(np.zeros_like(times), times)

    r = _ratio(np.abs(bs[:, 0, 0]), w0t**2 / 2)
    rep.max_ratio_i = float(np.max(r))
    rep.rows += [("i", 1, 1, 0.0, t, abs(bs[j, 0, 0]), w0t[j] ** 2 / 2, r[j]) for j, t in enumerate(times)]
    for j, t in enumerate(times):
        lhs = np.abs(bs[j][sel])
        bd = bound_ii(mm[sel], nn[sel], w0t[j])
        rr = _ratio(lhs, bd)
        rep.max_ratio_ii = max(rep.max_ratio_ii, float(np.max(rr, initial=0.0)))
        rep.rows += [("ii", m, n, 0.0, t, l, b_, x) for m, n, l, b_, x in zip(mm[sel], nn[sel], lhs, bd, rr)]

    if pairs is None:
        pairs = list(zip(*np.triu_indices(len(times), k=1)))
    for i, j in pairs:
        s, t = times[i], times[j]
        wst = float(omega(s, t))
        d = bs[j] - bs[i]
        lhs1 = abs(d[0, 0])
        r1 = float(_ratio(lhs1, wst * wT))
        rep.max_ratio_i_increment = max(rep.max_ratio_i_increment, r1)
        rep.rows.append(("i_increment", 1, 1, s, t, lhs1, wst * wT, r1))
        lhs = np.abs(d[sel])
        bd = bound_iii(mm[sel], nn[sel], wst, wT)
        rr = _ratio(lhs, bd)
        rep.max_ratio_iii = max(rep.max_ratio_iii, float(np.max(rr, initial=0.0)))
        rep.rows += [("iii", m, n, s, t, l, b_, x) for m, n, l, b_, x in zip(mm[sel], nn[sel], lhs, bd, rr)]
    return rep


def modulus_constant(wT: float) -> float:
    """``c = 8 w / (1 - (8 w)^2)``; requires ``w < 1/8``."""
    q = 8.0 * wT
    if q >= 1.0:
        raise ValueError(f"omega(0,T) = {wT} is not below 1/8")
    return q / (1.0 - q * q)


@dataclass
class OperatorModulusReport:
    c: float
    max_ratio_B: float = 0.0
    max_ratio_A: float = 0.0
    max_ratio_frobenius: float = 0.0
    rows: list = field(default_factory=list)

    def passed(self, tol: float = 1e-9) -> bool:
        return max(self.max_ratio_B, self.max_ratio_A) <= 1.0 + tol


def frobenius_majorant(M: int, wst: float, wT: float) -> float:
    """Square root of ``sum_{m,n<=M} m n |bound on b_{m,n}(t) - b_{m,n}(s)|^2``."""
    m, n = np.meshgrid(np.arange(1, M + 1), np.arange(1, M + 1), indexing="ij")
    bd = np.zeros(m.shape)
    hi = m + n >= 3
    bd[hi] = bound_iii(m[hi], n[hi], wst, wT)
    bd[0, 0] = wst * wT
    return float(np.sqrt(np.sum(m * n * bd**2)))


def check_operator_modulus(times, Bs, omega: ControlFunction, T: float, pairs=None) -> OperatorModulusReport:
    """``||B_t - B_s|| <= c omega(s,t)`` and ``||A_t - A_s|| <= 2 c omega(s,t)``.

    ``A = (I + B B*)^{-1}``.  Refuses when ``omega(0,T) >= 1/8``.  The
    Hilbert-Schmidt majorant built from the entrywise increment bounds is
    reported alongside and must dominate ``||B_t - B_s||``.
    Rows are ``(s, t, omega, normB, boundB, normA, boundA, frob, majorant)``.
    """
    from .grassmann import a_matrix

    times = np.asarray(times, dtype=float)
    wT = float(omega(0.0, T))
    c = modulus_constant(wT)
    mats = [B.entries if isinstance(B, OperatorMatrix) else np.asarray(B) for B in Bs]
    As = [a_matrix(B) for B in mats]
    rep = OperatorModulusReport(c)
    if pairs is None:
        pairs = list(zip(*np.triu_indices(len(times), k=1)))
    for i, j in pairs:
        s, t = times[i], times[j]
        wst = float(omega(s, t))
        dB = op_norm(mats[j] - mats[i])
        dA = op_norm(As[j] - As[i])
        frob = float(np.linalg.norm(mats[j] - mats[i]))
        maj = frobenius_majorant(mats[i].shape[0], wst, wT)
        rB = float(_ratio(dB, c * wst))
        rA = float(_ratio(dA, 2 * c * wst))
        rF = float(_ratio(frob, maj))
        rep.max_ratio_B = max(rep.max_ratio_B, rB)
        rep.max_ratio_A = max(rep.max_ratio_A, rA)
        rep.max_ratio_frobenius = max(rep.max_ratio_frobenius, rF)
        rep.rows.append((s, t, wst, dB, c * wst, dA, 2 * c * wst, frob, maj))
    return rep


GRUNSKY_COLUMNS = ("t", "m", "n", "re", "im")


def write_grunsky_csv(times, tables, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GRUNSKY_COLUMNS)
        for t, tbl in zip(times, tables):
            for m in range(1, tbl.M + 1):
                for n in range(1, tbl.M + 1):
                    z = tbl[m, n]
                    w.writerow([format(t, ".17g"), m, n, format(z.real, ".17g"), format(z.imag, ".17g")])
