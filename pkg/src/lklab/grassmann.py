"""Truncated H^{1/2} model and projections onto the Faber frame.

Operators act on coordinates in the orthonormal basis

    z^1/sqrt(1), ..., z^M/sqrt(M),  1,  z^-1/sqrt(1), ..., z^-M/sqrt(M)

(in this order), so H^{1/2} operator norms are spectral norms.  The frame
vector ``w_n = z^n + n sum_k b_{n,k} z^{-k}`` has coordinates ``[e_n; 0; B e_n]``
and ``P`` is the orthogonal projection onto their span and the constants.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .control import ControlFunction
from .grunsky import OperatorMatrix, grunsky_tail_bound, modulus_constant, op_norm


@dataclass(frozen=True, eq=False)
class SobolevVector:
    """``h = sum_k h_k z^k`` on ``-K..K``; ``h_neg[k-1]`` is the coefficient of ``z^-k``."""

    h_neg: np.ndarray
    h0: complex
    h_pos: np.ndarray

    def __post_init__(self):
        neg = np.asarray(self.h_neg, dtype=np.complex128)
        pos = np.asarray(self.h_pos, dtype=np.complex128)
        if neg.shape != pos.shape or neg.ndim != 1:
            raise ValueError("positive and negative windows must match")
        object.__setattr__(self, "h_neg", neg)
        object.__setattr__(self, "h_pos", pos)
        object.__setattr__(self, "h0", complex(self.h0))

    @property
    def K(self) -> int:
        return len(self.h_pos)

    @classmethod
    def monomial(cls, k: int, K: int, coeff: complex = 1.0) -> "SobolevVector":
        neg = np.zeros(K, dtype=np.complex128)
        pos = np.zeros(K, dtype=np.complex128)
        h0 = 0.0
        if k > 0:
            pos[k - 1] = coeff
        elif k < 0:
            neg[-k - 1] = coeff
        else:
            h0 = coeff
        return cls(neg, h0, pos)

    def norm(self) -> float:
        k = np.arange(1, self.K + 1)
        sq = abs(self.h0) ** 2 + np.sum(k * (np.abs(self.h_pos) ** 2 + np.abs(self.h_neg) ** 2))
        return float(np.sqrt(sq))

    def coords(self, M: int) -> np.ndarray:
        """Orthonormal coordinates restricted to the window ``M``."""
        r = np.sqrt(np.arange(1, M + 1))
        return np.concatenate([r * self.h_pos[:M], [self.h0], r * self.h_neg[:M]])

    @classmethod
    def from_coords(cls, x: np.ndarray, M: int, K: int | None = None) -> "SobolevVector":
        K = M if K is None else K
        r = np.sqrt(np.arange(1, M + 1))
        pos = np.zeros(K, dtype=np.complex128)
        neg = np.zeros(K, dtype=np.complex128)
        pos[:M] = x[:M] / r
        neg[:M] = x[M + 1:] / r
        return cls(neg, x[M], pos)


def lambda_weight(K: int) -> np.ndarray:
    """``sqrt(|n|)`` for ``n = -K..K`` with ``1`` at ``n = 0``."""
    n = np.abs(np.arange(-K, K + 1))
    return np.where(n == 0, 1.0, np.sqrt(n))


def _entries(B) -> np.ndarray:
    return B.entries if isinstance(B, OperatorMatrix) else np.asarray(B, dtype=np.complex128)


def a_matrix(B) -> np.ndarray:
    """``(I + B B*)^{-1}`` by Cholesky."""
    B = _entries(B)
    M = B.shape[0]
    G = np.eye(M) + B @ B.conj().T
    return cho_solve(cho_factor(G, lower=True), np.eye(M, dtype=np.complex128))


@dataclass(frozen=True, eq=False)
class ProjectionBlocks:
    """Nonzero blocks of ``P``; the constant mode is fixed."""

    B: np.ndarray
    A: np.ndarray
    P11: np.ndarray
    P13: np.ndarray
    P31: np.ndarray
    P33: np.ndarray

    @property
    def M(self) -> int:
        return self.B.shape[0]

    def assemble(self) -> np.ndarray:
        M = self.M
        P = np.zeros((2 * M + 1, 2 * M + 1), dtype=np.complex128)
        P[:M, :M] = self.P11
        P[:M, M + 1:] = self.P13
        P[M, M] = 1.0
        P[M + 1:, :M] = self.P31
        P[M + 1:, M + 1:] = self.P33
        return P

    def frame(self) -> np.ndarray:
        """Columns ``w_n / sqrt(n)`` in orthonormal coordinates."""
        M = self.M
        W = np.zeros((2 * M + 1, M), dtype=np.complex128)
        W[:M] = np.eye(M)
        W[M + 1:] = self.B
        return W

    def complement(self) -> np.ndarray:
        """Columns ``[-B*; 0; I]`` spanning the orthogonal complement."""
        M = self.M
        V = np.zeros((2 * M + 1, M), dtype=np.complex128)
        V[:M] = -self.B.conj().T
        V[M + 1:] = np.eye(M)
        return V


@dataclass
class ProjectionResiduals:
    idempotence: float
    self_adjoint: float
    block_31: float
    block_33: float
    frame_fixed: float
    complement_killed: float


def projection_residuals(P: ProjectionBlocks) -> ProjectionResiduals:
    X = P.assemble()
    B, A = P.B, P.A
    return ProjectionResiduals(
        idempotence=op_norm(X @ X - X),
        self_adjoint=op_norm(X - X.conj().T),
        block_31=op_norm(P.P31 - A @ B),
        block_33=op_norm(P.P33 - (np.eye(P.M) - A)),
        frame_fixed=op_norm(X @ P.frame() - P.frame()),
        complement_killed=op_norm(X @ P.complement()),
    )


def projection_blocks(B, tol: float = 1e-10) -> ProjectionBlocks:
    """Blocks ``I - B*AB``, ``B*A``, ``B(I - B*AB)``, ``BB*A``; validated on construction."""
    B = _entries(B)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError("B must be square")
    A = a_matrix(B)
    Bh = B.conj().T
    P11 = np.eye(B.shape[0]) - Bh @ A @ B
    blocks = ProjectionBlocks(B, A, P11, Bh @ A, B @ P11, B @ Bh @ A)
    res = projection_residuals(blocks)
    if res.idempotence > tol or res.self_adjoint > tol:
        raise ValueError(
            f"projection residuals too large (idempotence {res.idempotence:.2e}, "
            f"self-adjointness {res.self_adjoint:.2e}); truncation may be too small"
        )
    return blocks


def project(h: SobolevVector, P: ProjectionBlocks) -> SobolevVector:
    M = P.M
    if h.K < M:
        raise ValueError("vector window smaller than the projection window")
    if np.any(h.h_pos[M:]) or np.any(h.h_neg[M:]):
        warnings.warn("modes beyond the projection window are dropped", RuntimeWarning, stacklevel=2)
    return SobolevVector.from_coords(P.assemble() @ h.coords(M), M, h.K)


def op_norm_h12(X: np.ndarray) -> float:
    """Operator norm in H^{1/2} of a matrix given in orthonormal coordinates."""
    return op_norm(np.asarray(X))


# --- continuity experiment -------------------------------------------------


TERM_NAMES = ("termI", "termII", "termIII", "termIV", "termV")


def five_terms(Bs: np.ndarray, Bt: np.ndarray, As: np.ndarray | None = None, At: np.ndarray | None = None):
    """Measured squared norms ``I..V`` of the block differences and their estimates.

    Returns ``(terms, estimates)``.  The estimates are expressed through
    ``||B_t - B_s||`` and ``||A_t - A_s||`` and dominate the terms.
    """
    As = a_matrix(Bs) if As is None else As
    At = a_matrix(Bt) if At is None else At
    n = op_norm
    Bsh, Bth = Bs.conj().T, Bt.conj().T
    dB = Bt - Bs
    dA = At - As
    terms = (
        n(Bsh @ As @ Bs - Bth @ At @ Bt) ** 2,
        n(Bth @ At - Bsh @ As) ** 2,
        n(dB) ** 2,
        n(Bt @ Bth @ At @ Bt - Bs @ Bsh @ As @ Bs) ** 2,
        n(Bt @ Bth @ At - Bs @ Bsh @ As) ** 2,
    )
    nb, na = n(dB) ** 2, n(dA) ** 2
    AsBs, AtBt = n(As @ Bs) ** 2, n(At @ Bt) ** 2
    BthAt, BthAtBt = n(Bth @ At) ** 2, n(Bth @ At @ Bt) ** 2
    nBs, nBt, nAt = n(Bs) ** 2, n(Bt) ** 2, n(At) ** 2
    BBA_s, BBAB_s = n(Bs @ Bsh @ As) ** 2, n(Bs @ Bsh @ As @ Bs) ** 2
    est = (
        3 * (nb * AsBs + nBt * na * nBs + BthAt * nb),
        2 * (nb * nAt + nBs * na),
        nb,
        5 * (nb * BthAtBt + nBs * nb * AtBt + BBAB_s * nb * AtBt + BBA_s * nb * BthAtBt + BBA_s * nb),
        3 * (nb * BthAt + nBs * nb * nAt + n(Bs @ Bsh) ** 2 * na),
    )
    return terms, est


@dataclass
class ExperimentReport:
    """Per-pair measurements and the summary of a continuity run."""

    M: int
    omega_0T: float
    rows: list = field(default_factory=list)
    c_star: float = 0.0
    slope: float = float("nan")
    proportional_fit: float = float("nan")
    max_decomposition_ratio: float = 0.0
    max_term_ratio: float = 0.0
    max_projection_residual: float = 0.0
    tail_certificate: float = 0.0
    modulus_constant: float = 0.0

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.c_star))


CONTINUITY_COLUMNS = ("s", "t", "omega", "opnorm", "ratio") + TERM_NAMES


def continuity_experiment(times, Bs, omega: ControlFunction, T: float, pairs=None) -> ExperimentReport:
    """``||P_t - P_s||_op / omega(s,t)`` over pairs of snapshots.

    ``Bs`` are the Grunsky operators at ``times``.  Refuses when
    ``omega(0,T) >= 1/8``.  Diagonal pairs get ratio 0.
    """
    times = np.asarray(times, dtype=float)
    wT = float(omega(0.0, T))
    c = modulus_constant(wT)
    mats = [_entries(B) for B in Bs]
    M = mats[0].shape[0]
    blocks = [projection_blocks(B) for B in mats]
    Ps = [b.assemble() for b in blocks]
    rep = ExperimentReport(M=M, omega_0T=wT, modulus_constant=c)
    rep.tail_certificate = grunsky_tail_bound(wT, M)
    rep.max_projection_residual = max(
        max(r.idempotence, r.self_adjoint) for r in map(projection_residuals, blocks)
    )
    if pairs is None:
        pairs = list(zip(*np.triu_indices(len(times), k=1)))
    ws, norms = [], []
    for i, j in pairs:
        s, t = times[i], times[j]
        wst = float(omega(s, t))
        d = op_norm_h12(Ps[j] - Ps[i])
        terms, est = five_terms(mats[i], mats[j], blocks[i].A, blocks[j].A)
        if wst > 0:
            ratio = d / wst
        else:
            ratio = 0.0 if d <= 1e-300 else float("inf")
        combo = 2 * (terms[0] + terms[1]) + 3 * (terms[2] + terms[3] + terms[4])
        if d > 0:
            rep.max_decomposition_ratio = max(rep.max_decomposition_ratio, d * d / combo)
        for tm, es in zip(terms, est):
            if es > 0:
                rep.max_term_ratio = max(rep.max_term_ratio, tm / es)
            elif tm > 1e-300:
                rep.max_term_ratio = float("inf")
        rep.c_star = max(rep.c_star, ratio)
        rep.rows.append((s, t, wst, d, ratio) + tuple(terms))
        if wst > 0 and d > 0:
            ws.append(wst)
            norms.append(d)
    if len(ws) >= 2:
        lw, ln = np.log(ws), np.log(norms)
        rep.slope = float(np.polyfit(lw, ln, 1)[0])
        w_arr, n_arr = np.asarray(ws), np.asarray(norms)
        rep.proportional_fit = float(np.dot(w_arr, n_arr) / np.dot(w_arr, w_arr))
    return rep


def write_rows_csv(columns, rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([format(x, ".17g") if isinstance(x, float) else x for x in row])
