"""Cauchy transforms, the second-order Ward expansion, GUE Monte Carlo and harmonic moments.

Second-order expansion: with ``u = 1/z``, ``v = 1/w`` and ``g(u) = G(1/u) = u M(u)``,

    G(z, w) = G'(z) G'(w) / (G(z) - G(w))^2 - 1/(z - w)^2 = u^2 v^2 K(u, v),
    K = (g'(u) g'(v) - H^2) / ((u - v)^2 H^2),   g(u) - g(v) = (u - v) H(u, v),

and ``alpha_{m,n}`` is the coefficient of ``u^(m-1) v^(n-1)`` in ``K``.  The
double zero on the diagonal is divided out exactly on homogeneous components.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .series import LaurentTail


@dataclass(frozen=True, eq=False)
class CauchyData:
    """Moments ``m_1..m_K`` (``m_0 = 1`` implicit) and ``G(z) = sum_k m_k z^{-k-1}``."""

    moments: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.moments, dtype=float)
        if m.ndim != 1 or len(m) < 1:
            raise ValueError("need at least one moment")
        object.__setattr__(self, "moments", m)

    @property
    def K(self) -> int:
        return len(self.moments)

    @property
    def full(self) -> np.ndarray:
        """``m_0, m_1, ..., m_K``."""
        return np.concatenate([[1.0], self.moments])

    @property
    def G(self) -> LaurentTail:
        return LaurentTail(0.0, np.concatenate([[0.0], self.full]))


def cauchy_from_moments(moments) -> CauchyData:
    return CauchyData(moments)


def semicircle_moments(K: int) -> np.ndarray:
    """``m_1..m_K`` of the standard semicircle law: Catalan numbers at even orders."""
    m = np.zeros(K)
    for k in range(2, K + 1, 2):
        j = k // 2
        m[k - 1] = math.comb(2 * j, j) // (j + 1)
    return m


@dataclass
class SecondOrderTable:
    """``alpha[m-1, n-1]``; Monte Carlo tables also carry standard errors."""

    alpha: np.ndarray
    se: np.ndarray | None = None
    mean: np.ndarray | None = None
    mean_se: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.alpha.shape[0]

    def __getitem__(self, mn):
        m, n = mn
        return self.alpha[m - 1, n - 1]


# --- bivariate series with total-degree truncation -------------------------


def _trunc(A: np.ndarray, D: int) -> np.ndarray:
    i, j = np.indices(A.shape)
    out = A[: D + 1, : D + 1].copy()
    out[(i + j)[: D + 1, : D + 1] > D] = 0.0
    return out


def _bmul(A: np.ndarray, B: np.ndarray, D: int) -> np.ndarray:
    return _trunc(convolve2d(A, B), D)


def _divide_diagonal(P: np.ndarray, tol: float) -> np.ndarray:
    """``Q`` with ``P = (u - v) Q`` on each homogeneous component of ``P``.

    ``P`` is truncated at total degree ``D`` (shape ``(D+1, D+1)``); ``Q`` at
    ``D - 1``.  Raises if some component does not vanish on ``u = v``.
    """
    D = P.shape[0] - 1
    Q = np.zeros((D, D))
    scale = max(1.0, float(np.max(np.abs(P))))
    for d in range(1, D + 1):
        j = np.arange(d + 1)
        # coefficient of u^j v^(d-j) is q_{j-1} - q_j
        q = -np.cumsum(P[j, d - j])
        if abs(q[-1]) > tol * scale:
            raise ValueError("numerator does not vanish on the diagonal")
        Q[j[:-1], d - 1 - j[:-1]] = q[:-1]
    if abs(P[0, 0]) > tol * scale:
        raise ValueError("numerator does not vanish on the diagonal")
    return Q


def ward_second_order(G: CauchyData, K: int, tol: float = 1e-9) -> SecondOrderTable:
    """``alpha_{m,n}``, ``m, n <= K``, for vanishing second-order free cumulants.

    Uses moments ``m_1..m_{2K}``.
    """
    if K < 1:
        raise ValueError("K must be positive")
    D = 2 * K - 2
    Dn = D + 2
    if G.K < Dn:
        raise ValueError(f"need moments up to order {Dn}")
    m = G.full[: Dn + 1]
    # H(u, v) = sum_k m_k sum_{j<=k} u^j v^(k-j)
    H = np.zeros((Dn + 1, Dn + 1))
    for k in range(Dn + 1):
        for j in range(k + 1):
            H[j, k - j] = m[k]
    if H[0, 0] == 0:
        raise ValueError("degenerate Cauchy transform: H vanishes on the diagonal")
    gp = (np.arange(Dn + 1) + 1) * m
    num = _trunc(np.outer(gp, gp), Dn) - _bmul(H, H, Dn)
    Q = _divide_diagonal(_divide_diagonal(num, tol), tol)
    # 1/H^2 = sum E^k with E = 1 - H^2/H00^2
    H2 = _bmul(H[: D + 1, : D + 1], H[: D + 1, : D + 1], D)
    c = H2[0, 0]
    E = -H2 / c
    E[0, 0] = 0.0
    inv = np.zeros_like(E)
    inv[0, 0] = 1.0
    term = inv.copy()
    for _ in range(D):
        term = _bmul(term, E, D)
        inv += term
    Kser = _bmul(Q, inv / c, D)
    alpha = Kser[:K, :K].copy()
    return SecondOrderTable(alpha, meta={"source": "ward"})


# --- GUE Monte Carlo -------------------------------------------------------


def _gue_traces(seed_seq, N: int, K: int) -> np.ndarray:
    rng = np.random.default_rng(seed_seq)
    A = (rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))) / np.sqrt(2.0)
    X = (A + A.conj().T) / np.sqrt(2.0 * N)
    lam = np.linalg.eigvalsh(X)
    return np.array([np.sum(lam**k) for k in range(1, K + 1)])


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("LK_THREADS", "1")))
    except ValueError:
        return 1


def gue_sample_cov(N: int, trials: int, K: int, seed: int = 42, threads: int | None = None) -> SecondOrderTable:
    """Covariances of ``Tr X^m`` for GUE matrices with entry variance ``1/N``.

    Trial ``i`` draws from the ``i``-th child of ``SeedSequence(seed)``, so the
    result does not depend on the thread count.  Standard errors are jackknife.
    """
    if N <= 0 or trials <= 2 or K <= 0:
        raise ValueError("N, K must be positive and trials at least 3")
    children = np.random.SeedSequence(seed).spawn(trials)
    threads = thread_cap() if threads is None else max(1, threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(lambda s: _gue_traces(s, N, K), children))
    else:
        rows = [_gue_traces(s, N, K) for s in children]
    T = np.array(rows)
    n = trials
    mean = T.mean(axis=0)
    C = np.cov(T, rowvar=False, ddof=1)
    C = np.atleast_2d(C)
    # leave-one-out covariances from running sums
    Sx = T.sum(axis=0)
    Sxy = T.T @ T
    loo = (Sxy[None] - T[:, :, None] * T[:, None, :]
           - (Sx[None, :, None] - T[:, :, None]) * (Sx[None, None, :] - T[:, None, :]) / (n - 1)) / (n - 2)
    se = np.sqrt((n - 1) / n * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    mean_se = T.std(axis=0, ddof=1) / np.sqrt(n)
    meta = {"N": N, "trials": trials, "seed": seed, "entry_variance": "1/N"}
    return SecondOrderTable(C, se, mean, mean_se, meta)


# --- harmonic moments ------------------------------------------------------


@dataclass(frozen=True)
class MomentVector:
    """``t0`` (area / pi), exterior moments ``t_1..t_K`` and interior ``v_0..v_K``."""

    t0: float
    tk: np.ndarray
    vn: np.ndarray


def _spectral_derivative(z: np.ndarray) -> np.ndarray:
    n = len(z)
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return np.fft.ifft(1j * k * np.fft.fft(z))


def harmonic_moments(boundary, K: int, resolution_tol: float = 1e-8) -> MomentVector:
    """Moments of the domain bounded by ``boundary``.

    ``boundary`` holds samples ``zeta(2 pi j / n)``, ``j = 0..n-1``, of a smooth
    closed counterclockwise curve winding once around 0 (a repeated endpoint is
    dropped).  Contour integrals use the trapezoidal rule with a spectral
    derivative:

        t0 = (1/2 pi i) oint conj(z) dz
        t_k = (1/2 pi i k) oint z^-k conj(z) dz
        v_n = (1/2 pi i) oint z^n conj(z) dz
    """
    z = np.asarray(boundary, dtype=np.complex128)
    if len(z) > 1 and abs(z[-1] - z[0]) <= 1e-14 * max(1.0, np.max(np.abs(z))):
        z = z[:-1]
    n = len(z)
    if n < 16:
        raise ValueError("too few boundary samples")
    if np.min(np.abs(z)) < 1e-12 * np.max(np.abs(z)):
        raise ValueError("curve passes through 0")
    amp = np.abs(np.fft.fft(z))
    hi = np.abs(np.fft.fftfreq(n, d=1.0 / n)) > n // 4
    if np.max(amp[hi], initial=0.0) > resolution_tol * np.max(amp):
        raise ValueError("samples do not resolve a smooth closed curve")
    winding = np.sum(np.angle(np.roll(z, -1) / z)) / (2 * np.pi)
    if abs(winding - 1.0) > 1e-6:
        raise ValueError(f"curve must wind once counterclockwise around 0 (winding {winding:.3f})")
    dz = _spectral_derivative(z) * (2 * np.pi / n)
    w = np.conj(z) * dz

    def contour(h):
        return np.sum(h * w) / (2j * np.pi)

    t0 = contour(np.ones_like(z)).real
    tk = np.array([contour(z ** (-k)) / k for k in range(1, K + 1)])
    vn = np.array([contour(z**k) for k in range(0, K + 1)])
    return MomentVector(float(t0), tk, vn)


def circle_boundary(r: float, n: int = 256, center: complex = 0.0) -> np.ndarray:
    th = 2 * np.pi * np.arange(n) / n
    return center + r * np.exp(1j * th)


def ellipse_boundary(a: float, b: float, n: int = 256) -> np.ndarray:
    th = 2 * np.pi * np.arange(n) / n
    return a * np.cos(th) + 1j * b * np.sin(th)


def boundary_from_series(f, n: int = 256, radius: float = 1.0) -> np.ndarray:
    """Samples of ``f(radius e^{i theta})`` for a truncated series ``f``."""
    th = 2 * np.pi * np.arange(n) / n
    return np.asarray(f(radius * np.exp(1j * th)))


WARD_COLUMNS = ("m", "n", "alpha_ward", "alpha_mc", "se", "z_score")
