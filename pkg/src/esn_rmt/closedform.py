"""Closed-form error and memory formulas for structured connectivity ensembles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import bisect

from .deteq import SolverSettings, ToeplitzKernel, _fixed_point, inverse_lag_sums
from .ensembles import SpectralMeasure
from .esn import GramFamily, krylov_matrix

DIAG_FLOOR = 1e-14


# ---------------------------------------------------------------- profiles


@dataclass(frozen=True)
class DiagonalProfile:
    """Diagonal limit of the memory matrix, stored up to max(T, T_hat).

    For c > 1 the second profile ``second`` and the scalar ``rho`` (the
    denominator correction) are filled as well.
    """

    entries: np.ndarray
    ensemble: str
    second: np.ndarray | None = None
    rho: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if np.any(e < 0):
            raise ValueError("profile entries must be nonnegative")
        object.__setattr__(self, "entries", e)

    def matrix(self, rows: int, cols: int, second: bool = False) -> np.ndarray:
        d = self.second if second else self.entries
        k = min(rows, cols)
        if d.shape[0] < k:
            raise ValueError("profile shorter than requested block")
        out = np.zeros((rows, cols))
        out[np.arange(k), np.arange(k)] = d[:k]
        return out


@dataclass(frozen=True)
class AlphaSolution:
    alpha: float
    residual: float


def _modes(ensemble: str, sigma=None, modes=None) -> list[tuple[float, float]]:
    if ensemble == "haar":
        return [(float(sigma), 1.0)]
    if ensemble == "multi_memory":
        return [(float(s), float(c)) for s, c in modes]
    raise ValueError(f"no diagonal profile for ensemble {ensemble!r}")


def invariant_profile(ensemble: str, length: int, sigma: float | None = None,
                      modes: Sequence[tuple[float, float]] | None = None,
                      regime: str = "c_lt_1", c: float | None = None) -> DiagonalProfile:
    """Limiting diagonal memory profile for Haar and multi-memory connectivity.

    c < 1:  D_ii = sum_j c_j s_j^(2i) / sum_j c_j / (1 - s_j^2), i = 0..length-1.
    c > 1:  D_ii = sum_j c_j s_j^(2i) / (alpha + S_j), with S_j = 1/(1 - s_j^2),
            the second profile uses S_j / (alpha + S_j)^2 instead.
    """
    md = _modes(ensemble, sigma, modes)
    i = np.arange(length)
    if regime == "c_lt_1":
        num = sum(cj * sj ** (2 * i) for sj, cj in md)
        den = sum(cj / (1.0 - sj**2) for sj, cj in md)
        return DiagonalProfile(num / den, ensemble)
    if regime != "c_gt_1":
        raise ValueError(f"unknown regime {regime!r}")
    if c is None or c <= 1:
        raise ValueError("c > 1 profile needs c > 1")
    gains = np.array([1.0 / (1.0 - sj**2) for sj, _ in md])
    weights = np.array([cj for _, cj in md])
    alpha = solve_alpha(gains, c, weights=weights).alpha
    d1 = sum(cj * sj ** (2 * i) / (alpha + g) for (sj, cj), g in zip(md, gains))
    d2 = sum(cj * sj ** (2 * i) * g / (alpha + g) ** 2 for (sj, cj), g in zip(md, gains))
    rho = c * float(np.sum(weights * gains**2 / (alpha + gains) ** 2))
    return DiagonalProfile(d1, ensemble, second=d2, rho=rho, alpha=alpha)


def mc_closed(ensemble: str, c: float, tau, sigma: float | None = None,
              modes: Sequence[tuple[float, float]] | None = None):
    """Closed memory curve for Haar / multi-memory connectivity, c < 1."""
    if c >= 1:
        raise ValueError("memory capacity needs c < 1")
    md = _modes(ensemble, sigma, modes)
    tau_arr = np.asarray(tau, dtype=float)
    num = sum(cj * sj ** (2 * tau_arr) for sj, cj in md)
    den = sum(cj / (1.0 - sj**2) for sj, cj in md)
    out = num / den / (1.0 - c)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- c < 1


def _as_matrix(D, T: int) -> np.ndarray:
    if isinstance(D, DiagonalProfile):
        return D.matrix(T, T)
    D = np.asarray(D, dtype=float)
    if D.ndim == 1:
        return np.diag(D[:T])
    return D


def _resolvent(D, U, eta2):
    T = U.shape[0]
    Dm = _as_matrix(D, T)
    return np.eye(T) + U.T @ Dm @ U / eta2


def train_mse_inv_c_lt1(D, U, r, eta2: float, c: float) -> float:
    """(1 - c) (1/T) r^T (I + U^T D U / eta^2)^{-1} r."""
    if c >= 1:
        raise ValueError("c must be below 1")
    U = np.asarray(U, dtype=float)
    r = np.asarray(r, dtype=float)
    sol = sla.solve(_resolvent(D, U, eta2), r, assume_a="pos")
    return float((1.0 - c) * (r @ sol) / U.shape[0])


def test_mse_inv_c_lt1(D, D_hat, U, U_hat, r, r_hat, eta2: float, c: float) -> float:
    if c >= 1:
        raise ValueError("c must be below 1")
    U = np.asarray(U, dtype=float)
    U_hat = np.asarray(U_hat, dtype=float)
    r = np.asarray(r, dtype=float)
    r_hat = np.asarray(r_hat, dtype=float)
    T, T_hat = U.shape[0], U_hat.shape[0]
    Dh = D_hat.matrix(T_hat, T) if isinstance(D_hat, DiagonalProfile) else np.asarray(D_hat, dtype=float)
    if Dh.ndim == 1:
        Dh = DiagonalProfile(Dh, "user").matrix(T_hat, T)
    Pr = sla.solve(_resolvent(D, U, eta2), r, assume_a="pos")
    dev = U_hat.T @ (Dh @ (U @ Pr)) / (eta2 * math.sqrt(T)) - r_hat / math.sqrt(T_hat)
    return float(dev @ dev + (r @ Pr) / ((1.0 - c) * T) - (Pr @ Pr) / T)


test_mse_inv_c_lt1.__test__ = False


# ---------------------------------------------------------------- c > 1


def solve_alpha(spectrum, c: float, weights=None, tol: float = 1e-12) -> AlphaSolution:
    """alpha > 0 with c * mean(s / (alpha + s)) = 1 over the S_0 spectrum.

    ``spectrum`` may be a GramFamily, an array of S_0 eigenvalues, or mode gains
    with ``weights``.
    """
    if c <= 1:
        raise ValueError("alpha is defined for c > 1")
    if isinstance(spectrum, GramFamily):
        s = np.linalg.eigvalsh(spectrum.S0)
    else:
        s = np.asarray(spectrum, dtype=float).ravel()
    w = np.full(s.shape[0], 1.0 / s.shape[0]) if weights is None else np.asarray(weights, float)
    w = w / w.sum()

    def f(a):
        return c * float(np.sum(w * s / (a + s))) - 1.0

    hi = c * float(np.sum(w * s))
    lo = hi * 1e-16
    alpha = bisect(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000)
    res = abs(f(alpha))
    if res > tol:
        raise ArithmeticError(f"alpha residual {res:.3g} above {tol:g}")
    return AlphaSolution(alpha, res)


def interpolating_test_mse(D1, D1_hat, D2, rho: float, U, U_hat, r, r_hat, eta2: float) -> float:
    """Three-term c > 1 test MSE from memory matrices.

    With P = (I + U^T D1 U / eta^2)^{-1}:
    ||U_hat^T D1_hat U P r / (eta^2 sqrt T) - r_hat / sqrt T_hat||^2
    - (1/T) r^T P^2 r + (1/T) r^T P (I + U^T D2 U / eta^2) P r / (1 - rho).
    """
    U = np.asarray(U, dtype=float)
    U_hat = np.asarray(U_hat, dtype=float)
    r = np.asarray(r, dtype=float)
    r_hat = np.asarray(r_hat, dtype=float)
    T, T_hat = U.shape[0], U_hat.shape[0]
    Pr = sla.solve(_resolvent(D1, U, eta2), r, assume_a="pos")
    dev = U_hat.T @ (D1_hat @ (U @ Pr)) / (eta2 * math.sqrt(T)) - r_hat / math.sqrt(T_hat)
    inner = Pr @ Pr + (U @ Pr) @ (D2 @ (U @ Pr)) / eta2
    return float(dev @ dev - (Pr @ Pr) / T + inner / ((1.0 - rho) * T))


def test_mse_inv_c_gt1(gram: GramFamily, W, m, U, U_hat, r, r_hat, eta2: float, c: float | None = None) -> float:
    """Orthogonally invariant c > 1 test MSE for a given W (full path)."""
    n = gram.n
    T, T_hat = np.asarray(U).shape[0], np.asarray(U_hat).shape[0]
    if c is None:
        c = n / T
    evals, evecs = np.linalg.eigh(gram.S0)
    alpha = solve_alpha(evals, c).alpha
    L = max(T, T_hat)
    M = krylov_matrix(W, m, L)
    Mv = evecs.T @ M
    R1 = Mv / (alpha + evals)[:, None]
    Dfull = Mv.T @ R1
    D2full = R1.T @ (evals[:, None] * R1)
    rho = c * float(np.mean(evals**2 / (alpha + evals) ** 2))
    return interpolating_test_mse(Dfull[:T, :T], Dfull[:T_hat, :T], D2full[:T, :T], rho,
                              U, U_hat, r, r_hat, eta2)


test_mse_inv_c_gt1.__test__ = False


def test_mse_haar_c_gt1(sigma: float, U, U_hat, r, r_hat, eta2: float, c: float) -> float:
    """Haar shortcut: effective noise c*eta^2 and a single 1/(c-1) resolvent term."""
    if c <= 1:
        raise ValueError("c must exceed 1")
    U = np.asarray(U, dtype=float)
    U_hat = np.asarray(U_hat, dtype=float)
    r = np.asarray(r, dtype=float)
    r_hat = np.asarray(r_hat, dtype=float)
    T, T_hat = U.shape[0], U_hat.shape[0]
    prof = invariant_profile("haar", max(T, T_hat), sigma=sigma)
    e2 = c * eta2
    Pr = sla.solve(_resolvent(prof, U, e2), r, assume_a="pos")
    dev = U_hat.T @ (prof.matrix(T_hat, T) @ (U @ Pr)) / (e2 * math.sqrt(T)) - r_hat / math.sqrt(T_hat)
    return float(dev @ dev + (r @ Pr) / ((c - 1.0) * T))


test_mse_haar_c_gt1.__test__ = False


def test_mse_profile_c_gt1(profile: DiagonalProfile, U, U_hat, r, r_hat, eta2: float) -> float:
    """c > 1 test MSE in the large-n limit from a c > 1 DiagonalProfile."""
    T, T_hat = np.asarray(U).shape[0], np.asarray(U_hat).shape[0]
    return interpolating_test_mse(profile.matrix(T, T), profile.matrix(T_hat, T),
                              profile.matrix(T, T, second=True), profile.rho,
                              U, U_hat, r, r_hat, eta2)


test_mse_profile_c_gt1.__test__ = False


# ---------------------------------------------------------------- misc closed forms


def fisher_memory(gram: GramFamily, W, m, k: int, eta2: float) -> float:
    if k < 0:
        raise ValueError("k must be nonnegative")
    v = np.linalg.matrix_power(np.asarray(W, dtype=float), k) @ np.asarray(m, dtype=float)
    return float(v @ sla.solve(gram.S0, v, assume_a="pos") / eta2)


def normal_kernel_solver(mu: SpectralMeasure, c: float, T: int, settings: SolverSettings | None = None,
                         nodes: int = 128, enforce_symmetry: bool = True) -> ToeplitzKernel:
    """Toeplitz kernel of the c < 1 pair for normal W with limiting spectrum ``mu``.

    k_q = c * sum_i w_i t_i^q / den(t_i),  den(t) = s_0 + 2 sum_{q>=1} s_q t^q,
    where s_q are the normalised lag sums of (I + R)^{-1}.
    """
    if c >= 1:
        raise ValueError("c must be below 1")
    settings = settings or SolverSettings()
    t, w = mu.quadrature(nodes)
    tmax = float(np.max(np.abs(t)))
    Q = T - 1 if tmax == 0 else min(T - 1, int(math.ceil(math.log(settings.band_tol) / math.log(tmax))))
    powers = t[None, :] ** np.arange(Q + 1)[:, None]  # (Q+1, nodes)
    mult = np.full(Q + 1, 2.0)
    mult[0] = 1.0
    odd = np.arange(Q + 1) % 2 == 1
    structural = enforce_symmetry and mu.is_symmetric

    def F(k):
        col = np.zeros(T)
        col[:Q + 1] = k
        col[0] += 1.0
        s = inverse_lag_sums(col, settings.toeplitz_path)[:Q + 1] / T
        den = (mult * s) @ powers
        out = c * powers @ (w / den)
        if structural:
            out[odd] = 0.0
        return out

    k, _, _ = _fixed_point(F, np.zeros(Q + 1), settings, "normal kernel")
    return ToeplitzKernel(k, T)


def projection_r0(sigma: float, c: float, T: int, settings: SolverSettings | None = None) -> float:
    """Scalar r_0 with r_0 = c / sum_q s_q sigma^|q| for the checkerboard kernel r_0 sigma^|q| [q even]."""
    if c >= 1:
        raise ValueError("c must be below 1")
    settings = settings or SolverSettings()
    Q = min(T - 1, int(math.ceil(math.log(settings.band_tol) / math.log(sigma))))
    q = np.arange(Q + 1)
    shape = np.where(q % 2 == 0, sigma**q, 0.0)
    mult = np.where(q == 0, 1.0, 2.0)

    def F(x):
        col = np.zeros(T)
        col[:Q + 1] = x[0] * shape
        col[0] += 1.0
        s = inverse_lag_sums(col, settings.toeplitz_path)[:Q + 1] / T
        return np.array([c / float(np.sum(mult * s * sigma**q))])

    x, _, _ = _fixed_point(F, np.zeros(1), settings, "projection r0")
    return float(x[0])


def checkerboard_masks(sigma: float, T: int) -> tuple[np.ndarray, np.ndarray]:
    """{sigma^|j-i| [j-i even]} and {sigma^(i+j) [j-i even]}, i, j = 0..T-1."""
    i = np.arange(T)
    even = (i[:, None] - i[None, :]) % 2 == 0
    toep = np.where(even, sigma ** np.abs(i[:, None] - i[None, :]), 0.0)
    hank = np.where(even, sigma ** (i[:, None] + i[None, :]), 0.0)
    return toep, hank


def projection_train_mse(sigma: float, c: float, U, r, eta2: float, r0: float | None = None) -> float:
    """Training MSE equivalent for W with spectrum {+sigma, -sigma} and random m (c < 1)."""
    U = np.asarray(U, dtype=float)
    r = np.asarray(r, dtype=float)
    T = U.shape[0]
    if r0 is None:
        r0 = projection_r0(sigma, c, T)
    toep, hank = checkerboard_masks(sigma, T)
    inner = np.eye(T) + r0 * toep + (r0 * (1 - sigma**2) / (eta2 * c)) * (U.T @ hank @ U)
    return float(r @ sla.solve(inner, r, assume_a="pos") / T)


def rank_one_train_mse(d, U, r, eta2: float, c: float) -> float:
    d = np.asarray(d, dtype=float)
    U = np.asarray(U, dtype=float)
    r = np.asarray(r, dtype=float)
    T = U.shape[0]
    v = U.T @ d
    return float((1 - c) * ((r @ r) / T - (v @ r) ** 2 / T / (eta2 + v @ v)))


def _whitened(b, D, U, floor):
    b = np.asarray(b, dtype=float)
    D = np.asarray(D.entries if isinstance(D, DiagonalProfile) else D, dtype=float)
    T = U.shape[0]
    b = np.concatenate([b, np.zeros(max(0, T - b.shape[0]))])[:T]
    d = D[:T]
    active = np.flatnonzero(b)
    if active.size and np.any(d[active] <= floor):
        raise ValueError("profile below floor on the active block; whitening undefined")
    a = np.zeros(T)
    a[active] = b[active] / np.sqrt(d[active])
    sq = np.sqrt(d)
    H = (sq[:, None] * (U @ U.T)) * sq[None, :]
    return a, sq, H


def linear_combo_test_mse(b, D, U, U_hat, eta2: float, c: float, s2: float = 0.0,
                          floor: float = DIAG_FLOOR) -> dict:
    """Whitened test error for r = sqrt(T) U^T b and matching test filter.

    Returns a dict with ``main`` (the two-term expression), ``impulsive`` (the
    extra term for test-input pollution of variance ``s2``) and ``total``.
    """
    U = np.asarray(U, dtype=float)
    U_hat = np.asarray(U_hat, dtype=float)
    T = U.shape[0]
    a, sq, H = _whitened(b, D, U, floor)
    Gh = np.zeros((T, T))
    k = min(T, U_hat.shape[0])
    Gh[:k, :k] = (U_hat @ U_hat.T)[:k, :k]
    Delta = Gh - U @ U.T
    Ra = sla.solve(np.eye(T) + H / eta2, a, assume_a="pos")
    term1 = float(a @ (H @ Ra)) / (1.0 - c)
    term2 = float(Ra @ ((sq[:, None] * Delta * sq[None, :]) @ Ra))
    imp = 0.0
    if s2 > 0:
        v = sla.solve(eta2 * np.eye(T) + H, H @ a, assume_a="pos")
        imp = float(s2 * (v @ v))
    return {"main": term1 + term2, "impulsive": imp, "total": term1 + term2 + imp}


def impulsive_term(b, D, U, eta2: float, s2: float, floor: float = DIAG_FLOOR) -> float:
    U = np.asarray(U, dtype=float)
    a, _, H = _whitened(b, D, U, floor)
    v = sla.solve(eta2 * np.eye(U.shape[0]) + H, H @ a, assume_a="pos")
    return float(s2 * (v @ v))


def ar_delay_train_mse(D, q_ar: float, tau: int, eta2: float, c: float, T: int) -> float:
    if not 0.0 <= q_ar < 1.0:
        raise ValueError("q_ar must lie in [0, 1)")
    d = np.asarray(D.entries if isinstance(D, DiagonalProfile) else D, dtype=float)[:T]
    i = np.arange(T)
    sq = np.sqrt(d)
    K = sq[:, None] * q_ar ** np.abs(i[:, None] - i[None, :]) * sq[None, :]
    e = np.zeros(T)
    e[tau] = 1.0
    inv_tt = sla.solve(np.eye(T) + K / eta2, e, assume_a="pos")[tau]
    return float(eta2 * (1 - c) / d[tau] * (1.0 - inv_tt))


def estimate_delay_profile(U, r, gamma: float = 0.0) -> np.ndarray:
    """b_hat = (U U^T + gamma I)^{-1} U r / sqrt(T), so r = sqrt(T) U^T b gives b_hat = b."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    U = np.asarray(U, dtype=float)
    T = U.shape[0]
    G = U @ U.T + gamma * np.eye(T)
    rhs = U @ np.asarray(r, dtype=float) / math.sqrt(T)
    try:
        return sla.solve(G, rhs, assume_a="pos")
    except (np.linalg.LinAlgError, sla.LinAlgWarning) as exc:
        raise ValueError("U U^T is singular; use gamma > 0") from exc


def design_score(b_hat, D, floor: float = DIAG_FLOOR) -> float:
    """b_hat^T D^{-1} b_hat over the leading block where D stays above ``floor``."""
    d = np.asarray(D.entries if isinstance(D, DiagonalProfile) else D, dtype=float)
    b = np.asarray(b_hat, dtype=float)
    L = min(b.shape[0], d.shape[0])
    above = d[:L] > floor
    k = L if above.all() else int(np.argmin(above))
    if k == 0:
        raise ValueError("profile below floor everywhere")
    return float(np.sum(b[:k] ** 2 / d[:k]))


def geometric_sigma_rule(alpha: float) -> float:
    """Haar scale minimising the score for b_i = alpha^(i-1)."""
    return math.sqrt(abs(alpha))
