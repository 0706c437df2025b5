"""Exact simulation of the noisy linear echo-state network and its errors.

State recursion: x_{t+1} = W x_t + m u_{t+1} + eta * eps_{t+1}.  The training
data matrix X = {x_0, ..., x_{T-1}} splits as sqrt(T) (A + Z) with A = M U the
input-driven part and Z the noise part.
"""

from __future__ import annotations

import hashlib
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import kernels
from .ensembles import check_stability


class ConvergenceError(RuntimeError):
    """An iterative numerical procedure failed to converge."""


# ---------------------------------------------------------------- data types


@dataclass(frozen=True)
class Reservoir:
    W: np.ndarray
    m: np.ndarray
    eta2: float
    spectral_radius: float = field(default=float("nan"), compare=False)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        m = np.asarray(self.m, dtype=float).ravel()
        if W.ndim != 2 or W.shape[0] != W.shape[1] or m.shape[0] != W.shape[0]:
            raise ValueError("W must be square and m of matching length")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(m))):
            raise ValueError("non-finite entries in W or m")
        if self.eta2 < 0:
            raise ValueError("noise variance must be nonnegative")
        rho, _ = check_stability(W)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "spectral_radius", rho)

    @property
    def n(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True)
class InputSeries:
    """Input samples for times -history, ..., T-1 (stored in that order)."""

    values: np.ndarray
    history: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if self.history < 0 or v.shape[0] <= self.history:
            raise ValueError("series must contain at least one in-window sample")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite input samples")
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> int:
        return self.values.shape[0] - self.history

    def window(self) -> np.ndarray:
        return self.values[self.history:]

    def lagged(self, lag: int) -> np.ndarray:
        """Samples u_{t-lag} for t = 0..T-1, zero where history is absent."""
        out = np.zeros(self.T)
        start = max(0, lag - self.history)
        if start < self.T:
            out[start:] = self.values[self.history + start - lag:self.history + self.T - lag]
        return out


@dataclass(frozen=True)
class Episode:
    u: InputSeries
    r: np.ndarray
    u_hat: InputSeries | None = None
    r_hat: np.ndarray | None = None

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).ravel()
        if r.shape[0] != self.u.T:
            raise ValueError("target length must equal the input window length")
        object.__setattr__(self, "r", r)
        if (self.u_hat is None) != (self.r_hat is None):
            raise ValueError("test input and target must be given together")
        if self.r_hat is not None:
            rh = np.asarray(self.r_hat, dtype=float).ravel()
            if rh.shape[0] != self.u_hat.T:
                raise ValueError("test target length must equal the test window length")
            object.__setattr__(self, "r_hat", rh)

    @property
    def T(self) -> int:
        return self.u.T

    @property
    def T_hat(self) -> int | None:
        return None if self.u_hat is None else self.u_hat.T


@dataclass(frozen=True)
class StateMatrix:
    X: np.ndarray
    tag: str = "train"

    @property
    def T(self) -> int:
        return self.X.shape[1]


# ---------------------------------------------------------------- Gram family


@dataclass(frozen=True)
class GramFamily:
    """S_0 (solution of S = I + W S W^T) and the lag Grams S_q.

    ``q_max`` is the last lag whose Gram is numerically relevant: the smallest
    q >= 0 with ||W^{q+1}||_F^2 < tol.
    """

    W: np.ndarray
    S0: np.ndarray
    q_max: int
    tol: float
    residual: float

    @property
    def n(self) -> int:
        return self.W.shape[0]

    def S(self, q: int) -> np.ndarray:
        """S_q = W^{(-q)^+} S_0 (W^T)^{q^+}."""
        if q == 0:
            return self.S0.copy()
        P = np.linalg.matrix_power(self.W, abs(q))
        return P @ self.S0 if q < 0 else self.S0 @ P.T


_EIG_CACHE: OrderedDict = OrderedDict()
_EIG_LOCK = threading.Lock()
_EIG_CACHE_SIZE = 2


def eigendecomposition(W: np.ndarray):
    """(eigenvalues, V, V^{-1}) of W, memoised for the last few matrices.

    Symmetric input goes through ``eigh`` and returns real factors.
    """
    W = np.ascontiguousarray(W, dtype=float)
    key = (W.shape, hashlib.blake2b(W.tobytes(), digest_size=16).digest())
    with _EIG_LOCK:
        hit = _EIG_CACHE.get(key)
        if hit is not None:
            _EIG_CACHE.move_to_end(key)
            return hit
    if np.array_equal(W, W.T):
        lam, V = np.linalg.eigh(W)
        out = (lam, V, V.T)
    else:
        lam, V = np.linalg.eig(W)
        out = (lam, V, np.linalg.inv(V))
    for arr in out:
        arr.setflags(write=False)
    with _EIG_LOCK:
        _EIG_CACHE[key] = out
        while len(_EIG_CACHE) > _EIG_CACHE_SIZE:
            _EIG_CACHE.popitem(last=False)
    return out


def lyapunov_residual(W: np.ndarray, S0: np.ndarray) -> float:
    R = S0 - np.eye(W.shape[0]) - W @ S0 @ W.T
    return float(np.linalg.norm(R) / np.linalg.norm(S0))


def _smith_refine(W: np.ndarray, S: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Correct S with Smith doubling applied to the residual equation."""
    for _ in range(max_iter):
        E = np.eye(W.shape[0]) + W @ S @ W.T - S
        if np.linalg.norm(E) <= tol * np.linalg.norm(S) * 1e-2:
            break
        D, P = E, W.copy()
        for _ in range(64):
            step = P @ D @ P.T
            D = D + step
            P = P @ P
            if np.linalg.norm(step) <= 1e-17 * np.linalg.norm(D):
                break
        S = S + D
        S = 0.5 * (S + S.T)
    return S


def _relevant_lag(W: np.ndarray, tol: float, max_doublings: int = 24) -> int:
    """Smallest q >= 0 with ||W^{q+1}||_F^2 < tol (binary search on powers of two)."""
    if np.linalg.norm(W) ** 2 < tol:
        return 0
    powers = [W]
    while np.linalg.norm(powers[-1]) ** 2 >= tol:
        if len(powers) > max_doublings:
            raise ConvergenceError("powers of W do not decay; spectral radius too close to 1")
        powers.append(powers[-1] @ powers[-1])
    # ||W^(2^(k-1))|| >= tol > ||W^(2^k)||; find the crossing greedily
    acc = 1 << (len(powers) - 2)
    C = powers[-2]
    for j in range(len(powers) - 3, -1, -1):
        cand = C @ powers[j]
        if np.linalg.norm(cand) ** 2 >= tol:
            C = cand
            acc += 1 << j
    return acc  # W^acc still relevant, W^(acc+1) is not


def gram_family(W: np.ndarray, tol: float = 1e-10, max_iter: int = 8) -> GramFamily:
    """Solve the discrete Lyapunov equation and locate the relevant lag band.

    S_0 comes from squared Smith doubling (matrix products only); the Schur
    based scipy solver is the fallback when doubling misses the tolerance.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    rho = float(np.max(np.abs(eigendecomposition(W)[0]))) if np.any(W) else 0.0
    if rho >= 1.0:
        raise ValueError(f"spectral radius {rho:.6g} is not below 1")
    S0 = _smith_refine(W, np.zeros((n, n)), tol, max_iter)
    res = lyapunov_residual(W, S0)
    if res >= tol:
        S0 = sla.solve_discrete_lyapunov(W, np.eye(n))
        S0 = _smith_refine(W, 0.5 * (S0 + S0.T), tol, max_iter)
        res = lyapunov_residual(W, S0)
        if res >= tol:
            raise ConvergenceError(f"Lyapunov residual {res:.3g} above tolerance {tol:.3g}")
    return GramFamily(W=W, S0=S0, q_max=_relevant_lag(W, tol), tol=tol, residual=res)


# ---------------------------------------------------------------- simulation


def krylov_matrix(W: np.ndarray, m: np.ndarray, T: int) -> np.ndarray:
    """M = [m, W m, ..., W^{T-1} m] (n x T)."""
    n = W.shape[0]
    M = np.empty((T, n))
    v = np.asarray(m, dtype=float).copy()
    for j in range(T):
        M[j] = v
        v = W @ v
    return M.T.copy()


def input_toeplitz(u: InputSeries, T: int | None = None) -> np.ndarray:
    """U with U_{ij} = u_{j-i} / sqrt(T) (0-based i, j), absent history read as 0."""
    if T is None:
        T = u.T
    if T > u.T:
        raise ValueError("input window shorter than requested T")
    full = np.zeros(T + T - 1)  # times -(T-1) .. T-1
    avail_past = min(u.history, T - 1)
    src = u.values[u.history - avail_past:u.history + T]
    full[T - 1 - avail_past:] = src
    col = full[T - 1::-1]            # u_0, u_{-1}, ..., u_{-(T-1)}
    row = full[T - 1:]               # u_0, u_1, ..., u_{T-1}
    return sla.toeplitz(col, row) / math.sqrt(T)


def input_matrices(W: np.ndarray, m: np.ndarray, u: InputSeries, T: int | None = None):
    """Return (M, U, A) with A = M U."""
    if T is None:
        T = u.T
    M = krylov_matrix(W, m, T)
    U = input_toeplitz(u, T)
    return M, U, M @ U


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def default_washout(spectral_radius: float) -> int:
    if spectral_radius <= 0.0:
        return 1
    return int(math.ceil(math.log(1e-12) / math.log(spectral_radius)))


def simulate_states(res: Reservoir, u: InputSeries, seed=None, init: str = "stationary",
                    washout: int | None = None, gram: GramFamily | None = None,
                    tag: str = "train") -> StateMatrix:
    """Run the recursion over the history and window, recording times 0..T-1.

    ``init="stationary"`` draws the state before the first history sample from
    N(0, eta^2 S_0); ``init="washout"`` starts from zero ``washout`` noise-only
    steps earlier (default K = ceil(log(1e-12) / log(rho))).
    """
    n = res.n
    rng = _rng(seed)
    H = u.history
    drive = u.values
    if init == "stationary":
        x0 = np.zeros(n)
        if res.eta2 > 0:
            if gram is None:
                gram = gram_family(res.W)
            L = np.linalg.cholesky(gram.S0)
            x0 = math.sqrt(res.eta2) * (L @ rng.standard_normal(n))
        pre = 0
    elif init == "washout":
        K = default_washout(res.spectral_radius) if washout is None else int(washout)
        if K < 0:
            raise ValueError("washout length must be nonnegative")
        x0 = np.zeros(n)
        pre = K
        drive = np.concatenate([np.zeros(K), drive])
    else:
        raise ValueError(f"unknown init {init!r}")
    steps = drive.shape[0]
    noise = math.sqrt(res.eta2) * rng.standard_normal((steps, n)) if res.eta2 > 0 else np.zeros((steps, n))
    states = kernels.reservoir_states(res.W, res.m, drive, noise, x0)
    return StateMatrix(X=np.ascontiguousarray(states[pre + H:].T), tag=tag)


# ---------------------------------------------------------------- readout and errors


def train_readout(X: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares readout (SVD, relative cutoff 1e-12)."""
    X = np.asarray(X, dtype=float)
    if not np.any(X):
        raise ValueError("state matrix is identically zero")
    omega, *_ = np.linalg.lstsq(X.T, np.asarray(r, dtype=float), rcond=1e-12)
    return omega


def train_mse(X: np.ndarray, r: np.ndarray, omega: np.ndarray) -> float:
    resid = np.asarray(r, dtype=float) - X.T @ omega
    return float(resid @ resid / X.shape[1])


def test_mse(X_hat: np.ndarray, r_hat: np.ndarray, omega: np.ndarray) -> float:
    resid = np.asarray(r_hat, dtype=float) - X_hat.T @ omega
    return float(resid @ resid / X_hat.shape[1])


test_mse.__test__ = False  # keep pytest from collecting it


def resolvent_train_mse(X: np.ndarray, r: np.ndarray, gamma: float) -> float:
    """gamma (1/T) r^T (X^T X / T + gamma I)^{-1} r."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    T = X.shape[1]
    r = np.asarray(r, dtype=float)
    G = X.T @ X / T + gamma * np.eye(T)
    sol = sla.solve(G, r, assume_a="pos")
    return float(gamma * (r @ sol) / T)


def nmse(mse: float, r: np.ndarray) -> float:
    """MSE divided by the target energy ||r||^2 / T."""
    r = np.asarray(r, dtype=float)
    return float(mse * r.shape[0] / (r @ r))


def ridge_baseline(A: np.ndarray, r: np.ndarray, gamma: float, A_hat: np.ndarray | None = None,
                   r_hat: np.ndarray | None = None) -> tuple[float, float | None]:
    """Noiseless ridge readout errors from the input-driven matrix A.

    Train: gamma^2 (1/T) r^T (A^T A + gamma I)^{-2} r.
    Test:  || A_hat^T (gamma I + A A^T)^{-1} A r / sqrt(T) - r_hat / sqrt(T_hat) ||^2.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    A = np.asarray(A, dtype=float)
    r = np.asarray(r, dtype=float)
    n, T = A.shape
    v = sla.solve(A.T @ A + gamma * np.eye(T), r, assume_a="pos")
    train = float(gamma**2 * (v @ v) / T)
    test = None
    if A_hat is not None:
        w = sla.solve(gamma * np.eye(n) + A @ A.T, A @ r, assume_a="pos") / math.sqrt(T)
        resid = A_hat.T @ w - np.asarray(r_hat, dtype=float) / math.sqrt(A_hat.shape[1])
        test = float(resid @ resid)
    return train, test
