"""Fixed-W deterministic equivalents: first and second order fixed points and
the train/test errors and memory curve assembled from them.

The T x T objects are symmetric Toeplitz kernels (lags 0..Q).  The n x n side
only ever needs two operations on the lag Grams S_q, packaged in ``LagEngine``:

* ``traces(G)[q] = tr(S_q G)`` for symmetric G, and
* ``combine(t) = sum_{|q| <= Q} t_|q| S_q``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from . import kernels
from .esn import ConvergenceError, GramFamily, eigendecomposition, gram_family

REGIMES = ("c_lt_1", "c_gt_1")


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-10
    max_iter: int = 1000
    damping: float = 0.5
    band_tol: float = 1e-10
    gamma: float | None = None
    toeplitz_path: str = "dense_exact"
    anderson_depth: int = 5
    lag_backend: str = "auto"
    c_zero_threshold: float = 0.01

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.toeplitz_path not in ("dense_exact", "circulant_fast"):
            raise ValueError(f"unknown toeplitz_path {self.toeplitz_path!r}")
        if self.lag_backend not in ("auto", "eigen", "powers"):
            raise ValueError(f"unknown lag_backend {self.lag_backend!r}")
        if self.anderson_depth < 0:
            raise ValueError("anderson_depth must be nonnegative")


# ---------------------------------------------------------------- Toeplitz side


@dataclass(frozen=True)
class ToeplitzKernel:
    """Symmetric Toeplitz matrix of size T with lags 0..len(values)-1 (zero beyond)."""

    values: np.ndarray
    T: int
    symmetric: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.shape[0] > self.T:
            v = v[:self.T]
        object.__setattr__(self, "values", v)

    def lag(self, q: int) -> float:
        q = abs(int(q))
        return float(self.values[q]) if q < self.values.shape[0] else 0.0

    def column(self, shift: float = 0.0) -> np.ndarray:
        col = np.zeros(self.T)
        col[:self.values.shape[0]] = self.values
        col[0] += shift
        return col

    def dense(self, shift: float = 0.0) -> np.ndarray:
        return sla.toeplitz(self.column(shift))

    def to_dict(self) -> dict:
        return {int(q): float(v) for q, v in enumerate(self.values)}


def kernel_trace(B, q: int) -> float:
    """(1/T) sum_i B[i, i+q] for a dense matrix or a ToeplitzKernel."""
    if isinstance(B, ToeplitzKernel):
        if abs(q) >= B.T:
            raise ValueError("|q| must be below T")
        return B.lag(q) * (B.T - abs(q)) / B.T
    B = np.asarray(B, dtype=float)
    T = B.shape[0]
    if abs(q) >= T:
        raise ValueError("|q| must be below T")
    return float(np.trace(B, offset=q) / T)


def toeplitz_inverse_column(col: np.ndarray) -> np.ndarray:
    """First column of the inverse of the symmetric Toeplitz matrix with first column ``col``."""
    e0 = np.zeros(col.shape[0])
    e0[0] = 1.0
    return sla.solve_toeplitz(col, e0)


def inverse_lag_sums(col: np.ndarray, path: str = "dense_exact") -> np.ndarray:
    """s_q = sum_i [Toep(col)^{-1}]_{i,i+q} for q = 0..T-1.

    ``dense_exact`` uses the Levinson column and the Gohberg-Semencul form of
    the inverse; ``circulant_fast`` swaps in the inverse of the circulant
    with the same symbol, exact only up to boundary effects.
    """
    T = col.shape[0]
    if path == "circulant_fast":
        sym = np.concatenate([col, col[-1:0:-1]])  # even extension, length 2T-1
        eig = np.real(np.fft.fft(sym))
        if np.any(eig <= 0):
            raise ConvergenceError("circulant symbol not positive; use dense_exact")
        inv = np.real(np.fft.ifft(1.0 / eig))[:T]
        return inv * (T - np.arange(T))
    x = toeplitz_inverse_column(col)
    if not np.isfinite(x).all() or x[0] <= 0:
        raise ConvergenceError("Toeplitz block is not positive definite")
    return kernels.gs_lag_sums(x)


def toeplitz_inverse(col: np.ndarray) -> np.ndarray:
    """Dense inverse of a symmetric positive-definite Toeplitz matrix."""
    x = toeplitz_inverse_column(col)
    if not np.isfinite(x).all() or x[0] <= 0:
        raise ConvergenceError("Toeplitz block is not positive definite")
    return kernels.toeplitz_inverse_dense(x)


# ---------------------------------------------------------------- n side


class LagEngine:
    """Evaluates tr(S_q G) and sum_q t_q S_q for q in 0..Q.

    Two interchangeable backends: ``eigen`` diagonalises W once and reduces
    both operations to scalar power sums; ``powers`` stacks Y_q = W^q S_0
    explicitly.  ``auto`` picks ``powers`` while the stack stays small.
    """

    STACK_LIMIT = 2e7  # doubles
    COND_LIMIT = 1e8

    def __init__(self, gram: GramFamily, T: int, backend: str = "auto"):
        self.gram = gram
        self.T = int(T)
        self.Q = min(gram.q_max, self.T - 1)
        n = gram.n
        if backend == "auto":
            backend = "powers" if (self.Q + 1) * n * n <= self.STACK_LIMIT else "eigen"
        if backend == "eigen" and not self._setup_eigen():
            backend = "powers"
        if backend == "powers":
            self._setup_powers()
        self.backend = backend

    def _setup_eigen(self) -> bool:
        S0 = self.gram.S0
        lam, V, Vinv = eigendecomposition(self.gram.W)
        # Frobenius bound on cond(V), avoids an SVD
        if np.linalg.norm(V) * np.linalg.norm(Vinv) > self.COND_LIMIT:
            return False
        if not np.iscomplexobj(V):
            self._lam = lam.astype(complex)
            self._weight = np.ones(lam.shape[0])
            self._V, self._Vinv = V, Vinv
        else:
            # conjugate pairs contribute conjugate terms: keep one of each, weight 2
            keep = lam.imag >= 0
            self._lam = lam[keep]
            self._weight = np.where(lam[keep].imag > 0, 2.0, 1.0)
            self._V = V[:, keep]
            self._Vinv = Vinv[keep]
        self._real = not np.any(self._lam.imag) and not np.iscomplexobj(V)
        C = self._Vinv @ S0
        self._C_re, self._C_im = np.ascontiguousarray(C.real), np.ascontiguousarray(C.imag)
        # .real/.imag are strided views; matmul on those skips BLAS
        self._V_re, self._V_im = np.ascontiguousarray(self._V.real), np.ascontiguousarray(self._V.imag)
        self._Vinv_re, self._Vinv_im = np.ascontiguousarray(self._Vinv.real), np.ascontiguousarray(self._Vinv.imag)
        return True

    def _setup_powers(self):
        W, S0 = self.gram.W, self.gram.S0
        Y = np.empty((self.Q + 1,) + S0.shape)
        Y[0] = S0
        for q in range(1, self.Q + 1):
            Y[q] = W @ Y[q - 1]
        self._Y = Y

    def traces(self, G: np.ndarray) -> np.ndarray:
        if self.backend == "powers":
            return np.einsum("qij,ji->q", self._Y, G, optimize=True)
        CG_re = self._C_re @ G
        if self._real:
            d = np.einsum("ij,ji->i", CG_re, self._V_re).astype(complex)
            return np.real(kernels.power_moments(self._lam, d * self._weight, self.Q))
        CG_im = self._C_im @ G
        d = (np.einsum("ij,ji->i", CG_re, self._V_re) - np.einsum("ij,ji->i", CG_im, self._V_im)
             + 1j * (np.einsum("ij,ji->i", CG_re, self._V_im) + np.einsum("ij,ji->i", CG_im, self._V_re)))
        return np.real(kernels.power_moments(self._lam, d * self._weight, self.Q))

    def combine(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)[:self.Q + 1]
        S0 = self.gram.S0
        if self.backend == "powers":
            P = np.tensordot(t, self._Y, axes=1)
            out = P + P.T - t[0] * S0
        else:
            p = kernels.poly_eval(t, self._lam) * self._weight
            if self._real:
                P = (self._V_re * p.real) @ self._Vinv_re
            else:
                P = (self._V_re * p.real - self._V_im * p.imag) @ self._Vinv_re
                P -= (self._V_re * p.imag + self._V_im * p.real) @ self._Vinv_im
            PS = P @ S0
            out = PS + PS.T - t[0] * S0
        return 0.5 * (out + out.T)


# ---------------------------------------------------------------- fixed-point driver


def _fixed_point(F, x0: np.ndarray, settings: SolverSettings, what: str):
    """Damped Picard iteration with Anderson mixing on the residual F(x) - x.

    Returns (x, iterations, residual).  An Anderson step whose evaluation fails
    (non-PD intermediate) is replaced by the plain damped step.
    """
    beta = 1.0 - settings.damping
    x = np.array(x0, dtype=float)
    fx = F(x) - x
    dX: list[np.ndarray] = []
    dF: list[np.ndarray] = []
    for it in range(1, settings.max_iter + 1):
        res = float(np.max(np.abs(fx))) if fx.size else 0.0
        if res <= settings.tol * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0):
            return x, it - 1, res
        step = beta * fx
        if settings.anderson_depth > 0 and dF:
            Fm = np.stack(dF, axis=1)
            Xm = np.stack(dX, axis=1)
            coef, *_ = np.linalg.lstsq(Fm, fx, rcond=None)
            step = beta * fx - (Xm + beta * Fm) @ coef
        x_new = x + step
        try:
            f_new = F(x_new) - x_new
            ok = np.all(np.isfinite(f_new))
        except (ConvergenceError, np.linalg.LinAlgError):
            ok = False
        if not ok:
            dX.clear()
            dF.clear()
            x_new = x + beta * fx
            f_new = F(x_new) - x_new
        dX.append(x_new - x)
        dF.append(f_new - fx)
        if len(dF) > settings.anderson_depth:
            dX.pop(0)
            dF.pop(0)
        x, fx = x_new, f_new
    raise ConvergenceError(f"{what}: no convergence after {settings.max_iter} iterations "
                           f"(residual {float(np.max(np.abs(fx))):.3g})")


def _spd_inverse(M: np.ndarray) -> np.ndarray:
    try:
        c = sla.cho_factor(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("indefinite intermediate matrix") from exc
    return sla.cho_solve(c, np.eye(M.shape[0]))


# ---------------------------------------------------------------- first order


@dataclass(frozen=True)
class EquivalentPair:
    kernel: ToeplitzKernel
    Rt: np.ndarray
    regime: str
    c: float
    gram: GramFamily = field(repr=False, compare=False)
    engine: LagEngine = field(repr=False, compare=False)
    iterations: int = 0
    residual: float = 0.0

    @property
    def T(self) -> int:
        return self.kernel.T

    @property
    def n(self) -> int:
        return self.Rt.shape[0]

    @property
    def t_shift(self) -> float:
        return 1.0 if self.regime == "c_lt_1" else 0.0

    @property
    def n_shift(self) -> float:
        return 1.0 if self.regime == "c_gt_1" else 0.0

    @cached_property
    def Y(self) -> np.ndarray:
        """delta_{c<1} I_T + R as a dense matrix."""
        return self.kernel.dense(self.t_shift)

    @cached_property
    def Y_inv(self) -> np.ndarray:
        return toeplitz_inverse(self.kernel.column(self.t_shift))

    @cached_property
    def X(self) -> np.ndarray:
        """delta_{c>1} I_n + R~."""
        return self.Rt + self.n_shift * np.eye(self.n)

    @cached_property
    def X_inv(self) -> np.ndarray:
        return _spd_inverse(self.X)


def _engine(gram: GramFamily, T: int, settings: SolverSettings) -> LagEngine:
    return LagEngine(gram, T, settings.lag_backend)


def solve_pair(W, T: int, settings: SolverSettings | None = None, regime: str | None = None,
                gram: GramFamily | None = None) -> EquivalentPair:
    """Solve the gamma -> 0 coupled pair (R, R~) for a fixed W and window T."""
    settings = settings or SolverSettings()
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    c = n / T
    if n == T:
        raise ValueError("n = T (c = 1) is excluded")
    expected = "c_lt_1" if c < 1 else "c_gt_1"
    if regime is not None and regime != expected:
        raise ValueError(f"regime {regime!r} inconsistent with c = {c:.4g}")
    gram = gram or gram_family(W, settings.band_tol)
    eng = _engine(gram, T, settings)
    t_shift = 1.0 if c < 1 else 0.0
    n_shift = 1.0 if c > 1 else 0.0
    Q = eng.Q
    eye_n = np.eye(n)

    def nside(k):
        col = np.zeros(T)
        col[:Q + 1] = k
        col[0] += t_shift
        t = inverse_lag_sums(col, settings.toeplitz_path)[:Q + 1] / T
        return eng.combine(t)

    def F(k):
        Rt = nside(k)
        return eng.traces(_spd_inverse(Rt + n_shift * eye_n)) / T

    k0 = np.zeros(Q + 1) if c < 1 else eng.traces(eye_n) / T
    k, iters, res = _fixed_point(F, k0, settings, "first-order fixed point")
    Rt = nside(k)
    return EquivalentPair(ToeplitzKernel(k, T), Rt, expected, c, gram, eng, iters, res)


@dataclass(frozen=True)
class GammaEquivalent:
    kernel: ToeplitzKernel
    Rt: np.ndarray
    Qbar: np.ndarray
    Qtbar: np.ndarray
    iterations: int


def solve_regularized(W, A, eta2: float, gamma: float, settings: SolverSettings | None = None,
                   gram: GramFamily | None = None) -> GammaEquivalent:
    """Regularised (gamma > 0) pair with the low-rank simplification inside the traces."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if eta2 <= 0:
        raise ValueError("eta2 must be positive")
    settings = settings or SolverSettings()
    W = np.asarray(W, dtype=float)
    A = np.asarray(A, dtype=float)
    n, T = A.shape
    gram = gram or gram_family(W, settings.band_tol)
    eng = _engine(gram, T, settings)
    Q = eng.Q
    eye_n = np.eye(n)

    def nside(k):
        col = np.zeros(T)
        col[:Q + 1] = eta2 * k
        col[0] += 1.0
        t = inverse_lag_sums(col, settings.toeplitz_path)[:Q + 1] / (gamma * T)
        return eng.combine(t)

    def F(k):
        Rt = nside(k)
        return eng.traces(_spd_inverse(eye_n + eta2 * Rt)) / (gamma * T)

    k, iters, _ = _fixed_point(F, np.zeros(Q + 1), settings, "regularised fixed point")
    kern = ToeplitzKernel(k, T)
    Rt = nside(k)
    Ty = kern.dense() * eta2 + np.eye(T)
    Nx = eye_n + eta2 * Rt
    Qbar = _spd_inverse(Nx + A @ sla.solve(Ty, A.T, assume_a="pos") / gamma) / gamma
    Qtbar = _spd_inverse(Ty + A.T @ sla.solve(Nx, A, assume_a="pos") / gamma) / gamma
    return GammaEquivalent(kern, Rt, Qbar, Qtbar, iters)


# ---------------------------------------------------------------- second order


@dataclass(frozen=True)
class SecondOrderPair:
    kernel: ToeplitzKernel
    Gt: np.ndarray
    B: np.ndarray = field(repr=False, compare=False)
    iterations: int = 0


def solve_second_order(pair: EquivalentPair, B: np.ndarray | None = None,
                settings: SolverSettings | None = None) -> SecondOrderPair:
    """Solve the linear second-order system for B (default B = S_0)."""
    settings = settings or SolverSettings()
    B = pair.gram.S0 if B is None else np.asarray(B, dtype=float)
    if B.shape != (pair.n, pair.n) or not np.allclose(B, B.T, rtol=0, atol=1e-12 * max(1.0, np.abs(B).max())):
        raise ValueError("B must be symmetric n x n")
    eng, T = pair.engine, pair.T
    Q = eng.Q
    Xi, Yi = pair.X_inv, pair.Y_inv
    base = eng.traces(Xi @ B @ Xi) / T

    def nside(g):
        G = sla.toeplitz(np.concatenate([g, np.zeros(T - Q - 1)]))
        return eng.combine(kernels.lag_sums(Yi @ G @ Yi)[:Q + 1] / T)

    def F(g):
        Gt = nside(g)
        return base + eng.traces(Xi @ Gt @ Xi) / T

    if not np.any(B):
        g = np.zeros(Q + 1)
        iters = 0
    else:
        g, iters, _ = _fixed_point(F, np.zeros(Q + 1), settings, "second-order fixed point")
    return SecondOrderPair(ToeplitzKernel(g, T), nside(g), B, iters)


# older interface names, kept as aliases
solve_prop1 = solve_pair
solve_theorem1 = solve_regularized
solve_prop2 = solve_second_order


# ---------------------------------------------------------------- errors


def _data_matrix(pair, W, m, U):
    from .esn import krylov_matrix

    U = np.asarray(U, dtype=float)
    M = krylov_matrix(W, m, U.shape[0])
    return M @ U


def train_mse_deteq(pair: EquivalentPair, W, m, U, r, eta2: float, A=None) -> float:
    """Training MSE equivalent: (1/T) r^T Q~ r for c < 1, zero for c > 1."""
    if pair.regime == "c_gt_1":
        return 0.0
    if eta2 <= 0:
        raise ValueError("eta2 must be positive")
    A = _data_matrix(pair, W, m, U) if A is None else np.asarray(A, dtype=float)
    r = np.asarray(r, dtype=float)
    inner = pair.Y + A.T @ sla.solve(pair.X, A, assume_a="pos") / eta2
    try:
        sol = sla.solve(inner, r, assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("singular training resolvent") from exc
    return float(r @ sol / pair.T)


def _test_mse_c0(S0, A, A_hat, r, r_hat, eta2):
    T, T_hat = A.shape[1], A_hat.shape[1]
    K = eta2 * S0 + A @ A.T
    w = sla.solve(K, A @ r, assume_a="pos")
    dev = A_hat.T @ w / math.sqrt(T) - r_hat / math.sqrt(T_hat)
    return float(dev @ dev + eta2 * (w @ S0 @ w) / T)


def test_mse_deteq(pair: EquivalentPair, second: SecondOrderPair | None, W, m, U, U_hat, r, r_hat,
                   eta2: float, settings: SolverSettings | None = None, A=None, A_hat=None,
                   use_c0: bool | None = None) -> float:
    """Three-term test MSE equivalent.

    Below ``c_zero_threshold`` (or with ``use_c0=True``) the c = 0 form is used,
    where both second-order objects vanish.
    """
    settings = settings or SolverSettings()
    if eta2 <= 0:
        raise ValueError("eta2 must be positive")
    r = np.asarray(r, dtype=float)
    r_hat = np.asarray(r_hat, dtype=float)
    if A is None:
        A = _data_matrix(pair, W, m, U)
    if A_hat is None:
        A_hat = _data_matrix(pair, W, m, U_hat)
    if A_hat.shape[0] != A.shape[0] or A_hat.shape[1] != r_hat.shape[0]:
        raise ValueError("test data matrix does not match the test target")
    if use_c0 is None:
        use_c0 = pair.c < settings.c_zero_threshold
    if use_c0:
        return _test_mse_c0(pair.gram.S0, A, A_hat, r, r_hat, eta2)
    if second is None:
        second = solve_second_order(pair, settings=settings)
    T, T_hat = pair.T, A_hat.shape[1]
    v = pair.Y_inv @ r
    Qn = _spd_inverse(pair.X + A @ pair.Y_inv @ A.T / eta2)
    w = Qn @ (A @ v)
    dev = A_hat.T @ w / (eta2 * math.sqrt(T)) - r_hat / math.sqrt(T_hat)
    Qt_r = sla.solve(pair.Y + A.T @ pair.X_inv @ A / eta2, r, assume_a="pos")
    G = second.kernel.dense()
    term2 = Qt_r @ G @ Qt_r / T
    term3 = w @ (pair.gram.S0 + second.Gt) @ w / (eta2 * T)
    return float(dev @ dev + term2 + term3)


test_mse_deteq.__test__ = False


def memory_matrix(pair: EquivalentPair, W, m) -> np.ndarray:
    """{m^T (W^i)^T R~^{-1} W^j m}_{i,j < T} for the given input vector."""
    from .esn import krylov_matrix

    M = krylov_matrix(W, m, pair.T)
    return M.T @ sla.solve(pair.Rt, M, assume_a="pos")


def trace_memory_matrix(pair: EquivalentPair, W, norm2: float = 1.0) -> np.ndarray:
    """Large-n form of ``memory_matrix`` for isotropic m: ||m||^2/n tr((W^i)^T R~^{-1} W^j).

    Only lags up to the Gram cutoff are filled; beyond it the entries are
    below the Gram tolerance and left at zero.
    """
    W = np.asarray(W, dtype=float)
    n, T = W.shape[0], pair.T
    L = min(T, pair.gram.q_max + 1)
    K = sla.inv(pair.Rt)
    lam, V, Vinv = eigendecomposition(W)
    if not np.iscomplexobj(V):
        C = (V.T @ K @ V) ** 2
    else:
        C = (V.T @ K @ V) * (Vinv @ Vinv.T).T
    powers = lam[None, :] ** np.arange(L)[:, None]
    block = np.real(powers @ C @ powers.T) * (norm2 / n)
    out = np.zeros((T, T))
    out[:L, :L] = 0.5 * (block + block.T)
    return out


def memory_curve(pair: EquivalentPair, W, m, taus, eta2_probe: float = 1e-8,
                 profile: str = "trace", D: np.ndarray | None = None):
    """MC at ``eta2_probe / 10`` for each tau, and the relative change from ``eta2_probe``."""
    if pair.regime != "c_lt_1":
        raise ValueError("memory capacity is defined for c < 1")
    taus = np.atleast_1d(np.asarray(taus, dtype=int))
    if np.any(taus < 0) or np.any(taus >= pair.T):
        raise ValueError("tau must lie in [0, T)")
    if eta2_probe <= 0:
        raise ValueError("eta2_probe must be positive")
    if D is None:
        if profile == "trace":
            norm2 = 1.0 if m is None else float(np.dot(m, m))
            D = trace_memory_matrix(pair, W, norm2)
        elif profile == "sample":
            D = memory_matrix(pair, W, m)
        else:
            raise ValueError(f"unknown profile {profile!r}")
    cols = np.arange(taus.shape[0])
    E = np.zeros((pair.T, taus.shape[0]))
    E[taus, cols] = 1.0

    def at(e2):
        sol = sla.solve(e2 * pair.Y + D, E, assume_a="pos")
        return 1.0 / sol[taus, cols]

    coarse, fine = at(eta2_probe), at(eta2_probe / 10.0)
    rel = np.abs(coarse - fine) / np.maximum(np.abs(fine), 1e-300)
    return fine, rel


def memory_capacity(pair: EquivalentPair, W, m, tau, eta2_probe: float = 1e-8,
                    stab_tol: float = 0.01, D: np.ndarray | None = None,
                    profile: str = "trace", strict: bool = True):
    """MC(tau) from the inverse diagonal of eta^2 (I + R) + D at a small probe.

    ``profile="trace"`` takes the large-n limit of D first (m enters only
    through its norm); ``"sample"`` keeps the finite-n quadratic forms in m,
    whose rank-n structure sends MC to zero as eta^2 -> 0.  ``tau`` may be an
    int or a sequence.  The value at ``eta2_probe / 10`` must agree to
    ``stab_tol`` relative; otherwise ConvergenceError is raised, or a
    RuntimeWarning is issued when ``strict`` is False.
    """
    mc, rel = memory_curve(pair, W, m, tau, eta2_probe, profile, D)
    if np.any(rel > stab_tol):
        msg = (f"memory capacity not stabilised at eta2={eta2_probe:g} "
               f"(relative change {rel.max():.3g})")
        if strict:
            raise ConvergenceError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return float(mc[0]) if np.ndim(tau) == 0 else mc
