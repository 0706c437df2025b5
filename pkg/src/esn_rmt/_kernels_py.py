"""Pure-Python/numpy versions of the compiled kernels.

Each function returns the same quantity as its counterpart in ``_kernels.pyx``.
Where the loop admits a vectorised reformulation (FFT correlations, BLAS
products) the fallback uses it, so the two routes double as cross-checks.
"""

import numpy as np


def _mg_rhs(x, xd, beta, gamma, exponent):
    return beta * xd / (1.0 + xd**exponent) - gamma * x


def mackey_glass_rk4(n_steps, dt, beta, gamma, exponent, delay_steps, history):
    hist = np.asarray(history, dtype=float)
    if hist.shape[0] != delay_steps + 1:
        raise ValueError("history must hold delay_steps + 1 samples")
    x = [float(v) for v in hist] + [0.0] * n_steps
    for i in range(delay_steps, delay_steps + n_steps):
        xt = x[i]
        xd = x[i - delay_steps]
        xn = x[i - delay_steps + 1]
        xm = 0.5 * (xd + xn)
        k1 = _mg_rhs(xt, xd, beta, gamma, exponent)
        k2 = _mg_rhs(xt + 0.5 * dt * k1, xm, beta, gamma, exponent)
        k3 = _mg_rhs(xt + 0.5 * dt * k2, xm, beta, gamma, exponent)
        k4 = _mg_rhs(xt + dt * k3, xn, beta, gamma, exponent)
        x[i + 1] = xt + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return np.array(x[delay_steps + 1:])


def reservoir_states(W, m, drive, noise, x0):
    W = np.asarray(W, dtype=float)
    m = np.asarray(m, dtype=float)
    drive = np.asarray(drive, dtype=float)
    noise = np.asarray(noise, dtype=float)
    steps, n = noise.shape
    if drive.shape[0] != steps or W.shape != (n, n):
        raise ValueError("shape mismatch")
    out = np.empty((steps, n))
    prev = np.asarray(x0, dtype=float)
    for s in range(steps):
        prev = W @ prev + m * drive[s] + noise[s]
        out[s] = prev
    return out


def _weighted_autocorr(a):
    """sum_k (T - q - k) a_k a_{k+q} for q = 0..T-1, via FFT."""
    T = a.shape[0]
    size = 1 << int(np.ceil(np.log2(2 * T)))
    k = np.arange(T)
    fa = np.fft.rfft(a, size)
    fka = np.fft.rfft(k * a, size)
    plain = np.fft.irfft(np.conj(fa) * fa, size)[:T]
    # sum_k k a_k a_{k+q}
    weighted = np.fft.irfft(np.conj(fka) * fa, size)[:T]
    q = np.arange(T)
    return (T - q) * plain - weighted


def gs_lag_sums(x):
    a = np.asarray(x, dtype=float)
    b = np.zeros_like(a)
    b[1:] = a[:0:-1]
    return (_weighted_autocorr(a) - _weighted_autocorr(b)) / a[0]


def toeplitz_inverse_dense(x):
    from scipy.linalg import toeplitz

    a = np.asarray(x, dtype=float)
    T = a.shape[0]
    b = np.zeros(T)
    b[1:] = a[:0:-1]
    zeros = np.zeros(T)
    L1 = toeplitz(a, zeros)
    L2 = toeplitz(b, zeros)
    return (L1 @ L1.T - L2 @ L2.T) / a[0]


def lag_sums(B):
    B = np.asarray(B, dtype=float)
    return np.array([np.trace(B, offset=q) for q in range(B.shape[0])])


def power_moments(lam, d, qmax):
    lam = np.asarray(lam, dtype=complex)
    cur = np.array(d, dtype=complex)
    out = np.empty(qmax + 1, dtype=complex)
    for q in range(qmax + 1):
        out[q] = cur.sum()
        cur *= lam
    return out


def poly_eval(t, lam):
    lam = np.asarray(lam, dtype=complex)
    acc = np.zeros_like(lam)
    for coef in np.asarray(t, dtype=float)[::-1]:
        acc = acc * lam + coef
    return acc
