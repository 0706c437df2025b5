# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled scalar loops.  Signatures mirror ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()


cdef inline double _mg_rhs(double x, double xd, double beta, double gamma,
                           double exponent) nogil:
    return beta * xd / (1.0 + pow(xd, exponent)) - gamma * x


def mackey_glass_rk4(Py_ssize_t n_steps, double dt, double beta, double gamma,
                     double exponent, Py_ssize_t delay_steps, history):
    cdef double[::1] hist = np.ascontiguousarray(history, dtype=np.float64)
    if hist.shape[0] != delay_steps + 1:
        raise ValueError("history must hold delay_steps + 1 samples")
    out_arr = np.empty(n_steps + delay_steps + 1, dtype=np.float64)
    cdef double[::1] x = out_arr
    cdef Py_ssize_t i
    cdef double xt, xd, xn, xm, k1, k2, k3, k4
    for i in range(delay_steps + 1):
        x[i] = hist[i]
    with nogil:
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
    return out_arr[delay_steps + 1:]


def reservoir_states(W, m, drive, noise, x0):
    cdef double[:, ::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(m, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(drive, dtype=np.float64)
    cdef double[:, ::1] nz = np.ascontiguousarray(noise, dtype=np.float64)
    cdef double[::1] start = np.ascontiguousarray(x0, dtype=np.float64)
    cdef int n = <int> w.shape[0]
    cdef Py_ssize_t steps = dv.shape[0]
    if nz.shape[0] != steps or nz.shape[1] != n or mv.shape[0] != n or start.shape[0] != n:
        raise ValueError("shape mismatch")
    out_arr = np.empty((steps, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t s, i
    cdef int inc = 1
    cdef double one = 1.0
    cdef char trans = b'T'
    cdef double *prev
    with nogil:
        for s in range(steps):
            for i in range(n):
                out[s, i] = nz[s, i] + mv[i] * dv[s]
            if s == 0:
                prev = &start[0]
            else:
                prev = &out[s - 1, 0]
            # row-major W read as column-major is W^T; 'T' restores W
            dgemv(&trans, &n, &n, &one, &w[0, 0], &n, prev, &inc, &one, &out[s, 0], &inc)
    return out_arr


def gs_lag_sums(x):
    cdef double[::1] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t T = a.shape[0]
    out_arr = np.zeros(T, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] b = np.zeros(T, dtype=np.float64)
    cdef Py_ssize_t q, k
    cdef double acc
    cdef double x0 = a[0]
    for k in range(1, T):
        b[k] = a[T - k]
    with nogil:
        for q in range(T):
            acc = 0.0
            for k in range(T - q):
                acc += (T - q - k) * (a[k] * a[k + q] - b[k] * b[k + q])
            out[q] = acc / x0
    return out_arr


def toeplitz_inverse_dense(x):
    cdef double[::1] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t T = a.shape[0]
    out_arr = np.empty((T, T), dtype=np.float64)
    cdef double[:, ::1] B = out_arr
    cdef double[::1] b = np.zeros(T, dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double x0 = a[0]
    for i in range(1, T):
        b[i] = a[T - i]
    with nogil:
        for j in range(T):
            B[0, j] = a[j]
        for i in range(1, T):
            B[i, 0] = a[i]
            for j in range(1, T):
                B[i, j] = B[i - 1, j - 1] + (a[i] * a[j] - b[i] * b[j]) / x0
    return out_arr


def lag_sums(B):
    cdef double[:, ::1] M = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t T = M.shape[0]
    out_arr = np.zeros(T, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t q, i
    cdef double acc
    with nogil:
        for q in range(T):
            acc = 0.0
            for i in range(T - q):
                acc += M[i, i + q]
            out[q] = acc
    return out_arr


def power_moments(lam, d, Py_ssize_t qmax):
    cdef double complex[::1] lv = np.ascontiguousarray(lam, dtype=np.complex128)
    cdef double complex[::1] dv = np.ascontiguousarray(d, dtype=np.complex128)
    cdef Py_ssize_t n = lv.shape[0]
    out_arr = np.zeros(qmax + 1, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef double complex[::1] cur = np.array(dv, dtype=np.complex128)
    cdef Py_ssize_t q, a
    cdef double complex acc
    with nogil:
        for q in range(qmax + 1):
            acc = 0.0
            for a in range(n):
                acc = acc + cur[a]
                cur[a] = cur[a] * lv[a]
            out[q] = acc
    return out_arr


def poly_eval(t, lam):
    cdef double[::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef double complex[::1] lv = np.ascontiguousarray(lam, dtype=np.complex128)
    cdef Py_ssize_t n = lv.shape[0]
    cdef Py_ssize_t Q = tv.shape[0]
    out_arr = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef Py_ssize_t a, q
    cdef double complex acc
    with nogil:
        for a in range(n):
            acc = 0.0
            for q in range(Q - 1, -1, -1):
                acc = acc * lv[a] + tv[q]
            out[a] = acc
    return out_arr
