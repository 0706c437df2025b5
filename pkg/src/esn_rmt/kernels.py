"""Backend selection for the scalar hot loops.

The compiled extension is used when it imports; otherwise the numpy fallback
is used.  Setting ``ESN_RMT_PURE_PYTHON=1`` forces the fallback.  Two kernels
stay on numpy even when compiled code is present because the vectorised
version is faster (FFT lag sums, polynomial evaluation); see
benchmarks/bench_kernels.py.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("ESN_RMT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

mackey_glass_rk4 = _impl.mackey_glass_rk4
reservoir_states = _impl.reservoir_states
toeplitz_inverse_dense = _impl.toeplitz_inverse_dense
lag_sums = _impl.lag_sums
power_moments = _impl.power_moments
gs_lag_sums = python_backend.gs_lag_sums
poly_eval = python_backend.poly_eval

__all__ = [
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "mackey_glass_rk4",
    "reservoir_states",
    "gs_lag_sums",
    "toeplitz_inverse_dense",
    "lag_sums",
    "power_moments",
    "poly_eval",
]
