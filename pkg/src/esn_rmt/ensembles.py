"""Random connectivity matrices, input weights and spectral measures."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

KINDS = ("haar", "gaussian_iid", "wigner", "multi_memory", "projection", "user")


@dataclass(frozen=True)
class MatrixSpec:
    """Description of a connectivity ensemble.

    ``kind`` is one of ``haar``, ``gaussian_iid``, ``wigner``, ``multi_memory``,
    ``projection`` or ``user``.  ``modes`` holds ``(sigma, fraction)`` pairs for
    the multi-memory ensemble and ``matrix`` the square array for ``user``.
    """

    kind: str
    n: int
    sigma: float | None = None
    modes: tuple[tuple[float, float], ...] = ()
    matrix: np.ndarray | None = field(default=None, compare=False)
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown matrix kind {self.kind!r}")
        if int(self.n) <= 1:
            raise ValueError("matrix dimension n must exceed 1")
        if self.kind in ("haar", "gaussian_iid", "wigner", "projection"):
            if self.sigma is None or not 0.0 < float(self.sigma) < 1.0:
                raise ValueError("sigma must lie in (0, 1)")
        if self.kind == "multi_memory":
            if not self.modes:
                raise ValueError("multi_memory needs at least one (sigma, fraction) mode")
            for s, c in self.modes:
                if not 0.0 < s < 1.0:
                    raise ValueError("mode sigma must lie in (0, 1)")
                if c <= 0.0:
                    raise ValueError("mode fractions must be positive")
            if abs(sum(c for _, c in self.modes) - 1.0) > 1e-9:
                raise ValueError("mode fractions must sum to 1")
            object.__setattr__(self, "modes", tuple((float(s), float(c)) for s, c in self.modes))
        if self.kind == "user":
            if self.matrix is None:
                raise ValueError("user kind requires a matrix")
            mat = np.asarray(self.matrix, dtype=float)
            if mat.shape != (self.n, self.n):
                raise ValueError("user matrix must be square n x n")
            if not np.all(np.isfinite(mat)):
                raise ValueError("user matrix has non-finite entries")

    @classmethod
    def from_dict(cls, data: dict) -> "MatrixSpec":
        modes = tuple((float(m["sigma"]), float(m["fraction"])) for m in data.get("modes", []))
        matrix = data.get("matrix")
        return cls(
            kind=data["kind"],
            n=int(data["n"]),
            sigma=None if data.get("sigma") is None else float(data["sigma"]),
            modes=modes,
            matrix=None if matrix is None else np.asarray(matrix, dtype=float),
            seed=data.get("seed"),
        )

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "n": self.n}
        if self.sigma is not None:
            out["sigma"] = self.sigma
        if self.modes:
            out["modes"] = [{"sigma": s, "fraction": c} for s, c in self.modes]
        if self.matrix is not None:
            out["matrix"] = np.asarray(self.matrix).tolist()
        if self.seed is not None:
            out["seed"] = self.seed
        return out


@dataclass(frozen=True)
class SpectralMeasure:
    """Limiting eigenvalue distribution of a normal connectivity matrix.

    ``kind`` is ``discrete`` (atoms/weights), ``semicircle`` or ``two_point``.
    """

    kind: str
    atoms: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()
    sigma: float | None = None

    def __post_init__(self):
        if self.kind == "discrete":
            if len(self.atoms) != len(self.weights) or not self.atoms:
                raise ValueError("atoms and weights must be non-empty and aligned")
            if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-12:
                raise ValueError("weights must be nonnegative and sum to 1")
            if any(not -1.0 < t < 1.0 for t in self.atoms):
                raise ValueError("atoms must lie in (-1, 1)")
        elif self.kind in ("semicircle", "two_point"):
            if self.sigma is None or not 0.0 < self.sigma < 1.0:
                raise ValueError("sigma must lie in (0, 1)")
        else:
            raise ValueError(f"unknown measure kind {self.kind!r}")

    @classmethod
    def semicircle(cls, sigma: float) -> "SpectralMeasure":
        return cls("semicircle", sigma=float(sigma))

    @classmethod
    def two_point(cls, sigma: float) -> "SpectralMeasure":
        return cls("two_point", sigma=float(sigma))

    @classmethod
    def discrete(cls, atoms: Sequence[float], weights: Sequence[float]) -> "SpectralMeasure":
        return cls("discrete", atoms=tuple(map(float, atoms)), weights=tuple(map(float, weights)))

    def quadrature(self, nodes: int = 128) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights integrating polynomials against the measure.

        The semicircle uses Gauss-Chebyshev of the second kind, whose weight
        function sqrt(1 - x^2) is the semicircle density after rescaling.
        """
        if self.kind == "discrete":
            return np.array(self.atoms), np.array(self.weights)
        if self.kind == "two_point":
            return np.array([-self.sigma, self.sigma]), np.array([0.5, 0.5])
        j = np.arange(1, nodes + 1)
        theta = j * np.pi / (nodes + 1)
        x = np.cos(theta)
        w = (2.0 / (nodes + 1)) * np.sin(theta) ** 2
        return self.sigma * x, w

    @property
    def is_symmetric(self) -> bool:
        if self.kind in ("semicircle", "two_point"):
            return True
        pairs = sorted(zip(self.atoms, self.weights))
        mirrored = sorted((-t, w) for t, w in pairs)
        return all(abs(a[0] - b[0]) < 1e-15 and abs(a[1] - b[1]) < 1e-15 for a, b in zip(pairs, mirrored))


def multi_memory_block_sizes(modes: Sequence[tuple[float, float]], n: int) -> list[int]:
    """Largest-remainder rounding of ``fraction * n`` so sizes sum to ``n``."""
    raw = [c * n for _, c in modes]
    sizes = [math.floor(x) for x in raw]
    short = n - sum(sizes)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[:short]:
        sizes[i] += 1
    if any(s == 0 for s in sizes):
        raise ValueError(f"multi-memory block of size 0 after rounding: {sizes}")
    return sizes


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR with sign-corrected R diagonal)."""
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_connectivity(spec: MatrixSpec, seed=None) -> np.ndarray:
    """Draw a connectivity matrix; identical (spec, seed) give identical output."""
    if seed is None:
        seed = spec.seed
    rng = _rng(seed)
    n = spec.n
    if spec.kind == "haar":
        return spec.sigma * haar_orthogonal(n, rng)
    if spec.kind == "gaussian_iid":
        return rng.standard_normal((n, n)) * (spec.sigma / math.sqrt(n))
    if spec.kind == "wigner":
        g = rng.standard_normal((n, n)) * (spec.sigma / (2.0 * math.sqrt(n)))
        upper = np.triu(g)
        return upper + np.triu(g, 1).T
    if spec.kind == "multi_memory":
        sizes = multi_memory_block_sizes(spec.modes, n)
        W = np.zeros((n, n))
        start = 0
        for (sigma, _), size in zip(spec.modes, sizes):
            W[start:start + size, start:start + size] = sigma * haar_orthogonal(size, rng)
            start += size
        return W
    if spec.kind == "projection":
        V = haar_orthogonal(n, rng)
        n_plus = (n + 1) // 2
        diag = np.full(n, -spec.sigma)
        diag[:n_plus] = spec.sigma
        W = (V * diag) @ V.T
        return 0.5 * (W + W.T)
    return np.array(spec.matrix, dtype=float, copy=True)


def sample_input_weights(n: int, mode: str = "unit_gaussian_normalized", seed=None,
                         W: np.ndarray | None = None, index: int = 0) -> np.ndarray:
    """Input weight vector of unit norm.

    ``mode="eigvec_of"`` returns a real unit eigenvector of ``W`` for the
    eigenvalue of ``index``-th largest modulus.  For a complex pair, a vector
    of the real two-dimensional invariant plane is returned only when the
    pair is exactly real; otherwise ``ValueError`` is raised.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if mode == "unit_gaussian_normalized":
        v = _rng(seed).standard_normal(n)
        return v / np.linalg.norm(v)
    if mode == "eigvec_of":
        if W is None:
            raise ValueError("eigvec_of requires W")
        W = np.asarray(W, dtype=float)
        if np.allclose(W, W.T, rtol=0, atol=0):
            vals, vecs = np.linalg.eigh(W)
            order = np.argsort(-np.abs(vals), kind="stable")
            v = vecs[:, order[index]]
        else:
            vals, vecs = np.linalg.eig(W)
            order = np.argsort(-np.abs(vals), kind="stable")
            lam = vals[order[index]]
            if abs(lam.imag) > 1e-12 * max(1.0, abs(lam)):
                raise ValueError("requested eigenvalue is complex; no real eigenvector")
            v = np.real(vecs[:, order[index]])
        return v / np.linalg.norm(v)
    raise ValueError(f"unknown input-weight mode {mode!r}")


def spectral_stats(W: np.ndarray) -> tuple[float, float]:
    """Return (spectral radius, operator norm)."""
    W = np.asarray(W, dtype=float)
    if not np.any(W):
        return 0.0, 0.0
    if np.array_equal(W, W.T):
        vals = np.linalg.eigvalsh(W)
        rho = float(np.max(np.abs(vals)))
        return rho, rho
    rho = float(np.max(np.abs(np.linalg.eigvals(W))))
    norm = float(np.linalg.norm(W, 2))
    return rho, norm


def check_stability(W: np.ndarray) -> tuple[float, float]:
    """Reject spectral radius >= 1; warn when the operator norm is >= 1."""
    rho, norm = spectral_stats(W)
    if rho >= 1.0:
        raise ValueError(f"spectral radius {rho:.6g} is not below 1")
    if norm >= 1.0:
        warnings.warn(f"operator norm {norm:.4g} >= 1; only the spectral radius is below 1",
                      RuntimeWarning, stacklevel=2)
    return rho, norm
