"""Task construction, synthetic series and CSV input/output."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .esn import Episode, InputSeries

TASK_KINDS = ("mackey_glass_ahead", "delay", "linear_filter", "impulse", "ar1_delay", "csv_series")

RESULT_COLUMNS = (
    "eta2", "train_nmse_mc", "train_nmse_mc_std", "test_nmse_mc", "test_nmse_mc_std",
    "train_nmse_theory_fixedW", "test_nmse_theory_fixedW",
    "train_nmse_theory_limit", "test_nmse_theory_limit",
    "n", "T", "That", "trials", "seed",
)


@dataclass(frozen=True)
class MackeyGlassParams:
    beta: float = 0.2
    gamma: float = 0.1
    delay: float = 17.0
    exponent: float = 10.0
    dt: float = 0.1
    subsample: int = 10
    transient: int = 1000

    def __post_init__(self):
        if self.delay <= 0:
            raise ValueError("Mackey-Glass delay must be positive")
        if self.dt <= 0 or self.subsample < 1 or self.transient < 0:
            raise ValueError("invalid Mackey-Glass integration settings")


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def standardize(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    sd = x.std()
    if sd == 0:
        raise ValueError("constant series cannot be standardized")
    z = (x - x.mean()) / sd
    z -= z.mean()
    return z / z.std()


def mackey_glass(length: int, seed=None, params: MackeyGlassParams | None = None) -> np.ndarray:
    """Standardized Mackey-Glass samples (RK4, constant random initial history)."""
    if length < 1:
        raise ValueError("length must be positive")
    p = params or MackeyGlassParams()
    delay_steps = int(round(p.delay / p.dt))
    x0 = _rng(seed).uniform(0.5, 1.5)
    history = np.full(delay_steps + 1, x0)
    n_steps = p.transient + length * p.subsample
    raw = kernels.mackey_glass_rk4(n_steps, p.dt, p.beta, p.gamma, p.exponent, delay_steps, history)
    kept = raw[p.transient + p.subsample - 1::p.subsample][:length]
    return standardize(kept)


def ar1_series(length: int, q: float, seed=None) -> np.ndarray:
    """Stationary unit-variance AR(1) path with lag-k correlation q^k."""
    if not -1.0 < q < 1.0:
        raise ValueError("|q| must be below 1")
    rng = _rng(seed)
    eps = rng.standard_normal(length)
    out = np.empty(length)
    out[0] = eps[0]
    scale = math.sqrt(1.0 - q * q)
    for t in range(1, length):
        out[t] = q * out[t - 1] + scale * eps[t]
    return out


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    T: int
    T_hat: int | None = None
    history: int | None = None
    steps: int = 1
    tau: int = 0
    b: tuple[float, ...] = ()
    q_ar: float = 0.0
    path: str | None = None
    column: str | int | None = None
    impulse_at: int = 0
    mg: MackeyGlassParams = field(default_factory=MackeyGlassParams)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.T < 1 or (self.T_hat is not None and self.T_hat < 1):
            raise ValueError("window lengths must be positive")
        if self.tau < 0 or self.steps < 0:
            raise ValueError("delays must be nonnegative")
        if self.kind == "ar1_delay" and not abs(self.q_ar) < 1.0:
            raise ValueError("|q_ar| must be below 1")
        if self.kind == "linear_filter":
            if not self.b or not all(math.isfinite(v) for v in self.b):
                raise ValueError("filter coefficients must be finite and non-empty")
        if self.kind == "csv_series" and not self.path:
            raise ValueError("csv_series needs a path")
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))

    @property
    def H(self) -> int:
        if self.history is not None:
            return int(self.history)
        return max(self.T, self.T_hat or 0) - 1

    @classmethod
    def from_dict(cls, data: dict, T: int | None = None, T_hat: int | None = None) -> "TaskSpec":
        d = dict(data)
        kind = d.pop("kind")
        b = d.pop("b", None)
        if b is None and "alpha" in d:
            alpha = float(d.pop("alpha"))
            taps = int(d.pop("taps", 20))
            b = [alpha**i for i in range(taps)]
        mg = MackeyGlassParams(**d.pop("mackey_glass", {}))
        return cls(kind=kind, T=int(d.pop("T", T)), T_hat=d.pop("T_hat", T_hat), b=tuple(b or ()),
                   mg=mg, **d)


def _lagged(values: np.ndarray, history: int, T: int, lag: int) -> np.ndarray:
    return InputSeries(values, history).lagged(lag)[:T]


def _split_series(x: np.ndarray, H: int, T: int, T_hat: int | None, shift: int) -> Episode:
    need = H + T + (T_hat or 0) + shift
    if x.shape[0] < need:
        raise ValueError(f"series too short: need {need} samples, have {x.shape[0]}")
    u = InputSeries(x[:H + T], H)
    r = x[H + shift:H + T + shift]
    if T_hat is None:
        return Episode(u, r)
    u_hat = InputSeries(x[T:T + H + T_hat], H)
    r_hat = x[T + H + shift:T + H + T_hat + shift]
    return Episode(u, r, u_hat, r_hat)


def _filtered_episode(values, values_hat, H, T, T_hat, taps) -> Episode:
    def target(vals, L):
        out = np.zeros(L)
        for i, coef in enumerate(taps):
            if coef != 0.0:
                out += coef * _lagged(vals, H, L, i)
        return out

    u = InputSeries(values, H)
    r = target(values, T)
    if values_hat is None:
        return Episode(u, r)
    return Episode(u, r, InputSeries(values_hat, H), target(values_hat, T_hat))


def build_task(spec: TaskSpec, seed=None) -> Episode:
    """Training (and, when ``T_hat`` is set, test) episode for a task.

    Series tasks use consecutive disjoint windows, the test history being the
    true samples that precede its window.  Delay, filter and AR tasks use
    independent train and test input draws.
    """
    rng = _rng(seed)
    H, T, T_hat = spec.H, spec.T, spec.T_hat
    if spec.kind == "mackey_glass_ahead":
        x = mackey_glass(H + T + (T_hat or 0) + spec.steps, rng, spec.mg)
        return _split_series(x, H, T, T_hat, spec.steps)
    if spec.kind == "csv_series":
        x = standardize(load_series_csv(spec.path, spec.column))
        return _split_series(x, H, T, T_hat, spec.steps)
    if spec.kind == "impulse":
        k = spec.impulse_at
        if not 0 <= k + spec.tau < T:
            raise ValueError("impulse and delay must fall inside the window")

        def pulse(L):
            v = np.zeros(H + L)
            v[H + k] = math.sqrt(L)
            return v

        vals = pulse(T)
        vals_hat = pulse(T_hat) if T_hat else None
        return _filtered_episode(vals, vals_hat, H, T, T_hat, [0.0] * spec.tau + [1.0])
    if spec.kind in ("delay", "linear_filter"):
        taps = [0.0] * spec.tau + [1.0] if spec.kind == "delay" else list(spec.b)
        vals = rng.standard_normal(H + T)
        vals_hat = rng.standard_normal(H + T_hat) if T_hat else None
        return _filtered_episode(vals, vals_hat, H, T, T_hat, taps)
    # ar1_delay
    vals = ar1_series(H + T, spec.q_ar, rng)
    vals_hat = ar1_series(H + T_hat, spec.q_ar, rng) if T_hat else None
    return _filtered_episode(vals, vals_hat, H, T, T_hat, [0.0] * spec.tau + [1.0])


def inject_impulsive_noise(series, p: float, s2: float, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Add N(0, s2) to each sample independently with probability p; returns (series, mask)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if s2 < 0:
        raise ValueError("s2 must be nonnegative")
    x = np.asarray(series, dtype=float)
    rng = _rng(seed)
    mask = rng.random(x.shape[0]) < p
    noise = rng.standard_normal(x.shape[0]) * math.sqrt(s2)
    return x + np.where(mask, noise, 0.0), mask


# ---------------------------------------------------------------- CSV


def load_series_csv(path, column: str | int | None = None) -> np.ndarray:
    """Read one numeric column from a ``value`` or ``t,value`` CSV (optional header)."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ValueError("empty CSV")
    header = None
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    width = len(rows[0]) if rows else 0
    if column is None:
        idx = width - 1
    elif isinstance(column, int):
        idx = column
    else:
        if header is None or column not in header:
            raise ValueError(f"column {column!r} not found")
        idx = header.index(column)
    values = []
    for lineno, row in enumerate(rows, start=2 if header else 1):
        try:
            v = float(row[idx])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"non-numeric cell at row {lineno}") from exc
        if not math.isfinite(v):
            raise ValueError(f"non-finite value at row {lineno}")
        values.append(v)
    if not values:
        raise ValueError("CSV has no data rows")
    return np.array(values)


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, ".17g")


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_results_csv(records: Iterable[dict], path, columns: Sequence[str] = RESULT_COLUMNS,
                      comment: str | None = None) -> None:
    """Write records atomically; missing or NaN values become empty fields."""
    buf = io.StringIO()
    if comment is not None:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([format_value(rec.get(col)) for col in columns])
    atomic_write_text(path, buf.getvalue())


def read_results_csv(path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    out = []
    for row in reader:
        rec = {}
        for k, v in row.items():
            if v == "":
                rec[k] = None
            else:
                try:
                    rec[k] = int(v) if v.lstrip("-").isdigit() else float(v)
                except ValueError:
                    rec[k] = v
        out.append(rec)
    return out
