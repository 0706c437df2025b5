"""Batch experiment runner: ``esn-rmt sweep|memory-curve|design|compare``."""

from __future__ import annotations

import argparse
import copy
import datetime as _dt
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import closedform as cf
from . import deteq
from . import esn
from .ensembles import MatrixSpec, sample_connectivity, sample_input_weights
from .esn import ConvergenceError
from .tasks import TaskSpec, build_task, inject_impulsive_noise, write_results_csv

LIMIT_KINDS = ("haar", "multi_memory")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# ---------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    matrix: MatrixSpec
    task: TaskSpec
    n: int
    T: int
    T_hat: int
    eta2: np.ndarray
    trials: int = 1
    seed: int = 0
    theory: str = "both"
    input_weights: dict = field(default_factory=lambda: {"mode": "unit_gaussian_normalized"})
    redraw_W: bool = False
    pollution: dict | None = None
    tau_max: int = 10
    draws: int = 1
    candidates: list = field(default_factory=list)
    gamma: float = 0.0
    eta2_probe: float = 1e-3
    mc_probe: float = 1e-8
    label: str = ""

    @property
    def c(self) -> float:
        return self.n / self.T

    def limit_supported(self) -> bool:
        return self.matrix.kind in LIMIT_KINDS and self.input_weights.get("mode", "") == "unit_gaussian_normalized"


def _grid(raw) -> np.ndarray:
    if isinstance(raw, dict):
        lo, hi, pts = float(raw["min"]), float(raw["max"]), int(raw.get("points", 25))
        if lo <= 0 or hi < lo or pts < 1:
            raise ConfigError("eta2_grid needs 0 < min <= max and points >= 1")
        return np.logspace(math.log10(lo), math.log10(hi), pts) if pts > 1 else np.array([lo])
    grid = np.asarray(raw, dtype=float).ravel()
    if grid.size == 0 or np.any(grid <= 0):
        raise ConfigError("eta2 values must be positive")
    return grid


def parse_config(data: dict) -> ExperimentConfig:
    try:
        n = int(data["n"])
        T = int(data["T"])
        T_hat = int(data.get("T_hat", T))
        if "seed" not in data:
            raise ConfigError("an explicit seed is required")
        mdict = dict(data["matrix"])
        mdict.setdefault("n", n)
        matrix = MatrixSpec.from_dict(mdict)
        tdict = dict(data["task"])
        pollution = tdict.pop("pollution", None)
        task = TaskSpec.from_dict(tdict, T=T, T_hat=T_hat)
        grid = _grid(data.get("eta2_grid", data.get("eta2", {"min": 1e-4, "max": 10, "points": 25})))
        iw = data.get("input_weights", {"mode": "unit_gaussian_normalized"})
        if isinstance(iw, str):
            iw = {"mode": iw}
        cfg = ExperimentConfig(
            matrix=matrix, task=task, n=n, T=T, T_hat=T_hat, eta2=grid,
            trials=int(data.get("trials", 1)), seed=int(data["seed"]),
            theory=str(data.get("theory", "both")), input_weights=dict(iw),
            redraw_W=bool(data.get("redraw_W", False)), pollution=pollution,
            tau_max=int(data.get("tau_max", 10)), draws=int(data.get("draws", 1)),
            candidates=list(data.get("candidates", [])), gamma=float(data.get("gamma", 0.0)),
            eta2_probe=float(data.get("eta2_probe", 1e-3)), mc_probe=float(data.get("mc_probe", 1e-8)),
            label=str(data.get("label", "")),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    if matrix.n != n:
        raise ConfigError("matrix n differs from top-level n")
    if cfg.eta2_probe <= 0 or cfg.mc_probe <= 0:
        raise ConfigError("probe noise levels must be positive")
    if cfg.trials < 1 or cfg.draws < 1:
        raise ConfigError("trials and draws must be at least 1")
    if n == T:
        raise ConfigError("n / T must differ from 1")
    if cfg.theory not in ("fixedW", "limit", "both"):
        raise ConfigError("theory must be fixedW, limit or both")
    if task.T != T or (task.T_hat or T_hat) != T_hat:
        raise ConfigError("task window lengths disagree with T / T_hat")
    if cfg.pollution is not None:
        p, s2 = float(cfg.pollution.get("p", 0)), float(cfg.pollution.get("s2", 0))
        if not 0 <= p <= 1 or s2 < 0:
            raise ConfigError("pollution needs p in [0, 1] and s2 >= 0")
    return cfg


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


# ---------------------------------------------------------------- shared setup


@dataclass
class Instance:
    """One connectivity draw with its data matrices and solved equivalents."""

    cfg: ExperimentConfig
    W: np.ndarray
    m: np.ndarray
    episode: esn.Episode
    gram: esn.GramFamily
    U: np.ndarray
    U_hat: np.ndarray
    A: np.ndarray
    A_hat: np.ndarray
    pair: deteq.EquivalentPair | None = None
    second: deteq.SecondOrderPair | None = None


def _seeds(cfg: ExperimentConfig):
    root = np.random.SeedSequence(cfg.seed)
    mat, iw, task, pol, mc = root.spawn(5)
    return mat, iw, task, pol, mc


def _input_weights(cfg, W, seed):
    iw = cfg.input_weights
    mode = iw.get("mode", "unit_gaussian_normalized")
    s = iw.get("seed", seed)
    return sample_input_weights(cfg.n, mode, s, W=W, index=int(iw.get("index", 0)))


def _episode(cfg: ExperimentConfig, task_seed, pol_seed) -> esn.Episode:
    ep = build_task(cfg.task, np.random.default_rng(task_seed))
    if cfg.pollution:
        p, s2 = float(cfg.pollution.get("p", 0)), float(cfg.pollution.get("s2", 0))
        vals, _ = inject_impulsive_noise(ep.u_hat.values, p, s2, np.random.default_rng(pol_seed))
        ep = esn.Episode(ep.u, ep.r, esn.InputSeries(vals, ep.u_hat.history), ep.r_hat)
    return ep


def build_instance(cfg: ExperimentConfig, matrix_seed=None, solve: bool = True,
                   second: bool = True) -> Instance:
    mat_s, iw_s, task_s, pol_s, _ = _seeds(cfg)
    mseed = cfg.matrix.seed if cfg.matrix.seed is not None else mat_s
    if matrix_seed is not None:
        mseed = matrix_seed
    W = sample_connectivity(cfg.matrix, np.random.default_rng(mseed))
    m = _input_weights(cfg, W, np.random.default_rng(iw_s))
    ep = _episode(cfg, task_s, pol_s)
    gram = esn.gram_family(W)
    L = max(cfg.T, cfg.T_hat)
    M = esn.krylov_matrix(W, m, L)
    U = esn.input_toeplitz(ep.u)
    U_hat = esn.input_toeplitz(ep.u_hat)
    inst = Instance(cfg, W, m, ep, gram, U, U_hat, M[:, :cfg.T] @ U, M[:, :cfg.T_hat] @ U_hat)
    if solve:
        inst.pair = deteq.solve_pair(W, cfg.T, gram=gram)
        if second and cfg.c >= deteq.SolverSettings().c_zero_threshold:
            inst.second = deteq.solve_second_order(inst.pair)
    return inst


def _energy(r) -> float:
    r = np.asarray(r, dtype=float)
    return float(r @ r / r.shape[0])


def theory_fixed_w(inst: Instance, eta2: float) -> tuple[float, float]:
    ep = inst.episode
    tr = deteq.train_mse_deteq(inst.pair, inst.W, inst.m, inst.U, ep.r, eta2, A=inst.A)
    te = deteq.test_mse_deteq(inst.pair, inst.second, inst.W, inst.m, inst.U, inst.U_hat,
                              ep.r, ep.r_hat, eta2, A=inst.A, A_hat=inst.A_hat)
    return tr / _energy(ep.r), te / _energy(ep.r_hat)


def theory_limit(inst: Instance, eta2: float) -> tuple[float, float]:
    cfg, ep = inst.cfg, inst.episode
    spec = cfg.matrix
    L = max(cfg.T, cfg.T_hat)
    if cfg.c < 1:
        prof = cf.invariant_profile(spec.kind, L, sigma=spec.sigma, modes=spec.modes)
        tr = cf.train_mse_inv_c_lt1(prof, inst.U, ep.r, eta2, cfg.c)
        te = cf.test_mse_inv_c_lt1(prof, prof, inst.U, inst.U_hat, ep.r, ep.r_hat, eta2, cfg.c)
    else:
        tr = 0.0
        if spec.kind == "haar":
            te = cf.test_mse_haar_c_gt1(spec.sigma, inst.U, inst.U_hat, ep.r, ep.r_hat, eta2, cfg.c)
        else:
            prof = cf.invariant_profile(spec.kind, L, modes=spec.modes, regime="c_gt_1", c=cfg.c)
            te = cf.test_mse_profile_c_gt1(prof, inst.U, inst.U_hat, ep.r, ep.r_hat, eta2)
    return tr / _energy(ep.r), te / _energy(ep.r_hat)


def _threads(requested: int | None) -> int:
    env = os.environ.get("ESN_RMT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError("ESN_RMT_THREADS must be an integer") from exc
    return max(1, int(requested or 1))


def _mc_trial(inst: Instance, eta2: float, seq: np.random.SeedSequence, redraw: bool):
    """One Monte Carlo episode: fresh train and test noise (and W if redrawn)."""
    cfg, ep = inst.cfg, inst.episode
    w_seed, train_seed, test_seed = seq.spawn(3)
    if redraw:
        W = sample_connectivity(cfg.matrix, np.random.default_rng(w_seed))
        gram = esn.gram_family(W)
    else:
        W, gram = inst.W, inst.gram
    res = esn.Reservoir(W, inst.m, eta2)
    X = esn.simulate_states(res, ep.u, np.random.default_rng(train_seed), gram=gram).X
    Xh = esn.simulate_states(res, ep.u_hat, np.random.default_rng(test_seed), gram=gram, tag="test").X
    omega = esn.train_readout(X, ep.r)
    return (esn.nmse(esn.train_mse(X, ep.r, omega), ep.r),
            esn.nmse(esn.test_mse(Xh, ep.r_hat, omega), ep.r_hat))


def _std(x) -> float:
    return float(np.std(x, ddof=1)) if len(x) > 1 else float("nan")


# ---------------------------------------------------------------- commands


def cmd_sweep(cfg: ExperimentConfig, threads: int | None = None, monte_carlo: bool = True) -> list[dict]:
    """Monte Carlo and theory NMSE over the eta2 grid."""
    if cfg.theory in ("limit",) and not cfg.limit_supported():
        raise ConfigError(f"no limit formulas for matrix kind {cfg.matrix.kind!r}")
    want_fixed = cfg.theory in ("fixedW", "both")
    want_limit = cfg.theory in ("limit", "both") and cfg.limit_supported()
    inst = build_instance(cfg, solve=want_fixed)
    *_, mc_seed = _seeds(cfg)
    jobs = mc_seed.spawn(len(cfg.eta2) * cfg.trials) if monte_carlo else []
    results: dict[tuple[int, int], tuple[float, float]] = {}
    if monte_carlo:
        keys = [(i, j) for i in range(len(cfg.eta2)) for j in range(cfg.trials)]
        with ThreadPoolExecutor(max_workers=_threads(threads)) as pool:
            futs = {key: pool.submit(_mc_trial, inst, float(cfg.eta2[key[0]]), jobs[k], cfg.redraw_W)
                    for k, key in enumerate(keys)}
            for key in sorted(futs):
                results[key] = futs[key].result()
    rows = []
    for i, e2 in enumerate(cfg.eta2):
        rec = {"eta2": float(e2), "n": cfg.n, "T": cfg.T, "That": cfg.T_hat,
               "trials": cfg.trials, "seed": cfg.seed}
        if monte_carlo:
            tr = [results[(i, j)][0] for j in range(cfg.trials)]
            te = [results[(i, j)][1] for j in range(cfg.trials)]
            rec.update(train_nmse_mc=float(np.mean(tr)), train_nmse_mc_std=_std(tr),
                       test_nmse_mc=float(np.mean(te)), test_nmse_mc_std=_std(te))
        if want_fixed:
            rec["train_nmse_theory_fixedW"], rec["test_nmse_theory_fixedW"] = theory_fixed_w(inst, float(e2))
        if want_limit:
            rec["train_nmse_theory_limit"], rec["test_nmse_theory_limit"] = theory_limit(inst, float(e2))
        rows.append(rec)
    return rows


MEMORY_COLUMNS = ("tau", "mc_fixedW", "mc_fixedW_std", "mc_closed", "max_rel_change", "stable",
                  "n", "T", "draws", "seed")


def cmd_memory_curve(cfg: ExperimentConfig, tau_max: int | None = None, threads: int | None = None) -> list[dict]:
    """MC(tau) for tau = 0..tau_max, generic solver averaged over W draws and closed form.

    ``max_rel_change`` is the largest change of the generic value between the
    probe and a ten times smaller probe; ``stable`` flags it below 1%.
    """
    if cfg.c >= 1:
        raise ConfigError("memory curve needs c < 1")
    tau_max = cfg.tau_max if tau_max is None else tau_max
    if tau_max < 0 or tau_max >= cfg.T:
        raise ConfigError("tau_max must lie in [0, T)")
    taus = np.arange(tau_max + 1)
    mat_s, iw_s, *_ = _seeds(cfg)
    draw_seeds = mat_s.spawn(cfg.draws)
    iw_seeds = iw_s.spawn(cfg.draws)
    isotropic = cfg.input_weights.get("mode", "unit_gaussian_normalized") == "unit_gaussian_normalized"

    def one(k):
        W = sample_connectivity(cfg.matrix, np.random.default_rng(draw_seeds[k]))
        m = _input_weights(cfg, W, np.random.default_rng(iw_seeds[k]))
        pair = deteq.solve_pair(W, cfg.T)
        return deteq.memory_curve(pair, W, m, taus, cfg.mc_probe, "trace" if isotropic else "sample")

    with ThreadPoolExecutor(max_workers=_threads(threads)) as pool:
        out = list(pool.map(one, range(cfg.draws)))
    curves = np.array([mc for mc, _ in out])
    rel = np.max(np.array([r for _, r in out]), axis=0)
    closed = None
    if cfg.limit_supported():
        closed = np.atleast_1d(cf.mc_closed(cfg.matrix.kind, cfg.c, taus, sigma=cfg.matrix.sigma,
                                            modes=cfg.matrix.modes))
    rows = []
    for i, tau in enumerate(taus):
        rows.append({"tau": int(tau), "mc_fixedW": float(curves[:, i].mean()),
                     "mc_fixedW_std": _std(curves[:, i]),
                     "mc_closed": None if closed is None else float(closed[i]),
                     "max_rel_change": float(rel[i]), "stable": int(rel[i] <= 0.01),
                     "n": cfg.n, "T": cfg.T, "draws": cfg.draws, "seed": cfg.seed})
    return rows


DESIGN_COLUMNS = ("candidate", "sigma", "score", "test_nmse_theory_limit", "eta2", "rank", "selected")


def _candidate_profile(cand, L):
    if isinstance(cand, dict):
        modes = tuple((float(m["sigma"]), float(m["fraction"])) for m in cand["modes"])
        name = cand.get("label", "multi_memory")
        return name, None, cf.invariant_profile("multi_memory", L, modes=modes)
    sigma = float(cand)
    if not 0 < sigma < 1:
        raise ConfigError("candidate sigma must lie in (0, 1)")
    return f"haar:{sigma:g}", sigma, cf.invariant_profile("haar", L, sigma=sigma)


def cmd_design(cfg: ExperimentConfig) -> list[dict]:
    """Rank candidate connectivity scales by the delay-profile score."""
    if cfg.c >= 1:
        raise ConfigError("design needs c < 1")
    cands = cfg.candidates or [cfg.matrix.sigma]
    if not cands or cands[0] is None:
        raise ConfigError("no design candidates given")
    *_, task_s, pol_s, _ = _seeds(cfg)
    ep = _episode(cfg, task_s, pol_s)
    U = esn.input_toeplitz(ep.u)
    U_hat = esn.input_toeplitz(ep.u_hat)
    b_hat = cf.estimate_delay_profile(U, ep.r, cfg.gamma)
    L = max(cfg.T, cfg.T_hat)
    rows = []
    for cand in cands:
        name, sigma, prof = _candidate_profile(cand, L)
        try:
            score = cf.design_score(b_hat, prof)
        except ValueError as exc:
            raise ConfigError(f"degenerate delay profile: {exc}") from exc
        te = cf.test_mse_inv_c_lt1(prof, prof, U, U_hat, ep.r, ep.r_hat, cfg.eta2_probe, cfg.c)
        rows.append({"candidate": name, "sigma": sigma, "score": score,
                     "test_nmse_theory_limit": te / _energy(ep.r_hat), "eta2": cfg.eta2_probe})
    order = sorted(range(len(rows)), key=lambda k: (rows[k]["score"], k))
    for rank, k in enumerate(order, start=1):
        rows[k]["rank"] = rank
        rows[k]["selected"] = int(rank == 1)
    return rows


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        out[k] = copy.deepcopy(v)
    return out


def cmd_compare(data: dict, threads: int | None = None) -> tuple[list[dict], list[str]]:
    """Theory (and optional Monte Carlo) columns side by side for several configs."""
    subs = data.get("configs")
    if not isinstance(subs, list) or len(subs) < 2:
        raise ConfigError("compare needs a 'configs' list with at least two entries")
    base = {k: v for k, v in data.items() if k not in ("configs", "monte_carlo")}
    cfgs = [parse_config(_merge(base, s)) for s in subs]
    first = cfgs[0]
    for c in cfgs[1:]:
        if c.task != first.task or not np.array_equal(c.eta2, first.eta2):
            raise ConfigError("compared configs must share the task and eta2 grid")
    mc = bool(data.get("monte_carlo", False))
    labels = []
    columns = ["eta2"]
    per = []
    for k, c in enumerate(cfgs):
        label = c.label or f"{c.matrix.kind}{k}"
        if label in labels:
            label = f"{label}_{k}"
        labels.append(label)
        rows = cmd_sweep(c, threads, monte_carlo=mc)
        per.append(rows)
        for stat in ("train", "test"):
            for path in ("fixedW", "limit"):
                columns.append(f"{stat}_nmse_theory_{path}_{label}")
            if mc:
                columns.append(f"{stat}_nmse_mc_{label}")
    merged = []
    for i, e2 in enumerate(first.eta2):
        rec = {"eta2": float(e2)}
        for label, rows in zip(labels, per):
            for stat in ("train", "test"):
                for path in ("fixedW", "limit"):
                    rec[f"{stat}_nmse_theory_{path}_{label}"] = rows[i].get(f"{stat}_nmse_theory_{path}")
                if mc:
                    rec[f"{stat}_nmse_mc_{label}"] = rows[i].get(f"{stat}_nmse_mc")
        merged.append(rec)
    return merged, columns


# ---------------------------------------------------------------- entry point


def _comment(args) -> str | None:
    if args.no_timestamp:
        return None
    return f"generated {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')} by esn-rmt {args.command}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esn-rmt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("sweep", "memory-curve", "design", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--no-timestamp", action="store_true")
        p.add_argument("--threads", type=int, default=1)
        if name == "memory-curve":
            p.add_argument("--tau-max", type=int, default=None)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from .tasks import RESULT_COLUMNS

    data = load_config(args.config)
    if args.command == "compare":
        rows, columns = cmd_compare(data, args.threads)
    else:
        cfg = parse_config(data)
        if args.command == "sweep":
            rows, columns = cmd_sweep(cfg, args.threads), RESULT_COLUMNS
        elif args.command == "memory-curve":
            rows, columns = cmd_memory_curve(cfg, args.tau_max, args.threads), MEMORY_COLUMNS
        else:
            rows, columns = cmd_design(cfg), DESIGN_COLUMNS
    write_results_csv(rows, args.out, columns, comment=_comment(args))
    return 0


def main(argv=None) -> int:
    try:
        code = run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        code = 2
    except ConvergenceError as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        code = 3
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
