"""Monte Carlo experiment runner.

An experiment is a grid of parameter points, each repeated ``trials`` times.
Trial ``t`` at grid point ``g`` draws all of its randomness from
``SeedSequence([seed, g, t])``, so any single cell can be re-run in isolation
and the raw CSV is a pure function of ``(config, seed)``. Wall-clock timings
are written to a separate file because they are not reproducible.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import EveParams, deviation_std, eve_attack, eve_observe
from .hihtp import HihtpConfig, NumericalDivergence, solve
from .keygen import (DegenerateSecret, ProtocolConfig, compute_secret, normalize_secret,
                     run_protocol, rmse, true_secret)
from .lifting import MeasurementOp
from .signals import ParameterError, gen_channel, gen_codebook, gen_sparse_signal, add_awgn
from . import security

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "load_config",
    "trial_seed",
    "run_experiment",
    "summarize",
    "write_csv",
    "read_csv",
    "run_oracle_suite",
]

log = logging.getLogger(__name__)

U64 = 2**64


@dataclass
class ExperimentConfig:
    """What to run, over which grid, how often and from which master seed.

    ``grids`` maps parameter names to lists of values; the cartesian product
    (in insertion order) defines the grid points. ``params`` holds fixed
    parameters that override the experiment defaults.
    """

    experiment: str
    grids: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    trials: int = 50
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {self.experiment!r}; "
                                 f"choose from {sorted(EXPERIMENTS)}")
        spec = EXPERIMENTS[self.experiment]
        self.grids = {**spec.grids, **self.grids}
        self.params = {**spec.params, **self.params}
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if not 0 <= int(self.seed) < U64:
            raise ParameterError("seed must be an unsigned 64-bit integer")
        for name, values in self.grids.items():
            if not isinstance(values, list) or not values:
                raise ParameterError(f"grid {name!r} must be a nonempty list")

    def points(self) -> list[dict]:
        names = list(self.grids)
        return [dict(zip(names, combo)) for combo in itertools.product(*self.grids.values())]

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a JSON config; keyword overrides that are not ``None`` win."""
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ParameterError("config must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**raw)


def trial_seed(seed: int, grid_idx: int, trial_idx: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), grid_idx, trial_idx])


def _snr(value):
    # JSON has no infinity; null and "inf" both mean noiseless
    if value is None or value == "inf":
        return math.inf
    return float(value)


# -- trial functions ---------------------------------------------------------


def _protocol_trial(p: dict, rng) -> dict:
    cfg = ProtocolConfig(n=p["n"], mu=p["mu"], k=p["k"], s=p["s"], m=p.get("m", 1),
                         snr_db=_snr(p["snr_db"]), value_dist=p["value_dist"],
                         snr_convention=p["snr_convention"],
                         hihtp=HihtpConfig(p["s"], p["k"], max_iter=p["max_iter"]))
    out = run_protocol(cfg, rng)
    t = out["transcripts"]
    return {
        "rmse": float(np.mean(out["per_round_rmse"])),
        "rmse_l2": float(np.mean(out["per_round_rmse_l2"])),
        "key_agreement": out["key_agreement"],
        "residual": max(max(r["residual_alice"], r["residual_bob"]) for r in t),
        "iterations": max(max(r["iterations_alice"], r["iterations_bob"]) for r in t),
        "converged": all(r["converged"] for r in t),
    }


def _sparsity_trial(p, rng):
    n, mu = p["dims"]
    return _protocol_trial({**p, "n": n, "mu": mu}, rng)


def _legit_secrets(op, h, a, b, p, rng):
    cfg = HihtpConfig(p["s"], p["k"], max_iter=p["max_iter"])
    snr = _snr(p["snr_db"])
    y_a = add_awgn(op.rank_one(h, b), snr, rng, p["snr_convention"])
    y_b = add_awgn(op.rank_one(h, a), snr, rng, p["snr_convention"])
    c_a = compute_secret(solve(op, y_a, cfg).tensor, a).c
    c_b = compute_secret(solve(op, y_b, cfg).tensor, b).c
    return c_a, c_b


def _attack_trial(p: dict, rng) -> dict:
    n, mu, k, s = p["n"], p["mu"], p["k"], p["s"]
    op = MeasurementOp(gen_codebook(mu, n, rng))
    h = gen_channel(mu, s, rng).dense()
    a = gen_sparse_signal(n, k, p["value_dist"], rng)
    b = gen_sparse_signal(n, k, p["value_dist"], rng)
    c_a, c_b = _legit_secrets(op, h, a.dense(), b.dense(), p, rng)
    legit_ok = bool(np.any(c_a) and np.any(c_b))
    dev_snr = _snr(p.get("deviation_snr_db"))
    varsigma = deviation_std(h, dev_snr, p["snr_convention"])
    eve = EveParams(gamma=p["gamma"], varsigma=varsigma, snr_db=_snr(p["snr_db"]),
                    channel_mode=p.get("channel_mode", "identical"),
                    snr_convention=p["snr_convention"])
    y_e, _, _ = eve_observe(h, op, a, b, eve, rng)
    report = eve_attack(y_e, op, s, k, p["gamma"],
                        HihtpConfig(s, 2 * k, max_iter=p["max_iter"]),
                        secret=true_secret(h, a.dense(), b.dense()),
                        alice_secret=c_a if legit_ok else None,
                        bob_secret=c_b if legit_ok else None,
                        supports=(a.support, b.support))
    row = report.to_row()
    # a zero legitimate secret means the parties themselves failed; Eve is still scored
    row["legit_rmse_l2"] = (rmse(normalize_secret(c_a), normalize_secret(c_b))
                            if legit_ok else math.nan)
    return row


def _protocol_demo_trial(p, rng):
    return _protocol_trial(p, rng)


@dataclass(frozen=True)
class _Experiment:
    trial: object
    grids: dict
    params: dict
    metrics: tuple


_PROTO_METRICS = ("rmse", "rmse_l2", "key_agreement", "residual", "iterations", "converged")
_ATTACK_METRICS = ("success", "support_correct", "rmse_to_alice", "rmse_to_bob",
                   "max_deviation", "mse_to_true", "legit_rmse_l2")
_BASE = {"value_dist": "normal", "snr_convention": "amplitude", "max_iter": 100}

EXPERIMENTS = {
    "sparsity_sweep": _Experiment(
        _sparsity_trial,
        {"dims": [[128, 100], [200, 160]], "k": list(range(4, 11)), "s": list(range(4, 11))},
        {**_BASE, "snr_db": 30}, _PROTO_METRICS),
    "noise_sweep": _Experiment(
        _protocol_trial,
        {"snr_db": [0, 10, 20, 30, 40, 50], "k": list(range(4, 11))},
        {**_BASE, "n": 128, "mu": 100, "s": 5}, _PROTO_METRICS),
    "gamma_attack": _Experiment(
        _attack_trial,
        {"gamma": [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0]},
        {**_BASE, "n": 128, "mu": 100, "k": 4, "s": 3, "snr_db": 50}, _ATTACK_METRICS),
    "channel_noise_attack": _Experiment(
        _attack_trial,
        {"channel_mode": ["one-deviated", "both-deviated"],
         "deviation_snr_db": [50, 40, 30, 20, 10, 0]},
        {**_BASE, "n": 128, "mu": 100, "k": 4, "s": 3, "snr_db": 50, "gamma": 6.0},
        _ATTACK_METRICS),
    "protocol_demo": _Experiment(
        _protocol_demo_trial,
        {"snr_db": [None, 30, 20]},
        {**_BASE, "n": 128, "mu": 100, "k": 4, "s": 4, "m": 2}, _PROTO_METRICS),
    "oracle_suite": _Experiment(None, {"suite": ["full"]}, {}, ()),
}


def _run_one(task):
    experiment, grid_idx, trial_idx, seed, point, params = task
    spec = EXPERIMENTS[experiment]
    p = {**params, **point}
    rng = np.random.default_rng(trial_seed(seed, grid_idx, trial_idx))
    t0 = time.perf_counter()
    failed = False
    try:
        metrics = spec.trial(p, rng)
    except (NumericalDivergence, DegenerateSecret, np.linalg.LinAlgError) as exc:
        log.warning("grid %d trial %d failed: %s", grid_idx, trial_idx, exc)
        metrics = {}
        failed = True
    runtime_ms = (time.perf_counter() - t0) * 1e3
    row = {"experiment": experiment, "grid_idx": grid_idx, "trial": trial_idx}
    row.update({k: _cell(v) for k, v in point.items()})
    row["failed"] = failed
    for m in spec.metrics:
        row[m] = metrics.get(m, math.nan if m not in ("success", "key_agreement") else False)
    return row, runtime_ms


def _cell(v):
    if isinstance(v, (list, tuple)):
        return "x".join(str(x) for x in v)
    return "inf" if v is None else v


def run_experiment(cfg: ExperimentConfig, progress=None) -> tuple[list[dict], list[float]]:
    """Run every (grid point, trial) pair and return rows sorted by
    ``(grid_idx, trial)`` together with per-row runtimes in milliseconds."""
    if cfg.experiment == "oracle_suite":
        raise ParameterError("oracle_suite is run through run_oracle_suite")
    tasks = [(cfg.experiment, g, t, int(cfg.seed), point, cfg.params)
             for g, point in enumerate(cfg.points()) for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (8 * cfg.workers))))
    else:
        results = []
        for i, task in enumerate(tasks):
            results.append(_run_one(task))
            if progress:
                progress(i + 1, len(tasks))
    results.sort(key=lambda r: (r[0]["grid_idx"], r[0]["trial"]))
    return [r for r, _ in results], [ms for _, ms in results]


# -- CSV I/O -------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        return format(float(v), ".12g")
    return str(v)


def write_csv(rows: list[dict], path) -> None:
    if not rows:
        raise ParameterError("no rows to write")
    cols = list(rows[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> list[dict]:
    """Rows with numeric cells converted to float (ints stay ints)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ParameterError(f"{path} has no data rows")
    for r in rows:
        for k, v in r.items():
            r[k] = _parse(v)
    return rows


def _parse(v: str):
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


# -- summaries -------------------------------------------------------------------


def summarize(rows: list[dict], metrics=None) -> list[dict]:
    """Per grid point mean, median and standard error of each metric.

    Failed trials are excluded from the statistics and counted in
    ``failure_rate``.
    """
    if not rows:
        raise ParameterError("no rows to summarise")
    skip = {"experiment", "grid_idx", "trial", "failed"}
    exp = rows[0]["experiment"]
    metrics = metrics or EXPERIMENTS[exp].metrics
    keys = [k for k in rows[0] if k not in skip and k not in metrics]
    out = []
    for g, group in itertools.groupby(rows, key=lambda r: r["grid_idx"]):
        group = list(group)
        ok = [r for r in group if not _truthy(r["failed"])]
        rec = {"experiment": exp, "grid_idx": g}
        rec.update({k: group[0][k] for k in keys})
        rec["trials"] = len(group)
        rec["failure_rate"] = 1 - len(ok) / len(group)
        for m in metrics:
            vals = np.array([float(r[m]) for r in ok], dtype=float)
            vals = vals[~np.isnan(vals)]
            rec[f"{m}_mean"] = float(vals.mean()) if vals.size else math.nan
            rec[f"{m}_median"] = float(np.median(vals)) if vals.size else math.nan
            rec[f"{m}_stderr"] = (float(vals.std(ddof=1) / np.sqrt(vals.size))
                                  if vals.size > 1 else math.nan)
        out.append(rec)
    return out


def _truthy(v) -> bool:
    return v in (True, 1, "1", "True", "true")


def write_outputs(cfg: ExperimentConfig, rows, runtimes, extra=None) -> dict:
    """Write raw CSV, summary CSV, timing CSV and the JSON sidecar."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.experiment
    paths = {"csv": out / f"{stem}.csv", "summary": out / f"{stem}_summary.csv",
             "timing": out / f"{stem}_timing.csv", "meta": out / f"{stem}.json"}
    write_csv(rows, paths["csv"])
    write_csv(summarize(rows), paths["summary"])
    write_csv([{"grid_idx": r["grid_idx"], "trial": r["trial"], "runtime_ms": ms}
               for r, ms in zip(rows, runtimes)], paths["timing"])
    meta = {
        "config": cfg.to_dict(),
        "seed": int(cfg.seed),
        "code_version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "rows": len(rows),
        "failures": sum(_truthy(r["failed"]) for r in rows),
        "total_runtime_s": sum(runtimes) / 1e3,
        "seed_derivation": "SeedSequence([seed, grid_idx, trial])",
    }
    meta.update(extra or {})
    paths["meta"].write_text(json.dumps(meta, indent=2, default=str) + "\n")
    return {k: str(v) for k, v in paths.items()}


# -- oracle suite ---------------------------------------------------------------


def _oracle_row(check, params, closed_form, oracle, stderr, passed, detail=""):
    return {"check": check, "params": params, "closed_form": closed_form, "oracle": oracle,
            "stderr": stderr, "margin": closed_form - oracle if np.isfinite(closed_form) else math.nan,
            "passed": bool(passed), "detail": detail}


def oracle_separation(rng, samples=1_000_000, ks=(2, 3, 4), deltas=(0.0, 0.1, 0.3, 0.5)):
    rows = []
    for k in ks:
        for d in deltas:
            bound = security.ml_separation_bound(k, d)
            p, se = security.ml_separation_mc(k, d, samples, rng)
            ok = p <= bound + 3 * se
            if d == 0:
                ok = ok and abs(p - bound) <= 3 * se
            rows.append(_oracle_row("ml_separation", f"k={k};delta={d}", bound, p, se, ok))
    return rows


def oracle_event(rng, trials=100_000, cases=((2, 512), (3, 8192))):
    rows = []
    for k, n in cases:
        r = security.estimate_event_prob(n, k, trials, rng)
        rows.append(_oracle_row("event_prob", f"k={k};n={n}", r["bound"], r["p_hat"],
                                r["stderr"], r["p_hat"] <= r["bound"]))
    return rows


def oracle_injectivity(rng, n=13, size=4, draws=5):
    tested = collisions = 0
    first = ""
    for union in itertools.combinations(range(n), size):
        half = size // 2
        if not security.check_sumset(union[:half], union[half:], n).event_e:
            continue
        for _ in range(draws):
            alpha = 1.0 - rng.random(size)
            res = security.verify_injectivity(union, alpha, n)
            tested += 1
            if not res["injective"]:
                collisions += 1
                first = first or f"{union}:{res['counterexample']}"
    return [_oracle_row("injectivity", f"n={n};|S|={size};draws={draws}", 0.0, float(collisions),
                        math.nan, collisions == 0, first or f"{tested} cases")]


def oracle_injectivity_negative():
    """A sum-colliding support with equal amplitudes must yield a counterexample."""
    union, n = (0, 1, 2, 6, 7, 8), 12
    res = security.verify_injectivity(union, np.ones(len(union)), n)
    found = res["counterexample"] is not None
    return [_oracle_row("injectivity_negative_control", f"n={n};S={union}", 1.0, float(found),
                        math.nan, found, str(res["counterexample"]))]


def oracle_entropy(n=10, k=2, levels=8, gammas=(0.8, 0.9, 1.0)):
    rows = []
    for g in gammas:
        hb = security.h_gamma(k, g)
        h = security.brute_force_conditional_entropy(n, k, g, levels)
        rows.append(_oracle_row("entropy_lower_bound", f"n={n};k={k};L={levels};gamma={g}",
                                hb, h, math.nan, h >= hb - 0.1))
    h1 = security.brute_force_conditional_entropy(n, k, 1.0, 1)
    exact = math.log(math.comb(2 * k, k))
    rows.append(_oracle_row("entropy_single_level", f"n={n};k={k};L=1;gamma=1", exact, h1,
                            math.nan, abs(h1 - exact) <= 1e-12))
    return rows


def run_oracle_suite(suite: str = "full", seed: int = 0) -> list[dict]:
    """All brute-force checks; ``quick`` uses fewer Monte Carlo samples."""
    if suite not in ("full", "quick"):
        raise ParameterError(f"unknown suite {suite!r}")
    ss = np.random.SeedSequence(int(seed))
    r1, r2, r3 = (np.random.default_rng(s) for s in ss.spawn(3))
    samples, trials = (1_000_000, 100_000) if suite == "full" else (100_000, 20_000)
    rows = []
    rows += oracle_separation(r1, samples)
    rows += oracle_event(r2, trials)
    rows += oracle_injectivity(r3)
    rows += oracle_injectivity_negative()
    rows += oracle_entropy()
    return rows
