"""Experiment orchestration: configs, seeding, optimization loops and CSV logging.

A run is described by a RunConfig; `optimize` executes it for every seed,
writing one trajectory CSV per seed plus a mean-across-seeds aggregate.  The
same master seed always reproduces identical CSV bytes except for the
elapsed_ms column.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import benchmarks as bench_mod
from . import estimators as est
from .continuation import TemperatureSchedule, cp_run
from .optim import make_optimizer
from .params import make_parametrization, sigmoid
from .pbcore import CapabilityError, TabularPB, entropy, exact_expectation, exact_gradient

CSV_COLUMNS = (
    "run_id",
    "seed",
    "iteration",
    "sampled_loss",
    "exact_loss",
    "discrete_loss",
    "entropy",
    "theta_mean",
    "elapsed_ms",
)

BENCH_NAMES = (
    "exp-tabular",
    "nnloss",
    "checkerboard",
    "genloss",
    "ex31",
    "ex32",
    "masked-regression",
)


@dataclass(frozen=True)
class RunConfig:
    bench: str = "exp-tabular"
    d: int = 10
    bench_seed: int = 0
    bench_file: str | None = None
    method: str = "mc"  # mc | cp | st
    estimator: str = "loorf"  # reinforce | loorf | arms | bstar | truegrad
    param: str = "sigmoid"
    n: int = 10
    lr: float = 0.1
    optimizer: str = "sgd"
    iters: int = 500
    seeds: int = 1
    master_seed: int = 0
    out_dir: str | None = None
    lr_decay_frac: float = 0.6  # <= 0 disables
    lr_decay_mult: float = 0.5
    tau0: float = 1.0
    tau_final: float = 1.0 / 200.0
    steps_per_tau: int = 100
    escort_power: float = 4.0
    log_every: int = 1
    checkerboard_m: float = 1.0
    checkerboard_big: float = 3.0
    genloss_m: float = -1.0
    genloss_m0: float = 1.0
    genloss_dm: float = 1.0
    mr_backbone: tuple = (20, 20, 20, 20)
    mr_target: tuple = (100, 100, 100, 100, 100)
    mr_train: int = 2000
    mr_val: int = 1000
    mr_batch: int = 100
    workers: int = 1
    tabulate_max_d: int = 12


def run_id(config: RunConfig) -> str:
    fields = asdict(config)
    fields.pop("out_dir")
    fields.pop("workers")
    canon = json.dumps(fields, sort_keys=True, default=str)
    return hashlib.sha1(canon.encode()).hexdigest()[:12]


def build_benchmark(config: RunConfig):
    """Construct (or reload) the benchmark instance for a config."""
    rng = np.random.default_rng(np.random.SeedSequence([config.bench_seed, 0xB5EED]))
    name = config.bench
    if name == "exp-tabular":
        path = Path(config.bench_file) if config.bench_file else None
        if path is not None and path.exists():
            return TabularPB.load(path)
        f = bench_mod.make_exponential_tabular(config.d, rng=rng)
        if path is not None:
            f.save(path)
        return f
    if name == "nnloss":
        return bench_mod.make_nnloss(config.d, rng)
    if name == "checkerboard":
        return bench_mod.make_checkerboard(config.checkerboard_m, config.checkerboard_big)
    if name == "genloss":
        spec = bench_mod.GenLossSpec(
            zstar=np.ones(config.d), m=config.genloss_m, m0=config.genloss_m0, dm=config.genloss_dm
        )
        return bench_mod.make_genloss(spec)
    if name in ("ex31", "ex32"):
        return bench_mod.make_counterexample(name)
    if name == "masked-regression":
        spec = bench_mod.MaskedRegressionSpec(
            backbone_hidden=tuple(config.mr_backbone),
            target_hidden=tuple(config.mr_target),
            train_size=config.mr_train,
            val_size=config.mr_val,
            batch_size=config.mr_batch,
        )
        return bench_mod.make_masked_regression(spec, rng)
    raise ValueError(f"unknown benchmark {name!r}; expected one of {BENCH_NAMES}")


def validate(config: RunConfig, f) -> None:
    """Reject capability mismatches before any work happens."""
    if config.method not in ("mc", "cp", "st"):
        raise ValueError(f"unknown method {config.method!r}")
    if config.method in ("cp", "st") and (f.eval_smooth is None or f.grad_smooth is None):
        raise CapabilityError(f"{config.bench} has no smooth extension; required by {config.method}")
    if config.method == "st" and config.param != "sigmoid":
        raise CapabilityError("straight-through requires the sigmoid parametrization")
    if config.method == "mc":
        enumerable = isinstance(f, TabularPB) or (
            hasattr(f, "tabulate") and f.d <= config.tabulate_max_d
        )
        if config.estimator in ("bstar", "truegrad") and not enumerable:
            raise CapabilityError(
                f"{config.estimator} needs exact enumeration; {config.bench} at d={f.d} is not tabulable"
            )
        if config.estimator not in ("truegrad", *est.ESTIMATORS):
            raise ValueError(f"unknown estimator {config.estimator!r}")


def _estimation_benchmark(config: RunConfig, f):
    """Tabulate enumerable benches for the sampling loop; CP/ST keep the network."""
    if (
        config.method == "mc"
        and not isinstance(f, TabularPB)
        and hasattr(f, "tabulate")
        and f.d <= config.tabulate_max_d
        and not hasattr(f, "resample_batch")
    ):
        return f.tabulate()
    return f


def seed_rng(master_seed: int, seed_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, seed_index]))


def _record(config, rid, seed, iteration, start_time, sampled_loss="", exact_loss="",
            discrete_loss="", entropy_val="", theta_mean=""):
    return {
        "run_id": rid,
        "seed": seed,
        "iteration": iteration,
        "sampled_loss": sampled_loss,
        "exact_loss": exact_loss,
        "discrete_loss": discrete_loss,
        "entropy": entropy_val,
        "theta_mean": theta_mean,
        "elapsed_ms": (time.perf_counter() - start_time) * 1000.0,
    }


def run_single(config: RunConfig, f, seed_index: int) -> list[dict]:
    """One seeded trajectory; returns log rows (iteration 0 is the initial state)."""
    rng = seed_rng(config.master_seed, seed_index)
    rid = run_id(config)
    start = time.perf_counter()
    f_est = _estimation_benchmark(config, f)

    if config.method == "cp":
        return _run_cp(config, f, seed_index, rid, start)

    param = make_parametrization(config.param, escort_power=config.escort_power)
    theta0 = np.full(f.d, 0.5)
    r = param.init_from_theta(theta0)
    opt = make_optimizer(config.optimizer, config.lr)
    decay_at = int(np.ceil(config.lr_decay_frac * config.iters)) if config.lr_decay_frac > 0 else -1

    is_tabular = isinstance(f_est, TabularPB)
    rows = []

    def log(iteration, sampled=""):
        theta = param.theta(r)
        rows.append(
            _record(
                config, rid, seed_index, iteration, start,
                sampled_loss=sampled,
                exact_loss=exact_expectation(f_est, theta) if is_tabular else "",
                entropy_val=entropy(theta),
                theta_mean=float(np.mean(theta)),
            )
        )

    log(0)
    for it in range(1, config.iters + 1):
        if it == decay_at:
            opt.lr *= config.lr_decay_mult
        if hasattr(f_est, "resample_batch"):
            f_est.resample_batch(rng)
        if config.method == "st":
            estimate = est.straight_through(f_est, r, param, rng)
        elif config.estimator == "truegrad":
            theta = param.theta(r)
            grad = param.map_gradient(r, exact_gradient(f_est, theta))
            estimate = est.GradEstimate(values=grad, mean_loss=exact_expectation(f_est, theta), n=0)
        else:
            estimate = est.ESTIMATORS[config.estimator](f_est, r, param, config.n, rng)
        r = param.project(opt.update(r, estimate.values))
        if it % config.log_every == 0 or it == config.iters:
            log(it, sampled=estimate.mean_loss)
    return rows


def _run_cp(config: RunConfig, f, seed_index: int, rid: str, start: float) -> list[dict]:
    schedule = TemperatureSchedule(
        tau0=config.tau0, tau_final=config.tau_final, steps_per_tau=config.steps_per_tau
    )
    rng = seed_rng(config.master_seed, seed_index)
    x0 = np.zeros(f.d)
    rows = [
        _record(config, rid, seed_index, 0, start,
                discrete_loss=f.eval_discrete((x0 > 0).astype(float)),
                theta_mean=0.5)
    ]

    def before_iteration(state):
        if hasattr(f, "resample_batch"):
            f.resample_batch(rng)

    def on_iteration(state, row):
        it = row["iteration"] + 1
        if it % config.log_every == 0 or it == config.iters:
            u = sigmoid(state.x / max(state.tau, 1e-12))
            rows.append(
                _record(config, rid, seed_index, it, start,
                        discrete_loss=row["discrete_loss"],
                        theta_mean=float(np.mean(u)))
            )

    cp_run(
        f, schedule, config.lr, x0,
        optimizer=config.optimizer, total_iters=config.iters,
        on_iteration=on_iteration, before_iteration=before_iteration,
    )
    return rows


def true_gradient_mode(f: TabularPB, config: RunConfig) -> list[dict]:
    """Replace the estimator with the exact gradient chained through the parametrization."""
    if not isinstance(f, TabularPB):
        raise CapabilityError("true-gradient mode requires a tabular benchmark")
    cfg = replace(config, method="mc", estimator="truegrad")
    return run_single(cfg, f, seed_index=0)


def mean_valid_mask(f, theta, k_masks: int = 5, rng=None, loss_fn=None) -> np.ndarray:
    """Draw k masks from Ber(theta) and return the one with the lowest probe loss."""
    if loss_fn is None:
        loss_fn = f.eval_discrete
    masks = [est.sample_bernoulli(theta, rng) for _ in range(k_masks)]
    losses = [loss_fn(z) for z in masks]
    return masks[int(np.argmin(losses))]


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path, rows, columns=CSV_COLUMNS) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])


def read_csv(path) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header}
        for row in reader:
            for name, value in zip(header, row):
                cols[name].append(value)
    return cols


def aggregate_rows(per_seed_rows: list[list[dict]]) -> list[dict]:
    """Mean and standard error across seeds, per iteration, for numeric columns."""
    numeric = ("sampled_loss", "exact_loss", "discrete_loss", "entropy", "theta_mean")
    by_iter: dict[int, list[dict]] = {}
    for rows in per_seed_rows:
        for row in rows:
            by_iter.setdefault(row["iteration"], []).append(row)
    out = []
    for iteration in sorted(by_iter):
        group = by_iter[iteration]
        agg = {"iteration": iteration, "n_seeds": len(group)}
        for col in numeric:
            vals = np.array([float(r[col]) for r in group if r[col] != ""])
            if vals.size:
                agg[f"{col}_mean"] = float(vals.mean())
                agg[f"{col}_se"] = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
            else:
                agg[f"{col}_mean"] = ""
                agg[f"{col}_se"] = ""
        out.append(agg)
    return out


AGGREGATE_COLUMNS = ("iteration", "n_seeds") + tuple(
    f"{c}_{s}" for c in ("sampled_loss", "exact_loss", "discrete_loss", "entropy", "theta_mean")
    for s in ("mean", "se")
)


def optimize(config: RunConfig, f=None) -> dict:
    """Run every seed of a config; write per-seed CSVs plus the aggregate.

    Returns {"rows": per-seed lists, "paths": written files, "aggregate": rows}.
    """
    if f is None:
        f = build_benchmark(config)
    validate(config, f)
    rid = run_id(config)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            per_seed = list(pool.map(lambda s: run_single(config, f, s), range(config.seeds)))
    else:
        per_seed = [run_single(config, f, s) for s in range(config.seeds)]

    aggregate = aggregate_rows(per_seed)
    paths = []
    if config.out_dir is not None:
        out = Path(config.out_dir)
        for s, rows in enumerate(per_seed):
            p = out / f"{rid}_seed{s}.csv"
            write_csv(p, rows)
            paths.append(p)
        p = out / f"{rid}_aggregate.csv"
        write_csv(p, aggregate, columns=AGGREGATE_COLUMNS)
        paths.append(p)
    return {"rows": per_seed, "aggregate": aggregate, "paths": paths, "run_id": rid}


def select_best(curves: dict, start_iteration: int = 10):
    """Hyperparameter choice: lowest average trajectory value from a cutoff onward."""
    if not curves:
        raise ValueError("no curves to select from")
    means = {key: float(np.mean(np.asarray(series)[start_iteration:]))
             for key, series in curves.items()}
    return min(means, key=means.get)
