"""Command-line interface: `pbopt optimize`, `pbopt variance`, `pbopt plot`.

Every flag can also be supplied through a plain-text config file with one
`key = value` line per flag (`--config run.cfg`); explicit flags win.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import BENCH_NAMES, RunConfig, build_benchmark, optimize, write_csv
from .plotting import emit_svg
from .varlab import variance_trajectory, variance_trajectory_mc


def _parse_config_file(path: str) -> dict:
    values = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _add_optimize_args(sub):
    p = sub.add_parser("optimize", help="run seeded optimization trajectories")
    p.add_argument("--config", help="plain-text config file (key = value per line)")
    p.add_argument("--bench", choices=BENCH_NAMES, default="exp-tabular")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--bench-seed", type=int, default=0)
    p.add_argument("--bench-file", help="persist/reload tabular benchmarks here")
    p.add_argument("--method", choices=("mc", "cp", "st"), default="mc")
    p.add_argument("--estimator",
                   choices=("reinforce", "loorf", "arms", "bstar", "st", "truegrad"),
                   default="loorf")
    p.add_argument("--param", choices=("sigmoid", "direct", "cosine", "escort"),
                   default="sigmoid")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--optimizer", choices=("sgd", "rmsprop"), default="sgd")
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--lr-decay-frac", type=float, default=0.6)
    p.add_argument("--lr-decay-mult", type=float, default=0.5)
    p.add_argument("--tau0", type=float, default=1.0)
    p.add_argument("--tau-final", type=float, default=1.0 / 200.0)
    p.add_argument("--steps-per-tau", type=int, default=100)
    p.add_argument("--escort-power", type=float, default=4.0)
    p.add_argument("--log-every", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    return p


def _add_variance_args(sub):
    p = sub.add_parser("variance", help="estimator variances along the exact-gradient trajectory")
    p.add_argument("--config")
    p.add_argument("--bench", choices=("exp-tabular", "nnloss", "checkerboard", "genloss"),
                   default="exp-tabular")
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--bench-seed", type=int, default=0)
    p.add_argument("--bench-file")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--exact", action="store_true",
                   help="closed-form variances via multiset enumeration (small d, n)")
    p.add_argument("--reps", type=int, default=10000,
                   help="second-moment sample count when not running --exact")
    p.add_argument("--log-every", type=int, default=1)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--out", default="variance.csv")
    return p


def _add_plot_args(sub):
    p = sub.add_parser("plot", help="render trajectory CSV columns as an SVG line chart")
    p.add_argument("--in", dest="csv_in", required=True)
    p.add_argument("--cols", required=True, help="comma-separated column names")
    p.add_argument("--out", required=True)
    return p


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        bench=args.bench,
        d=args.d,
        bench_seed=args.bench_seed,
        bench_file=args.bench_file,
        method=args.method,
        estimator="truegrad" if args.estimator == "truegrad" else args.estimator,
        param=args.param,
        n=args.n,
        lr=args.lr,
        optimizer=args.optimizer,
        iters=args.iters,
        seeds=args.seeds,
        master_seed=args.master_seed,
        out_dir=args.out,
        lr_decay_frac=args.lr_decay_frac,
        lr_decay_mult=args.lr_decay_mult,
        tau0=args.tau0,
        tau_final=args.tau_final,
        steps_per_tau=args.steps_per_tau,
        escort_power=args.escort_power,
        log_every=args.log_every,
        workers=args.workers,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pbopt",
                                     description="pseudo-Boolean optimization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_optimize_args(sub)
    _add_variance_args(sub)
    _add_plot_args(sub)

    argv = list(sys.argv[1:] if argv is None else argv)
    # Config-file values become defaults; explicit flags override them.
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        file_values = _parse_config_file(cfg_path)
        extra = []
        for key, value in file_values.items():
            flag = "--" + key.replace("_", "-")
            if flag not in argv:
                extra.extend([flag, value])
        argv = [argv[0]] + extra + argv[1:]

    args = parser.parse_args(argv)

    if args.command == "optimize":
        if args.estimator == "st" or args.method == "st":
            args.method, args.estimator = "st", "st"
        result = optimize(_config_from_args(args))
        for path in result["paths"]:
            print(path)
        return 0

    if args.command == "variance":
        cfg = RunConfig(bench=args.bench, d=args.d, bench_seed=args.bench_seed,
                        bench_file=args.bench_file)
        f = build_benchmark(cfg)
        if not hasattr(f, "table"):
            f = f.tabulate()
        if args.exact:
            rows = variance_trajectory(f, n=args.n, lr=args.lr, steps=args.steps,
                                       log_every=args.log_every)
        else:
            import numpy as np

            rng = np.random.default_rng(args.master_seed)
            rows = variance_trajectory_mc(f, n=args.n, lr=args.lr, steps=args.steps,
                                          reps=args.reps, rng=rng, log_every=args.log_every)
        columns = list(rows[0].keys()) if rows else ["step"]
        write_csv(args.out, rows, columns=columns)
        print(args.out)
        return 0

    emit_svg(args.csv_in, [c.strip() for c in args.cols.split(",") if c.strip()], args.out)
    print(args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
