"""Command-line entry point.

    manifoldnet f2is|classify|geomcheck [--config FILE] [--seed N]
                [--out DIR] [--set key=value ...] [--deterministic]

Writes metrics.json and per_sample.csv into --out (default: current
directory). Exit code is nonzero if a geomcheck suite fails.
"""

import argparse
import csv
import json
import os
import sys

from .experiments import (
    CLASSIFY_DEFAULTS,
    F2IS_DEFAULTS,
    GEOMCHECK_DEFAULTS,
    parse_config,
    run_classify,
    run_f2is,
    run_geomcheck,
)

_RUNNERS = {
    "f2is": (run_f2is, F2IS_DEFAULTS),
    "classify": (run_classify, CLASSIFY_DEFAULTS),
    "geomcheck": (run_geomcheck, GEOMCHECK_DEFAULTS),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="manifoldnet")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key=value file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument(
            "--deterministic",
            action="store_true",
            help="force single-threaded numeric kernels",
        )
    return parser


def _write_outputs(record, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "metrics.json"), "w") as f:
        json.dump(record, f, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "per_sample.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        if record["experiment"] == "f2is":
            writer.writerow(["index", "geodesic_distance"])
            for i, v in enumerate(record["per_sample"]):
                writer.writerow([i, repr(v)])
        elif record["experiment"] == "classify":
            writer.writerow(["index", "true_label", "predicted_label"])
            for i, (t, p) in enumerate(record["per_sample"]):
                writer.writerow([i, t, p])
        else:
            writer.writerow(["suite", "max_residual", "ok"])
            for name, s in record["suites"].items():
                writer.writerow([name, repr(s["max_residual"]), int(s["ok"])])


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.deterministic:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = "1"
        try:
            import threadpoolctl

            threadpoolctl.threadpool_limits(1)
        except ImportError:
            pass

    runner, defaults = _RUNNERS[args.experiment]
    cfg = parse_config(args.config, args.set, defaults)
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg["deterministic"] = bool(args.deterministic)

    record = runner(cfg)
    _write_outputs(record, args.out)

    if args.experiment == "geomcheck":
        for name, s in record["suites"].items():
            status = "PASS" if s["ok"] else "FAIL"
            print(f"{status}  {name:24s} max_residual={s['max_residual']:.3e}")
        if not record["scalars"]["all_ok"]:
            return 1
    else:
        for key, value in sorted(record["scalars"].items()):
            print(f"{key} = {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
