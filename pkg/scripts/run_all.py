"""Run every config in scripts/configs and print a one-line verdict per experiment.

    python3 scripts/run_all.py [--workers N] [--only NAME ...] [--out DIR]

Exit status is 1 if any experiment has a failed row.
"""

import argparse
import glob
import os
import time

from quermass import experiments

PLOT_KIND = {
    "phi-deterministic": "ratio-vs-k",
    "kubota-identity": "estimate-vs-n",
    "santalo-check": "estimate-vs-n",
    "jl-check": "frequency-vs-param",
    "phi-kn": "frequency-vs-param",
    "phi-mn": "frequency-vs-param",
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", nargs="*")
    ap.add_argument("--out", default="out")
    args = ap.parse_args()
    here = os.path.dirname(os.path.abspath(__file__))
    failed = 0
    for path in sorted(glob.glob(os.path.join(here, "configs", "*.json"))):
        cfg = experiments.ExperimentConfig.from_json(path)
        if args.only and cfg.name not in args.only:
            continue
        cfg.workers = args.workers
        cfg.output_dir = os.path.join(args.out, cfg.name)
        t = time.perf_counter()
        rep = experiments.run(cfg)
        if cfg.name in PLOT_KIND:
            experiments.emit_plotdata(rep, PLOT_KIND[cfg.name], cfg.output_dir)
        bad = sum(not r["pass"] for r in rep.rows)
        failed += bad > 0
        print(f"{cfg.name:<26} {'FAIL' if bad else 'ok  '} {len(rep.rows):3d} rows {bad:3d} failed  {time.perf_counter() - t:7.1f}s")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
