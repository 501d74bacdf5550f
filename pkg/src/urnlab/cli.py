"""``urnlab <experiment> [--config PATH] [--seed S] [--out PATH] ...``

Exit status: 0 when every check passes, 1 on a failed check, 2 on a usage
or configuration error.  The CSV goes to ``--out`` (or stdout); run
metadata including wall-clock time goes to ``<out>.meta.json`` and is kept
out of the CSV so that reruns are byte-identical.
"""

import argparse
import json
import sys
import time

from . import __version__
from .config import EXPERIMENTS, ConfigError, parse_config
from .displacement import ModelSpecError
from .experiments import format_csv, run_experiment


def build_parser():
    p = argparse.ArgumentParser(prog="urnlab", description="Random-walk Polya urn experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--model", help="displacement model, e.g. 'cauchy(scale=1);d=1'")
    p.add_argument("--n", type=int)
    p.add_argument("--n-from", type=int)
    p.add_argument("--n-to", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--mode", choices=("exact-cdf", "monte-carlo"))
    p.add_argument("--replicas", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--allow-large", action="store_true", default=None)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = parse_config(text, experiment=args.experiment)
        cfg = cfg.with_overrides(
            seed=args.seed,
            out=args.out,
            model=args.model,
            n=args.n,
            n_from=args.n_from,
            n_to=args.n_to,
            h=args.h,
            gamma=args.gamma,
            mode=args.mode,
            replicas=args.replicas,
            workers=args.workers,
            allow_large=args.allow_large,
        )
        started = time.time()
        result = run_experiment(cfg)
        elapsed = time.time() - started
    except (ConfigError, ModelSpecError, OSError) as exc:
        print(f"urnlab: {exc}", file=sys.stderr)
        return 2

    text = format_csv(result)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        meta = {
            "experiment": cfg.experiment,
            "version": __version__,
            "seed": cfg.seed,
            "model": cfg.model,
            "passed": bool(result.passed),
            "wall_clock_seconds": elapsed,
            "summary": result.summary,
        }
        with open(f"{cfg.out}.meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, default=str)
    else:
        sys.stdout.write(text)
    verdict = "PASS" if result.passed else "FAIL"
    print(f"urnlab {cfg.experiment}: {verdict} ({len(result.rows)} rows, {elapsed:.2f}s)", file=sys.stderr)
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
