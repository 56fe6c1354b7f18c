"""Coupled convergence study over N, M and seeds for one config.

Usage: python3 scripts/convergence.py configs/delay.toml --N 8 20 40 --M 500 2000 --seeds 0 1
Lists given on the command line override the config's [study] section.
"""
import argparse
import sys

from rbdsde import experiments
from rbdsde.config import ConfigError, load


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--N", type=int, nargs="+")
    p.add_argument("--M", type=int, nargs="+")
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--timing", action="store_true")
    p.add_argument("--out", default=None, help="CSV path (default: stdout only)")
    args = p.parse_args(argv)
    try:
        cfg = load(args.config)
        rows = experiments.convergence_study(cfg, args.N or cfg.study.N, args.M or cfg.study.M,
                                             args.seeds or cfg.study.seeds, timing=args.timing)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    text = experiments.rows_to_csv(rows)
    print(text, end="")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
