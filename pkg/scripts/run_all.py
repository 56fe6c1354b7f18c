"""Solve every shipped config and write its oracle comparison under ``out/<config>/``.

Usage: python3 scripts/run_all.py [--out-dir out] [--threads 1]
"""
import argparse
import sys
from pathlib import Path

from rbdsde.cli import main as cli_main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out-dir", default="out")
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args(argv)
    worst = 0
    for cfg in sorted(CONFIGS.glob("*.toml")):
        out = Path(args.out_dir) / cfg.stem
        print(f"== {cfg.stem}")
        code = cli_main(["compare-oracle", "--config", str(cfg), "--out-dir", str(out),
                         "--threads", str(args.threads)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
