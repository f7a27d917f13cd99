"""Write every CLI table into one directory.

    python3 scripts/reproduce_tables.py out/ [--samples 20000] [--workers 2]

Sample counts are reduced from the command defaults so the whole run takes a
couple of minutes; pass ``--samples 200000`` for acceptance-size runs.
"""
import argparse
import sys
from pathlib import Path

from mesoscatter import cli


def main():
    p = argparse.ArgumentParser()
    p.add_argument("outdir", type=Path)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=20240601)
    args = p.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)

    jobs = {
        "hom-profile": [],
        "bbp": [],
        "bbp-eta3": ["--set", "eta=3.0"],
        "bbp-eta1.5": ["--set", "eta=1.5"],
        "rmt-verify": ["--set", f"samples={args.samples}"],
        "variance": ["--set", f"mc_samples={args.samples}"],
        "three-body": [],
        "series": ["--set", "order=8"],
        "mc": ["--set", f"samples={args.samples}"],
    }
    status = 0
    for name, extra in jobs.items():
        command = name.split("-eta")[0]
        out = args.outdir / f"{name}.csv"
        code = cli.main([command, "--seed", str(args.seed), "--workers", str(args.workers),
                         "--output", str(out)] + extra)
        print(f"{name:14s} exit {code} -> {out}")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
