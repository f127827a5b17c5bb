#!/usr/bin/env python3
"""Run both benchmark sweeps end to end and print where the summaries landed.

Generates the config directories if they are missing (same layout as
make_benchmark_configs.py) and then executes the sweeps sequentially so the
timing columns are uncontaminated. Expect a few minutes of runtime; the
reference cases dominate.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.dirname(__file__))
import make_benchmark_configs as gen

from klexpand.cli import sweep
from klexpand.config import parse_config_file


def run_sweep(directory):
    cfgs = [
        parse_config_file(os.path.join(directory, f))
        for f in sorted(os.listdir(directory))
        if f.endswith(".cfg")
    ]
    out_dir = os.path.join(directory, "sweep-out")
    _, failures, partials = sweep(cfgs, out_dir)
    print(f"{directory}: {len(cfgs)} cases, {failures} failures, {partials} partial")
    print(f"  summary: {os.path.join(out_dir, 'summary.csv')}")
    return failures


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", nargs="?", default="benchmarks")
    args = parser.parse_args()
    dirs = [gen.exp_h_refinement(args.out), gen.gauss_k_refinement(args.out)]
    failures = 0
    for d in dirs:
        failures += run_sweep(d)
    return 2 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
