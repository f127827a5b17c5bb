#!/usr/bin/env python3
"""Generate desk-scale benchmark sweeps mirroring the two half-cylinder studies.

Writes two config directories:

  <out>/exp-h-refinement/    exponential kernel, p = 2, five mesh cases
  <out>/gauss-k-refinement/  Gaussian kernel, p = 2..6 at C^{p-1}, fixed mesh

Each directory starts with a `case0_reference` config (the finest affordable
run of the same family); the later cases point their `reference_eigenvalues`
at its output, so a single `klexpand sweep <dir>` produces populated
mean-relative-error columns in summary.csv.
"""

import argparse
import os

COMMON = """\
geometry = half-cylinder
geometry.inner_r = 1.0
geometry.outer_r = 2.0
geometry.length = 10.0
kernel.variance = 1.0
kernel.correlation_length = 5.0
eigen.num_pairs = 20
eigen.seed = 1234
threads = 1
"""


def write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def exp_h_refinement(root):
    d = os.path.join(root, "exp-h-refinement")
    os.makedirs(d, exist_ok=True)
    ref_out = os.path.abspath(os.path.join(d, "sweep-out", "case0_reference"))
    cases = {
        "case0_reference": (8, 16, 8),
        "case1": (2, 4, 2),
        "case2": (3, 6, 3),
        "case3": (4, 8, 4),
        "case4": (5, 10, 5),
        "case5": (6, 12, 6),
    }
    for name, elements in cases.items():
        for method in ("galerkin-ibq", "collocation"):
            if name == "case0_reference" and method == "collocation":
                continue
            text = COMMON + (
                f"method = {method}\n"
                "kernel.kind = exponential\n"
                "degree = 2\n"
                f"elements = {elements[0]}, {elements[1]}, {elements[2]}\n"
            )
            if name != "case0_reference":
                text += f"reference_eigenvalues = {os.path.join(ref_out, 'eigenvalues.csv')}\n"
            stem = name if name == "case0_reference" else f"{name}_{method}"
            write(os.path.join(d, f"{stem}.cfg"), text)
    return d


def gauss_k_refinement(root):
    d = os.path.join(root, "gauss-k-refinement")
    os.makedirs(d, exist_ok=True)
    ref_out = os.path.abspath(os.path.join(d, "sweep-out", "case0_reference"))
    write(
        os.path.join(d, "case0_reference.cfg"),
        COMMON
        + "method = galerkin-ibq\nkernel.kind = gaussian\ndegree = 5\n"
        + "elements = 5, 10, 5\n",
    )
    for i, degree in enumerate((2, 3, 4, 5, 6), start=1):
        for method in ("galerkin-ibq", "collocation"):
            text = COMMON + (
                f"method = {method}\n"
                "kernel.kind = gaussian\n"
                f"degree = {degree}\n"
                "elements = 3, 6, 3\n"
                f"reference_eigenvalues = {os.path.join(ref_out, 'eigenvalues.csv')}\n"
            )
            write(os.path.join(d, f"case{i}_p{degree}_{method}.cfg"), text)
    return d


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", nargs="?", default="benchmarks")
    args = parser.parse_args()
    for d in (exp_h_refinement(args.out), gauss_k_refinement(args.out)):
        print(f"wrote {d}; run:  klexpand sweep {d}")


if __name__ == "__main__":
    main()
