"""Convergence study for vector-field reconstruction.

Part 1 sweeps the finite-difference step h and prints the error of the
recovered rate at a single point, for plain central differences and with
Richardson extrapolation.  Part 2 sweeps the state-grid density and prints
the full round-trip error (family -> tabulated field -> integrated family).

Usage: python3 scripts/reconstruction_convergence.py [--quick]
"""

import argparse

import numpy as np

from flowfam import ReconstructionConfig, SamplePlan, diagonal_rate, roundtrip_error
from flowfam.catalog import get


def step_sweep(fam):
    # true rate of x' = x^2 at a = 0.7
    a, truth = (0.7,), 0.49
    print("rate recovery at a = 0.7 (truth 0.49):")
    print(f"{'h':>10} {'central err':>14} {'richardson err':>16}")
    for h in (1e-2, 1e-3, 1e-4, 1e-5):
        plain = diagonal_rate(fam, 0.0, a, h=h, richardson=False)[0]
        rich = diagonal_rate(fam, 0.0, a, h=h, richardson=True)[0]
        print(f"{h:>10.0e} {abs(plain - truth):>14.3e} {abs(rich - truth):>16.3e}")
    print("central error falls like h^2, the extrapolated one like h^4")
    print("until rounding noise (~1e-16 / h) takes over.\n")


def density_sweep(fam, quick: bool):
    counts = (251, 1001, 4001) if quick else (251, 501, 1001, 2001, 4001)
    eval_plan = SamplePlan(
        (-1.0, -0.5, 0.0, 0.5, 1.0, 1.5),
        ((-1.0,), (-0.5,), (0.0,), (0.25,), (0.5,)),
        random_count=0,
        seed=0,
    )
    print("round-trip error vs state-grid density (7 time knots, [-2.4, 2.4]):")
    print(f"{'knots':>7} {'spacing':>10} {'roundtrip':>12}")
    for count in counts:
        grid = SamplePlan(
            tuple(np.linspace(-1.1, 1.6, 7)),
            tuple((s,) for s in np.linspace(-2.4, 2.4, count)),
            random_count=0,
            seed=0,
        )
        cfg = ReconstructionConfig(h=1e-4, richardson=True, grid=grid)
        err = roundtrip_error(fam, cfg, eval_plan=eval_plan)
        spacing = 4.8 / (count - 1)
        print(f"{count:>7} {spacing:>10.2e} {err:>12.3e}")
    print("the interpolation bias spacing^2/4 dominates; quadrupling the")
    print("knot count buys a factor of sixteen.")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="fewer grid densities")
    args = ap.parse_args()
    fam = get("riccati").family()
    step_sweep(fam)
    density_sweep(fam, args.quick)


if __name__ == "__main__":
    main()
