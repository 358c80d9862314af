#!/usr/bin/env python3
"""Classify the analytic scaling fixtures and show how fast the rescaled laws converge."""

import argparse

from dinv.scaling import (
    Case,
    classify,
    degenerate_fixture,
    explosion_fixture,
    power_fixture,
    verify_scaling_convergence,
    zero_fixture,
)

FIXTURES = {
    "power": power_fixture,
    "explosion": explosion_fixture,
    "zero": zero_fixture,
    "degenerate": degenerate_fixture,
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--x", type=float, default=1.0)
    ap.add_argument("--t", type=float, nargs="+", default=[0.5, 1.0, 3.0])
    args = ap.parse_args(argv)

    for name, make in FIXTURES.items():
        family = make()
        report = classify(family)
        params = {k: v for k, v in report.as_dict().items() if k in ("p", "t0", "c", "alpha")}
        print(f"{name}: case={report.case.value} " + " ".join(f"{k}={v:.6g}" for k, v in params.items()))
        if report.case is Case.DEGENERATE:
            continue
        for t in args.t:
            conv = verify_scaling_convergence(family, args.x, t, report)
            if conv.skipped:
                print(f"  t={t:g}: skipped (at the explosion time)")
                continue
            print(f"  t={t:g}: limit cdf {conv.limit_cdf:.6f}, gap at smallest lambda {conv.gaps[-1]:.2e}, "
                  f"converged={conv.converged}")


if __name__ == "__main__":
    main()
