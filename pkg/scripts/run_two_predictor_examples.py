"""Run both two-predictor examples and compare discard behavior.

Example A removes controls from a covariate quadrant, so a large slice
of the treated group has no empirical counterpart; the propensity range
rule reacts to the assignment model while the ensemble rules react to
outcome uncertainty.  Example B scales a response-surface interaction
by phi, so discards should grow with phi.

Usage:
    python scripts/run_two_predictor_examples.py [--n 250] [--seeds 5]
"""

import argparse

import numpy as np

from causalsupport import (
    bart_effect,
    counterfactual_sds,
    discard_one_sd,
    discard_propensity_range,
    fit_bart,
    fit_logistic,
    gen_example_2a,
    gen_example_2b,
    match_effect,
)


def example_a(n: int, seeds: range) -> None:
    print("example A: controls removed where x1 > 0")
    drops_sd, drops_ps, err_b, err_m = [], [], [], []
    for seed in seeds:
        study = gen_example_2a(n, seed=seed)
        d = study.dataset
        surface = fit_bart(d, seed=seed)
        rep_sd = discard_one_sd(counterfactual_sds(surface), 1)
        pm = fit_logistic(d.x, d.z)
        rep_ps = discard_propensity_range(pm.pscores, d.z, 1)
        effects = study.true_unit_effects
        est_b = bart_effect(surface, rep_sd, 1)
        est_m = match_effect(d, pm, rep_ps, 1, seed=seed)
        drops_sd.append(rep_sd.n_discarded)
        drops_ps.append(rep_ps.n_discarded)
        err_b.append(est_b.point
                     - effects[(d.z == 1) & ~rep_sd.discard].mean())
        err_m.append(est_m.point
                     - effects[(d.z == 1) & ~rep_ps.discard].mean())
        print(f"  seed {seed}: drops {rep_sd.n_discarded:3d} (1-sd) vs "
              f"{rep_ps.n_discarded:3d} (ps range); error "
              f"{err_b[-1]:+.3f} (bart) vs {err_m[-1]:+.3f} (matching)")
    rmse = lambda e: float(np.sqrt(np.mean(np.square(e))))
    print(f"  mean drops {np.mean(drops_sd):.1f} vs {np.mean(drops_ps):.1f}; "
          f"after-discard RMSE {rmse(err_b):.3f} (bart) vs "
          f"{rmse(err_m):.3f} (matching)\n")


def example_b(n: int, seeds: range) -> None:
    print("example B: 1-sd discards as the interaction strength phi grows")
    for phi in (1.0, 2.0, 3.0):
        counts = []
        for seed in seeds:
            study = gen_example_2b(n, phi, seed)
            surface = fit_bart(study.dataset, seed=seed)
            counts.append(
                discard_one_sd(counterfactual_sds(surface), 1).n_discarded)
        print(f"  phi={phi:.0f}: mean discards {np.mean(counts):5.1f}  "
              f"(per seed: {counts})")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=250)
    ap.add_argument("--seeds", type=int, default=5,
                    help="number of seeds per configuration")
    args = ap.parse_args()
    seeds = range(args.seeds)
    example_a(args.n, seeds)
    example_b(args.n, seeds)


if __name__ == "__main__":
    main()
