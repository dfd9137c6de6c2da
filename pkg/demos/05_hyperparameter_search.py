"""Bayesian search on a synthetic tuning response, with a random baseline.

The simulated-fold-score objective behaves like a mean cross-validation
score: a smooth peak around a plausible configuration plus per-point
deterministic noise.  A guided sweep (random warmup, then expected
improvement over a Gaussian-process surrogate) is compared against pure
random search at the same budget, trial by trial, on identical seeds.

The trial log lands in demos/out/sweep_trials.csv; an interrupted run
still leaves every finished row behind because the file is flushed
after each trial.
"""

import json
import os

from segstab.hpo import builtin_objective, run_sweep

OUT_CSV = os.path.join(os.path.dirname(__file__), "out", "sweep_trials.csv")
BUDGET = 30
WARMUP = 8


def best_curve(records):
    best = float("-inf")
    curve = []
    for r in records:
        if not r.failed:
            best = max(best, r.score)
        curve.append(best)
    return curve


def main():
    space, objective = builtin_objective("simulated-fold-score")

    os.makedirs(os.path.dirname(OUT_CSV), exist_ok=True)
    guided = run_sweep(
        space, objective, budget=BUDGET, init_random=WARMUP, seed=0, out_csv=OUT_CSV
    )
    random_only = run_sweep(space, objective, budget=BUDGET, init_random=BUDGET, seed=0)

    g_curve = best_curve(guided)
    r_curve = best_curve(random_only)
    print(f"{'trial':>5s} {'guided best':>12s} {'random best':>12s}")
    for t in range(4, BUDGET, 5):
        print(f"{t:5d} {g_curve[t]:12.4f} {r_curve[t]:12.4f}")

    best = max((r for r in guided if not r.failed), key=lambda r: r.score)
    print(f"\nguided best score {best.score:.4f} at trial {best.trial_index}")
    print("configuration:", json.dumps(best.point, sort_keys=True))
    print(f"trial log -> {OUT_CSV}")

    wins = sum(
        1
        for seed in range(10)
        if max(r.score for r in run_sweep(space, objective, 20, 6, seed) if not r.failed)
        > max(r.score for r in run_sweep(space, objective, 20, 20, seed) if not r.failed)
    )
    print(f"\nguided beats random on {wins}/10 paired seeds at budget 20")


if __name__ == "__main__":
    main()
