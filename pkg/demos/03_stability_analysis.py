"""Full stability analysis of the bundled two-protocol score tables.

The bundled fixtures contain four models scored under two protocols
(leave-one-out and 3-fold).  The analysis bootstraps a CI per model,
runs the Friedman rank test with Nemenyi critical differences, computes
pairwise effect sizes, and cross-references the per-protocol winners.
These fixtures are built so the winner flips between protocols, which
is the failure mode the whole report exists to surface.

Figures land in demos/out/stability/.
"""

import os

import segstab
from segstab.datamodel import read_score_table
from segstab.report import render_report_figures
from segstab.stability import build_stability_report

OUT_DIR = os.path.join(os.path.dirname(__file__), "out", "stability")


def main():
    tables = {
        label: read_score_table(segstab.fixture_path(label))
        for label in segstab.FIXTURE_PROTOCOLS
    }
    report = build_stability_report(tables, n_resamples=5000, seed=0)

    for proto in report.protocols:
        print(f"protocol {proto.protocol}")
        for model in sorted(proto.cis):
            ci = proto.cis[model]
            rank = proto.friedman.mean_ranks[model]
            print(
                f"  {model}: mean {ci.mean:.4f} [{ci.lower:.4f}, {ci.upper:.4f}], "
                f"mean rank {rank:.2f}"
            )
        f = proto.friedman
        n = proto.nemenyi
        print(f"  Friedman chi2 {f.statistic:.3f} (dof {f.dof}), p = {f.p_value:.3g}")
        print(f"  Nemenyi CD (alpha {n.alpha}): {n.cd:.3f}")
        joined = [c for c in n.cliques if len(c) > 1]
        if joined:
            print("  statistically tied groups:", ", ".join(map(str, joined)))
        print()

    print("winner consistency across protocols")
    for flip in report.flips:
        winners = ", ".join(f"{p} -> {w}" for p, w in sorted(flip.winners.items()))
        marker = "FLIP" if flip.flipped else "stable"
        print(f"  {flip.metric}/{flip.class_id}: {winners}  [{marker}]")

    if report.any_flip():
        print(
            "\nat least one metric crowns a different winner under a different\n"
            "protocol; a single-protocol leaderboard would have hidden that"
        )

    paths = render_report_figures(report, OUT_DIR)
    print()
    for name in sorted(paths):
        print(f"figure -> {paths[name]}")


if __name__ == "__main__":
    main()
