"""Benchmark-stability statistics over cross-validated score tables.

The question this module answers: given per-fold scores for several
models under one or more evaluation protocols, how trustworthy is the
resulting leaderboard?  The tools are

* percentile bootstrap confidence intervals for per-model means,
* the Friedman rank test (tie-corrected chi-square approximation, with
  an exact permutation mode for tiny designs),
* Nemenyi critical differences with maximal-clique grouping,
* Cohen's d effect sizes between model score samples,
* per-model rank trajectories and their summary statistics,
* winner/range instability rows and cross-protocol winner-flip flags.

Ranks follow the competition convention: rank 1 is the best (highest)
score within a fold, ties receive the average of the ranks they span.

Bootstrap determinism
---------------------
Resample ``i`` draws its indices from the splitmix64 stream seeded with
``derive_seed(master_seed, i)`` (see :mod:`segstab.rng`), so the means
are a pure function of (scores, master_seed, i) and can be computed in
any order, chunked or parallel, with bitwise-identical results.  The
interval is the linear-interpolation percentile of the resample means
pooled with the original sample mean; pooling the sample mean is what
guarantees lower <= mean <= upper.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .datamodel import ScoreTable
from .rng import GOLDEN_GAMMA, derive_seed_array, mix64_array, randbelow_array

# Two-tailed studentized-range quantiles divided by sqrt(2), infinite
# degrees of freedom, as used by the Nemenyi post-hoc test.
Q_ALPHA = {
    0.05: {
        2: 1.959964,
        3: 2.343701,
        4: 2.569032,
        5: 2.727774,
        6: 2.849705,
        7: 2.948320,
        8: 3.030878,
        9: 3.101730,
        10: 3.163684,
    },
    0.10: {
        2: 1.644854,
        3: 2.052293,
        4: 2.291341,
        5: 2.459516,
        6: 2.588521,
        7: 2.692732,
        8: 2.779884,
        9: 2.854606,
        10: 2.919889,
    },
}


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapCI:
    mean: float
    lower: float
    upper: float
    level: float
    n_resamples: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "n_resamples": self.n_resamples,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BootstrapCI":
        return cls(d["mean"], d["lower"], d["upper"], d["level"],
                   d["n_resamples"], d["seed"])


def resample_means(scores, seed: int, start: int, stop: int) -> np.ndarray:
    """Means of bootstrap resamples ``start`` .. ``stop - 1``.

    Each resample index owns an independent derived stream, so computing
    the full range in one call or in arbitrary disjoint chunks yields
    the same values bit for bit.
    """
    arr = np.asarray(scores, dtype=np.float64)
    n = arr.size
    if stop <= start:
        return np.empty(0)
    seeds = derive_seed_array(seed, np.arange(start, stop, dtype=np.uint64))
    steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(GOLDEN_GAMMA)
    states = seeds[:, None] + steps[None, :]
    indices = randbelow_array(mix64_array(states), n)
    return arr[indices].mean(axis=1)


def bootstrap_ci(
    scores, level: float = 0.95, n_resamples: int = 10_000, seed: int = 0
) -> BootstrapCI:
    """Percentile bootstrap CI for the mean of ``scores``.

    The percentile pool is the ``n_resamples`` resample means plus the
    original sample mean; lower/upper are the linear-interpolation
    percentiles at (1 - level)/2 and 1 - (1 - level)/2.
    """
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("scores must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scores must be finite")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if n_resamples < 1:
        raise ValueError(f"n_resamples must be >= 1, got {n_resamples}")
    sample_mean = float(arr.mean())
    means = resample_means(arr, seed, 0, n_resamples)
    pool = np.concatenate(([sample_mean], means))
    tail = (1.0 - level) / 2.0 * 100.0
    lower, upper = np.percentile(pool, [tail, 100.0 - tail])
    return BootstrapCI(
        mean=sample_mean,
        lower=float(lower),
        upper=float(upper),
        level=level,
        n_resamples=n_resamples,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Friedman test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FriedmanResult:
    statistic: float
    dof: int
    p_value: float
    mean_ranks: dict
    tie_corrected: bool
    all_tied: bool
    n_folds: int

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "mean_ranks": dict(self.mean_ranks),
            "tie_corrected": self.tie_corrected,
            "all_tied": self.all_tied,
            "n_folds": self.n_folds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FriedmanResult":
        return cls(d["statistic"], d["dof"], d["p_value"], dict(d["mean_ranks"]),
                   d["tie_corrected"], d["all_tied"], d["n_folds"])


def _rank_matrix(matrix: np.ndarray) -> np.ndarray:
    """Per-fold competition ranks (1 = best score, average on ties)."""
    return np.vstack([sps.rankdata(-row, method="average") for row in matrix])


def fold_ranks(table: ScoreTable, metric: str, class_id: str) -> dict:
    """Per-fold rank trajectory for every model in a (metric, class) slice."""
    values = table.slice_values(metric, class_id)
    models = sorted(values)
    matrix = np.array([values[m] for m in models]).T  # folds x models
    ranks = _rank_matrix(matrix)
    return {m: [float(r) for r in ranks[:, j]] for j, m in enumerate(models)}


def friedman_from_scores(scores: dict, method: str = "chi2") -> FriedmanResult:
    """Friedman test over ``scores``: model -> per-fold score list.

    ``method="chi2"`` uses the tie-corrected chi-square approximation
    with k - 1 degrees of freedom.  ``method="exact"`` enumerates all
    within-fold rank permutations (only for k * N <= 12) and reports the
    exact tail probability of the uncorrected statistic; it is meant as
    an oracle for small designs, not for routine use.

    When every fold is fully tied the statistic is 0 and p = 1 by
    convention (the tie-correction denominator vanishes).
    """
    models = sorted(scores)
    k = len(models)
    if k < 2:
        raise ValueError(f"Friedman test needs >= 2 models, got {k}")
    lengths = {len(scores[m]) for m in models}
    if len(lengths) != 1:
        raise ValueError("all models must have the same number of folds")
    n = lengths.pop()
    if n < 2:
        raise ValueError(f"Friedman test needs >= 2 folds, got {n}")
    matrix = np.array([scores[m] for m in models], dtype=np.float64).T
    if not np.all(np.isfinite(matrix)):
        raise ValueError("scores must be finite")

    ranks = _rank_matrix(matrix)
    rbar = ranks.mean(axis=0)
    base = 12.0 * n / (k * (k + 1)) * float(((rbar - (k + 1) / 2.0) ** 2).sum())

    tie_total = 0
    for row in matrix:
        _, counts = np.unique(row, return_counts=True)
        tie_total += int((counts**3 - counts).sum())
    correction = 1.0 - tie_total / (n * k * (k**2 - 1))

    all_tied = correction == 0.0
    if all_tied:
        statistic = 0.0
    else:
        statistic = base / correction

    mean_ranks = {m: float(rbar[j]) for j, m in enumerate(models)}
    dof = k - 1

    if method == "chi2":
        p_value = 1.0 if all_tied else float(sps.chi2.sf(statistic, dof))
    elif method == "exact":
        if k * n > 12:
            raise ValueError("exact mode is limited to k * n_folds <= 12")
        p_value = _exact_friedman_p(statistic, k, n)
    else:
        raise ValueError(f"unknown method {method!r}")

    return FriedmanResult(
        statistic=float(statistic),
        dof=dof,
        p_value=p_value,
        mean_ranks=mean_ranks,
        tie_corrected=tie_total > 0,
        all_tied=all_tied,
        n_folds=n,
    )


def _exact_friedman_p(observed: float, k: int, n: int) -> float:
    """Tail probability of the statistic under uniform rank permutations."""
    perms = list(itertools.permutations(range(1, k + 1)))
    scale = 12.0 * n / (k * (k + 1))
    center = (k + 1) / 2.0
    hits = 0
    total = 0
    for assignment in itertools.product(perms, repeat=n):
        rbar = [sum(col) / n for col in zip(*assignment)]
        stat = scale * sum((r - center) ** 2 for r in rbar)
        if stat >= observed - 1e-12:
            hits += 1
        total += 1
    return hits / total


def friedman_test(
    table: ScoreTable, metric: str, class_id: str, method: str = "chi2"
) -> FriedmanResult:
    """Friedman test over one (metric, class) slice of a score table."""
    return friedman_from_scores(table.slice_values(metric, class_id), method=method)


# ---------------------------------------------------------------------------
# Nemenyi critical difference
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NemenyiResult:
    cd: float
    alpha: float
    q_alpha: float
    pairwise_significant: dict
    cliques: tuple

    def to_dict(self) -> dict:
        return {
            "cd": self.cd,
            "alpha": self.alpha,
            "q_alpha": self.q_alpha,
            "pairwise_significant": [
                {"models": list(pair), "significant": sig}
                for pair, sig in sorted(self.pairwise_significant.items())
            ],
            "cliques": [list(c) for c in self.cliques],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NemenyiResult":
        pairwise = {
            tuple(entry["models"]): entry["significant"]
            for entry in d["pairwise_significant"]
        }
        return cls(d["cd"], d["alpha"], d["q_alpha"], pairwise,
                   tuple(tuple(c) for c in d["cliques"]))


def _q_alpha(k: int, alpha: float) -> float:
    for key, column in Q_ALPHA.items():
        if math.isclose(alpha, key, rel_tol=0.0, abs_tol=1e-12):
            if k not in column:
                raise ValueError(f"no critical value tabulated for k = {k} (2..10)")
            return column[k]
    raise ValueError(f"alpha must be 0.05 or 0.10, got {alpha}")


def nemenyi_cd(k: int, n_folds: int, alpha: float = 0.05) -> float:
    """Critical difference q_alpha * sqrt(k (k + 1) / (6 N))."""
    if n_folds < 2:
        raise ValueError(f"need >= 2 folds, got {n_folds}")
    q = _q_alpha(k, alpha)
    return q * math.sqrt(k * (k + 1) / (6.0 * n_folds))


def cd_cliques(mean_ranks: dict, cd: float) -> tuple:
    """Maximal groups of rank-contiguous models with rank spread <= cd.

    Models are ordered by mean rank (ties broken by name); each group is
    the longest run starting at some model whose total spread stays
    within the critical difference, and runs contained in a longer run
    are dropped.  A model in no multi-member run contributes a singleton
    group, so every model belongs to at least one clique.
    """
    order = sorted(mean_ranks, key=lambda m: (mean_ranks[m], m))
    ranks = [mean_ranks[m] for m in order]
    cliques = []
    prev_end = -1
    for i in range(len(order)):
        j = i
        while j + 1 < len(order) and ranks[j + 1] - ranks[i] <= cd:
            j += 1
        if j > prev_end:
            cliques.append(tuple(order[i : j + 1]))
            prev_end = j
    return tuple(cliques)


def nemenyi_test(friedman: FriedmanResult, alpha: float = 0.05) -> NemenyiResult:
    """Critical-difference analysis on a Friedman result."""
    ranks = friedman.mean_ranks
    cd = nemenyi_cd(len(ranks), friedman.n_folds, alpha)
    pairwise = {}
    for a, b in itertools.combinations(sorted(ranks), 2):
        pairwise[(a, b)] = abs(ranks[a] - ranks[b]) > cd
    return NemenyiResult(
        cd=cd,
        alpha=alpha,
        q_alpha=_q_alpha(len(ranks), alpha),
        pairwise_significant=pairwise,
        cliques=cd_cliques(ranks, cd),
    )


# ---------------------------------------------------------------------------
# Effect sizes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EffectSize:
    cohens_d: float
    magnitude: str

    def to_dict(self) -> dict:
        return {"cohens_d": self.cohens_d, "magnitude": self.magnitude}

    @classmethod
    def from_dict(cls, d: dict) -> "EffectSize":
        return cls(d["cohens_d"], d["magnitude"])


def magnitude_label(d: float) -> str:
    """Conventional |d| bands; boundaries belong to the larger band."""
    ad = abs(d)
    if ad < 0.2:
        return "negligible"
    if ad < 0.5:
        return "small"
    if ad < 0.8:
        return "medium"
    return "large"


def cohens_d(a, b) -> EffectSize:
    """Cohen's d with the pooled sample (n - 1) standard deviation.

    Raises when the pooled deviation is zero but the means differ (the
    effect would be infinite); two identical constant samples yield 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least 2 observations")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples must be finite")
    va = float(a.var(ddof=1))
    vb = float(b.var(ddof=1))
    pooled = math.sqrt(((a.size - 1) * va + (b.size - 1) * vb) / (a.size + b.size - 2))
    diff = float(a.mean()) - float(b.mean())
    if pooled == 0.0:
        if diff == 0.0:
            return EffectSize(0.0, magnitude_label(0.0))
        raise ValueError("infinite effect: zero pooled deviation with unequal means")
    d = diff / pooled
    return EffectSize(d, magnitude_label(d))


# ---------------------------------------------------------------------------
# Rank trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankStats:
    mean_rank: float
    rank_range: float
    std: float
    top1_pct: float
    top2_pct: float
    trajectory: tuple

    def to_dict(self) -> dict:
        return {
            "mean_rank": self.mean_rank,
            "rank_range": self.rank_range,
            "std": self.std,
            "top1_pct": self.top1_pct,
            "top2_pct": self.top2_pct,
            "trajectory": list(self.trajectory),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RankStats":
        return cls(d["mean_rank"], d["rank_range"], d["std"], d["top1_pct"],
                   d["top2_pct"], tuple(d["trajectory"]))


def rank_stats(trajectory) -> RankStats:
    """Summary of one model's per-fold ranks.

    std is the sample (n - 1) standard deviation, 0.0 for a single fold.
    top1/top2 are the percentage of folds ranked at or better than 1
    and 2 respectively.
    """
    traj = tuple(float(r) for r in trajectory)
    if not traj:
        raise ValueError("empty rank trajectory")
    if any(r < 1.0 for r in traj):
        raise ValueError("ranks start at 1")
    arr = np.asarray(traj)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return RankStats(
        mean_rank=float(arr.mean()),
        rank_range=float(arr.max() - arr.min()),
        std=std,
        top1_pct=100.0 * float((arr <= 1.0 + 1e-12).mean()),
        top2_pct=100.0 * float((arr <= 2.0 + 1e-12).mean()),
        trajectory=traj,
    )


def spearman_fold_corr(ranks_a, ranks_b) -> float:
    """Spearman rho between two fold ranking sequences.

    Both inputs are re-ranked (average ties) before the Pearson step, so
    the result is invariant under strictly monotone transforms.  A
    zero-variance side yields 0.0 by convention.
    """
    a = np.asarray(ranks_a, dtype=np.float64)
    b = np.asarray(ranks_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("inputs must be 1-D, equal length, length >= 2")
    ra = sps.rankdata(a, method="average")
    rb = sps.rankdata(b, method="average")
    da = ra - ra.mean()
    db = rb - rb.mean()
    denom = math.sqrt(float((da**2).sum()) * float((db**2).sum()))
    if denom == 0.0:
        return 0.0
    rho = float((da * db).sum()) / denom
    return max(-1.0, min(1.0, rho))


# ---------------------------------------------------------------------------
# Winner instability across protocols
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WinnerRangeRow:
    protocol: str
    metric: str
    class_id: str
    winner: str
    tie: bool
    highest: float
    lowest: float
    value_range: float

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "metric": self.metric,
            "class": self.class_id,
            "winner": self.winner,
            "tie": self.tie,
            "highest": self.highest,
            "lowest": self.lowest,
            "range": self.value_range,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WinnerRangeRow":
        return cls(d["protocol"], d["metric"], d["class"], d["winner"], d["tie"],
                   d["highest"], d["lowest"], d["range"])


@dataclass(frozen=True)
class WinnerFlip:
    metric: str
    class_id: str
    winners: dict
    flipped: bool

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "class": self.class_id,
            "winners": dict(self.winners),
            "flipped": self.flipped,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WinnerFlip":
        return cls(d["metric"], d["class"], dict(d["winners"]), d["flipped"])


def _slice_winner(values: dict) -> tuple:
    """(winner, tie) for a model -> fold-scores map, by mean score."""
    means = {m: float(np.mean(v)) for m, v in values.items()}
    best = max(means.values())
    leaders = sorted(m for m, mu in means.items() if mu == best)
    return leaders[0], len(leaders) > 1


def instability_table(tables: dict, metrics=None) -> tuple:
    """Winner/range rows per (protocol, metric, class) plus flip flags.

    ``tables`` maps protocol label -> ScoreTable.  Rows cover every
    (metric, class) slice present (restricted to ``metrics`` when
    given); a flip is flagged for any (metric, class) whose winner is
    not the same model under every protocol that has that slice.
    """
    if not tables:
        raise ValueError("no score tables given")
    rows = []
    winners: dict = {}
    for protocol, table in tables.items():
        wanted = list(metrics) if metrics is not None else table.metrics()
        for metric in wanted:
            if metric not in table.metrics():
                raise ValueError(f"protocol {protocol!r} has no metric {metric!r}")
            for class_id in table.classes(metric):
                values = table.slice_values(metric, class_id)
                winner, tie = _slice_winner(values)
                flat = [v for series in values.values() for v in series]
                rows.append(
                    WinnerRangeRow(
                        protocol=protocol,
                        metric=metric,
                        class_id=class_id,
                        winner=winner,
                        tie=tie,
                        highest=max(flat),
                        lowest=min(flat),
                        value_range=max(flat) - min(flat),
                    )
                )
                winners.setdefault((metric, class_id), {})[protocol] = winner
    flips = []
    for (metric, class_id), by_proto in sorted(winners.items()):
        if len(by_proto) < 2:
            continue
        flips.append(
            WinnerFlip(
                metric=metric,
                class_id=class_id,
                winners=by_proto,
                flipped=len(set(by_proto.values())) > 1,
            )
        )
    return rows, flips


# ---------------------------------------------------------------------------
# Full report assembly
# ---------------------------------------------------------------------------


@dataclass
class ProtocolAnalysis:
    protocol: str
    cis: dict
    friedman: FriedmanResult | None
    nemenyi: NemenyiResult | None
    effect_sizes: dict
    rank_stats: dict
    note: str | None = None


@dataclass
class StabilityReport:
    """Everything the analyze step produces, JSON round-trippable."""

    config: dict
    protocols: list
    instability: list
    flips: list

    def any_flip(self) -> bool:
        return any(f.flipped for f in self.flips)

    def any_degenerate(self) -> bool:
        return any(p.friedman is not None and p.friedman.all_tied for p in self.protocols)

    def protocol(self, label: str) -> ProtocolAnalysis:
        for p in self.protocols:
            if p.protocol == label:
                return p
        raise KeyError(f"no protocol {label!r} in report")

    def to_dict(self) -> dict:
        return {
            "config": dict(self.config),
            "protocol_order": [p.protocol for p in self.protocols],
            "cis": [
                dict(protocol=p.protocol, model=m, **p.cis[m].to_dict())
                for p in self.protocols
                for m in sorted(p.cis)
            ],
            "friedman": {
                p.protocol: (
                    p.friedman.to_dict() if p.friedman is not None else {"note": p.note}
                )
                for p in self.protocols
            },
            "nemenyi": {
                p.protocol: p.nemenyi.to_dict()
                for p in self.protocols
                if p.nemenyi is not None
            },
            "effect_sizes": [
                {
                    "protocol": p.protocol,
                    "model_a": a,
                    "model_b": b,
                    **p.effect_sizes[(a, b)].to_dict(),
                }
                for p in self.protocols
                for (a, b) in sorted(p.effect_sizes)
            ],
            "rank_stats": [
                {"protocol": p.protocol, "model": m, **p.rank_stats[m].to_dict()}
                for p in self.protocols
                for m in sorted(p.rank_stats)
            ],
            "instability": [row.to_dict() for row in self.instability],
            "flips": [flip.to_dict() for flip in self.flips],
        }

    def to_json(self) -> str:
        import json

        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, payload: dict) -> "StabilityReport":
        protocols = []
        for label in payload["protocol_order"]:
            cis = {
                row["model"]: BootstrapCI.from_dict(row)
                for row in payload["cis"]
                if row["protocol"] == label
            }
            fr_payload = payload["friedman"].get(label, {})
            friedman = (
                FriedmanResult.from_dict(fr_payload) if "statistic" in fr_payload else None
            )
            note = fr_payload.get("note")
            nemenyi = (
                NemenyiResult.from_dict(payload["nemenyi"][label])
                if label in payload.get("nemenyi", {})
                else None
            )
            effects = {
                (row["model_a"], row["model_b"]): EffectSize.from_dict(row)
                for row in payload["effect_sizes"]
                if row["protocol"] == label
            }
            ranks = {
                row["model"]: RankStats.from_dict(row)
                for row in payload["rank_stats"]
                if row["protocol"] == label
            }
            protocols.append(
                ProtocolAnalysis(
                    protocol=label,
                    cis=cis,
                    friedman=friedman,
                    nemenyi=nemenyi,
                    effect_sizes=effects,
                    rank_stats=ranks,
                    note=note,
                )
            )
        return cls(
            config=dict(payload["config"]),
            protocols=protocols,
            instability=[WinnerRangeRow.from_dict(r) for r in payload["instability"]],
            flips=[WinnerFlip.from_dict(f) for f in payload["flips"]],
        )

    @classmethod
    def from_json(cls, text: str) -> "StabilityReport":
        import json

        return cls.from_dict(json.loads(text))


def build_stability_report(
    tables: dict,
    metric: str = "dice",
    class_id: str = "macro",
    level: float = 0.95,
    n_resamples: int = 10_000,
    alpha: float = 0.05,
    seed: int = 0,
    instability_metrics=None,
) -> StabilityReport:
    """Run the full stability analysis over protocol-labelled tables.

    Bootstrap streams are derived per (protocol position, model
    position), so each model is resampled independently and the whole
    report is a pure function of its inputs.
    """
    from .rng import derive_seed

    if not tables:
        raise ValueError("no score tables given")
    protocols = []
    for p_idx, (label, table) in enumerate(tables.items()):
        values = table.slice_values(metric, class_id)
        models = sorted(values)
        proto_seed = derive_seed(seed, p_idx)
        cis = {
            m: bootstrap_ci(values[m], level, n_resamples, derive_seed(proto_seed, j))
            for j, m in enumerate(models)
        }
        if len(models) >= 2 and len(values[models[0]]) >= 2:
            friedman = friedman_from_scores(values)
            nemenyi = nemenyi_test(friedman, alpha)
            effects = {
                (a, b): cohens_d(values[a], values[b])
                for a, b in itertools.combinations(models, 2)
            }
            trajectories = fold_ranks(table, metric, class_id)
            ranks = {m: rank_stats(trajectories[m]) for m in models}
            note = None
        else:
            friedman = nemenyi = None
            effects = {}
            ranks = {}
            note = "rank analysis skipped: needs >= 2 models and >= 2 folds"
        protocols.append(
            ProtocolAnalysis(
                protocol=label,
                cis=cis,
                friedman=friedman,
                nemenyi=nemenyi,
                effect_sizes=effects,
                rank_stats=ranks,
                note=note,
            )
        )
    rows, flips = instability_table(tables, instability_metrics)
    config = {
        "metric": metric,
        "class": class_id,
        "level": level,
        "n_resamples": n_resamples,
        "alpha": alpha,
        "seed": seed,
    }
    return StabilityReport(config=config, protocols=protocols,
                           instability=rows, flips=flips)
