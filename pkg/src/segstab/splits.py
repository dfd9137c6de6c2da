"""Cross-validation split planning.

Two protocols are supported: leave-one-out (one fold per sample, in
sample order) and seeded k-fold.  The k-fold shuffle runs on the
portable splitmix64 stream from :mod:`segstab.rng`, so a plan is a pure
function of (n, k, seed) on every platform and Python version.
"""

from __future__ import annotations

from .datamodel import SplitPlan
from .rng import SplitMix64


def make_loocv(n: int) -> SplitPlan:
    """Leave-one-out plan: fold i tests sample i, trains on the rest."""
    if n < 2:
        raise ValueError(f"LOOCV needs at least 2 samples, got {n}")
    folds = []
    for i in range(n):
        test = (i,)
        train = tuple(j for j in range(n) if j != i)
        folds.append((train, test))
    return SplitPlan(protocol="loocv", n_samples=n, folds=folds, seed=0, k=None)


def make_kfold(n: int, k: int, seed: int) -> SplitPlan:
    """Seeded k-fold plan with fold sizes differing by at most one.

    Indices are shuffled by a Fisher-Yates pass over the splitmix64
    stream seeded with ``seed``, then cut into k contiguous blocks; the
    first n % k blocks take the extra sample.  Train/test indices are
    stored sorted.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if n < k:
        raise ValueError(f"cannot make {k} folds from {n} samples")
    order = list(range(n))
    SplitMix64(seed).shuffle(order)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        test = sorted(order[start : start + size])
        start += size
        train = sorted(set(range(n)) - set(test))
        folds.append((tuple(train), tuple(test)))
    return SplitPlan(protocol="kfold", n_samples=n, folds=folds, seed=seed, k=k)
