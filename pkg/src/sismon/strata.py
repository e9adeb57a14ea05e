"""Stratifications of a pool and proportional allocation of the label budget."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AllocationError, DataError
from .pool import Pool


@dataclass(frozen=True, eq=False)
class Stratification:
    """Disjoint partition of a pool into P non-empty strata.

    ``assignment[k]`` is the 0-based stratum of the instance at pool position k.
    """

    assignment: np.ndarray
    labels: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        p = len(self.labels)
        if a.ndim != 1 or a.size == 0:
            raise DataError("assignment must be a non-empty 1-D array")
        if p < 1 or a.min() < 0 or a.max() >= p:
            raise DataError("assignment refers to an unknown stratum")
        sizes = np.bincount(a, minlength=p)
        if np.any(sizes == 0):
            raise DataError(f"stratum {int(np.argmin(sizes))} is empty")
        a = a.copy()
        a.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        object.__setattr__(self, "_sizes", sizes)
        members = tuple(np.flatnonzero(a == j) for j in range(p))
        object.__setattr__(self, "_members", members)

    @property
    def n_strata(self) -> int:
        return len(self.labels)

    @property
    def pool_size(self) -> int:
        return int(self.assignment.size)

    @property
    def sizes(self) -> np.ndarray:
        return self._sizes

    @property
    def weights(self) -> np.ndarray:
        return self._sizes / self.pool_size

    def exact_weights(self) -> list[Fraction]:
        return [Fraction(int(s), self.pool_size) for s in self._sizes]

    def members(self, j: int) -> np.ndarray:
        """Pool positions in stratum ``j`` (ascending)."""
        return self._members[j]

    def check_pool(self, pool: Pool) -> None:
        if pool.size != self.pool_size:
            raise DataError(
                f"stratification built for N={self.pool_size} used with pool of N={pool.size}"
            )

    def stratum_of(self, pool: Pool, id_: int) -> int:
        return int(self.assignment[pool.position(id_)])

    @classmethod
    def single(cls, pool: Pool) -> "Stratification":
        return cls(np.zeros(pool.size, dtype=np.int64), ("all",), "none")

    def __eq__(self, other):
        if not isinstance(other, Stratification):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.assignment, other.assignment)

    __hash__ = None

    def __repr__(self):
        return f"Stratification({self.name or 'unnamed'}, P={self.n_strata}, sizes={self._sizes.tolist()})"


def _relabel(keys: np.ndarray, order: Sequence) -> np.ndarray:
    index = {k: j for j, k in enumerate(order)}
    return np.fromiter((index[k] for k in keys.tolist()), dtype=np.int64, count=keys.size)


def _sort_key(v):
    return (0, v, "") if isinstance(v, (int, float)) else (1, 0.0, str(v))


def build_categorical_strata(pool: Pool, attr: str) -> Stratification:
    """One stratum per distinct value of ``attr``, ordered by value."""
    col = pool.column(attr)
    values = col.tolist()
    if any(v is None or (isinstance(v, float) and math.isnan(v)) for v in values):
        raise DataError(f"attribute {attr!r} missing on some instances")
    if any(isinstance(v, str) and v.strip() == "" for v in values):
        raise DataError(f"attribute {attr!r} missing on some instances")
    order = sorted(set(values), key=_sort_key)
    labels = tuple(f"{attr}={_label(v)}" for v in order)
    return Stratification(_relabel(np.asarray(values, dtype=object), order), labels, attr)


def _label(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


def quantile_edges(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Interior bin edges by nearest rank, duplicates collapsed.

    The edge for probability i/n_bins is the order statistic of rank
    ceil(i * N / n_bins).
    """
    if n_bins < 1:
        raise DataError("number of bins must be >= 1")
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = v.size
    ranks = [-(-i * n // n_bins) for i in range(1, n_bins)]
    edges = [v[max(r, 1) - 1] for r in ranks]
    return np.unique(np.asarray(edges, dtype=np.float64))


def quantile_bins(values: np.ndarray, n_bins: int) -> np.ndarray:
    """0-based bin index per value; right-closed bins, empty bins dropped."""
    values = np.asarray(values, dtype=np.float64)
    raw = np.searchsorted(quantile_edges(values, n_bins), values, side="left")
    used = np.unique(raw)
    return np.searchsorted(used, raw)


def _numeric(pool: Pool, attr: str) -> np.ndarray:
    col = pool.column(attr)
    if col.dtype.kind not in "biuf":
        raise DataError(f"attribute {attr!r} is not numeric")
    col = col.astype(np.float64)
    if np.any(np.isnan(col)):
        raise DataError(f"attribute {attr!r} missing on some instances")
    return col


def build_quantile_strata(
    pool: Pool, feature: str, n_feat_bins: int, score_bins: int = 1
) -> Stratification:
    """Feature quantile bins over the pool, then score quantile bins inside each.

    Produces at most ``n_feat_bins * score_bins`` non-empty strata, ordered by
    feature bin then score bin.
    """
    if n_feat_bins < 1 or score_bins < 1:
        raise DataError("n_feat_bins and score_bins must be >= 1")
    x = _numeric(pool, feature)
    fbin = quantile_bins(x, n_feat_bins)
    key = np.zeros(pool.size, dtype=np.int64)
    labels = []
    next_id = 0
    for f in range(int(fbin.max()) + 1):
        members = np.flatnonzero(fbin == f)
        sbin = quantile_bins(pool.scores[members], score_bins)
        for s in range(int(sbin.max()) + 1):
            key[members[sbin == s]] = next_id
            labels.append(f"{feature}:q{f}" + (f"/score:q{s}" if score_bins > 1 else ""))
            next_id += 1
    return Stratification(key, tuple(labels), f"{feature}-{n_feat_bins}x{score_bins}")


def build_cross_strata(pool: Pool, parts: Sequence[Stratification]) -> Stratification:
    """Cartesian product of several stratifications; empty cells are skipped."""
    if not parts:
        raise DataError("cross strata need at least one component")
    for s in parts:
        s.check_pool(pool)
    combos = [tuple(r) for r in np.stack([s.assignment for s in parts], axis=1).tolist()]
    cells = sorted(set(combos))
    index = {c: j for j, c in enumerate(cells)}
    keys = np.fromiter((index[c] for c in combos), dtype=np.int64, count=pool.size)
    labels = tuple(" x ".join(p.labels[i] for p, i in zip(parts, c)) for c in cells)
    return Stratification(keys, labels, " x ".join(p.name for p in parts))


def merge_small_strata(
    strat: Stratification, pool: Pool, min_count: int = 3, min_frac: float = 0.005
) -> Stratification:
    """Fold tiny strata into the stratum with the nearest median score.

    A stratum is tiny when its size is below ``max(min_count, ceil(min_frac * N))``.
    The lowest-index tiny stratum is merged first, into the non-tiny stratum
    (any other stratum if all are tiny) whose median score is closest, ties to
    the lower index. Repeats until nothing is tiny or one stratum is left.
    """
    if min_count < 0 or not 0.0 <= min_frac < 1.0:
        raise DataError("need min_count >= 0 and 0 <= min_frac < 1")
    strat.check_pool(pool)
    threshold = max(int(min_count), math.ceil(min_frac * pool.size))
    assignment = strat.assignment.copy()
    labels = list(strat.labels)
    while len(labels) > 1:
        sizes = np.bincount(assignment, minlength=len(labels))
        tiny = np.flatnonzero(sizes < threshold)
        if tiny.size == 0:
            break
        src = int(tiny[0])
        medians = [float(np.median(pool.scores[assignment == j])) for j in range(len(labels))]
        targets = [j for j in range(len(labels)) if j != src and sizes[j] >= threshold]
        if not targets:
            targets = [j for j in range(len(labels)) if j != src]
        dst = min(targets, key=lambda j: (abs(medians[j] - medians[src]), j))
        assignment[assignment == src] = dst
        labels[dst] = f"{labels[dst]}+{labels[src]}"
        del labels[src]
        assignment[assignment > src] -= 1
    if len(labels) == strat.n_strata:
        return strat
    return Stratification(assignment, tuple(labels), strat.name)


@dataclass(frozen=True)
class AllocationPlan:
    """Per-stratum label counts n_j with sum n."""

    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def __iter__(self):
        return iter(self.counts)

    def __getitem__(self, j):
        return self.counts[j]

    def __len__(self):
        return len(self.counts)


def allocate_proportional(strat: Stratification, n: int) -> AllocationPlan:
    """Proportional allocation with largest-remainder rounding and a min-1 repair.

    Starts from floor(n * w_j), hands out the remaining units by decreasing
    fractional part (ties to the lower index), then moves single units from the
    largest stratum to any stratum left at zero. All arithmetic is exact.

    Raises:
        AllocationError: if ``n`` is smaller than the number of strata.
    """
    sizes = [int(s) for s in strat.sizes]
    big_n = strat.pool_size
    p = len(sizes)
    if n < p:
        raise AllocationError(
            f"budget n={n} is below the number of strata P={p}; every stratum needs at least one label"
        )
    counts = [n * s // big_n for s in sizes]
    rems = [n * s % big_n for s in sizes]
    left = n - sum(counts)
    for j in sorted(range(p), key=lambda j: (-rems[j], j))[:left]:
        counts[j] += 1
    while 0 in counts:
        dst = counts.index(0)
        src = max(range(p), key=lambda j: (counts[j], -j))
        counts[src] -= 1
        counts[dst] += 1
    return AllocationPlan(tuple(counts))


def is_exact_proportional(strat: Stratification, alloc: AllocationPlan) -> bool:
    """True when n_j = n * w_j holds exactly for every stratum."""
    n = alloc.total
    return all(c * strat.pool_size == n * int(s) for c, s in zip(alloc.counts, strat.sizes))


def write_stratification(strat: Stratification, pool: Pool, path: str | Path) -> None:
    """Audit dump: two columns ``id,stratum``."""
    strat.check_pool(pool)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "stratum"])
        for id_, j in zip(pool.ids.tolist(), strat.assignment.tolist()):
            w.writerow([id_, j])
