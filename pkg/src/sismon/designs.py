"""Budgeted sampling designs (RS, SRS, IS, SIS) and their unbiased estimators.

All designs draw with replacement. Draws from a non-uniform law use inverse-CDF
lookup: one ``Generator.random()`` per draw, scaled into its stratum's slice of
the cumulative unnormalized mass and located with ``searchsorted(side="right")``.
Uniform draws use ``Generator.integers``. Draws are ordered stratum by stratum
and come from a single generator seeded with the plan seed, so a
(design, pool, seed) triple always yields the same plan.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DataError, UncoveredIdError
from .pool import Pool
from .proposal import Proposal
from .strata import AllocationPlan, Stratification, allocate_proportional

KINDS = ("RS", "SRS", "IS", "SIS")
STRATIFIED = frozenset({"SRS", "SIS"})
WEIGHTED = frozenset({"IS", "SIS"})


@dataclass(frozen=True, eq=False)
class DesignSpec:
    kind: str
    budget: int
    strat: Stratification | None = None
    prop: Proposal | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown design {self.kind!r}; choose from {KINDS}")
        if int(self.budget) < 1:
            raise DataError("budget must be >= 1")
        if self.kind in STRATIFIED and self.strat is None:
            raise DataError(f"{self.kind} needs a stratification")
        if self.kind in WEIGHTED and self.prop is None:
            raise DataError(f"{self.kind} needs a proposal")

    @property
    def allocation(self) -> AllocationPlan | None:
        if self.kind not in STRATIFIED:
            return None
        return allocate_proportional(self.strat, int(self.budget))

    def check_pool(self, pool: Pool) -> None:
        if self.kind in STRATIFIED:
            self.strat.check_pool(pool)
        if self.kind in WEIGHTED:
            self.prop.check_pool(pool)


@dataclass(frozen=True, eq=False)
class SamplePlan:
    """Ordered draws of one design.

    ``strata[k]`` is -1 for unstratified designs. ``stratum_weights`` holds
    w_j for stratified designs (empty otherwise).
    """

    kind: str
    ids: np.ndarray
    strata: np.ndarray
    weights: np.ndarray
    stratum_weights: tuple[float, ...] = ()
    seed: int | None = None

    @property
    def n(self) -> int:
        return int(self.ids.size)

    def draw_counts(self) -> list[int]:
        return np.bincount(self.strata, minlength=len(self.stratum_weights)).tolist()


@dataclass(frozen=True)
class Estimate:
    value: float
    kind: str
    n: int
    partials: tuple[float, ...] = ()
    stratum_weights: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        out = {"design": self.kind, "n": self.n, "value": self.value}
        if self.partials:
            out["strata"] = [
                {"stratum": j, "weight": w, "partial": e}
                for j, (w, e) in enumerate(zip(self.stratum_weights, self.partials))
            ]
        return out


class CompiledDesign:
    """A design bound to a pool with everything precomputed for fast redraws.

    ``draw(rng)`` is the single sampling path shared by :func:`draw_plan` and
    the simulation harness. Pool positions are laid out stratum by stratum;
    each draw carries the bounds of its stratum in that layout, so one
    generator call serves all strata.
    """

    def __init__(self, spec: DesignSpec, pool: Pool):
        spec.check_pool(pool)
        self.spec = spec
        self.kind = spec.kind
        self.n = int(spec.budget)
        self.pool = pool
        if spec.kind in STRATIFIED:
            strat = spec.strat
            self.stratum_weights = tuple(float(w) for w in strat.weights)
            self.counts = tuple(spec.allocation.counts)
            groups = [strat.members(j) for j in range(strat.n_strata)]
        else:
            self.stratum_weights = ()
            self.counts = (self.n,)
            groups = [np.arange(pool.size)]
        self.order = np.concatenate(groups)
        bounds = np.cumsum([0] + [g.size for g in groups])
        reps = np.asarray(self.counts)
        self._lo = np.repeat(bounds[:-1], reps)
        self._size = np.repeat(np.diff(bounds), reps)
        if spec.kind == "IS":
            self.weights = spec.prop.global_weights()
        elif spec.kind == "SIS":
            self.weights = spec.prop.stratified_weights(spec.strat)
        else:
            self.weights = None
        if spec.kind in WEIGHTED:
            self._cdf = np.cumsum(spec.prop.unnormalized[self.order])
            base = np.concatenate([[0.0], self._cdf])[bounds]
            self._base = np.repeat(base[:-1], reps)
            self._span = np.repeat(np.diff(base), reps)
        tag = range(len(self.counts)) if spec.kind in STRATIFIED else [-1]
        self.strata = np.repeat(np.asarray(list(tag), dtype=np.int64), reps)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        """Pool positions of one plan's draws, in draw order."""
        if self.weights is None:
            local = self._lo + rng.integers(0, self._size)
        else:
            target = self._base + rng.random(self.n) * self._span
            local = np.searchsorted(self._cdf, target, side="right")
            np.clip(local, self._lo, self._lo + self._size - 1, out=local)
        return self.order[local]

    def draw_weights(self, positions: np.ndarray) -> np.ndarray:
        if self.weights is None:
            return np.ones(positions.shape)
        return self.weights[positions]

    def estimate_batch(self, z: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Estimator values for a (replications x n) block of draws."""
        return combine_batch(self.kind, z * weights, self.strata, self.stratum_weights)[0]


def combine_batch(kind, zw, strata, stratum_weights):
    """Estimator values and per-stratum partials for each row of ``zw``.

    Sums run column by column in draw order, so a single row evaluated on its
    own gives the same bits as the same row inside a larger block.
    """
    zw = np.atleast_2d(np.asarray(zw, dtype=np.float64))
    strata = np.asarray(strata)

    def mean_of(cols):
        acc = np.zeros(zw.shape[0])
        for c in cols:
            acc += zw[:, c]
        return acc / len(cols)

    if kind not in STRATIFIED:
        return mean_of(range(zw.shape[1])), None
    value = np.zeros(zw.shape[0])
    partials = np.empty((zw.shape[0], len(stratum_weights)))
    for j, w in enumerate(stratum_weights):
        cols = np.flatnonzero(strata == j)
        if cols.size == 0:
            raise DataError(f"plan has no draws in stratum {j}")
        partials[:, j] = mean_of(cols)
        value += w * partials[:, j]
    return value, partials


def combine(kind, z, weights, strata, stratum_weights):
    """Estimator value and per-stratum partials from one plan's z and weights."""
    value, partials = combine_batch(kind, np.asarray(z) * np.asarray(weights), strata, stratum_weights)
    return float(value[0]), (() if partials is None else tuple(float(x) for x in partials[0]))


def draw_plan(spec: DesignSpec, pool: Pool, seed: int) -> SamplePlan:
    """Draw one sampling plan; deterministic given ``seed``."""
    design = CompiledDesign(spec, pool)
    rng = np.random.default_rng(seed)
    pos = design.draw(rng)
    return SamplePlan(
        spec.kind,
        pool.ids[pos],
        design.strata.copy(),
        design.draw_weights(pos),
        design.stratum_weights,
        seed,
    )


def estimate(plan: SamplePlan, labels: Mapping[int, int], pool: Pool) -> Estimate:
    """Evaluate the design's estimator on the labels of the planned ids."""
    ids = plan.ids.tolist()
    missing = [i for i in dict.fromkeys(ids) if i not in labels]
    if missing:
        raise UncoveredIdError(missing)
    pos = pool.positions(ids)
    true = np.fromiter((labels[i] for i in ids), dtype=np.int64, count=len(ids))
    z = (pool.pred_labels[pos] != true).astype(np.float64)
    value, partials = combine(plan.kind, z, plan.weights, plan.strata, plan.stratum_weights)
    return Estimate(value, plan.kind, plan.n, partials, plan.stratum_weights)


def exact_estimator_mean(spec: DesignSpec, pool: Pool) -> float:
    """E[estimator] by summing over the finite pool (no sampling)."""
    spec.check_pool(pool)
    z = pool.defects()
    n_pool = pool.size
    if spec.kind == "RS":
        return math.fsum(z / n_pool)
    if spec.kind == "IS":
        q = spec.prop.mass
        return math.fsum(q * z * spec.prop.global_weights())
    strat = spec.strat
    if spec.kind == "SRS":
        per = [math.fsum(z[strat.members(j)]) / strat.sizes[j] for j in range(strat.n_strata)]
    else:
        w = spec.prop.stratified_weights(strat)
        per = []
        for j in range(strat.n_strata):
            m = strat.members(j)
            u = spec.prop.unnormalized[m]
            per.append(math.fsum(u / math.fsum(u) * z[m] * w[m]))
    return math.fsum(wj * e for wj, e in zip(strat.weights, per))


# -- file formats -------------------------------------------------------------

PLAN_COLUMNS = ("id", "stratum", "weight", "draw_index", "design", "stratum_weight")


def write_plan(plan: SamplePlan, path: str | Path) -> None:
    """Plan CSV. Floats are written with ``repr`` so reading back is exact."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLAN_COLUMNS)
        for k in range(plan.n):
            j = int(plan.strata[k])
            sw = repr(plan.stratum_weights[j]) if j >= 0 else ""
            w.writerow([
                int(plan.ids[k]),
                "" if j < 0 else j,
                repr(float(plan.weights[k])),
                k,
                plan.kind,
                sw,
            ])


def read_plan(path: str | Path) -> SamplePlan:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in PLAN_COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise DataError(f"{path}: plan file missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: empty plan")
    rows.sort(key=lambda r: int(r["draw_index"]))
    kinds = {r["design"] for r in rows}
    if len(kinds) != 1:
        raise DataError(f"{path}: mixed designs {sorted(kinds)}")
    kind = kinds.pop()
    if kind not in KINDS:
        raise DataError(f"{path}: unknown design {kind!r}")
    try:
        ids = np.array([int(r["id"]) for r in rows], dtype=np.int64)
        weights = np.array([float(r["weight"]) for r in rows])
        strata = np.array([int(r["stratum"]) if r["stratum"] != "" else -1 for r in rows], dtype=np.int64)
        sw = {}
        for r in rows:
            if r["stratum"] != "":
                sw.setdefault(int(r["stratum"]), float(r["stratum_weight"]))
    except ValueError as exc:
        raise DataError(f"{path}: malformed plan row ({exc})") from None
    stratum_weights = ()
    if kind in STRATIFIED:
        p = max(sw) + 1 if sw else 0
        if sorted(sw) != list(range(p)):
            raise DataError(f"{path}: plan has strata without draws")
        stratum_weights = tuple(sw[j] for j in range(p))
    return SamplePlan(kind, ids, strata, weights, stratum_weights)


def write_estimate(est: Estimate, path: str | Path) -> None:
    Path(path).write_text(json.dumps(est.to_dict(), indent=2) + "\n", encoding="utf-8")
