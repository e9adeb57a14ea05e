"""Seeded Monte-Carlo replication of sampling designs: MSE, SEs, relative efficiency.

Replication ``m`` of cell (design, budget) draws its plan from a generator
seeded with ``derive_seed(master, design_tag, budget, m)``. The seed depends on
nothing else, so results do not change with the number of workers or with the
total replication count (a run at M shares its first M estimates with a run
at 2M).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ProposalSpec, SimConfig
from .designs import STRATIFIED, WEIGHTED, CompiledDesign, DesignSpec
from .diagnostics import exact_variance
from .errors import SimulationError, SismonError
from .pool import Pool, true_defect_rate

MASK64 = (1 << 64) - 1
CSV_COLUMNS = ("design", "strata", "proposal", "alpha", "n", "M", "mse", "mse_se",
               "analytic_var", "re_vs_rs", "re_se")


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 output function (Steele, Lea & Flood 2014)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


@lru_cache(maxsize=256)
def _tag64(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest(), "little")


def derive_seed(master: int, tag: str, budget: int, replication: int) -> int:
    """64-bit replication seed: SplitMix64 chained over (master, tag, budget, m)."""
    h = splitmix64(int(master) & MASK64)
    for part in (_tag64(tag), int(budget) & MASK64, int(replication) & MASK64):
        h = splitmix64(h ^ part)
    return h


def design_tag(kind: str, proposal: ProposalSpec | None = None) -> str:
    return kind if proposal is None else f"{kind}|{proposal.tag}"


BLOCK = 2048


def replicate(design: CompiledDesign, defects: np.ndarray, seeds: Sequence[int]) -> np.ndarray:
    """Estimator value for each seed, in seed order."""
    out = np.empty(len(seeds))
    pos = np.empty((min(BLOCK, len(seeds)), design.n), dtype=np.int64)
    for lo in range(0, len(seeds), BLOCK):
        block = seeds[lo:lo + BLOCK]
        for k, s in enumerate(block):
            pos[k] = design.draw(np.random.default_rng(s))
        p = pos[: len(block)]
        out[lo:lo + len(block)] = design.estimate_batch(defects[p], design.draw_weights(p))
    return out


def _replicate_task(args):
    design, defects, seeds, label, budget, first = args
    try:
        return replicate(design, defects, seeds)
    except Exception as exc:  # re-raised with cell context in the parent
        return SimulationError(label, budget, first, exc)


def relative_efficiency(reference, target) -> tuple[float, float]:
    """MSE_reference / MSE_target and its delete-one jackknife SE.

    Both arguments are squared-error sequences (or :class:`CellResult`) over
    the same replications, paired by index. A zero target MSE gives
    ``(inf, nan)``; two zero MSEs give ``(1.0, 0.0)``.
    """
    a = np.asarray(getattr(reference, "sq_errors", reference), dtype=np.float64)
    b = np.asarray(getattr(target, "sq_errors", target), dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two paired squared-error sequences of equal length >= 2")
    mse_a, mse_b = float(np.mean(a)), float(np.mean(b))
    if mse_b == 0.0:
        return (1.0, 0.0) if mse_a == 0.0 else (math.inf, math.nan)
    m = a.size
    sa, sb = math.fsum(a.tolist()), math.fsum(b.tolist())
    den = sb - b
    if np.any(den <= 0.0):
        return mse_a / mse_b, math.inf
    loo = (sa - a) / den
    se = math.sqrt((m - 1) / m * float(np.sum((loo - loo.mean()) ** 2)))
    return mse_a / mse_b, se


@dataclass(eq=False)
class CellResult:
    design: str
    tag: str
    strata: str
    proposal: str
    alpha: float | None
    n: int
    replications: int
    estimates: np.ndarray
    epsilon: float
    analytic_var: float
    re_vs_rs: float | None = None
    re_se: float | None = None
    sq_errors: np.ndarray = field(init=False)

    def __post_init__(self):
        self.sq_errors = (self.estimates - self.epsilon) ** 2

    @property
    def mse(self) -> float:
        return float(np.mean(self.sq_errors))

    @property
    def mse_se(self) -> float:
        return float(np.std(self.sq_errors, ddof=1) / math.sqrt(self.replications))

    @property
    def mean_estimate(self) -> float:
        return float(np.mean(self.estimates))

    @property
    def estimate_se(self) -> float:
        return float(np.std(self.estimates, ddof=1) / math.sqrt(self.replications))

    @property
    def re_flag(self) -> str:
        if self.re_vs_rs is not None and math.isinf(self.re_vs_rs):
            return "target_mse_zero"
        return ""

    def row(self) -> dict:
        return {
            "design": self.design,
            "strata": self.strata,
            "proposal": self.proposal,
            "alpha": "" if self.alpha is None else self.alpha,
            "n": self.n,
            "M": self.replications,
            "mse": self.mse,
            "mse_se": self.mse_se,
            "analytic_var": self.analytic_var,
            "re_vs_rs": "" if self.re_vs_rs is None else self.re_vs_rs,
            "re_se": "" if self.re_se is None else self.re_se,
        }


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass(eq=False)
class SimReport:
    cells: list[CellResult]
    epsilon: float
    seed: int
    replications: int
    pool_size: int
    n_strata: int | None
    strata: str

    def cell(self, design: str, n: int, alpha: float | None = None) -> CellResult:
        for c in self.cells:
            if c.design == design and c.n == n and (alpha is None or c.alpha == alpha):
                return c
        raise KeyError((design, n, alpha))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.cells:
            w.writerow([repr(v) if isinstance(v, float) else v for v in c.row().values()])
        return buf.getvalue()

    def to_dict(self) -> dict:
        cells = []
        for c in self.cells:
            d = {k: _jsonable(v) for k, v in c.row().items()}
            d.update(
                tag=c.tag,
                mean_estimate=c.mean_estimate,
                estimate_se=c.estimate_se,
                re_flag=c.re_flag,
            )
            cells.append(d)
        return {
            "epsilon": self.epsilon,
            "seed": self.seed,
            "replications": self.replications,
            "pool_size": self.pool_size,
            "strata": self.strata,
            "n_strata": self.n_strata,
            "cells": cells,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        jpath, cpath = out / "report.json", out / "report.csv"
        jpath.write_text(self.to_json(), encoding="utf-8")
        cpath.write_text(self.to_csv(), encoding="utf-8")
        return jpath, cpath


def _cells(config: SimConfig):
    for n in config.budgets:
        for kind in config.designs:
            if kind in WEIGHTED:
                for p in config.proposals:
                    yield kind, int(n), p
            else:
                yield kind, int(n), None


def run_simulation(config: SimConfig, pool: Pool, workers: int = 1) -> SimReport:
    """Run every (design, budget) cell of ``config`` on ``pool``.

    Raises:
        OracleIncompleteError: the pool lacks true labels.
        SimulationError: a cell failed; the message names design, budget and
            replication.
    """
    pool.require_oracle("simulation")
    eps = true_defect_rate(pool)
    defects = pool.defects()
    strat = config.strata.build(pool) if config.strata is not None else None
    proposals = {p: p.build(pool) for p in config.proposals}
    m_total = int(config.replications)

    jobs = []
    for kind, n, pspec in _cells(config):
        label = design_tag(kind, pspec)
        try:
            spec = DesignSpec(kind, n, strat if kind in STRATIFIED else None,
                              proposals[pspec] if pspec is not None else None)
            design = CompiledDesign(spec, pool)
            var = exact_variance(kind, pool, n, spec.strat, spec.prop)
        except SismonError as exc:
            raise SimulationError(label, n, None, exc) from exc
        seeds = [derive_seed(config.seed, label, n, m) for m in range(m_total)]
        jobs.append((kind, n, pspec, label, design, var, seeds))

    results = _execute(jobs, defects, max(1, int(workers)))

    cells = []
    for (kind, n, pspec, label, _, var, _), est in zip(jobs, results):
        cells.append(CellResult(
            design=kind,
            tag=label,
            strata=config.strata.label if kind in STRATIFIED else "",
            proposal=pspec.family if pspec is not None else "",
            alpha=pspec.alpha if pspec is not None else None,
            n=n,
            replications=m_total,
            estimates=est,
            epsilon=eps,
            analytic_var=var,
        ))
    for c in cells:
        ref = next((r for r in cells if r.design == "RS" and r.n == c.n), None)
        if ref is not None:
            c.re_vs_rs, c.re_se = relative_efficiency(ref, c)
    return SimReport(
        cells, eps, int(config.seed), m_total, pool.size,
        strat.n_strata if strat is not None else None,
        config.strata.label if config.strata is not None else "",
    )


def _execute(jobs, defects, workers):
    if workers == 1:
        out = []
        for kind, n, _, label, design, _, seeds in jobs:
            res = _replicate_task((design, defects, seeds, label, n, 0))
            if isinstance(res, Exception):
                raise res
            out.append(res)
        return out
    tasks, owners = [], []
    for i, (kind, n, _, label, design, _, seeds) in enumerate(jobs):
        size = -(-len(seeds) // workers)
        for start in range(0, len(seeds), size):
            tasks.append((design, defects, seeds[start:start + size], label, n, start))
            owners.append(i)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_replicate_task, tasks))
    out = [[] for _ in jobs]
    for i, part in zip(owners, parts):
        if isinstance(part, Exception):
            raise part
        out[i].append(part)
    return [np.concatenate(p) for p in out]
