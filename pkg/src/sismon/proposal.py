"""Score-driven importance proposals q(x) proportional to transformed_score(x) ** alpha.

The unnormalized mass ``u(x) = max(t(s(x)), floor) ** alpha`` is kept alongside
the normalized one. Weights are computed from ``u`` directly, so the uniform
proposal (alpha = 0, u = 1) gives importance weights that are exactly 1.0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .pool import Pool
from .strata import Stratification

FAMILIES = ("raw_score", "one_minus_score", "margin", "binary_entropy")
DEFAULT_FLOOR = 1e-6


def _entropy(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inner = (s > 0.0) & (s < 1.0)
    p = s[inner]
    out[inner] = -(p * np.log(p) + (1.0 - p) * np.log1p(-p))
    return out


@dataclass(frozen=True)
class ScoreTransform:
    family: str = "raw_score"
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DataError(f"unknown proposal family {self.family!r}; choose from {FAMILIES}")
        if not self.floor > 0.0:
            raise DataError("proposal floor must be > 0")

    def __call__(self, scores: np.ndarray) -> np.ndarray:
        s = np.asarray(scores, dtype=np.float64)
        if self.family == "raw_score":
            t = s
        elif self.family == "one_minus_score":
            t = 1.0 - s
        elif self.family == "margin":
            t = 0.5 - np.abs(s - 0.5)
        else:
            t = _entropy(s)
        return np.maximum(t, self.floor)


@dataclass(frozen=True, eq=False)
class Proposal:
    """Global proposal over a pool.

    Attributes:
        transform: score transform that produced it.
        alpha: sharpness exponent.
        unnormalized: u(x) per pool position, all > 0.
        total: sum of u over the pool.
    """

    transform: ScoreTransform
    alpha: float
    unnormalized: np.ndarray
    total: float

    @property
    def mass(self) -> np.ndarray:
        """Normalized q(x) per pool position."""
        return self.unnormalized / self.total

    @property
    def size(self) -> int:
        return int(self.unnormalized.size)

    @property
    def label(self) -> str:
        return f"{self.transform.family}^{self.alpha:g}"

    def check_pool(self, pool: Pool) -> None:
        if pool.size != self.size:
            raise DataError(f"proposal built for N={self.size} used with pool of N={pool.size}")

    def stratum_totals(self, strat: Stratification) -> np.ndarray:
        """Sum of u over each stratum."""
        return np.array([math.fsum(self.unnormalized[strat.members(j)]) for j in range(strat.n_strata)])

    def stratum_mass(self, strat: Stratification) -> np.ndarray:
        """Q_j: proposal probability of each stratum (= stratum marginal r_j)."""
        return self.stratum_totals(strat) / self.total

    def global_weights(self) -> np.ndarray:
        """p(x)/q(x) = 1/(N q(x)) per pool position."""
        return self.total / (self.size * self.unnormalized)

    def stratified_weights(self, strat: Stratification) -> np.ndarray:
        """p_j(x)/q_j(x) = Q_j/(N_j q(x)) per pool position, using x's own stratum."""
        totals = self.stratum_totals(strat)
        j = strat.assignment
        return totals[j] / (strat.sizes[j] * self.unnormalized)


def build_proposal(pool: Pool, transform: ScoreTransform | None = None, alpha: float = 1.0) -> Proposal:
    transform = transform or ScoreTransform()
    alpha = float(alpha)
    if not alpha >= 0.0 or math.isinf(alpha):
        raise DataError(f"alpha must be a finite value >= 0, got {alpha}")
    if alpha == 0.0:
        u = np.ones(pool.size)
    else:
        u = transform(pool.scores) ** alpha
    u.setflags(write=False)
    return Proposal(transform, alpha, u, math.fsum(u))


def restrict_to_stratum(prop: Proposal, strat: Stratification, j: int) -> tuple[np.ndarray, np.ndarray]:
    """q_j over stratum ``j``: returns (pool positions, conditional mass)."""
    if not 0 <= j < strat.n_strata:
        raise DataError(f"stratum {j} does not exist")
    members = strat.members(j)
    u = prop.unnormalized[members]
    return members, u / math.fsum(u)


def importance_weight(prop: Proposal, strat: Stratification, pool: Pool, id_: int) -> float:
    """Within-stratum importance weight p_j(x)/q_j(x) for instance ``id_``."""
    k = pool.position(id_)
    j = int(strat.assignment[k])
    total = math.fsum(prop.unnormalized[strat.members(j)])
    return total / (int(strat.sizes[j]) * float(prop.unnormalized[k]))


def write_proposal(prop: Proposal, pool: Pool, path: str | Path) -> None:
    """Audit dump: ``id,q``."""
    prop.check_pool(pool)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "q"])
        for id_, q in zip(pool.ids.tolist(), prop.mass.tolist()):
            w.writerow([id_, repr(q)])
