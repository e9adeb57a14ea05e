"""Closed-form moments and exact estimator variances over an oracle-complete pool.

Everything here is computed by exact summation over the finite pool, never by
sampling. Two within-stratum importance variances are kept apart:

* ``T_sis``: variance under q_j of z * p_j/q_j (the weight SIS actually uses);
* ``T_is``: variance under q_j of z * p/q (the global IS weight), whose
  conditional mean is w_j * pi_j / r_j rather than pi_j.

Exact variances always use the variant that matches the estimator. The
two-term IS-vs-SIS decomposition is reported next to the exact variances, and
``decomposition_gap`` shows how far the decomposition is from the exact
difference for the given pool. ``inter_stratum_term`` uses the exact
conditional means of the IS summand; ``inter_stratum_term_pi`` uses pi_j in
their place.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DataError
from .pool import Pool, true_defect_rate
from .proposal import Proposal
from .strata import AllocationPlan, Stratification, allocate_proportional

SIGN_TOL = 1e-15


@dataclass(frozen=True, eq=False)
class StratumDiagnostics:
    """Per-stratum moments (arrays indexed by stratum) plus pool-level totals."""

    weights: np.ndarray        # w_j = N_j / N
    marginals: np.ndarray      # r_j = Q_j
    pi: np.ndarray             # stratum defect rates
    V: np.ndarray              # Var_{p_j}(z)
    T_sis: np.ndarray          # Var_{q_j}(z p_j / q_j)
    T_is: np.ndarray           # Var_{q_j}(z p / q)
    is_cond_mean: np.ndarray   # E_{q_j}[z p / q]
    sizes: np.ndarray
    epsilon: float
    is_second_moment: float    # E_q[(z p / q)^2]
    labels: tuple[str, ...] = ()

    @property
    def delta(self) -> np.ndarray:
        return self.T_sis - self.V

    @property
    def n_strata(self) -> int:
        return int(self.weights.size)

    @property
    def is_variance(self) -> float:
        """Var_q(z p / q), the single-draw IS variance."""
        return max(self.is_second_moment - self.epsilon * self.epsilon, 0.0)

    def rows(self) -> list[dict]:
        out = []
        for j in range(self.n_strata):
            out.append({
                "j": j,
                "w_j": float(self.weights[j]),
                "r_j": float(self.marginals[j]),
                "pi_j": float(self.pi[j]),
                "V_j": float(self.V[j]),
                "T_j_sis": float(self.T_sis[j]),
                "T_j_is": float(self.T_is[j]),
                "delta_j": float(self.delta[j]),
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = self.rows()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()


def stratum_diagnostics(pool: Pool, strat: Stratification, prop: Proposal) -> StratumDiagnostics:
    """All within-stratum moments of the theorem statements, by exact summation."""
    pool.require_oracle("diagnostics")
    strat.check_pool(pool)
    prop.check_pool(pool)
    z = pool.defects() > 0
    u = prop.unnormalized
    big_z = prop.total
    big_n = pool.size
    p = strat.n_strata

    eps = true_defect_rate(pool)
    inv_all = math.fsum((1.0 / u[z]).tolist())
    is_second = big_z * inv_all / (big_n * big_n)

    w = np.empty(p)
    r = np.empty(p)
    pi = np.empty(p)
    V = np.empty(p)
    T_sis = np.empty(p)
    T_is = np.empty(p)
    m_is = np.empty(p)
    for j in range(p):
        m = strat.members(j)
        if m.size == 0:
            raise DataError(f"stratum {j} is empty")
        n_j = int(m.size)
        u_j = math.fsum(u[m].tolist())
        d = z[m]
        k_j = int(np.count_nonzero(d))
        inv_j = math.fsum((1.0 / u[m][d]).tolist())
        w[j] = n_j / big_n
        r[j] = u_j / big_z
        pi[j] = k_j / n_j
        V[j] = pi[j] - pi[j] * pi[j]
        T_sis[j] = u_j * inv_j / (n_j * n_j) - pi[j] * pi[j]
        m_is[j] = big_z * k_j / (big_n * u_j)
        T_is[j] = big_z * big_z * inv_j / (u_j * big_n * big_n) - m_is[j] * m_is[j]
    # cancellation can leave -1e-17 where the true value is 0
    T_sis = np.maximum(T_sis, 0.0)
    T_is = np.maximum(T_is, 0.0)
    return StratumDiagnostics(
        w, r, pi, V, T_sis, T_is, m_is, strat.sizes.copy(), eps, is_second, strat.labels
    )


@dataclass(frozen=True)
class TheoremReport:
    n: int
    allocation: tuple[int, ...]
    exact_proportional: bool
    mismatch_term: float
    inter_stratum_term: float
    inter_stratum_term_pi: float
    thm1_criterion: float
    thm2_criterion: float
    decomposition_gap: float
    var_rs: float
    var_srs: float
    var_is: float
    var_sis: float
    n_strata: int

    @property
    def decomposition_holds(self) -> bool:
        return abs(self.decomposition_gap) <= 1e-12 * max(1.0, abs(self.thm1_criterion))

    def sis_vs_srs_verdict(self) -> str:
        c = self.thm2_criterion
        if abs(c) <= SIGN_TOL:
            return "SIS ≤ SRS predicted: equal (Var_SIS = Var_SRS)"
        return f"SIS ≤ SRS predicted: {'yes' if c < 0 else 'no'}"

    def sis_vs_is_verdict(self) -> str:
        if self.n_strata == 1:
            return "SIS ≤ IS predicted: equal (Var_IS = Var_SIS)"
        line = f"SIS ≤ IS predicted: {'yes' if self.thm1_criterion >= 0 else 'no'}"
        if not self.decomposition_holds:
            exact = "yes" if self.var_sis <= self.var_is else "no"
            line += f" (decomposition off on this pool; exact variances say {exact})"
        return line

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["allocation"] = list(self.allocation)
        d["decomposition_holds"] = self.decomposition_holds
        return d


def theorem_report(diag: StratumDiagnostics, alloc: AllocationPlan, n: int | None = None) -> TheoremReport:
    """Both theorem criteria and the four exact variances at ``alloc``."""
    n = alloc.total if n is None else int(n)
    if n != alloc.total:
        raise DataError(f"allocation sums to {alloc.total}, not n={n}")
    if len(alloc) != diag.n_strata:
        raise DataError(f"allocation has {len(alloc)} strata, diagnostics have {diag.n_strata}")
    w, r, eps = diag.weights, diag.marginals, diag.epsilon
    counts = np.asarray(alloc.counts, dtype=np.float64)

    mismatch = math.fsum(((r - w) * diag.T_is).tolist())
    mean_r = math.fsum((r * diag.is_cond_mean).tolist())
    inter = math.fsum((r * (diag.is_cond_mean - mean_r) ** 2).tolist())
    mean_pi = math.fsum((r * diag.pi).tolist())
    inter_pi = math.fsum((r * (diag.pi - mean_pi) ** 2).tolist())
    thm2 = math.fsum((w * diag.delta).tolist())
    gap = math.fsum((w * (diag.T_is - diag.T_sis)).tolist())

    exact = bool(np.all(counts * diag.sizes.sum() == n * diag.sizes))
    return TheoremReport(
        n=n,
        allocation=tuple(alloc.counts),
        exact_proportional=exact,
        mismatch_term=mismatch,
        inter_stratum_term=inter,
        inter_stratum_term_pi=inter_pi,
        thm1_criterion=mismatch + inter,
        thm2_criterion=thm2,
        decomposition_gap=gap,
        var_rs=(eps - eps * eps) / n,
        var_srs=math.fsum((w * w * diag.V / counts).tolist()),
        var_is=diag.is_variance / n,
        var_sis=math.fsum((w * w * diag.T_sis / counts).tolist()),
        n_strata=diag.n_strata,
    )


def exact_variance(kind: str, pool: Pool, n: int, strat: Stratification | None = None,
                   prop: Proposal | None = None) -> float:
    """Exact variance of one design's estimator at budget ``n``."""
    from .proposal import build_proposal

    single = Stratification.single(pool)
    if kind == "RS":
        eps = true_defect_rate(pool)
        return (eps - eps * eps) / n
    if kind == "IS":
        return stratum_diagnostics(pool, single, prop).is_variance / n
    if strat is None:
        raise DataError(f"{kind} needs a stratification")
    alloc = allocate_proportional(strat, n)
    if kind == "SRS":
        diag = stratum_diagnostics(pool, strat, build_proposal(pool, alpha=0.0))
        return theorem_report(diag, alloc).var_srs
    if kind == "SIS":
        return theorem_report(stratum_diagnostics(pool, strat, prop), alloc).var_sis
    raise DataError(f"unknown design {kind!r}")


def optimal_proposal_reference(pool: Pool) -> np.ndarray:
    """The zero-variance IS law: uniform over defective instances, 0 elsewhere.

    For gap-to-optimal reporting only; it needs labels and violates the
    positivity floor, so it cannot be used to sample.
    """
    z = pool.defects()
    k = np.count_nonzero(z)
    if k == 0:
        raise DataError("optimal proposal undefined: the pool has no defects")
    return z / k


def within_stratum_ss(pool: Pool, strat: Stratification) -> float:
    """Sum over strata of squared deviations of z around the stratum mean."""
    z = pool.defects()
    return math.fsum(
        float(np.sum((z[strat.members(j)] - z[strat.members(j)].mean()) ** 2))
        for j in range(strat.n_strata)
    )


def rank_stratifications(pool: Pool, candidates: Mapping[str, Stratification], n: int) -> list[dict]:
    """Order candidate stratifications by within-stratum sum of squares (best first).

    The first row's ``var_srs`` is the lowest SRS variance attainable over the
    candidate set under proportional allocation at budget ``n``.
    """
    rows = []
    for name, strat in candidates.items():
        rows.append({
            "name": name,
            "n_strata": strat.n_strata,
            "within_ss": within_stratum_ss(pool, strat),
            "var_srs": exact_variance("SRS", pool, n, strat),
        })
    rows.sort(key=lambda r: (r["within_ss"], r["var_srs"], r["name"]))
    return rows


def format_report(diag: StratumDiagnostics, rep: TheoremReport) -> str:
    lines = [diag.to_csv().rstrip("\n"), ""]
    lines.append(f"n = {rep.n}; allocation = {list(rep.allocation)}"
                 f"{' (exact proportional)' if rep.exact_proportional else ''}")
    lines.append(f"epsilon = {diag.epsilon!r}")
    lines.append(f"mismatch_term = {rep.mismatch_term!r}")
    lines.append(f"inter_stratum_term = {rep.inter_stratum_term!r}")
    lines.append(f"inter_stratum_term_pi = {rep.inter_stratum_term_pi!r}")
    lines.append(f"thm1_criterion = {rep.thm1_criterion!r}")
    lines.append(f"thm2_criterion = {rep.thm2_criterion!r}")
    lines.append(f"decomposition_gap = {rep.decomposition_gap!r}"
                 f" ({'holds' if rep.decomposition_holds else 'does not hold'})")
    for k in ("var_rs", "var_srs", "var_is", "var_sis"):
        lines.append(f"{k} = {getattr(rep, k)!r}")
    lines.append(rep.sis_vs_srs_verdict())
    lines.append(rep.sis_vs_is_verdict())
    return "\n".join(lines) + "\n"


def write_diagnostics_csv(diag: StratumDiagnostics, path: str | Path) -> None:
    Path(path).write_text(diag.to_csv(), encoding="utf-8")
