"""Independent reference computations used by the tests.

Nothing here imports the estimator or variance code under test. Moments are
obtained by enumerating every possible sequence of draws, which is feasible
for pools of at most 8 items and budgets of at most 3.
"""

import itertools
import math
from fractions import Fraction

import numpy as np


def transformed(score, family, floor=1e-6):
    s = float(score)
    if family == "raw_score":
        t = s
    elif family == "one_minus_score":
        t = 1.0 - s
    elif family == "margin":
        t = 0.5 - abs(s - 0.5)
    else:
        t = 0.0 if s in (0.0, 1.0) else -(s * math.log(s) + (1.0 - s) * math.log(1.0 - s))
    return max(t, floor)


def mass(scores, alpha, family="raw_score", floor=1e-6):
    """Unnormalized proposal mass per item."""
    if alpha == 0:
        return [1.0] * len(scores)
    return [transformed(s, family, floor) ** alpha for s in scores]


def proportional_allocation(sizes, n):
    """Largest-remainder proportional split with the min-one repair, in exact rationals."""
    total = sum(sizes)
    quotas = [Fraction(n * s, total) for s in sizes]
    alloc = [math.floor(q) for q in quotas]
    order = sorted(range(len(sizes)), key=lambda j: (-(quotas[j] - alloc[j]), j))
    for j in order[: n - sum(alloc)]:
        alloc[j] += 1
    while 0 in alloc:
        donor = max(range(len(alloc)), key=lambda j: (alloc[j], -j))
        alloc[donor] -= 1
        alloc[alloc.index(0)] += 1
    return alloc


def draw_laws(kind, scores, z, groups, counts, alpha, family="raw_score"):
    """Per-draw law of the estimator's summands.

    Returns a list with one entry per draw; each entry is a list of
    (probability, contribution) pairs, where the estimator equals the sum of
    the contributions of the realised draws.
    """
    N = len(scores)
    u = mass(scores, alpha, family)
    laws = []
    if kind in ("RS", "IS"):
        total = math.fsum(u)
        (n,) = counts
        law = []
        for x in range(N):
            if kind == "RS":
                law.append((1.0 / N, z[x] / n))
            else:
                q = u[x] / total
                law.append((q, z[x] * (1.0 / N) / q / n))
        return [law] * n
    for g, n_j in zip(groups, counts):
        w_j = len(g) / N
        U_j = math.fsum(u[x] for x in g)
        law = []
        for x in g:
            if kind == "SRS":
                law.append((1.0 / len(g), w_j * z[x] / n_j))
            else:
                q_j = u[x] / U_j
                law.append((q_j, w_j * z[x] * (1.0 / len(g)) / q_j / n_j))
        laws.extend([law] * n_j)
    return laws


def enumerate_moments(laws):
    """Exact mean and variance of a sum of independent draws, by full enumeration."""
    probs, values = [], []
    for outcome in itertools.product(*laws):
        probs.append(math.prod(p for p, _ in outcome))
        values.append(math.fsum(v for _, v in outcome))
    mean = math.fsum(p * v for p, v in zip(probs, values))
    var = math.fsum(p * (v - mean) ** 2 for p, v in zip(probs, values))
    return mean, var


def random_small_pool(rng, max_n=8, max_p=3):
    """(scores, z, assignment) with every stratum non-empty."""
    N = int(rng.integers(2, max_n + 1))
    P = int(rng.integers(1, min(max_p, N) + 1))
    assignment = np.concatenate([np.arange(P), rng.integers(0, P, size=N - P)])
    rng.shuffle(assignment)
    scores = np.round(rng.uniform(0.0, 1.0, size=N), 3)
    z = (rng.random(N) < 0.4).astype(int)
    return scores, z, assignment
