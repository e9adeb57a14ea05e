import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_pool
from oracles import mass
from sismon import (
    DataError,
    Pool,
    ScoreTransform,
    Stratification,
    build_categorical_strata,
    build_proposal,
    restrict_to_stratum,
)
from sismon.proposal import FAMILIES, importance_weight, write_proposal


@pytest.mark.parametrize("family", FAMILIES)
def test_transform_matches_oracle(family):
    s = np.array([0.0, 0.05, 0.3, 0.5, 0.77, 1.0])
    expected = mass(s, 1.0, family)
    assert ScoreTransform(family)(s) == pytest.approx(expected, rel=1e-15, abs=0)


def test_transform_floor():
    assert ScoreTransform("raw_score", floor=0.01)(np.array([0.0, 0.5])).tolist() == [0.01, 0.5]
    with pytest.raises(DataError):
        ScoreTransform("raw_score", floor=0.0)
    with pytest.raises(DataError, match="unknown proposal family"):
        ScoreTransform("logit")


def test_uniform_proposal_is_exact(t1_pool, t1_strat):
    prop = build_proposal(t1_pool, alpha=0.0)
    assert prop.mass.tolist() == [1 / 6] * 6
    assert prop.global_weights().tolist() == [1.0] * 6
    assert prop.stratified_weights(t1_strat).tolist() == [1.0] * 6
    members, q = restrict_to_stratum(prop, t1_strat, 0)
    assert q.tolist() == [0.25] * 4


def test_t1_stratum_mass(t1_strat, t1_prop):
    assert t1_prop.stratum_mass(t1_strat) == pytest.approx([7 / 13, 6 / 13], abs=1e-15)


def test_two_item_sqrt_proposal():
    pool = Pool([0, 1], [0.25, 1.0], [0, 0])
    assert build_proposal(pool, alpha=0.5).mass == pytest.approx([1 / 3, 2 / 3], abs=1e-15)


def test_restrict_t1_stratum_b(t1_strat, t1_prop):
    members, q = restrict_to_stratum(t1_prop, t1_strat, 1)
    assert members.tolist() == [4, 5]
    assert q == pytest.approx([2 / 3, 1 / 3], abs=1e-15)
    with pytest.raises(DataError):
        restrict_to_stratum(t1_prop, t1_strat, 2)


def test_restrict_single_stratum_is_identity(t1_pool, t1_prop):
    members, q = restrict_to_stratum(t1_prop, Stratification.single(t1_pool), 0)
    assert q == pytest.approx(t1_prop.mass, abs=1e-15)


@pytest.mark.parametrize("id_, expected", [(1, Fraction(7, 18)), (5, Fraction(3, 4)), (6, Fraction(3, 2))])
def test_t1_importance_weights(t1_pool, t1_strat, t1_prop, id_, expected):
    assert importance_weight(t1_prop, t1_strat, t1_pool, id_) == pytest.approx(float(expected), abs=1e-15)
    k = t1_pool.position(id_)
    assert t1_prop.stratified_weights(t1_strat)[k] == pytest.approx(float(expected), abs=1e-15)


def test_negative_alpha_rejected(t1_pool):
    with pytest.raises(DataError, match="alpha"):
        build_proposal(t1_pool, alpha=-0.5)


def test_entropy_of_certain_scores_uses_floor():
    pool = Pool([0, 1, 2], [0.0, 1.0, 0.5], [0, 0, 0])
    prop = build_proposal(pool, ScoreTransform("binary_entropy"), 1.0)
    assert prop.unnormalized.tolist() == [1e-6, 1e-6, math.log(2)]


def _random_setup(seed, n=30, p=4):
    rng = np.random.default_rng(seed)
    pool = make_pool(rng.random(n), (rng.random(n) < 0.3).astype(int), assignment=rng.integers(0, p, size=n))
    return pool, build_categorical_strata(pool, "stratum")


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), alpha=st.floats(0.0, 3.0), family=st.sampled_from(FAMILIES))
def test_proposal_invariants(seed, alpha, family):
    pool, strat = _random_setup(seed)
    prop = build_proposal(pool, ScoreTransform(family), alpha)
    assert np.all(prop.mass > 0)
    assert math.isclose(math.fsum(prop.mass), 1.0, abs_tol=1e-12)
    big_q = prop.stratum_mass(strat)
    assert np.all(big_q > 0) and math.isclose(math.fsum(big_q), 1.0, abs_tol=1e-12)
    w = prop.stratified_weights(strat)
    for j in range(strat.n_strata):
        members, q = restrict_to_stratum(prop, strat, j)
        assert math.isclose(math.fsum(q), 1.0, abs_tol=1e-12)
        assert math.isclose(math.fsum(q * w[members]), 1.0, abs_tol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), alpha=st.floats(0.01, 3.0))
def test_raw_score_is_monotone(seed, alpha):
    pool, _ = _random_setup(seed)
    q = build_proposal(pool, alpha=alpha).mass
    order = np.argsort(pool.scores)
    assert np.all(np.diff(q[order]) >= 0)


def test_write_proposal(tmp_path, t1_pool):
    out = tmp_path / "q.csv"
    write_proposal(build_proposal(t1_pool, alpha=0.0), t1_pool, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "id,q" and len(lines) == 7
    assert float(lines[1].split(",")[1]) == 1 / 6
