import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_pool
from oracles import draw_laws, enumerate_moments, proportional_allocation, random_small_pool
from sismon import (
    DataError,
    DesignSpec,
    Stratification,
    UncoveredIdError,
    build_categorical_strata,
    build_proposal,
    draw_plan,
    estimate,
    exact_estimator_mean,
    true_defect_rate,
)
from sismon.designs import KINDS, SamplePlan, read_plan, write_plan, write_estimate


def _spec(kind, n, strat, prop):
    return DesignSpec(kind, n, strat if kind in ("SRS", "SIS") else None, prop if kind in ("IS", "SIS") else None)


def _labels(pool):
    return dict(zip(pool.ids.tolist(), pool.true_labels.tolist()))


def test_sis_plan_follows_allocation(t1_pool, t1_strat, t1_prop):
    plan = draw_plan(DesignSpec("SIS", 3, t1_strat, t1_prop), t1_pool, seed=11)
    assert plan.n == 3
    assert plan.draw_counts() == [2, 1]
    assert set(plan.ids[:2].tolist()) <= {1, 2, 3, 4}
    assert plan.ids[2] in (5, 6)
    assert np.all(plan.weights > 0)


@pytest.mark.parametrize("kind", KINDS)
def test_plans_are_deterministic(t1_pool, t1_strat, t1_prop, kind):
    spec = _spec(kind, 5, t1_strat, t1_prop)
    a, b = draw_plan(spec, t1_pool, 99), draw_plan(spec, t1_pool, 99)
    assert a.ids.tolist() == b.ids.tolist() and a.weights.tolist() == b.weights.tolist()


@pytest.mark.parametrize("kind", ["RS", "SRS"])
def test_uniform_designs_have_unit_weights(t1_pool, t1_strat, kind):
    plan = draw_plan(_spec(kind, 4, t1_strat, None), t1_pool, 0)
    assert plan.weights.tolist() == [1.0] * 4


@pytest.mark.parametrize("kind", ["IS", "SIS"])
def test_alpha_zero_weights_are_one(t1_pool, t1_strat, kind):
    spec = _spec(kind, 5, t1_strat, build_proposal(t1_pool, alpha=0.0))
    assert draw_plan(spec, t1_pool, 4).weights.tolist() == [1.0] * 5


def _plan(kind, ids, strata, weights, sw):
    return SamplePlan(kind, np.array(ids), np.array(strata), np.array(weights, dtype=float), sw)


def test_srs_hand_example(t1_pool):
    plan = _plan("SRS", [1, 2, 5], [0, 0, 1], [1.0, 1.0, 1.0], (2 / 3, 1 / 3))
    est = estimate(plan, _labels(t1_pool), t1_pool)
    assert est.value == pytest.approx(2 / 3, abs=1e-15)
    assert est.partials == (0.5, 1.0)


def test_sis_hand_example(t1_pool, t1_strat, t1_prop):
    w = t1_prop.stratified_weights(t1_strat)
    plan = _plan("SIS", [1, 2, 5], [0, 0, 1], w[[0, 1, 4]], (2 / 3, 1 / 3))
    assert estimate(plan, _labels(t1_pool), t1_pool).value == pytest.approx(41 / 108, abs=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_zero_labels_give_zero(t1_pool, t1_strat, t1_prop, kind):
    plan = draw_plan(_spec(kind, 4, t1_strat, t1_prop), t1_pool, 1)
    assert estimate(plan, {i: 0 for i in plan.ids.tolist()}, t1_pool).value == 0.0


def test_missing_label_names_the_id(t1_pool):
    plan = _plan("RS", [1, 5], [-1, -1], [1.0, 1.0], ())
    with pytest.raises(UncoveredIdError, match="id 5"):
        estimate(plan, {1: 1}, t1_pool)


def test_spec_validation(t1_pool, t1_strat, t1_prop):
    with pytest.raises(DataError):
        DesignSpec("SIS", 3, t1_strat, None)
    with pytest.raises(DataError):
        DesignSpec("SRS", 3, None, None)
    with pytest.raises(DataError):
        DesignSpec("XYZ", 3)
    other = make_pool([0.1, 0.2], [0, 1])
    with pytest.raises(DataError):
        draw_plan(DesignSpec("IS", 2, None, t1_prop), other, 0)


def test_budget_below_strata(t1_pool, t1_strat):
    with pytest.raises(DataError, match="at least one label"):
        draw_plan(DesignSpec("SRS", 1, t1_strat), t1_pool, 0)


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("kind", KINDS)
def test_t1_exact_mean(t1_pool, t1_strat, kind, alpha):
    prop = build_proposal(t1_pool, alpha=alpha)
    assert abs(exact_estimator_mean(_spec(kind, 3, t1_strat, prop), t1_pool) - 1 / 3) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), alpha=st.sampled_from([0.0, 0.25, 0.5, 1.0, 2.0]))
def test_enumeration_matches_exact_mean(seed, alpha):
    rng = np.random.default_rng(seed)
    scores, z, assignment = random_small_pool(rng)
    pool = make_pool(scores, z, assignment)
    strat = build_categorical_strata(pool, "stratum")
    prop = build_proposal(pool, alpha=alpha)
    groups = [strat.members(j).tolist() for j in range(strat.n_strata)]
    n = int(rng.integers(strat.n_strata, 4))
    for kind in KINDS:
        counts = [n] if kind in ("RS", "IS") else proportional_allocation(strat.sizes.tolist(), n)
        mean, _ = enumerate_moments(draw_laws(kind, scores, z, groups, counts, alpha))
        assert abs(mean - exact_estimator_mean(_spec(kind, n, strat, prop), pool)) <= 1e-12
        assert abs(mean - true_defect_rate(pool)) <= 1e-12


def test_is_and_single_stratum_sis_agree(t1_pool, t1_prop):
    single = Stratification.single(t1_pool)
    a = draw_plan(DesignSpec("IS", 6, None, t1_prop), t1_pool, 5)
    b = draw_plan(DesignSpec("SIS", 6, single, t1_prop), t1_pool, 5)
    assert a.ids.tolist() == b.ids.tolist()
    assert np.allclose(a.weights, b.weights, rtol=1e-15)


def test_draw_frequencies_follow_q(t1_pool, t1_strat, t1_prop):
    plan = draw_plan(DesignSpec("SIS", 60_000, t1_strat, t1_prop), t1_pool, 0)
    counts = plan.draw_counts()
    ids_b = plan.ids[plan.strata == 1]
    freq5 = float(np.mean(ids_b == 5))
    sd = math.sqrt((2 / 3) * (1 / 3) / counts[1])
    assert abs(freq5 - 2 / 3) < 4 * sd


def test_plan_csv_round_trip(tmp_path, t1_pool, t1_strat, t1_prop):
    plan = draw_plan(DesignSpec("SIS", 5, t1_strat, t1_prop), t1_pool, 3)
    path = tmp_path / "plan.csv"
    write_plan(plan, path)
    back = read_plan(path)
    assert back.ids.tolist() == plan.ids.tolist()
    assert back.weights.tolist() == plan.weights.tolist()
    assert back.stratum_weights == plan.stratum_weights
    labels = _labels(t1_pool)
    assert estimate(back, labels, t1_pool).value == estimate(plan, labels, t1_pool).value
    assert path.read_text().splitlines()[0] == "id,stratum,weight,draw_index,design,stratum_weight"


def test_estimate_json(tmp_path, t1_pool):
    plan = _plan("SRS", [1, 2, 5], [0, 0, 1], [1.0] * 3, (2 / 3, 1 / 3))
    out = tmp_path / "est.json"
    write_estimate(estimate(plan, _labels(t1_pool), t1_pool), out)
    assert '"design": "SRS"' in out.read_text()
