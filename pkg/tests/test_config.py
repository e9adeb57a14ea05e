import json

import pytest

from sismon import ConfigError, SimConfig, load_config


def _doc(**over):
    doc = {
        "pool": "pool.csv",
        "designs": ["RS", "SRS", "IS", "SIS"],
        "budgets": [3],
        "replications": 10,
        "seed": 1,
        "strata": {"method": "categorical", "params": {"attr": "stratum"}},
        "proposal": {"family": "raw_score", "alpha": 0.5},
    }
    doc.update(over)
    return doc


def test_parse_full_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(_doc()))
    cfg = load_config(path)
    assert cfg.designs == ("RS", "SRS", "IS", "SIS")
    assert cfg.strata.min_count == 3 and cfg.strata.min_frac == 0.005
    assert cfg.proposals[0].alpha == 0.5 and cfg.proposals[0].floor == 1e-6
    assert cfg.pool == str(tmp_path / "pool.csv")


def test_proposal_list():
    cfg = SimConfig.from_dict(_doc(proposal=[{"alpha": 0.25}, {"family": "margin", "alpha": 1}]))
    assert [p.tag for p in cfg.proposals] == ["raw_score|0.25|1e-06", "margin|1.0|1e-06"]


def test_defaults():
    cfg = SimConfig.from_dict({"designs": ["RS"], "budgets": [5]})
    assert cfg.replications == 1000 and cfg.seed == 0


@pytest.mark.parametrize(
    "over, match",
    [
        ({"extra": 1}, "unknown field"),
        ({"strata": {"method": "categorical", "params": {"attr": "a"}, "bins": 3}}, "unknown field"),
        ({"strata": {"method": "quantile", "params": {"feature": "f", "n_feat_bins": 2, "oops": 1}}}, "unknown field"),
        ({"strata": {"method": "kmeans"}}, "strata.method"),
        ({"strata": {"method": "quantile", "params": {"feature": "f"}}}, "missing"),
        ({"proposal": {"family": "raw_score", "beta": 1}}, "unknown field"),
        ({"proposal": {"family": "logit"}}, "proposal.family"),
        ({"proposal": {"alpha": -1}}, "alpha"),
        ({"designs": ["RS", "FILA"]}, "unknown design"),
        ({"designs": ["RS", "RS"]}, "repeat"),
        ({"replications": 1}, "replications"),
        ({"budgets": []}, "budgets"),
        ({"strata": None}, "need a 'strata' section"),
        ({"proposal": None}, "need a 'proposal' section"),
    ],
)
def test_rejects_bad_config(over, match):
    with pytest.raises(ConfigError, match=match):
        SimConfig.from_dict(_doc(**over))


def test_invalid_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(path)
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
