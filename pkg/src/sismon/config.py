"""JSON experiment configuration, parsed strictly (unknown fields are errors).

Example::

    {
      "pool": "pool.csv",
      "designs": ["RS", "SRS", "IS", "SIS"],
      "budgets": [50, 100],
      "replications": 1000,
      "seed": 7,
      "strata": {"method": "categorical", "params": {"attr": "stratum"},
                 "min_count": 3, "min_frac": 0.005},
      "proposal": {"family": "raw_score", "alpha": 0.5, "floor": 1e-6}
    }

``proposal`` may also be a list of proposal objects; IS and SIS then run once
per proposal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .designs import KINDS, STRATIFIED, WEIGHTED
from .errors import ConfigError, DataError
from .pool import Pool
from .proposal import DEFAULT_FLOOR, FAMILIES, Proposal, ScoreTransform, build_proposal
from .strata import (
    Stratification,
    build_categorical_strata,
    build_cross_strata,
    build_quantile_strata,
    merge_small_strata,
)

TOP_LEVEL = {"pool", "designs", "budgets", "replications", "seed", "strata", "proposal"}
STRATA_KEYS = {"method", "params", "min_count", "min_frac"}
PROPOSAL_KEYS = {"family", "alpha", "floor"}
METHOD_PARAMS = {
    "categorical": ({"attr"}, set()),
    "quantile": ({"feature", "n_feat_bins"}, {"score_bins"}),
    "cross": ({"attrs"}, set()),
}


def _strict(obj: Any, allowed: set, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown field(s) in {where}: {sorted(unknown)}")
    return obj


@dataclass(frozen=True)
class StrataSpec:
    method: str
    params: dict = field(default_factory=dict)
    min_count: int = 3
    min_frac: float = 0.005

    @classmethod
    def from_dict(cls, d: dict) -> "StrataSpec":
        d = _strict(d, STRATA_KEYS, "strata")
        method = d.get("method")
        if method not in METHOD_PARAMS:
            raise ConfigError(f"strata.method must be one of {sorted(METHOD_PARAMS)}, got {method!r}")
        params = _strict(d.get("params", {}), set().union(*METHOD_PARAMS[method]), "strata.params")
        missing = METHOD_PARAMS[method][0] - set(params)
        if missing:
            raise ConfigError(f"strata.params for {method!r} missing {sorted(missing)}")
        try:
            min_count = int(d.get("min_count", 3))
            min_frac = float(d.get("min_frac", 0.005))
        except (TypeError, ValueError):
            raise ConfigError("strata.min_count / strata.min_frac must be numbers") from None
        if min_count < 0 or not 0.0 <= min_frac < 1.0:
            raise ConfigError("need strata.min_count >= 0 and 0 <= strata.min_frac < 1")
        return cls(method, dict(params), min_count, min_frac)

    @property
    def label(self) -> str:
        p = self.params
        if self.method == "categorical":
            return str(p["attr"])
        if self.method == "quantile":
            return f"{p['feature']}-{p['n_feat_bins']}x{p.get('score_bins', 1)}"
        return " x ".join(str(a) for a in p["attrs"])

    def build(self, pool: Pool) -> Stratification:
        p = self.params
        try:
            if self.method == "categorical":
                strat = build_categorical_strata(pool, p["attr"])
            elif self.method == "quantile":
                strat = build_quantile_strata(
                    pool, p["feature"], int(p["n_feat_bins"]), int(p.get("score_bins", 1))
                )
            else:
                attrs = p["attrs"]
                if not isinstance(attrs, list) or not attrs:
                    raise ConfigError("strata.params.attrs must be a non-empty list")
                strat = build_cross_strata(pool, [build_categorical_strata(pool, a) for a in attrs])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, DataError):
                raise
            raise ConfigError(f"bad strata params {p!r}: {exc}") from None
        strat = merge_small_strata(strat, pool, self.min_count, self.min_frac)
        return Stratification(strat.assignment, strat.labels, self.label)


@dataclass(frozen=True)
class ProposalSpec:
    family: str = "raw_score"
    alpha: float = 1.0
    floor: float = DEFAULT_FLOOR

    @classmethod
    def from_dict(cls, d: dict) -> "ProposalSpec":
        d = _strict(d, PROPOSAL_KEYS, "proposal")
        family = d.get("family", "raw_score")
        if family not in FAMILIES:
            raise ConfigError(f"proposal.family must be one of {FAMILIES}, got {family!r}")
        try:
            alpha = float(d.get("alpha", 1.0))
            floor = float(d.get("floor", DEFAULT_FLOOR))
        except (TypeError, ValueError):
            raise ConfigError("proposal.alpha / proposal.floor must be numbers") from None
        if alpha < 0 or floor <= 0:
            raise ConfigError("need proposal.alpha >= 0 and proposal.floor > 0")
        return cls(family, alpha, floor)

    @property
    def tag(self) -> str:
        return f"{self.family}|{self.alpha!r}|{self.floor!r}"

    def build(self, pool: Pool) -> Proposal:
        return build_proposal(pool, ScoreTransform(self.family, self.floor), self.alpha)


@dataclass(frozen=True)
class SimConfig:
    designs: tuple[str, ...]
    budgets: tuple[int, ...]
    replications: int = 1000
    seed: int = 0
    strata: StrataSpec | None = None
    proposals: tuple[ProposalSpec, ...] = ()
    pool: str | None = None

    def __post_init__(self):
        if not self.designs:
            raise ConfigError("designs must list at least one design")
        for d in self.designs:
            if d not in KINDS:
                raise ConfigError(f"unknown design {d!r}; choose from {KINDS}")
        if len(set(self.designs)) != len(self.designs):
            raise ConfigError("designs must not repeat")
        if not self.budgets or any(int(b) < 1 for b in self.budgets):
            raise ConfigError("budgets must be a non-empty list of positive integers")
        if int(self.replications) < 2:
            raise ConfigError("replications must be >= 2")
        if STRATIFIED & set(self.designs) and self.strata is None:
            raise ConfigError("SRS/SIS designs need a 'strata' section")
        if WEIGHTED & set(self.designs) and not self.proposals:
            raise ConfigError("IS/SIS designs need a 'proposal' section")

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = _strict(d, TOP_LEVEL, "config")
        try:
            designs = tuple(d.get("designs", ()))
            budgets = tuple(int(b) for b in d.get("budgets", ()))
            replications = int(d.get("replications", 1000))
            seed = int(d.get("seed", 0))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config value: {exc}") from None
        strata = StrataSpec.from_dict(d["strata"]) if d.get("strata") is not None else None
        prop = d.get("proposal")
        if prop is None:
            proposals = ()
        elif isinstance(prop, list):
            proposals = tuple(ProposalSpec.from_dict(p) for p in prop)
        else:
            proposals = (ProposalSpec.from_dict(prop),)
        pool = d.get("pool")
        if pool is not None and not isinstance(pool, str):
            raise ConfigError("pool must be a path string")
        return cls(designs, budgets, replications, seed, strata, proposals, pool)


def load_config(path: str | Path) -> SimConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    cfg = SimConfig.from_dict(doc)
    if cfg.pool is not None and not Path(cfg.pool).is_absolute():
        cfg = SimConfig(cfg.designs, cfg.budgets, cfg.replications, cfg.seed, cfg.strata,
                        cfg.proposals, str(path.parent / cfg.pool))
    return cfg
