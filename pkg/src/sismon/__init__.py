"""Stratified importance sampling for label-budgeted defect-rate estimation."""

from .config import ProposalSpec, SimConfig, StrataSpec, load_config
from .designs import (
    CompiledDesign,
    DesignSpec,
    Estimate,
    SamplePlan,
    draw_plan,
    estimate,
    exact_estimator_mean,
)
from .diagnostics import (
    StratumDiagnostics,
    TheoremReport,
    exact_variance,
    optimal_proposal_reference,
    rank_stratifications,
    stratum_diagnostics,
    theorem_report,
)
from .errors import (
    AllocationError,
    ConfigError,
    DataError,
    OracleIncompleteError,
    SimulationError,
    SismonError,
    UncoveredIdError,
)
from .harness import SimReport, derive_seed, relative_efficiency, run_simulation
from .pool import (
    Instance,
    LabelOracle,
    Pool,
    StratumLaw,
    load_pool,
    oracle_query,
    preset_spec,
    synth_pool,
    true_defect_rate,
    write_pool,
)
from .proposal import Proposal, ScoreTransform, build_proposal, restrict_to_stratum
from .strata import (
    AllocationPlan,
    Stratification,
    allocate_proportional,
    build_categorical_strata,
    build_cross_strata,
    build_quantile_strata,
    merge_small_strata,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationError",
    "AllocationPlan",
    "CompiledDesign",
    "ConfigError",
    "DataError",
    "DesignSpec",
    "Estimate",
    "Instance",
    "LabelOracle",
    "OracleIncompleteError",
    "Pool",
    "Proposal",
    "ProposalSpec",
    "SamplePlan",
    "ScoreTransform",
    "SimConfig",
    "SimReport",
    "SimulationError",
    "SismonError",
    "StrataSpec",
    "Stratification",
    "StratumDiagnostics",
    "StratumLaw",
    "TheoremReport",
    "UncoveredIdError",
    "allocate_proportional",
    "build_categorical_strata",
    "build_cross_strata",
    "build_proposal",
    "build_quantile_strata",
    "derive_seed",
    "draw_plan",
    "estimate",
    "exact_estimator_mean",
    "exact_variance",
    "load_config",
    "load_pool",
    "merge_small_strata",
    "optimal_proposal_reference",
    "oracle_query",
    "preset_spec",
    "rank_stratifications",
    "relative_efficiency",
    "restrict_to_stratum",
    "run_simulation",
    "stratum_diagnostics",
    "synth_pool",
    "theorem_report",
    "true_defect_rate",
    "write_pool",
]
