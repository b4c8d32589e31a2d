"""Batch analytics for dual-citizenship football talent flows.

Pipeline: ingest player and indicator files, aggregate dual citizens
into directed country-to-country corridors, value each national team's
Best XI against a no-migration counterfactual, and estimate gravity
models of corridor size with colonial-tie effects. The ``talentflow``
command drives the whole pipeline; every stage is importable on its own.
"""

from .bestxi import BestXIResult, best_xi_value, bestxi_table, reassign
from .countries import CountryEntity, CountryResolver
from .estimators import (
    ConvergenceError,
    DesignMatrix,
    EstimationError,
    FitResult,
    RankDeficiencyError,
    SeparationError,
    add_fixed_effects,
    fit_glm_poisson,
    fit_ols,
    sandwich_cov_twoway,
    with_twoway_cluster,
)
from .flows import AggregateStats, BilateralFlow, CountrySummary, aggregate_stats, build_flows, country_summaries
from .gravity import (
    ColonialCoding,
    GravityObservation,
    build_gravity_dataset,
    coloniser_summary,
    load_colonial_coding,
    run_specifications,
)
from .ingest import (
    IndicatorTable,
    IngestReport,
    InputError,
    MalformedRecordError,
    PlayerRecord,
    load_indicators,
    load_players,
    parse_citizenship,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateStats",
    "BestXIResult",
    "BilateralFlow",
    "ColonialCoding",
    "ConvergenceError",
    "CountryEntity",
    "CountryResolver",
    "CountrySummary",
    "DesignMatrix",
    "EstimationError",
    "FitResult",
    "GravityObservation",
    "IndicatorTable",
    "IngestReport",
    "InputError",
    "MalformedRecordError",
    "PlayerRecord",
    "RankDeficiencyError",
    "SeparationError",
    "add_fixed_effects",
    "aggregate_stats",
    "best_xi_value",
    "bestxi_table",
    "build_flows",
    "build_gravity_dataset",
    "coloniser_summary",
    "country_summaries",
    "fit_glm_poisson",
    "fit_ols",
    "load_colonial_coding",
    "load_indicators",
    "load_players",
    "parse_citizenship",
    "reassign",
    "run_specifications",
    "sandwich_cov_twoway",
    "with_twoway_cluster",
    "__version__",
]
