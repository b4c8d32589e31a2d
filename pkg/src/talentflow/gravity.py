"""Bilateral gravity analysis of flow corridors.

Turns the corridor ledger into an estimation dataset (size and income
covariates on both ends, a former-colony indicator), runs four
specifications of the gravity model, and summarises inflows to each
coloniser from its former colonies.

The colonial coding ships as a replaceable delimited file of
(colony, coloniser) rows. A territory listed under two colonisers is
dual-coded; the tie indicator is asymmetric by construction because no
coloniser is ever listed as a colony of its own colony.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .countries import CountryEntity, CountryResolver
from .estimators import (
    DesignMatrix,
    FitResult,
    add_fixed_effects,
    fit_glm_poisson,
    fit_ols,
    with_twoway_cluster,
)
from .flows import BilateralFlow
from .ingest import IndicatorTable, InputError

__all__ = [
    "ColonialTie",
    "ColonialCoding",
    "GravityObservation",
    "ExclusionReport",
    "RegressionColumn",
    "RegressionTable",
    "ColoniserRow",
    "load_colonial_coding",
    "build_gravity_dataset",
    "run_specifications",
    "coloniser_summary",
]

COVARIATES = ["log_pop_o", "log_gdppc_o", "log_pop_d", "log_gdppc_d"]


@dataclass(frozen=True)
class ColonialTie:
    colony: CountryEntity
    coloniser: CountryEntity


@dataclass
class ColonialCoding:
    """Validated set of (colony, coloniser) pairs with code-level lookups.

    A colony matches a flow origin by stats code. A coloniser matches a
    flow destination by stats code or by shared World Bank code, so the
    home nations all count as destinations of the United Kingdom.
    """

    pairs: list[ColonialTie]
    _by_colony: dict[str, set[str]] = field(init=False, repr=False)

    def __post_init__(self):
        seen: set[tuple[str, str]] = set()
        for tie in self.pairs:
            key = (tie.colony.stats_code, tie.coloniser.stats_code)
            if key in seen:
                raise ValueError(f"duplicate colonial pair {tie.colony} -> {tie.coloniser}")
            seen.add(key)
        self._by_colony = {}
        for tie in self.pairs:
            keys = {tie.coloniser.stats_code}
            if tie.coloniser.wdi_code:
                keys.add(tie.coloniser.wdi_code)
            self._by_colony.setdefault(tie.colony.stats_code, set()).update(keys)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def n_colonies(self) -> int:
        return len({tie.colony.stats_code for tie in self.pairs})

    @property
    def dual_coded(self) -> list[str]:
        """Display names of colonies listed under two or more colonisers."""
        counts: dict[str, set[str]] = {}
        names: dict[str, str] = {}
        for tie in self.pairs:
            counts.setdefault(tie.colony.stats_code, set()).add(tie.coloniser.stats_code)
            names.setdefault(tie.colony.stats_code, tie.colony.display_name)
        return sorted(names[c] for c, m in counts.items() if len(m) > 1)

    def counts_by_coloniser(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for tie in self.pairs:
            name = tie.coloniser.display_name
            counts[name] = counts.get(name, 0) + 1
        return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))

    def colonisers(self) -> list[CountryEntity]:
        by_code: dict[str, CountryEntity] = {}
        for tie in self.pairs:
            by_code.setdefault(tie.coloniser.stats_code, tie.coloniser)
        return [by_code[c] for c in sorted(by_code)]

    def colonies_of(self, coloniser: CountryEntity) -> list[CountryEntity]:
        by_code: dict[str, CountryEntity] = {}
        for tie in self.pairs:
            if tie.coloniser.stats_code == coloniser.stats_code:
                by_code.setdefault(tie.colony.stats_code, tie.colony)
        return [by_code[c] for c in sorted(by_code)]

    def has_tie(self, origin: CountryEntity, destination: CountryEntity) -> bool:
        """True when origin is a coded former colony of destination."""
        keys = self._by_colony.get(origin.stats_code)
        if not keys:
            return False
        if destination.stats_code in keys:
            return True
        return destination.wdi_code is not None and destination.wdi_code in keys


def load_colonial_coding(
    resolver: CountryResolver, source: str | Path | None = None
) -> ColonialCoding:
    """Read a (colony, coloniser) file, defaulting to the bundled coding."""
    if source is None:
        ref = resources.files("talentflow.data").joinpath("colonial_ties.csv")
        fh = ref.open("r", encoding="utf-8", newline="")
    else:
        try:
            fh = open(source, newline="", encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read colonial coding {source}: {exc}") from exc
    pairs: list[ColonialTie] = []
    unresolved: list[str] = []
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in ("colony", "coloniser"):
            if column not in header:
                raise InputError(f"colonial coding missing column {column!r}")
        for row in reader:
            colony_name = (row.get("colony") or "").strip()
            coloniser_name = (row.get("coloniser") or "").strip()
            if not colony_name or not coloniser_name:
                raise InputError(f"colonial coding row missing a name: {row!r}")
            colony = resolver.resolve(colony_name)
            coloniser = resolver.resolve(coloniser_name)
            for entity in (colony, coloniser):
                if not entity.matched:
                    unresolved.append(entity.display_name)
            pairs.append(ColonialTie(colony, coloniser))
    if unresolved:
        raise InputError(
            "colonial coding names not in the country table: " + ", ".join(sorted(set(unresolved)))
        )
    try:
        return ColonialCoding(pairs)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


@dataclass(frozen=True)
class GravityObservation:
    origin: CountryEntity
    destination: CountryEntity
    value: float  # euros
    count: int
    log_pop_o: float
    log_pop_d: float
    log_gdppc_o: float
    log_gdppc_d: float
    colonial_tie: int
    cluster_origin: str
    cluster_dest: str


@dataclass
class ExclusionReport:
    """Corridors dropped from the estimation dataset and why."""

    rows: list[tuple[str, str, str]] = field(default_factory=list)  # origin, dest, reason
    n_kept: int = 0

    @property
    def n_excluded(self) -> int:
        return len(self.rows)


def build_gravity_dataset(
    flows: list[BilateralFlow],
    indicators: IndicatorTable,
    coding: ColonialCoding,
) -> tuple[list[GravityObservation], ExclusionReport]:
    """One observation per corridor with complete covariates on both ends.

    Keeps zero-value corridors (the level estimators handle them); rows
    lacking population or income data for either endpoint are excluded
    and itemised in the report.
    """
    observations: list[GravityObservation] = []
    report = ExclusionReport()
    for flow in flows:
        missing: list[str] = []
        pop_o = indicators.population(flow.origin.wdi_code)
        pop_d = indicators.population(flow.destination.wdi_code)
        gdppc_o = indicators.gdp_per_capita(flow.origin.wdi_code)
        gdppc_d = indicators.gdp_per_capita(flow.destination.wdi_code)
        if pop_o is None:
            missing.append("origin population")
        if gdppc_o is None:
            missing.append("origin income")
        if pop_d is None:
            missing.append("destination population")
        if gdppc_d is None:
            missing.append("destination income")
        if missing:
            report.rows.append(
                (flow.origin.stats_code, flow.destination.stats_code, "; ".join(missing))
            )
            continue
        observations.append(
            GravityObservation(
                origin=flow.origin,
                destination=flow.destination,
                value=float(flow.total_value),
                count=flow.player_count,
                log_pop_o=math.log(pop_o),
                log_pop_d=math.log(pop_d),
                log_gdppc_o=math.log(gdppc_o),
                log_gdppc_d=math.log(gdppc_d),
                colonial_tie=int(coding.has_tie(flow.origin, flow.destination)),
                cluster_origin=flow.origin.stats_code,
                cluster_dest=flow.destination.stats_code,
            )
        )
    report.n_kept = len(observations)
    return observations, report


def _design(observations: list[GravityObservation], outcome) -> DesignMatrix:
    x = np.array(
        [
            [1.0, o.log_pop_o, o.log_gdppc_o, o.log_pop_d, o.log_gdppc_d, float(o.colonial_tie)]
            for o in observations
        ]
    )
    return DesignMatrix(
        x=x,
        columns=["intercept"] + COVARIATES + ["colonial_tie"],
        y=np.array([outcome(o) for o in observations], dtype=float),
        cluster_origin=np.array([o.cluster_origin for o in observations]),
        cluster_dest=np.array([o.cluster_dest for o in observations]),
    )


@dataclass
class RegressionColumn:
    name: str
    label: str
    fit: FitResult

    @property
    def n_obs(self) -> int:
        return self.fit.n_obs


@dataclass
class RegressionTable:
    columns: list[RegressionColumn]
    covariate_order: list[str] = field(
        default_factory=lambda: ["colonial_tie"] + COVARIATES + ["intercept"]
    )

    def column(self, name: str) -> RegressionColumn:
        for col in self.columns:
            if col.name == name:
                return col
        raise KeyError(name)


def run_specifications(
    observations: list[GravityObservation], small_sample: bool = True
) -> RegressionTable:
    """Fit the four gravity specifications with two-way clustered errors.

    1. least squares on log value, positive-value corridors only;
    2. Poisson pseudo-likelihood on value in levels, zeros kept;
    3. as 2 with destination intercepts, which absorb the destination
       covariates and leave origin covariates plus the colonial tie;
    4. Poisson on player counts.
    """
    if not observations:
        raise ValueError("empty gravity dataset")
    positive = [o for o in observations if o.value > 0]
    ols_design = _design(positive, lambda o: math.log(o.value))
    ols_fit = with_twoway_cluster(fit_ols(ols_design), ols_design, small_sample)

    value_design = _design(observations, lambda o: o.value)
    ppml_fit = with_twoway_cluster(fit_glm_poisson(value_design), value_design, small_sample)

    fe_design = add_fixed_effects(value_design, group="destination")
    fe_fit = with_twoway_cluster(
        fit_glm_poisson(fe_design, estimator_tag="ppml"), fe_design, small_sample
    )

    count_design = _design(observations, lambda o: float(o.count))
    count_fit = with_twoway_cluster(
        fit_glm_poisson(count_design, estimator_tag="poisson"), count_design, small_sample
    )

    return RegressionTable(
        columns=[
            RegressionColumn("ols_log_value", "OLS log value", ols_fit),
            RegressionColumn("ppml_value", "PPML value", ppml_fit),
            RegressionColumn("ppml_value_fe", "PPML value, dest. FE", fe_fit),
            RegressionColumn("poisson_count", "Poisson count", count_fit),
        ]
    )


@dataclass
class ColoniserRow:
    coloniser: CountryEntity
    colonies_with_flows: int
    players_from_colonies: int
    total_gained: int  # euros, all inbound dual-citizen value
    colonial_value: int  # euros, inbound from own former colonies only

    @property
    def colonial_share(self) -> float:
        if self.total_gained == 0:
            return 0.0
        return self.colonial_value / self.total_gained


def coloniser_summary(
    flows: list[BilateralFlow], coding: ColonialCoding
) -> list[ColoniserRow]:
    """Inbound flows to each coloniser, split into colonial and total.

    Destinations aggregate at the World Bank entity, so all four home
    nations count toward the United Kingdom. The colonial part keeps only
    corridors whose origin is one of the coloniser's own former colonies.
    Rows come out sorted by colonial value descending.
    """
    rows: list[ColoniserRow] = []
    for coloniser in coding.colonisers():
        colony_codes = {c.stats_code for c in coding.colonies_of(coloniser)}
        total = 0
        colonial = 0
        players = 0
        colonies_seen: set[str] = set()
        for flow in flows:
            dest = flow.destination
            is_dest = dest.stats_code == coloniser.stats_code or (
                dest.wdi_code is not None and dest.wdi_code == coloniser.wdi_code
            )
            if not is_dest:
                continue
            total += flow.total_value
            if flow.origin.stats_code in colony_codes:
                colonial += flow.total_value
                players += flow.player_count
                if flow.player_count > 0:
                    colonies_seen.add(flow.origin.stats_code)
        rows.append(
            ColoniserRow(
                coloniser=coloniser,
                colonies_with_flows=len(colonies_seen),
                players_from_colonies=players,
                total_gained=total,
                colonial_value=colonial,
            )
        )
    rows.sort(key=lambda r: (-r.colonial_value, r.coloniser.display_name))
    return rows
