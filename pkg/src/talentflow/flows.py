"""Bilateral flow accounting.

A dual-citizenship player moves value along one directed corridor: from
the secondary-citizenship country (origin) to the primary-citizenship
country (destination). Corridors aggregate player counts and market value
in exact integer euros, so conservation identities hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .countries import CountryEntity
from .ingest import IndicatorTable, PlayerRecord

__all__ = [
    "BilateralFlow",
    "CountrySummary",
    "AggregateStats",
    "build_flows",
    "country_summaries",
    "aggregate_stats",
]


@dataclass(frozen=True)
class BilateralFlow:
    origin: CountryEntity
    destination: CountryEntity
    player_count: int
    total_value: int  # euros


@dataclass
class CountrySummary:
    country: CountryEntity
    gross_lost: int = 0
    gross_gained: int = 0
    players_lost: int = 0
    players_gained: int = 0
    net_over_gdp: float | None = None  # euros per current-USD GDP, no FX conversion
    net_per_capita: float | None = None  # euros per person

    @property
    def net(self) -> int:
        return self.gross_gained - self.gross_lost


@dataclass
class AggregateStats:
    total_players: int = 0
    dual_players: int = 0
    total_value: int = 0
    dual_value: int = 0
    country_count: int = 0

    @property
    def dual_share(self) -> float | None:
        return self.dual_players / self.total_players if self.total_players else None

    @property
    def dual_value_share(self) -> float | None:
        return self.dual_value / self.total_value if self.total_value else None


def build_flows(players: list[PlayerRecord]) -> list[BilateralFlow]:
    """Aggregate dual citizens into directed corridors.

    Corridors are keyed by (origin, destination) stats codes, summed over
    players, and returned sorted by those codes, so the result is invariant
    under permutation of the input.
    """
    counts: dict[tuple[str, str], int] = {}
    values: dict[tuple[str, str], int] = {}
    entities: dict[str, CountryEntity] = {}
    for player in players:
        if player.secondary_citizenship is None:
            continue
        origin = player.secondary_citizenship
        destination = player.primary_citizenship
        key = (origin.stats_code, destination.stats_code)
        counts[key] = counts.get(key, 0) + 1
        values[key] = values.get(key, 0) + player.market_value
        entities.setdefault(origin.stats_code, origin)
        entities.setdefault(destination.stats_code, destination)
    return [
        BilateralFlow(entities[o], entities[d], counts[(o, d)], values[(o, d)])
        for o, d in sorted(counts)
    ]


def country_summaries(
    flows: list[BilateralFlow], indicators: IndicatorTable
) -> list[CountrySummary]:
    """Per-country gross/net totals with GDP and population normalisations.

    Normalised fields are None when the country has no World Bank entry
    (or the relevant indicator is missing).
    """
    summaries: dict[str, CountrySummary] = {}

    def entry(country: CountryEntity) -> CountrySummary:
        summary = summaries.get(country.stats_code)
        if summary is None:
            summary = CountrySummary(country)
            summaries[country.stats_code] = summary
        return summary

    for flow in flows:
        origin = entry(flow.origin)
        origin.gross_lost += flow.total_value
        origin.players_lost += flow.player_count
        destination = entry(flow.destination)
        destination.gross_gained += flow.total_value
        destination.players_gained += flow.player_count

    for summary in summaries.values():
        gdp = indicators.gdp(summary.country.wdi_code)
        population = indicators.population(summary.country.wdi_code)
        summary.net_over_gdp = summary.net / gdp if gdp else None
        summary.net_per_capita = summary.net / population if population else None

    return [summaries[code] for code in sorted(summaries)]


def aggregate_stats(players: list[PlayerRecord]) -> AggregateStats:
    """Headline totals over the full player sample."""
    stats = AggregateStats()
    countries: set[str] = set()
    for player in players:
        stats.total_players += 1
        stats.total_value += player.market_value
        countries.add(player.primary_citizenship.stats_code)
        if player.secondary_citizenship is not None:
            stats.dual_players += 1
            stats.dual_value += player.market_value
            countries.add(player.secondary_citizenship.stats_code)
    stats.country_count = len(countries)
    return stats
