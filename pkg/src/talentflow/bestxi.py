"""Best XI counterfactual.

For each country, value the squad of its eleven most valuable players
under actual rosters (everyone at their primary citizenship) and under a
no-migration counterfactual where every dual citizen is reassigned to the
secondary-citizenship country. The difference is what the best squad
gains or loses from dual-citizenship migration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .countries import CountryEntity
from .ingest import IndicatorTable, PlayerRecord

__all__ = [
    "BestXIResult",
    "best_xi_value",
    "select_best_xi",
    "reassign",
    "actual_rosters",
    "bestxi_table",
]

SQUAD_SIZE = 11


def best_xi_value(values: Iterable[int]) -> int:
    """Sum of the eleven largest values; smaller pools are summed whole."""
    return sum(sorted(values, reverse=True)[:SQUAD_SIZE])


def select_best_xi(players: list[PlayerRecord]) -> list[PlayerRecord]:
    """The eleven most valuable players, ties broken by ascending id."""
    ordered = sorted(players, key=lambda p: (-p.market_value, p.player_id))
    return ordered[:SQUAD_SIZE]


def _grouped(
    players: list[PlayerRecord], keyed_by_secondary_for_duals: bool
) -> dict[CountryEntity, list[PlayerRecord]]:
    rosters: dict[str, list[PlayerRecord]] = {}
    entities: dict[str, CountryEntity] = {}
    for player in players:
        if keyed_by_secondary_for_duals and player.secondary_citizenship is not None:
            country = player.secondary_citizenship
        else:
            country = player.primary_citizenship
        entities.setdefault(country.stats_code, country)
        rosters.setdefault(country.stats_code, []).append(player)
    return {entities[code]: rosters[code] for code in sorted(rosters)}


def actual_rosters(players: list[PlayerRecord]) -> dict[CountryEntity, list[PlayerRecord]]:
    """Players grouped by primary citizenship."""
    return _grouped(players, keyed_by_secondary_for_duals=False)


def reassign(players: list[PlayerRecord]) -> dict[CountryEntity, list[PlayerRecord]]:
    """Counterfactual rosters: dual citizens move to their secondary country.

    Every player lands in exactly one roster, so roster sizes across all
    countries sum to the player count in both worlds.
    """
    return _grouped(players, keyed_by_secondary_for_duals=True)


@dataclass
class BestXIResult:
    country: CountryEntity
    actual_value: int
    counterfactual_value: int
    pct_of_gdp: float | None  # 100 * diff euros / GDP current USD, no FX conversion
    top_player: tuple[str, str, int] | None  # (name, id, value)

    @property
    def diff(self) -> int:
        return self.actual_value - self.counterfactual_value

    @property
    def pct_change(self) -> float | None:
        if self.counterfactual_value <= 0:
            return None
        return 100.0 * self.diff / self.counterfactual_value


def bestxi_table(
    players: list[PlayerRecord], indicators: IndicatorTable
) -> list[BestXIResult]:
    """One BestXIResult per country, sorted by diff descending.

    The headline player is the most valuable member of the roster that the
    migration changed: the actual roster for countries that gain, the
    counterfactual roster for countries that lose.
    """
    actual = actual_rosters(players)
    counterfactual = reassign(players)
    by_code_actual = {c.stats_code: (c, r) for c, r in actual.items()}
    by_code_cf = {c.stats_code: (c, r) for c, r in counterfactual.items()}

    results = []
    for code in sorted(set(by_code_actual) | set(by_code_cf)):
        country, actual_roster = by_code_actual.get(code, (None, []))
        cf_country, cf_roster = by_code_cf.get(code, (None, []))
        entity = country or cf_country
        actual_value = best_xi_value(p.market_value for p in actual_roster)
        cf_value = best_xi_value(p.market_value for p in cf_roster)
        showcase = actual_roster if actual_value >= cf_value else cf_roster
        top = select_best_xi(showcase)[:1]
        top_player = (
            (top[0].name, top[0].player_id, top[0].market_value) if top else None
        )
        gdp = indicators.gdp(entity.wdi_code)
        diff = actual_value - cf_value
        pct_of_gdp = 100.0 * diff / gdp if gdp else None
        results.append(
            BestXIResult(
                country=entity,
                actual_value=actual_value,
                counterfactual_value=cf_value,
                pct_of_gdp=pct_of_gdp,
                top_player=top_player,
            )
        )
    results.sort(key=lambda r: (-r.diff, r.country.stats_code))
    return results
