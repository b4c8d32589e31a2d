"""Best XI accounting against an exhaustive enumeration oracle."""

from __future__ import annotations

import itertools
import random

from talentflow.bestxi import (
    SQUAD_SIZE,
    actual_rosters,
    best_xi_value,
    bestxi_table,
    reassign,
    select_best_xi,
)
from talentflow.ingest import IndicatorTable, load_indicators

from conftest import full_indicator_rows


def oracle_best_squad(values: list[int]) -> int:
    """Try every eleven-player combination; the best is the answer."""
    if len(values) <= SQUAD_SIZE:
        return sum(values)
    return max(sum(combo) for combo in itertools.combinations(values, SQUAD_SIZE))


def test_small_pool_summed_whole():
    assert best_xi_value([5, 3, 12]) == 20
    assert best_xi_value([1_000_000] * 7 + [0] * 0) == 7_000_000
    assert best_xi_value([]) == 0


def test_top_eleven_of_larger_pool():
    values = list(range(1, 21))  # 1..20
    assert best_xi_value(values) == sum(range(10, 21))
    assert best_xi_value(values) == oracle_best_squad(values)


def test_matches_enumeration_oracle_random():
    rng = random.Random(3)
    for _ in range(25):
        values = [rng.randrange(0, 10**8) for _ in range(rng.randrange(0, 15))]
        assert best_xi_value(values) == oracle_best_squad(values)


def test_selection_ties_resolved_by_id(make_player):
    players = [make_player(f"p{i:02d}", "France", value=100) for i in range(13)]
    chosen = select_best_xi(players)
    assert [p.player_id for p in chosen] == [f"p{i:02d}" for i in range(11)]


def test_reassignment_partitions_players(make_player):
    rng = random.Random(11)
    names = ["France", "Algeria", "Brazil", "Portugal", "England", "Nigeria"]
    players = []
    for i in range(200):
        primary = rng.choice(names)
        secondary = rng.choice([n for n in names if n != primary] + [None, None])
        players.append(make_player(f"p{i}", primary, secondary, rng.randrange(0, 10**7)))
    for grouping in (actual_rosters(players), reassign(players)):
        assert sum(len(r) for r in grouping.values()) == len(players)
        seen = [p.player_id for roster in grouping.values() for p in roster]
        assert len(seen) == len(set(seen))


def test_duals_move_to_secondary(make_player):
    players = [
        make_player("p1", "France", "Algeria", 10),
        make_player("p2", "France", None, 20),
    ]
    moved = reassign(players)
    by_code = {c.stats_code: [p.player_id for p in r] for c, r in moved.items()}
    assert by_code == {"DZA": ["p1"], "FRA": ["p2"]}


def test_table_against_enumeration(make_player):
    rng = random.Random(5)
    spec = [("France", 14, "Algeria"), ("Algeria", 9, "France"), ("Brazil", 7, None)]
    players = []
    i = 0
    for primary, count, partner in spec:
        for _ in range(count):
            secondary = partner if partner and rng.random() < 0.4 else None
            players.append(make_player(f"p{i:03d}", primary, secondary, rng.randrange(1, 10**7)))
            i += 1
    results = {r.country.stats_code: r for r in bestxi_table(players, IndicatorTable())}

    actual = actual_rosters(players)
    counterfactual = reassign(players)
    for code, result in results.items():
        actual_values = [
            p.market_value for c, r in actual.items() if c.stats_code == code for p in r
        ]
        cf_values = [
            p.market_value for c, r in counterfactual.items() if c.stats_code == code for p in r
        ]
        assert result.actual_value == oracle_best_squad(actual_values)
        assert result.counterfactual_value == oracle_best_squad(cf_values)

    # Brazil has no dual citizens in either direction: nothing changes
    assert results["BRA"].diff == 0


def test_results_sorted_by_diff_descending(make_player):
    players = [
        make_player("p1", "France", "Algeria", 50),
        make_player("p2", "Spain", "Argentina", 30),
        make_player("p3", "Brazil", None, 10),
    ]
    results = bestxi_table(players, IndicatorTable())
    diffs = [r.diff for r in results]
    assert diffs == sorted(diffs, reverse=True)


def test_top_player_follows_the_changed_roster(make_player):
    players = [
        make_player("p1", "France", "Algeria", 50, name="Mover"),
        make_player("p2", "France", None, 40, name="Stayer"),
        make_player("p3", "Algeria", None, 10, name="Local"),
    ]
    results = {r.country.stats_code: r for r in bestxi_table(players, IndicatorTable())}
    # France gains from p1: headline name from the actual roster
    assert results["FRA"].top_player[0] == "Mover"
    # Algeria loses p1: headline name from the counterfactual roster
    assert results["DZA"].top_player[0] == "Mover"
    assert results["DZA"].diff == -50
    assert results["FRA"].pct_change == 100.0 * 50 / 40


def test_pct_of_gdp(make_player, write_wdi_csv):
    indicators = load_indicators(write_wdi_csv(full_indicator_rows("FRA", 68e6, 2.0e12, 45_000)))
    players = [make_player("p1", "France", "Algeria", 1_000_000_000)]
    results = {r.country.stats_code: r for r in bestxi_table(players, indicators)}
    assert results["FRA"].pct_of_gdp == 100.0 * 1_000_000_000 / 2.0e12
    assert results["DZA"].pct_of_gdp is None
