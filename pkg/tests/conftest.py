"""Shared fixtures: a country resolver, record builders, and CSV writers."""

from __future__ import annotations

import csv
from pathlib import Path

import pytest

from talentflow.countries import CountryResolver
from talentflow.ingest import PlayerRecord

PLAYER_HEADER = ["id", "name", "citizenship", "market_value_eur", "position", "age", "club"]
WDI_HEADER = ["country_code", "indicator", "year", "value"]


@pytest.fixture(scope="session")
def resolver() -> CountryResolver:
    return CountryResolver()


@pytest.fixture
def make_player(resolver):
    """Build a PlayerRecord straight from country names."""

    def build(
        pid: str,
        primary: str,
        secondary: str | None = None,
        value: int = 0,
        name: str | None = None,
    ) -> PlayerRecord:
        return PlayerRecord(
            player_id=pid,
            name=name or f"Player {pid}",
            primary_citizenship=resolver.resolve(primary),
            secondary_citizenship=resolver.resolve(secondary) if secondary else None,
            market_value=value,
        )

    return build


@pytest.fixture
def write_players_csv(tmp_path):
    """Write rows of (id, name, citizenship, value[, position, age, club])."""

    def write(rows: list[list], filename: str = "players.csv", header=None) -> Path:
        path = tmp_path / filename
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header or PLAYER_HEADER)
            for row in rows:
                writer.writerow(list(row) + [""] * (len(header or PLAYER_HEADER) - len(row)))
        return path

    return write


@pytest.fixture
def write_wdi_csv(tmp_path):
    """Write long-format indicator rows of (code, indicator, year, value)."""

    def write(rows: list[list], filename: str = "wdi.csv") -> Path:
        path = tmp_path / filename
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(WDI_HEADER)
            writer.writerows(rows)
        return path

    return write


def full_indicator_rows(code: str, population: float, gdp: float, gdppc: float, year: int = 2024):
    return [
        [code, "SP.POP.TOTL", year, population],
        [code, "NY.GDP.MKTP.CD", year, gdp],
        [code, "NY.GDP.PCAP.CD", year, gdppc],
    ]
