"""Player and indicator ingestion.

Player files are comma-separated UTF-8 with a header row and columns
``id, name, citizenship, market_value_eur, position, age, club``. The
citizenship field packs one or two nationalities separated by a run of
two or more spaces ("Belgium  DR Congo"); single spaces belong to
multi-word country names. Indicator files are long-format rows of
``country_code, indicator, year, value`` carrying World Bank population,
GDP and GDP-per-capita series.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .countries import CountryEntity, CountryResolver

__all__ = [
    "MalformedRecordError",
    "InputError",
    "PlayerRecord",
    "IngestReport",
    "IndicatorValue",
    "CountryIndicators",
    "IndicatorTable",
    "parse_citizenship",
    "load_players",
    "load_indicators",
    "POPULATION",
    "GDP",
    "GDP_PER_CAPITA",
]

log = logging.getLogger(__name__)

POPULATION = "SP.POP.TOTL"
GDP = "NY.GDP.MKTP.CD"
GDP_PER_CAPITA = "NY.GDP.PCAP.CD"

_DOUBLE_SPACE = re.compile(r" {2,}")


class InputError(Exception):
    """Unreadable or structurally invalid input file."""


class MalformedRecordError(ValueError):
    """A single row that cannot be turned into a record."""

    def __init__(self, message: str, row_id: str | None = None):
        super().__init__(message)
        self.row_id = row_id


def parse_citizenship(raw: str) -> tuple[str, str | None]:
    """Split a citizenship field into (primary, secondary).

    The delimiter is a run of >=2 consecutive spaces. With no delimiter the
    whole (trimmed) field is the primary citizenship. With more than two
    entries only the first secondary is kept.
    """
    trimmed = raw.strip()
    if not trimmed:
        raise MalformedRecordError("empty citizenship field")
    tokens = [t.strip() for t in _DOUBLE_SPACE.split(trimmed)]
    tokens = [t for t in tokens if t]
    if not tokens:
        raise MalformedRecordError("empty citizenship field")
    primary = tokens[0]
    secondary = tokens[1] if len(tokens) > 1 else None
    return primary, secondary


@dataclass(frozen=True)
class PlayerRecord:
    player_id: str
    name: str
    primary_citizenship: CountryEntity
    secondary_citizenship: CountryEntity | None
    market_value: int  # whole euros
    position: str | None = None
    age: int | None = None
    club: str | None = None

    @property
    def dual(self) -> bool:
        return self.secondary_citizenship is not None


@dataclass
class IngestReport:
    """Row accounting for one player file; valid + skipped == total."""

    total_rows: int = 0
    valid_rows: int = 0
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (row id, reason)
    dual_citizens: int = 0
    missing_values: int = 0
    demoted_secondaries: int = 0  # secondary == primary after resolution (kept as single)
    unmatched_countries: list[str] = field(default_factory=list)

    @property
    def skipped_rows(self) -> int:
        return len(self.skipped)


_PLAYER_COLUMNS = ("id", "name", "citizenship", "market_value_eur")


def _parse_market_value(raw: str | None) -> tuple[int, bool]:
    """Return (euros, was_missing). Blank values count as zero (and missing)."""
    text = (raw or "").strip()
    if not text:
        return 0, True
    try:
        value = float(text.replace(",", ""))
    except ValueError:
        raise MalformedRecordError(f"unparseable market value {text!r}")
    if not math.isfinite(value) or value < 0:
        raise MalformedRecordError(f"market value not a finite non-negative number: {text!r}")
    return int(round(value)), False


def _parse_age(raw: str | None) -> int | None:
    text = (raw or "").strip()
    if not text:
        return None
    try:
        return int(float(text))
    except ValueError:
        return None


def load_players(
    source: str | Path, resolver: CountryResolver
) -> tuple[list[PlayerRecord], IngestReport]:
    """Parse a player file into records, skipping (and logging) bad rows."""
    report = IngestReport()
    records: list[PlayerRecord] = []
    seen_ids: set[str] = set()
    try:
        fh = open(source, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read player file {source}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in _PLAYER_COLUMNS if c not in header]
        if missing:
            raise InputError(f"player file {source} missing columns: {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            report.total_rows += 1
            row_id = (row.get("id") or "").strip() or f"line {lineno}"
            try:
                record = _row_to_record(row, row_id, resolver, report, seen_ids)
            except MalformedRecordError as exc:
                report.skipped.append((row_id, str(exc)))
                log.warning("skipping row %s: %s", row_id, exc)
                continue
            records.append(record)
            report.valid_rows += 1
            if record.dual:
                report.dual_citizens += 1
    report.unmatched_countries = resolver.unmatched
    return records, report


def _row_to_record(
    row: dict,
    row_id: str,
    resolver: CountryResolver,
    report: IngestReport,
    seen_ids: set[str],
) -> PlayerRecord:
    player_id = (row.get("id") or "").strip()
    if not player_id:
        raise MalformedRecordError("missing player id")
    if player_id in seen_ids:
        raise MalformedRecordError(f"duplicate player id {player_id}")
    name = (row.get("name") or "").strip()
    if not name:
        raise MalformedRecordError("missing player name")
    try:
        primary_raw, secondary_raw = parse_citizenship(row.get("citizenship") or "")
    except MalformedRecordError as exc:
        exc.row_id = row_id
        raise
    value, was_missing = _parse_market_value(row.get("market_value_eur"))
    if was_missing:
        report.missing_values += 1
    primary = resolver.resolve(primary_raw)
    secondary = resolver.resolve(secondary_raw) if secondary_raw else None
    if secondary is not None and secondary.stats_code == primary.stats_code:
        # not a dual citizen in any meaningful sense; keep as single and flag
        secondary = None
        report.demoted_secondaries += 1
    seen_ids.add(player_id)
    return PlayerRecord(
        player_id=player_id,
        name=name,
        primary_citizenship=primary,
        secondary_citizenship=secondary,
        market_value=value,
        position=(row.get("position") or "").strip() or None,
        age=_parse_age(row.get("age")),
        club=(row.get("club") or "").strip() or None,
    )


@dataclass(frozen=True)
class IndicatorValue:
    value: float
    source_year: int


@dataclass(frozen=True)
class CountryIndicators:
    population: IndicatorValue | None = None
    gdp: IndicatorValue | None = None
    gdp_per_capita: IndicatorValue | None = None


class IndicatorTable:
    """Per-country population / GDP / GDP-per-capita lookups."""

    def __init__(self, entries: dict[str, CountryIndicators] | None = None):
        self._entries = dict(entries or {})

    def get(self, code: str | None) -> CountryIndicators | None:
        if code is None:
            return None
        return self._entries.get(code)

    def population(self, code: str | None) -> float | None:
        entry = self.get(code)
        return entry.population.value if entry and entry.population else None

    def gdp(self, code: str | None) -> float | None:
        entry = self.get(code)
        return entry.gdp.value if entry and entry.gdp else None

    def gdp_per_capita(self, code: str | None) -> float | None:
        entry = self.get(code)
        return entry.gdp_per_capita.value if entry and entry.gdp_per_capita else None

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, code: str) -> bool:
        return code in self._entries

    def codes(self) -> list[str]:
        return sorted(self._entries)


_INDICATOR_FIELDS = {
    POPULATION: "population",
    GDP: "gdp",
    GDP_PER_CAPITA: "gdp_per_capita",
}


def load_indicators(
    source: str | Path, year: int = 2024, fallback: int = 2023
) -> IndicatorTable:
    """Build an IndicatorTable preferring `year` and falling back per value.

    Non-positive or unparseable values are treated as absent; an indicator
    missing in both years is simply not stored, so downstream normalisations
    come out as NA.
    """
    values: dict[tuple[str, str, int], float] = {}
    try:
        fh = open(source, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read indicator file {source}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = ("country_code", "indicator", "year", "value")
        missing = [c for c in required if c not in header]
        if missing:
            raise InputError(f"indicator file {source} missing columns: {', '.join(missing)}")
        for row in reader:
            code = (row.get("country_code") or "").strip()
            indicator = (row.get("indicator") or "").strip()
            if not code or indicator not in _INDICATOR_FIELDS:
                continue
            try:
                row_year = int((row.get("year") or "").strip())
                value = float((row.get("value") or "").strip())
            except ValueError:
                continue
            if row_year not in (year, fallback):
                continue
            if not math.isfinite(value) or value <= 0:
                continue
            values[(code, indicator, row_year)] = value

    entries: dict[str, CountryIndicators] = {}
    codes = {code for code, _, _ in values}
    for code in sorted(codes):
        fields: dict[str, IndicatorValue | None] = {}
        for indicator, attr in _INDICATOR_FIELDS.items():
            picked: IndicatorValue | None = None
            for candidate_year in (year, fallback):
                value = values.get((code, indicator, candidate_year))
                if value is not None:
                    picked = IndicatorValue(value, candidate_year)
                    break
            fields[attr] = picked
        if any(fields.values()):
            entries[code] = CountryIndicators(**fields)
    return IndicatorTable(entries)
