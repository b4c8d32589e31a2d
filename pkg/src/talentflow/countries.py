"""Country name resolution.

Maps source country names (as they appear in player data) to canonical
entities carrying two codes: a ``stats_code`` identifying the footballing
entity (ISO 3166-1 alpha-3 where one exists, pseudo-codes such as ENG for
the home nations) and a ``wdi_code`` identifying the World Bank entity used
for indicator lookups. The two differ for entities like England (ENG -> GBR)
and the wdi_code is absent for territories with no World Bank coverage
(Guadeloupe, Martinique, Taiwan, ...).
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

__all__ = ["CountryEntity", "CountryResolver", "load_override_rows"]

_WS = re.compile(r"\s+")


def _lookup_key(name: str) -> str:
    return _WS.sub(" ", name.strip()).casefold()


def _slug_code(name: str) -> str:
    """Deterministic placeholder code for names absent from the table."""
    slug = re.sub(r"[^A-Z0-9]+", "-", name.strip().upper()).strip("-")
    return slug or "UNKNOWN"


@dataclass(frozen=True)
class CountryEntity:
    """A resolved country, keyed by stats_code for all aggregation."""

    display_name: str
    stats_code: str
    wdi_code: str | None = None
    matched: bool = True

    def __str__(self) -> str:
        return self.display_name


def _read_mapping_rows(fh) -> list[tuple[str, str, str | None]]:
    rows = []
    for row in csv.DictReader(fh):
        name = (row.get("display_name") or "").strip()
        stats = (row.get("stats_code") or "").strip()
        wdi = (row.get("wdi_code") or "").strip() or None
        if not name or not stats:
            raise ValueError(f"mapping row missing display_name or stats_code: {row!r}")
        rows.append((name, stats, wdi))
    return rows


def load_override_rows(path: str | Path) -> list[tuple[str, str, str | None]]:
    """Read an override file (columns: display_name, stats_code, wdi_code)."""
    with open(path, newline="", encoding="utf-8") as fh:
        return _read_mapping_rows(fh)


def _bundled_rows() -> list[tuple[str, str, str | None]]:
    ref = resources.files("talentflow.data").joinpath("countries.csv")
    with ref.open("r", encoding="utf-8", newline="") as fh:
        return _read_mapping_rows(fh)


class CountryResolver:
    """Resolves display names to :class:`CountryEntity` values.

    Overrides are consulted before the general table; unmatched names
    produce an entity with a slug stats_code, no wdi_code, and a warning
    collected in :attr:`unmatched`. Resolution is deterministic: the same
    name always yields an identical entity.
    """

    def __init__(self, overrides: list[tuple[str, str, str | None]] | None = None):
        self._table: dict[str, tuple[str, str | None]] = {}
        for name, stats, wdi in _bundled_rows():
            self._table.setdefault(_lookup_key(name), (stats, wdi))
        # overrides win over bundled rows
        for name, stats, wdi in overrides or []:
            self._table[_lookup_key(name)] = (stats, wdi)
        self._cache: dict[str, CountryEntity] = {}
        self._unmatched: dict[str, None] = {}

    def resolve(self, name: str) -> CountryEntity:
        display = name.strip()
        if not display:
            raise ValueError("country name is empty")
        hit = self._cache.get(display)
        if hit is not None:
            return hit
        found = self._table.get(_lookup_key(display))
        if found is not None:
            entity = CountryEntity(display, found[0], found[1])
        else:
            entity = CountryEntity(display, _slug_code(display), None, matched=False)
            self._unmatched.setdefault(display, None)
        self._cache[display] = entity
        return entity

    @property
    def unmatched(self) -> list[str]:
        """Names that failed to match, in first-seen order."""
        return list(self._unmatched)
