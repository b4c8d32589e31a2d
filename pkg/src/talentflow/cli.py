"""Command-line front door.

Subcommands cover the whole pipeline: headline sample statistics,
per-country flow ledgers, the Best XI counterfactual, the gravity
regressions, the coloniser summary, map/chart data exports, and a
synthetic self-test of the estimators.

Every run writes its artifacts plus a ``manifest.json`` recording the
subcommand, configuration, and a sha256 checksum of each input actually
read. Outputs carry no timestamps, so identical inputs and configuration
produce byte-identical files. Writes go to a temp file in the output
directory and are renamed into place.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import bestxi, flows as flows_mod, formatting, gravity as gravity_mod
from .countries import CountryResolver, load_override_rows
from .estimators import EstimationError
from .ingest import IndicatorTable, InputError, load_indicators, load_players
from .synthetic import synthetic_gravity

__all__ = ["RunConfig", "main", "run"]

SELFTEST_TOLERANCE = 0.15


@dataclass
class RunConfig:
    command: str
    players: Path | None = None
    wdi: Path | None = None
    colonial: Path | None = None
    overrides: Path | None = None
    out: Path = Path("out")
    format: str = "text"
    seed: int = 2024
    top: int = 15


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="talentflow",
        description="Dual-citizenship talent flow analytics: corridors, counterfactuals, gravity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "stats": "headline sample statistics",
        "flows": "per-country gross/net value flows plus the corridor dump",
        "bestxi": "Best XI actual vs counterfactual squad values",
        "gravity": "gravity regressions with colonial-tie effects",
        "colonial": "inflows to each coloniser from its former colonies",
        "mapdata": "net value by country code and colonial losses, for maps",
        "corridors": "largest corridors by total value",
        "selftest": "estimator recovery check on synthetic data",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--players", type=Path, help="player file (CSV)")
        p.add_argument("--wdi", type=Path, help="indicator file (CSV)")
        p.add_argument("--colonial", type=Path, help="colonial coding file (CSV); default bundled")
        p.add_argument("--overrides", type=Path, help="country-name override file (CSV)")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--format", choices=("text", "json", "csv"), default="text")
        p.add_argument("--seed", type=int, default=2024, help="seed for synthetic commands")
        if name == "corridors":
            p.add_argument("--top", type=int, default=15, help="number of corridors to keep")
    return parser


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _hash_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _require(config: RunConfig, *fields: str) -> None:
    for name in fields:
        path = getattr(config, name)
        if path is None:
            raise InputError(f"{config.command} requires --{name}")
        if not Path(path).is_file():
            raise InputError(f"--{name} path does not exist: {path}")


def _atomic_write(directory: Path, name: str, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, directory / name)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _json_bytes(payload) -> bytes:
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _csv_bytes(header: list[str], rows: list[list]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue().encode("utf-8")


def _text_bytes(text: str) -> bytes:
    return (text.rstrip("\n") + "\n").encode("utf-8")


class _Outputs:
    """Collects (name, bytes) artifacts until the run is known good."""

    def __init__(self):
        self.files: list[tuple[str, bytes]] = []

    def add(self, name: str, data: bytes) -> None:
        self.files.append((name, data))

    def emit(self, config: RunConfig, payload, header=None, rows=None, text=None) -> None:
        """Write the command's main artifact in the configured format."""
        name = config.command
        if config.format == "json":
            self.add(f"{name}.json", _json_bytes(payload))
        elif config.format == "csv":
            self.add(f"{name}.csv", _csv_bytes(header, rows))
        else:
            self.add(f"{name}.txt", _text_bytes(text))


def _inputs_used(config: RunConfig) -> dict:
    inputs = {}
    for name in ("players", "wdi", "colonial", "overrides"):
        path = getattr(config, name)
        if path is not None and Path(path).is_file():
            inputs[name] = {"path": str(path), "sha256": _hash_file(Path(path))}
    if config.command in ("gravity", "colonial", "mapdata") and config.colonial is None:
        ref = resources.files("talentflow.data").joinpath("colonial_ties.csv")
        inputs["colonial"] = {"path": "bundled:colonial_ties.csv", "sha256": _sha256(ref.read_bytes())}
    return inputs


def _write_manifest(config: RunConfig, inputs: dict, outputs: list[str], status: str, error: str | None) -> None:
    manifest = {
        "command": config.command,
        "config": {
            "format": config.format,
            "seed": config.seed,
            "top": config.top if config.command == "corridors" else None,
            "out": str(config.out),
        },
        "inputs": inputs,
        "outputs": sorted(outputs),
        "status": status,
        "error": error,
    }
    config.out.mkdir(parents=True, exist_ok=True)
    _atomic_write(config.out, "manifest.json", _json_bytes(manifest))


def _load_resolver(config: RunConfig) -> CountryResolver:
    overrides = None
    if config.overrides is not None:
        overrides = load_override_rows(config.overrides)
    return CountryResolver(overrides)


def _load_pipeline(config: RunConfig, need_wdi: bool = False):
    _require(config, "players")
    if need_wdi:
        _require(config, "wdi")
    resolver = _load_resolver(config)
    players, report = load_players(config.players, resolver)
    indicators = IndicatorTable()
    if config.wdi is not None:
        _require(config, "wdi")
        indicators = load_indicators(config.wdi)
    return resolver, players, report, indicators


def _coding(config: RunConfig, resolver: CountryResolver) -> gravity_mod.ColonialCoding:
    if config.colonial is not None:
        _require(config, "colonial")
    return gravity_mod.load_colonial_coding(resolver, config.colonial)


def _cmd_stats(config: RunConfig, out: _Outputs) -> None:
    _, players, report, _ = _load_pipeline(config)
    stats = flows_mod.aggregate_stats(players)
    payload = {
        "players": stats.total_players,
        "dual_players": stats.dual_players,
        "dual_share": stats.dual_share,
        "total_value_eur": stats.total_value,
        "dual_value_eur": stats.dual_value,
        "dual_value_share": stats.dual_value_share,
        "countries": stats.country_count,
        "rows_read": report.total_rows,
        "rows_skipped": report.skipped_rows,
        "missing_values": report.missing_values,
        "unmatched_countries": report.unmatched_countries,
    }
    share = formatting.pct(100 * stats.dual_share if stats.dual_share is not None else None)
    value_share = formatting.pct(
        100 * stats.dual_value_share if stats.dual_value_share is not None else None
    )
    text = "\n".join(
        [
            f"Players             {stats.total_players:,}",
            f"Dual citizens       {stats.dual_players:,} ({share}%)",
            f"Countries           {stats.country_count:,}",
            f"Total value (EUR m) {formatting.eur_m(stats.total_value)}",
            f"Dual value (EUR m)  {formatting.eur_m(stats.dual_value)} ({value_share}%)",
            f"Rows read/skipped   {report.total_rows:,}/{report.skipped_rows:,}",
        ]
    )
    rows = [[k, v] for k, v in payload.items() if k != "unmatched_countries"]
    out.emit(config, payload, header=["metric", "value"], rows=rows, text=text)


def _corridor_rows(corridor_list) -> list[list]:
    return [
        [f.origin.stats_code, f.destination.stats_code, f.player_count, f.total_value]
        for f in corridor_list
    ]


def _cmd_flows(config: RunConfig, out: _Outputs) -> None:
    _, players, _, indicators = _load_pipeline(config)
    corridor_list = flows_mod.build_flows(players)
    summaries = flows_mod.country_summaries(corridor_list, indicators)
    out.add(
        "corridors.csv",
        _csv_bytes(["origin", "destination", "players", "value_eur"], _corridor_rows(corridor_list)),
    )
    payload = [
        {
            "country": s.country.stats_code,
            "name": s.country.display_name,
            "gross_lost_eur": s.gross_lost,
            "gross_gained_eur": s.gross_gained,
            "net_eur": s.net,
            "players_lost": s.players_lost,
            "players_gained": s.players_gained,
            "net_over_gdp": s.net_over_gdp,
            "net_per_capita_eur": s.net_per_capita,
        }
        for s in summaries
    ]
    header = ["country", "gross_lost_eur", "gross_gained_eur", "net_eur", "players_lost", "players_gained", "net_over_gdp", "net_per_capita_eur"]
    rows = [
        [s.country.stats_code, s.gross_lost, s.gross_gained, s.net, s.players_lost, s.players_gained, s.net_over_gdp, s.net_per_capita]
        for s in summaries
    ]
    by_net = sorted(summaries, key=lambda s: (-s.net, s.country.stats_code))
    text_rows = [
        [
            s.country.display_name,
            formatting.eur_m(s.gross_lost),
            formatting.eur_m(s.gross_gained),
            formatting.eur_m(s.net),
            formatting.pct(100 * s.net_over_gdp if s.net_over_gdp is not None else None, 4),
        ]
        for s in by_net
    ]
    text = formatting.align_table(
        ["Country", "Lost (EUR m)", "Gained (EUR m)", "Net (EUR m)", "Net/GDP (%)"], text_rows
    )
    out.emit(config, payload, header=header, rows=rows, text=text)


def _cmd_bestxi(config: RunConfig, out: _Outputs) -> None:
    _, players, _, indicators = _load_pipeline(config)
    results = bestxi.bestxi_table(players, indicators)
    payload = [
        {
            "country": r.country.stats_code,
            "name": r.country.display_name,
            "actual_eur": r.actual_value,
            "counterfactual_eur": r.counterfactual_value,
            "diff_eur": r.diff,
            "pct_change": r.pct_change,
            "pct_of_gdp": r.pct_of_gdp,
            "top_player": (
                {"name": r.top_player[0], "id": r.top_player[1], "value_eur": r.top_player[2]}
                if r.top_player
                else None
            ),
        }
        for r in results
    ]
    header = ["country", "actual_eur", "counterfactual_eur", "diff_eur", "pct_change", "pct_of_gdp"]
    rows = [
        [r.country.stats_code, r.actual_value, r.counterfactual_value, r.diff, r.pct_change, r.pct_of_gdp]
        for r in results
    ]
    text_rows = [
        [
            r.country.display_name,
            formatting.eur_m(r.actual_value),
            formatting.eur_m(r.counterfactual_value),
            formatting.eur_m(r.diff),
            formatting.pct(r.pct_change),
            formatting.pct(r.pct_of_gdp, 4),
            r.top_player[0] if r.top_player else "",
        ]
        for r in results
    ]
    text = formatting.align_table(
        ["Country", "Best XI (EUR m)", "Counterfactual", "Diff", "Change (%)", "Diff/GDP (%)", "Top player"],
        text_rows,
    )
    out.emit(config, payload, header=header, rows=rows, text=text)


def _cmd_gravity(config: RunConfig, out: _Outputs) -> None:
    resolver, players, _, indicators = _load_pipeline(config, need_wdi=True)
    coding = _coding(config, resolver)
    corridor_list = flows_mod.build_flows(players)
    observations, exclusions = gravity_mod.build_gravity_dataset(corridor_list, indicators, coding)
    table = gravity_mod.run_specifications(observations)
    out.add(
        "gravity_exclusions.csv",
        _csv_bytes(["origin", "destination", "missing"], [list(r) for r in exclusions.rows]),
    )
    payload = formatting.regression_to_dict(table)
    payload["excluded_corridors"] = exclusions.n_excluded
    rows = []
    for col in table.columns:
        for name in col.fit.columns:
            if name.startswith("fe_"):
                continue
            rows.append(
                [col.name, name, col.fit.coef(name), col.fit.coef_se(name), col.fit.pvalue(name), col.n_obs]
            )
    out.emit(
        config,
        payload,
        header=["specification", "covariate", "coef", "se", "pvalue", "n_obs"],
        rows=rows,
        text=formatting.render_regression_text(table),
    )


def _cmd_colonial(config: RunConfig, out: _Outputs) -> None:
    resolver, players, _, _ = _load_pipeline(config)
    coding = _coding(config, resolver)
    corridor_list = flows_mod.build_flows(players)
    summary = gravity_mod.coloniser_summary(corridor_list, coding)
    payload = [
        {
            "coloniser": r.coloniser.stats_code,
            "name": r.coloniser.display_name,
            "colonies_with_flows": r.colonies_with_flows,
            "players_from_colonies": r.players_from_colonies,
            "total_gained_eur": r.total_gained,
            "colonial_value_eur": r.colonial_value,
            "colonial_share": r.colonial_share,
        }
        for r in summary
    ]
    header = ["coloniser", "colonies_with_flows", "players_from_colonies", "total_gained_eur", "colonial_value_eur", "colonial_share"]
    rows = [
        [r.coloniser.stats_code, r.colonies_with_flows, r.players_from_colonies, r.total_gained, r.colonial_value, r.colonial_share]
        for r in summary
    ]
    text_rows = [
        [
            r.coloniser.display_name,
            r.colonies_with_flows,
            f"{r.players_from_colonies:,}",
            formatting.eur_m(r.total_gained),
            formatting.eur_m(r.colonial_value),
            formatting.pct(100 * r.colonial_share),
        ]
        for r in summary
    ]
    text = formatting.align_table(
        ["Coloniser", "Colonies", "Players", "Total gained (EUR m)", "Colonial (EUR m)", "Share (%)"],
        text_rows,
    )
    out.emit(config, payload, header=header, rows=rows, text=text)


def _cmd_mapdata(config: RunConfig, out: _Outputs) -> None:
    resolver, players, _, _ = _load_pipeline(config)
    coding = _coding(config, resolver)
    corridor_list = flows_mod.build_flows(players)
    net: dict[str, int] = {}
    for flow in corridor_list:
        for entity, sign in ((flow.origin, -1), (flow.destination, 1)):
            code = entity.wdi_code or entity.stats_code
            net[code] = net.get(code, 0) + sign * flow.total_value
    losses: dict[tuple[str, str], int] = {}
    for flow in corridor_list:
        if coding.has_tie(flow.origin, flow.destination):
            key = (flow.origin.stats_code, flow.destination.wdi_code or flow.destination.stats_code)
            losses[key] = losses.get(key, 0) + flow.total_value
    payload = {
        "net_value_eur": {code: net[code] for code in sorted(net)},
        "colonial_losses": [
            {"colony": colony, "coloniser": coloniser, "value_eur": losses[(colony, coloniser)]}
            for colony, coloniser in sorted(losses)
        ],
    }
    out.add("mapdata.json", _json_bytes(payload))


def _cmd_corridors(config: RunConfig, out: _Outputs) -> None:
    _, players, _, _ = _load_pipeline(config)
    corridor_list = flows_mod.build_flows(players)
    ranked = sorted(
        corridor_list,
        key=lambda f: (-f.total_value, f.origin.stats_code, f.destination.stats_code),
    )[: config.top]
    payload = [
        {
            "origin": f.origin.stats_code,
            "destination": f.destination.stats_code,
            "players": f.player_count,
            "value_eur": f.total_value,
        }
        for f in ranked
    ]
    text_rows = [
        [
            f"{f.origin.display_name} -> {f.destination.display_name}",
            f"{f.player_count:,}",
            formatting.eur_m(f.total_value),
        ]
        for f in ranked
    ]
    text = formatting.align_table(["Corridor", "Players", "Value (EUR m)"], text_rows)
    out.emit(
        config,
        payload,
        header=["origin", "destination", "players", "value_eur"],
        rows=_corridor_rows(ranked),
        text=text,
    )


def _cmd_selftest(config: RunConfig, out: _Outputs) -> None:
    observations, truth = synthetic_gravity(seed=config.seed)
    table = gravity_mod.run_specifications(observations)
    checks = []
    for name in ("ppml_value", "poisson_count"):
        estimate = table.column(name).fit.coef("colonial_tie")
        checks.append(
            {
                "specification": name,
                "estimate": estimate,
                "truth": truth["colonial_tie"],
                "tolerance": SELFTEST_TOLERANCE,
                "ok": abs(estimate - truth["colonial_tie"]) <= SELFTEST_TOLERANCE,
            }
        )
    payload = {
        "seed": config.seed,
        "truth": truth,
        "regressions": formatting.regression_to_dict(table),
        "checks": checks,
        "ok": all(c["ok"] for c in checks),
    }
    lines = [
        f"seed {config.seed}: true tie coefficient {truth['colonial_tie']:.3f}",
        *(
            f"  {c['specification']:13s} estimate {c['estimate']:.3f}  "
            f"{'ok' if c['ok'] else 'FAIL'} (tolerance {c['tolerance']:.2f})"
            for c in checks
        ),
        "PASS" if payload["ok"] else "FAIL",
    ]
    rows = [[c["specification"], c["estimate"], c["truth"], c["tolerance"], c["ok"]] for c in checks]
    out.emit(
        config,
        payload,
        header=["specification", "estimate", "truth", "tolerance", "ok"],
        rows=rows,
        text="\n".join(lines),
    )
    if not payload["ok"]:
        raise EstimationError("selftest estimates outside tolerance")


_COMMANDS = {
    "stats": _cmd_stats,
    "flows": _cmd_flows,
    "bestxi": _cmd_bestxi,
    "gravity": _cmd_gravity,
    "colonial": _cmd_colonial,
    "mapdata": _cmd_mapdata,
    "corridors": _cmd_corridors,
    "selftest": _cmd_selftest,
}


def run(config: RunConfig) -> list[str]:
    """Execute one subcommand; returns the artifact names written."""
    out = _Outputs()
    inputs = _inputs_used(config)

    def flush() -> list[str]:
        config.out.mkdir(parents=True, exist_ok=True)
        for name, data in out.files:
            _atomic_write(config.out, name, data)
        return [name for name, _ in out.files]

    try:
        _COMMANDS[config.command](config, out)
    except Exception as exc:
        # keep whatever rendered cleanly, but flag the run as failed
        names = flush()
        _write_manifest(config, inputs, names, "failed", str(exc))
        raise
    names = flush()
    _write_manifest(config, inputs, names, "ok", None)
    return names


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = RunConfig(
        command=args.command,
        players=args.players,
        wdi=args.wdi,
        colonial=args.colonial,
        overrides=args.overrides,
        out=args.out,
        format=args.format,
        seed=args.seed,
        top=getattr(args, "top", 15),
    )
    try:
        run(config)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EstimationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
