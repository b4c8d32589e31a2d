"""Plain-text and JSON rendering helpers.

Text tables print euro amounts in millions with one decimal and
thousands separators; JSON and delimited output carry raw euros so
downstream tooling never has to undo display rounding.
"""

from __future__ import annotations

import math

from .gravity import RegressionTable

__all__ = [
    "eur_m",
    "pct",
    "align_table",
    "render_regression_text",
    "regression_to_dict",
]


def eur_m(euros: float | int | None, decimals: int = 1) -> str:
    """Euros rendered in millions, e.g. 3390500000 -> '3,390.5'."""
    if euros is None:
        return "NA"
    return f"{euros / 1e6:,.{decimals}f}"


def pct(value: float | None, decimals: int = 1) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NA"
    return f"{value:.{decimals}f}"


def align_table(headers: list[str], rows: list[list[str]], indent: str = "") -> str:
    """Column-aligned text table; first column left, the rest right."""
    table = [headers] + rows
    widths = [max(len(str(r[i])) for r in table) for i in range(len(headers))]
    lines = []
    for r, row in enumerate(table):
        cells = [
            str(cell).ljust(widths[i]) if i == 0 else str(cell).rjust(widths[i])
            for i, cell in enumerate(row)
        ]
        lines.append((indent + "  ".join(cells)).rstrip())
        if r == 0:
            lines.append(indent + "-" * (sum(widths) + 2 * (len(widths) - 1)))
    return "\n".join(lines)


def _coef_cell(column, name: str) -> tuple[str, str]:
    if name not in column.fit.columns:
        return "", ""
    coef = column.fit.coef(name)
    se = column.fit.coef_se(name)
    return f"{coef:.3f}{column.fit.stars(name)}", f"({se:.3f})"


def render_regression_text(table: RegressionTable) -> str:
    """Aligned coefficient table, standard errors in parentheses beneath."""
    headers = ["", *(col.label for col in table.columns)]
    rows: list[list[str]] = []
    for name in table.covariate_order:
        cells = [_coef_cell(col, name) for col in table.columns]
        if all(c == ("", "") for c in cells):
            continue
        rows.append([name, *(c[0] for c in cells)])
        rows.append(["", *(c[1] for c in cells)])
    rows.append(["Destination FE", *("yes" if col.fit.fe != "none" else "no" for col in table.columns)])
    rows.append(["Estimator", *(col.fit.estimator for col in table.columns)])
    rows.append(["Observations", *(f"{col.n_obs:,}" for col in table.columns)])
    body = align_table(headers, rows)
    note = "Stars: * p<0.10, ** p<0.05, *** p<0.01. SEs two-way clustered by origin and destination."
    return body + "\n" + note


def regression_to_dict(table: RegressionTable) -> dict:
    """JSON-ready structure with full-precision coefficients."""
    columns = []
    for col in table.columns:
        coefficients = {}
        for name in col.fit.columns:
            if name.startswith("fe_"):
                continue
            coefficients[name] = {
                "coef": col.fit.coef(name),
                "se": col.fit.coef_se(name),
                "pvalue": col.fit.pvalue(name),
                "stars": col.fit.stars(name),
            }
        columns.append(
            {
                "name": col.name,
                "label": col.label,
                "estimator": col.fit.estimator,
                "fixed_effects": col.fit.fe,
                "n_obs": col.n_obs,
                "iterations": col.fit.iterations,
                "coefficients": coefficients,
            }
        )
    return {"columns": columns}
