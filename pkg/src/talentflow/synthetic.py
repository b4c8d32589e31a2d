"""Synthetic corridor generator for estimator self-tests.

Draws a bilateral dataset from the same multiplicative model the
estimators target: player counts are Poisson in the covariates and the
pair-level tie indicator, corridor value is a compound sum of lognormal
player values. Estimates on either outcome should recover the
generating slopes; the value outcome only shifts the intercept by the
log of the mean player value.
"""

from __future__ import annotations

import numpy as np

from .countries import CountryEntity
from .gravity import GravityObservation

__all__ = ["synthetic_gravity", "TRUE_SLOPES"]

TRUE_SLOPES = {
    "log_pop_o": 0.15,
    "log_gdppc_o": 0.05,
    "log_pop_d": 0.12,
    "log_gdppc_d": 0.30,
}
_INTERCEPT = -7.1
_TIE_RATE = 0.08
_LOG_VALUE_MEAN = 14.5  # lognormal player values around 2 MEUR
_LOG_VALUE_SD = 1.0


def synthetic_gravity(
    n_corridors: int = 2000,
    seed: int = 2024,
    colonial_coef: float = 2.0,
    n_origins: int = 60,
    n_destinations: int = 40,
) -> tuple[list[GravityObservation], dict]:
    """Generate corridors plus the truth the estimators should recover.

    Returns (observations, truth); truth carries the slope on every
    covariate, the tie coefficient, and the count-model intercept.
    """
    if n_corridors > n_origins * n_destinations:
        raise ValueError("more corridors requested than distinct country pairs")
    rng = np.random.default_rng(seed)

    pop_o = rng.normal(16.0, 1.5, n_origins)
    pop_d = rng.normal(16.0, 1.5, n_destinations)
    gdppc_o = rng.normal(8.5, 1.0, n_origins)
    gdppc_d = rng.normal(9.0, 1.0, n_destinations)

    cells = rng.choice(n_origins * n_destinations, size=n_corridors, replace=False)
    oi = cells // n_destinations
    di = cells % n_destinations
    tie = (rng.random(n_corridors) < _TIE_RATE).astype(float)

    eta = (
        _INTERCEPT
        + TRUE_SLOPES["log_pop_o"] * pop_o[oi]
        + TRUE_SLOPES["log_gdppc_o"] * gdppc_o[oi]
        + TRUE_SLOPES["log_pop_d"] * pop_d[di]
        + TRUE_SLOPES["log_gdppc_d"] * gdppc_d[di]
        + colonial_coef * tie
    )
    counts = rng.poisson(np.exp(eta))
    values = np.zeros(n_corridors)
    for i, count in enumerate(counts):
        if count:
            values[i] = np.exp(rng.normal(_LOG_VALUE_MEAN, _LOG_VALUE_SD, count)).sum()

    def entity(prefix: str, index: int) -> CountryEntity:
        code = f"{prefix}{index:03d}"
        return CountryEntity(display_name=code, stats_code=code, wdi_code=code)

    origins = [entity("O", i) for i in range(n_origins)]
    destinations = [entity("D", i) for i in range(n_destinations)]
    observations = [
        GravityObservation(
            origin=origins[oi[i]],
            destination=destinations[di[i]],
            value=float(values[i]),
            count=int(counts[i]),
            log_pop_o=float(pop_o[oi[i]]),
            log_pop_d=float(pop_d[di[i]]),
            log_gdppc_o=float(gdppc_o[oi[i]]),
            log_gdppc_d=float(gdppc_d[di[i]]),
            colonial_tie=int(tie[i]),
            cluster_origin=origins[oi[i]].stats_code,
            cluster_dest=destinations[di[i]].stats_code,
        )
        for i in range(n_corridors)
    ]
    truth = {
        "colonial_tie": colonial_coef,
        **TRUE_SLOPES,
        "intercept": _INTERCEPT,
        "seed": seed,
        "n_corridors": n_corridors,
    }
    return observations, truth
