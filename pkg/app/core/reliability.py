"""Reliability functions of the demand distribution and their price grids.

m(p)   mean residual demand, ∫_p^∞ F̄ / F̄(p), and 0 for p >= H
ℓ(p)   generalized MRD, m(p)/p, the inverse price elasticity of expected demand
h(p)   hazard rate f/F̄;  g(p) = p·h(p) the generalized failure rate
R(p)   expected revenue p·E(α − p)₊ = p·m(p)·F̄(p)
"""

import math
from typing import IO, Iterable, Optional, Union

import numpy as np
import pandas as pd

from app.core.distributions.base import DemandDistribution
from app.core.errors import BeyondSupportError, DemandModelError, DomainError, MissingDensityError
from app.core.numerics import UNDERFLOW_SURVIVAL, config_tolerances, price_points
from app.logging.logging_config import reliability_logger
from app.logging.logging_decorator import log_function_call
from app.models.model_pydantic import NumericConfig, ReliabilityCurves

CURVE_COLUMNS = {
    "m": "m_values",
    "l": "l_values",
    "h": "h_values",
    "g": "g_values",
    "eps": "eps_values",
    "R": "r_values",
}


def _check_price(p: float):
    if not p >= 0:
        raise DomainError(f"price must be nonnegative, got {p}")


def _checked_survival(dist: DemandDistribution, p: float) -> float:
    s = dist.survival(p)
    if s < UNDERFLOW_SURVIVAL:
        raise BeyondSupportError(f"survival of {dist.label} underflows at p={p:.6g}")
    return s


def surplus(dist: DemandDistribution, p: float) -> float:
    """Expected demand at price p, E(α − p)₊ = ∫_p^∞ F̄(u) du."""
    _check_price(p)
    return dist.tail_integral(p)


def mrd(dist: DemandDistribution, p: float) -> float:
    _check_price(p)
    if p >= dist.support_upper:
        return 0.0
    s = _checked_survival(dist, p)
    closed = dist.closed_forms.mrd
    if closed is not None and p >= dist.support_lower:
        return float(closed(p))
    return dist.tail_integral(p) / s


def gmrd(dist: DemandDistribution, p: float) -> float:
    if not 0 < p < dist.support_upper:
        raise DomainError(f"GMRD is defined on (0, H), got p={p} for {dist.label}")
    return mrd(dist, p) / p


def elasticity(dist: DemandDistribution, p: float) -> float:
    """Price elasticity of expected demand, 1/ℓ(p)."""
    return 1.0 / gmrd(dist, p)


def hazard(dist: DemandDistribution, p: float) -> float:
    if not dist.has_density:
        raise MissingDensityError(f"hazard needs a density; {dist.label} has none")
    if not dist.support_lower <= p < dist.support_upper:
        raise DomainError(
            f"hazard is evaluated on [L, H) = [{dist.support_lower:g}, {dist.support_upper:g}), got p={p}"
        )
    closed = dist.closed_forms.hazard
    if closed is not None:
        return float(closed(p))
    return dist.density(p) / _checked_survival(dist, p)


def gfr(dist: DemandDistribution, p: float) -> float:
    return p * hazard(dist, p)


def mrd_derivative(dist: DemandDistribution, p: float) -> float:
    """m′(p) = h(p)·m(p) − 1."""
    return hazard(dist, p) * mrd(dist, p) - 1.0


def expected_revenue(dist: DemandDistribution, p: float) -> float:
    _check_price(p)
    if p >= dist.support_upper:
        return 0.0
    # p·m·F̄ with the survival factor cancelled, so deep tails do not underflow
    return p * dist.tail_integral(p)


def single_unit_revenue(dist: DemandDistribution, p: float) -> float:
    """Revenue when one unit is sold to a buyer with reservation price α."""
    _check_price(p)
    return p * dist.survival(p)


def price_grid(dist: DemandDistribution, points: int) -> np.ndarray:
    """Prices spanning the 0.1% to 99.9% quantiles, clipped to (0, H).

    Log-spaced when the support is unbounded, linear otherwise.
    """
    lo = dist.quantile(0.001)
    hi = dist.quantile(0.999)
    if lo <= 0:
        lo = hi * 1e-6
    hi = min(hi, np.nextafter(dist.support_upper, 0.0))
    grid = price_points(lo, hi, points, log=not dist.bounded)
    return np.unique(grid[(grid > 0) & (grid < dist.support_upper)])


def _safe(fn, dist: DemandDistribution, p: float) -> Optional[float]:
    try:
        value = fn(dist, p)
    except DemandModelError as e:
        reliability_logger.debug(f"{fn.__name__}({p:.6g}) missing: {e}")
        return None
    return value if math.isfinite(value) else None


@log_function_call(reliability_logger)
@config_tolerances
def curves(dist: DemandDistribution, config: NumericConfig, grid: Optional[Iterable[float]] = None) -> ReliabilityCurves:
    """Evaluate every available function on the price grid; failures become missing values."""
    prices = price_grid(dist, config.grid_points) if grid is None else np.asarray(list(grid), dtype=float)
    prices = [float(p) for p in prices]
    m_values = [_safe(mrd, dist, p) for p in prices]
    l_values = [m / p if m is not None and p > 0 else None for m, p in zip(m_values, prices)]
    eps_values = [1.0 / v if v else None for v in l_values]
    r_values = [_safe(expected_revenue, dist, p) for p in prices]
    h_values = g_values = None
    if dist.has_density:
        h_values = [_safe(hazard, dist, p) for p in prices]
        g_values = [p * h if h is not None else None for h, p in zip(h_values, prices)]
    missing = sum(v is None for v in m_values)
    if missing:
        reliability_logger.warning(f"{missing} of {len(prices)} MRD values missing for {dist.label}")
    return ReliabilityCurves(
        grid=prices,
        m_values=m_values,
        l_values=l_values,
        h_values=h_values,
        g_values=g_values,
        eps_values=eps_values,
        r_values=r_values,
    )


def curves_frame(result: ReliabilityCurves, functions: Optional[Iterable[str]] = None) -> pd.DataFrame:
    """Tabulate curves in `p,m,l,h,g,eps,R` column order, restricted to ``functions``."""
    wanted = list(CURVE_COLUMNS) if functions is None else list(functions)
    unknown = [name for name in wanted if name not in CURVE_COLUMNS]
    if unknown:
        raise DomainError(f"unknown curve functions {unknown}; expected a subset of {list(CURVE_COLUMNS)}")
    columns = {"p": result.grid}
    for name in CURVE_COLUMNS:
        if name in wanted:
            values = getattr(result, CURVE_COLUMNS[name])
            columns[name] = values if values is not None else [None] * len(result.grid)
    return pd.DataFrame(columns, dtype=float)


def write_curves_csv(
    result: ReliabilityCurves,
    target: Union[str, IO[str], None] = None,
    functions: Optional[Iterable[str]] = None,
) -> Optional[str]:
    """CSV with 17 significant digits and empty fields for missing values.

    Returns the text when no target is given.
    """
    return curves_frame(result, functions).to_csv(target, index=False, float_format="%.17g", na_rep="")
