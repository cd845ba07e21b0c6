"""Combinators building new demand distributions from existing ones.

Every combinator returns a fresh immutable DemandDistribution. When all the
inputs were built from a DistributionSpec, the result carries the composed spec
too, so it can be serialized again.
"""

import math
from typing import Callable, Optional, Sequence

import numpy as np

from app.core.distributions.base import ClosedForms, DemandDistribution
from app.core.errors import BeyondSupportError, InvalidParameterError, InverseMismatchError, MissingDensityError
from app.core.numerics import UNDERFLOW_SURVIVAL, integrate_tail
from app.logging.logging_config import distribution_logger

WEIGHT_SUM_TOL = 1e-12
INVERSE_CHECK_POINTS = 32
INVERSE_CHECK_TOL = 1e-9


def _child_spec(*dists: DemandDistribution) -> bool:
    return all(d.spec is not None for d in dists)


def _apply(fn: Callable, values: np.ndarray) -> np.ndarray:
    """Apply a user map elementwise, whether or not it accepts arrays."""
    try:
        out = np.asarray(fn(values), dtype=float)
        if out.shape == values.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.vectorize(fn, otypes=[float])(values)


def mixture(components: Sequence[DemandDistribution], weights: Sequence[float]) -> DemandDistribution:
    """Convex combination Σ wᵢ Fᵢ. Components may overlap or be disjoint."""
    components = list(components)
    weights = [float(w) for w in weights]
    if not components:
        raise InvalidParameterError("mixture needs at least one component")
    if len(components) != len(weights):
        raise InvalidParameterError(
            f"mixture has {len(components)} components but {len(weights)} weights"
        )
    if any(not math.isfinite(w) or w < 0 for w in weights):
        raise InvalidParameterError(f"mixture weights must be nonnegative, got {weights}")
    if abs(math.fsum(weights) - 1.0) > WEIGHT_SUM_TOL:
        raise InvalidParameterError(f"mixture weights must sum to 1, got {math.fsum(weights)!r}")

    pairs = list(zip(weights, components))
    probs = np.asarray(weights) / math.fsum(weights)

    def survival(x):
        return sum(w * d.survival(x) for w, d in pairs)

    density = None
    if all(d.has_density for d in components):
        def density(x):
            return sum(w * d.density(x) for w, d in pairs)

    def tail(p):
        return sum(w * d.tail_integral(p) for w, d in pairs if w > 0)

    def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
        which = rng.choice(len(components), size=n, p=probs)
        out = np.empty(n, dtype=float)
        for i, d in enumerate(components):
            mask = which == i
            count = int(mask.sum())
            if count:
                out[mask] = d.draw(rng, count)
        return out

    means = [d.closed_forms.mean for d in components]
    breakpoints = set()
    for d in components:
        breakpoints.update(d.breakpoints)
        breakpoints.add(d.support_lower)
        if d.bounded:
            breakpoints.add(d.support_upper)

    dist = DemandDistribution(
        support_lower=min(d.support_lower for d in components),
        support_upper=max(d.support_upper for d in components),
        survival_fn=survival,
        density_fn=density,
        label="mixture(" + ", ".join(f"{w:g}*{d.label}" for w, d in pairs) + ")",
        closed_forms=ClosedForms(
            tail=tail,
            sampler=sampler,
            mean=math.fsum(w * m for w, m in zip(weights, means)) if None not in means else None,
        ),
        breakpoints=tuple(sorted(breakpoints)),
    )
    distribution_logger.debug(f"built {dist.label}")
    if _child_spec(*components):
        return dist.with_spec(
            {"op": "mixture", "weights": weights, "components": [d.spec for d in components]}
        )
    return dist


def demand_scenarios(
    low: DemandDistribution,
    modal: DemandDistribution,
    high: DemandDistribution,
    weights: Sequence[float],
) -> DemandDistribution:
    """Low / modal / high market belief as a mixture over increasing, disjoint ranges."""
    parts = (low, modal, high)
    if len(weights) != 3:
        raise InvalidParameterError(f"demand_scenarios takes three weights, got {len(weights)}")
    for left, right in zip(parts, parts[1:]):
        if left.support_upper > right.support_lower:
            raise InvalidParameterError(
                f"scenario supports must be disjoint and increasing: {left.label} overlaps {right.label}"
            )
    return mixture(parts, weights)


def scale(dist: DemandDistribution, factor: float) -> DemandDistribution:
    """Distribution of λX for λ > 0."""
    lam = float(factor)
    if not (math.isfinite(lam) and lam > 0):
        raise InvalidParameterError(f"scale factor must be positive, got {factor}")
    cf = dist.closed_forms

    density = None
    if dist.has_density:
        def density(x):
            return dist.density(x / lam) / lam

    result = DemandDistribution(
        support_lower=dist.support_lower * lam,
        support_upper=dist.support_upper * lam,
        survival_fn=lambda x: dist.survival(x / lam),
        density_fn=density,
        label=f"scale({dist.label}, {lam:g})",
        closed_forms=ClosedForms(
            tail=lambda p: lam * dist.tail_integral(p / lam),
            mrd=(lambda p: lam * cf.mrd(p / lam)) if cf.mrd else None,
            hazard=(lambda p: cf.hazard(p / lam) / lam) if cf.hazard else None,
            quantile=(lambda q: lam * cf.quantile(q)) if cf.quantile else None,
            sampler=lambda rng, n: lam * dist.draw(rng, n),
            mean=lam * cf.mean if cf.mean is not None else None,
        ),
        breakpoints=tuple(b * lam for b in dist.breakpoints),
    )
    if _child_spec(dist):
        return result.with_spec({"op": "scale", "factor": lam, "of": dist.spec})
    return result


def shift(dist: DemandDistribution, offset: float) -> DemandDistribution:
    """Distribution of X + β; the shifted support must stay nonnegative."""
    beta = float(offset)
    if not math.isfinite(beta):
        raise InvalidParameterError(f"shift offset must be finite, got {offset}")
    if dist.support_lower + beta < 0:
        raise InvalidParameterError(
            f"shift by {beta:g} would move the support below zero (L={dist.support_lower:g})"
        )
    cf = dist.closed_forms

    density = None
    if dist.has_density:
        def density(x):
            return dist.density(x - beta)

    result = DemandDistribution(
        support_lower=dist.support_lower + beta,
        support_upper=dist.support_upper + beta,
        survival_fn=lambda x: dist.survival(x - beta),
        density_fn=density,
        label=f"shift({dist.label}, {beta:g})",
        closed_forms=ClosedForms(
            tail=lambda p: dist.tail_integral(p - beta),
            mrd=(lambda p: cf.mrd(p - beta)) if cf.mrd else None,
            hazard=(lambda p: cf.hazard(p - beta)) if cf.hazard else None,
            quantile=(lambda q: cf.quantile(q) + beta) if cf.quantile else None,
            sampler=lambda rng, n: dist.draw(rng, n) + beta,
            mean=cf.mean + beta if cf.mean is not None else None,
        ),
        breakpoints=tuple(b + beta for b in dist.breakpoints),
    )
    if _child_spec(dist):
        return result.with_spec({"op": "shift", "offset": beta, "of": dist.spec})
    return result


def _inverse_check_points(dist: DemandDistribution) -> np.ndarray:
    lower = dist.support_lower
    if dist.bounded:
        return np.linspace(lower, dist.support_upper, INVERSE_CHECK_POINTS + 2)[1:-1]
    return lower + np.geomspace(1e-3, 1e3, INVERSE_CHECK_POINTS) * max(1.0, lower)


def monotone_transform(
    dist: DemandDistribution,
    phi: Callable[[float], float],
    phi_inv: Callable[[float], float],
    phi_deriv: Callable[[float], float],
    *,
    label: Optional[str] = None,
) -> DemandDistribution:
    """Distribution of φ(X) for a strictly increasing φ with known inverse and derivative."""
    xs = _inverse_check_points(dist)
    ys = _apply(phi, xs)
    if not np.all(np.diff(ys) > 0):
        raise InvalidParameterError("transform is not strictly increasing on the support")
    round_trip = _apply(phi, _apply(phi_inv, ys))
    mismatch = np.abs(round_trip - ys) / np.maximum(1.0, np.abs(ys))
    if not np.all(mismatch <= INVERSE_CHECK_TOL):
        worst = int(np.argmax(mismatch))
        raise InverseMismatchError(
            f"phi(phi_inv(y)) != y at y={ys[worst]:.6g} (relative error {mismatch[worst]:.3g})"
        )

    lower = float(phi(dist.support_lower))
    if lower < 0:
        raise InvalidParameterError(f"transform maps the support below zero (phi(L)={lower:g})")
    try:
        upper = float(phi(dist.support_upper))
    except (OverflowError, ValueError):
        upper = math.inf
    if math.isnan(upper):
        upper = math.inf
    cf = dist.closed_forms

    def preimage(y):
        # an inverse that overflows puts y beyond the image of the support
        try:
            return float(phi_inv(y))
        except (OverflowError, ValueError):
            return math.inf

    density = None
    if dist.has_density:
        def density(y):
            x = preimage(y)
            if x >= dist.support_upper:
                return 0.0
            slope = phi_deriv(x)
            if slope == 0:
                return math.inf
            return dist.density(x) / slope

    hazard = None
    if cf.hazard is not None:
        def hazard(y):
            x = preimage(y)
            if not math.isfinite(x):
                return math.inf
            return cf.hazard(x) / phi_deriv(x)

    result = DemandDistribution(
        support_lower=lower,
        support_upper=upper,
        survival_fn=lambda y: dist.survival(preimage(y)),
        density_fn=density,
        label=label or f"transform({dist.label})",
        closed_forms=ClosedForms(
            hazard=hazard,
            quantile=(lambda q: _apply(phi, np.asarray(cf.quantile(q), dtype=float))) if cf.quantile else None,
            sampler=lambda rng, n: _apply(phi, dist.draw(rng, n)),
        ),
        breakpoints=tuple(float(phi(b)) for b in dist.breakpoints if math.isfinite(b)),
    )
    distribution_logger.debug(f"built {result.label}")
    return result


def power(dist: DemandDistribution, exponent: float) -> DemandDistribution:
    """Distribution of X^a, the concave power map when 0 < a <= 1."""
    a = float(exponent)
    if not (math.isfinite(a) and a > 0):
        raise InvalidParameterError(f"power exponent must be positive, got {exponent}")
    if a > 1:
        distribution_logger.warning(
            f"power exponent {a:g} > 1 is convex; MRD closure does not apply to {dist.label}"
        )

    def deriv(x):
        if x > 0:
            return a * x ** (a - 1.0)
        if a < 1:
            return math.inf
        return 1.0 if a == 1 else 0.0

    result = monotone_transform(
        dist,
        lambda x: x ** a,
        lambda y: y ** (1.0 / a),
        deriv,
        label=f"power({dist.label}, {a:g})",
    )
    if _child_spec(dist):
        return result.with_spec({"op": "power", "exponent": a, "of": dist.spec})
    return result


def left_truncate(dist: DemandDistribution, at: float) -> DemandDistribution:
    """Conditional law of X given X >= a, for L < a < H."""
    a = float(at)
    if not (dist.support_lower < a < dist.support_upper):
        raise InvalidParameterError(
            f"truncation point {a:g} must lie inside ({dist.support_lower:g}, {dist.support_upper:g})"
        )
    kept = dist.survival(a)
    if kept < UNDERFLOW_SURVIVAL:
        raise BeyondSupportError(f"survival at truncation point {a:g} underflows")
    cf = dist.closed_forms

    density = None
    if dist.has_density:
        def density(x):
            return dist.density(x) / kept

    quantile = None
    if cf.quantile is not None:
        def quantile(q):
            return cf.quantile(1.0 - (1.0 - np.asarray(q, dtype=float)) * kept)

    result = DemandDistribution(
        support_lower=a,
        support_upper=dist.support_upper,
        survival_fn=lambda x: dist.survival(x) / kept,
        density_fn=density,
        label=f"truncate_left({dist.label}, {a:g})",
        closed_forms=ClosedForms(
            tail=lambda p: dist.tail_integral(p) / kept,
            # the residual law beyond p >= a is unchanged by conditioning
            mrd=cf.mrd,
            hazard=cf.hazard,
            quantile=quantile,
        ),
        breakpoints=tuple(sorted({a, *(b for b in dist.breakpoints if b > a)})),
    )
    if _child_spec(dist):
        return result.with_spec({"op": "truncate_left", "at": a, "of": dist.spec})
    return result


def convolve(d1: DemandDistribution, d2: DemandDistribution) -> DemandDistribution:
    """Distribution of X + Y for independent X ~ d1 (with density) and Y ~ d2.

    F̄(t) = F̄₁(t) + ∫ F̄₂(t − u) f₁(u) du over u < t. The result exposes no
    density; its tail integral is E Y·F̄₁(p) + tail₁(p) + ∫ f₁(u) tail₂(p − u) du.
    """
    if not d1.has_density:
        raise MissingDensityError(f"convolve needs a density on the first operand, {d1.label} has none")
    lo1, hi1 = d1.support_lower, d1.support_upper

    def kinks(t):
        return tuple(d1.breakpoints) + tuple(t - b for b in (*d2.breakpoints, d2.support_lower))

    def survival(t):
        upper = min(t, hi1)
        inner = integrate_tail(
            lambda u: d2.survival(t - u) * d1.density(u), lo1, upper, points=kinks(t)
        )
        return d1.survival(t) + inner

    def tail(p):
        upper = min(p, hi1)
        inner = integrate_tail(
            lambda u: d1.density(u) * d2.tail_integral(p - u), lo1, upper, points=kinks(p)
        )
        return d2.mean * d1.survival(p) + d1.tail_integral(p) + inner

    result = DemandDistribution(
        support_lower=lo1 + d2.support_lower,
        support_upper=hi1 + d2.support_upper,
        survival_fn=survival,
        label=f"convolve({d1.label}, {d2.label})",
        closed_forms=ClosedForms(
            tail=tail,
            sampler=lambda rng, n: d1.draw(rng, n) + d2.draw(rng, n),
        ),
    )
    distribution_logger.debug(f"built {result.label}")
    if _child_spec(d1, d2):
        return result.with_spec({"op": "convolve", "of": [d1.spec, d2.spec]})
    return result


__all__ = [
    "mixture",
    "demand_scenarios",
    "scale",
    "shift",
    "monotone_transform",
    "power",
    "left_truncate",
    "convolve",
]
