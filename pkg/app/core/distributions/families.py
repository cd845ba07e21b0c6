"""Closed-form demand families.

Each builder validates its parameters, then wires survival, density and
whatever analytic shortcuts the family admits into a DemandDistribution.
Shapes k <= 1 for the power-tailed families are rejected at construction
because they give E α = ∞.
"""

import math
from typing import Dict, Mapping

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import betainc, betaincinv, betaln, gamma as gamma_fn, gammaincc, gammaincinv, gammaln
from scipy.special import ndtr, ndtri

from app.core.distributions.base import ClosedForms, DemandDistribution
from app.core.errors import InvalidParameterError
from app.core.numerics import integrate_tail, quad_tolerances
from app.logging.logging_config import distribution_logger


_SQRT_2PI = math.sqrt(2.0 * math.pi)
# the standard normal density underflows to zero beyond this
_NORMAL_CUTOFF = 40.0


def _normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / _SQRT_2PI


def _require(condition: bool, message: str):
    if not condition:
        raise InvalidParameterError(message)


def _param(params: Mapping[str, float], name: str, family: str, default=None) -> float:
    if name in params:
        value = params[name]
    elif default is not None:
        value = default
    else:
        raise InvalidParameterError(f"{family}: missing parameter {name!r}")
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"{family}: parameter {name!r} must be a number, got {value!r}")
    _require(math.isfinite(value), f"{family}: parameter {name!r} must be finite")
    return value


def uniform(L: float, H: float) -> DemandDistribution:
    _require(0.0 <= L < H < math.inf, f"uniform requires 0 <= L < H < inf, got L={L}, H={H}")
    width = H - L

    def tail(p):
        return (H - p) ** 2 / (2.0 * width)

    return DemandDistribution(
        support_lower=L,
        support_upper=H,
        survival_fn=lambda x: (H - x) / width,
        density_fn=lambda x: 1.0 / width,
        label=f"uniform(L={L:g}, H={H:g})",
        closed_forms=ClosedForms(
            tail=tail,
            mrd=lambda p: (H - p) / 2.0,
            hazard=lambda p: 1.0 / (H - p),
            quantile=lambda q: L + q * width,
            mean=0.5 * (L + H),
        ),
        breakpoints=(L, H),
    )


def exponential(rate: float) -> DemandDistribution:
    _require(rate > 0, f"exponential requires rate > 0, got {rate}")
    return DemandDistribution(
        support_lower=0.0,
        support_upper=math.inf,
        survival_fn=lambda x: math.exp(-rate * x),
        density_fn=lambda x: rate * math.exp(-rate * x),
        label=f"exponential(rate={rate:g})",
        closed_forms=ClosedForms(
            tail=lambda p: math.exp(-rate * p) / rate,
            mrd=lambda p: 1.0 / rate,
            hazard=lambda p: rate,
            quantile=lambda q: -np.log1p(-q) / rate,
            mean=1.0 / rate,
        ),
    )


def pareto1(L: float, k: float) -> DemandDistribution:
    """Pareto of the first kind: F̄(x) = (L/x)^k for x >= L."""
    _require(L > 0, f"pareto1 requires L > 0, got {L}")
    _require(k > 1, f"pareto1 requires k > 1 (finite mean), got k={k}")
    return DemandDistribution(
        support_lower=L,
        support_upper=math.inf,
        survival_fn=lambda x: (L / x) ** k,
        density_fn=lambda x: k * L**k * x ** (-k - 1.0),
        label=f"pareto1(L={L:g}, k={k:g})",
        closed_forms=ClosedForms(
            tail=lambda p: L**k * p ** (1.0 - k) / (k - 1.0),
            mrd=lambda p: p / (k - 1.0),
            hazard=lambda p: k / p,
            quantile=lambda q: L * (1.0 - q) ** (-1.0 / k),
            mean=k * L / (k - 1.0),
        ),
        breakpoints=(L,),
    )


def lomax(A: float, B: float, k: float) -> DemandDistribution:
    """Pareto of the second kind with location A: F̄(x) = (B/(x − A + B))^k for x >= A."""
    _require(A >= 0, f"lomax requires A >= 0, got {A}")
    _require(B > 0, f"lomax requires B > 0, got {B}")
    _require(k > 1, f"lomax requires k > 1 (finite mean), got k={k}")
    return DemandDistribution(
        support_lower=A,
        support_upper=math.inf,
        survival_fn=lambda x: (B / (x - A + B)) ** k,
        density_fn=lambda x: (k / B) * (B / (x - A + B)) ** (k + 1.0),
        label=f"lomax(A={A:g}, B={B:g}, k={k:g})",
        closed_forms=ClosedForms(
            tail=lambda p: B**k * (p - A + B) ** (1.0 - k) / (k - 1.0),
            mrd=lambda p: (p - A + B) / (k - 1.0),
            hazard=lambda p: k / (p - A + B),
            quantile=lambda q: A + B * ((1.0 - q) ** (-1.0 / k) - 1.0),
            mean=A + B / (k - 1.0),
        ),
        breakpoints=(A,) if A > 0 else (),
    )


def birnbaum_saunders(a: float, beta: float) -> DemandDistribution:
    """Fatigue-life law; survival through the normal CDF of (√(x/β) − √(β/x))/a."""
    _require(a > 0, f"birnbaum_saunders requires a > 0, got {a}")
    _require(beta > 0, f"birnbaum_saunders requires beta > 0, got {beta}")
    norm_const = 1.0 / (2.0 * a * math.sqrt(2.0 * math.pi))
    mean = beta * (1.0 + 0.5 * a * a)

    def survival(x):
        if x <= 0:
            return 1.0
        return float(ndtr((math.sqrt(beta / x) - math.sqrt(x / beta)) / a))

    def density(x):
        if x <= 0:
            return 0.0
        r, s = math.sqrt(x / beta), math.sqrt(beta / x)
        return norm_const / x * (r + s) * math.exp(-((r - s) ** 2) / (2.0 * a * a))

    def quantile(q):
        w = 0.5 * a * ndtri(q)
        root = np.sqrt(w * w + 1.0) + np.abs(w)
        # w + sqrt(w²+1) without cancellation for negative w
        return beta * np.where(w >= 0, root, 1.0 / root) ** 2

    def from_normal(z):
        w = 0.5 * a * z
        root = math.sqrt(w * w + 1.0) + abs(w)
        return beta * (root if w >= 0 else 1.0 / root) ** 2

    def tail(p):
        if p <= 0:
            return mean
        # α = x(Z) with Z standard normal; α > p iff Z > z_p
        z_p = (math.sqrt(p / beta) - math.sqrt(beta / p)) / a
        if z_p >= _NORMAL_CUTOFF:
            return 0.0
        return integrate_tail(
            lambda z: (from_normal(z) - p) * _normal_pdf(z), max(z_p, -_NORMAL_CUTOFF),
            abs_tol=max(quad_tolerances()[0] * survival(p), 1e-300),
        )

    return DemandDistribution(
        support_lower=0.0,
        support_upper=math.inf,
        survival_fn=survival,
        density_fn=density,
        label=f"birnbaum_saunders(a={a:g}, beta={beta:g})",
        closed_forms=ClosedForms(tail=tail, quantile=quantile, mean=mean),
    )


def loglogistic(k: float, scale: float = 1.0) -> DemandDistribution:
    _require(k > 1, f"loglogistic requires shape k > 1 (finite mean), got k={k}")
    _require(scale > 0, f"loglogistic requires scale > 0, got {scale}")
    s = scale
    inv = 1.0 / k
    mean = s * beta_fn(inv, 1.0 - inv) / k

    def survival(x):
        return 1.0 / (1.0 + (x / s) ** k)

    def hazard(x):
        z = (x / s) ** k
        return (k / x) * z / (1.0 + z)

    return DemandDistribution(
        support_lower=0.0,
        support_upper=math.inf,
        survival_fn=survival,
        density_fn=lambda x: (k / s) * (x / s) ** (k - 1.0) / (1.0 + (x / s) ** k) ** 2,
        label=f"loglogistic(k={k:g}, scale={s:g})",
        closed_forms=ClosedForms(
            # substitute t = F(u): the tail becomes an incomplete beta integral
            tail=lambda p: mean * float(betainc(1.0 - inv, inv, survival(p))),
            hazard=lambda p: hazard(p) if p > 0 else 0.0,
            quantile=lambda q: s * (q / (1.0 - q)) ** inv,
            mean=mean,
        ),
    )


def weibull(shape: float, scale: float = 1.0) -> DemandDistribution:
    _require(shape > 0, f"weibull requires shape > 0, got {shape}")
    _require(scale > 0, f"weibull requires scale > 0, got {scale}")
    c, s = shape, scale
    mean = s * gamma_fn(1.0 + 1.0 / c)
    return DemandDistribution(
        support_lower=0.0,
        support_upper=math.inf,
        survival_fn=lambda x: math.exp(-((x / s) ** c)),
        density_fn=lambda x: (c / s) * (x / s) ** (c - 1.0) * math.exp(-((x / s) ** c)),
        label=f"weibull(shape={c:g}, scale={s:g})",
        closed_forms=ClosedForms(
            tail=lambda p: (s / c) * gamma_fn(1.0 / c) * float(gammaincc(1.0 / c, (p / s) ** c)),
            hazard=lambda p: (c / s) * (p / s) ** (c - 1.0),
            quantile=lambda q: s * (-np.log1p(-q)) ** (1.0 / c),
            mean=mean,
        ),
    )


def gamma(shape: float, scale: float = 1.0) -> DemandDistribution:
    _require(shape > 0, f"gamma requires shape > 0, got {shape}")
    _require(scale > 0, f"gamma requires scale > 0, got {scale}")
    a, s = shape, scale
    log_norm = gammaln(a) + a * math.log(s)

    def density(x):
        if x <= 0:
            return 0.0 if a > 1 else (1.0 / s if a == 1 else math.inf)
        return math.exp((a - 1.0) * math.log(x) - x / s - log_norm)

    def tail(p):
        z = p / s
        return a * s * float(gammaincc(a + 1.0, z)) - p * float(gammaincc(a, z))

    return DemandDistribution(
        support_lower=0.0,
        support_upper=math.inf,
        survival_fn=lambda x: float(gammaincc(a, x / s)),
        density_fn=density,
        label=f"gamma(shape={a:g}, scale={s:g})",
        closed_forms=ClosedForms(
            tail=tail,
            quantile=lambda q: s * gammaincinv(a, q),
            mean=a * s,
        ),
    )


def beta(a: float, b: float, scale: float = 1.0) -> DemandDistribution:
    _require(a > 0 and b > 0, f"beta requires a, b > 0, got a={a}, b={b}")
    _require(scale > 0, f"beta requires scale > 0, got {scale}")
    log_norm = betaln(a, b)
    m1 = a / (a + b)

    def density(x):
        y = x / scale
        if y <= 0:
            return 0.0 if a > 1 else (b / scale if a == 1 else math.inf)
        return math.exp((a - 1.0) * math.log(y) + (b - 1.0) * math.log1p(-y) - log_norm) / scale

    def tail(p):
        y = p / scale
        # upper incomplete parts through the symmetry 1 − I_y(a, b) = I_{1−y}(b, a)
        upper_first = float(betainc(b, a + 1.0, 1.0 - y))
        upper_zero = float(betainc(b, a, 1.0 - y))
        return max(0.0, scale * m1 * upper_first - p * upper_zero)

    return DemandDistribution(
        support_lower=0.0,
        support_upper=scale,
        survival_fn=lambda x: float(betainc(b, a, 1.0 - x / scale)),
        density_fn=density,
        label=f"beta(a={a:g}, b={b:g}, scale={scale:g})",
        closed_forms=ClosedForms(
            tail=tail,
            quantile=lambda q: scale * betaincinv(a, b, q),
            mean=scale * m1,
        ),
        breakpoints=(scale,),
    )


# family-id -> (builder, ordered parameter names, defaults)
FAMILIES: Dict[str, tuple] = {
    "uniform": (uniform, ("L", "H"), {}),
    "exponential": (exponential, ("rate",), {}),
    "pareto1": (pareto1, ("L", "k"), {}),
    "lomax": (lomax, ("A", "B", "k"), {}),
    "birnbaum_saunders": (birnbaum_saunders, ("a", "beta"), {}),
    "loglogistic": (loglogistic, ("k", "scale"), {"scale": 1.0}),
    "weibull": (weibull, ("shape", "scale"), {"scale": 1.0}),
    "gamma": (gamma, ("shape", "scale"), {"scale": 1.0}),
    "beta": (beta, ("a", "b", "scale"), {"scale": 1.0}),
}


def make_family(name: str, params: Mapping[str, float]) -> DemandDistribution:
    """Build a closed-form family from its id and parameter map."""
    if name not in FAMILIES:
        raise InvalidParameterError(f"unknown family {name!r}; expected one of {sorted(FAMILIES)}")
    builder, names, defaults = FAMILIES[name]
    unexpected = set(params) - set(names)
    if unexpected:
        raise InvalidParameterError(f"{name}: unexpected parameters {sorted(unexpected)}")
    values = {n: _param(params, n, name, defaults.get(n)) for n in names}
    dist = builder(**values)
    distribution_logger.debug(f"built {dist.label}")
    return dist.with_spec({"family": name, **values})


__all__ = ["FAMILIES", "make_family"] + [name for name in FAMILIES]
