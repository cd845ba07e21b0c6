"""The demand-distribution value type.

A ``DemandDistribution`` describes the nonnegative, continuous demand level
α through its survival function. Families and combinators may register
closed forms (tail integral, MRD, hazard, quantile, sampler, mean); every
consumer falls back to quadrature or bisection when one is absent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from app.core.errors import (
    BracketError,
    DivergentIntegralError,
    DomainError,
    InvalidParameterError,
    MissingDensityError,
    QuadratureError,
)
from app.core.numerics import find_root, integrate_tail, quad_tolerances

ScalarFn = Callable[[float], float]
Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class ClosedForms:
    """Analytic shortcuts. Each callable is only asked about ``L <= p < H``."""

    tail: Optional[ScalarFn] = None
    mrd: Optional[ScalarFn] = None
    hazard: Optional[ScalarFn] = None
    quantile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sampler: Optional[Sampler] = None
    mean: Optional[float] = None


@dataclass(frozen=True)
class DemandDistribution:
    support_lower: float
    support_upper: float
    survival_fn: ScalarFn
    density_fn: Optional[ScalarFn] = None
    label: str = ""
    closed_forms: ClosedForms = field(default_factory=ClosedForms)
    breakpoints: tuple = ()
    spec: Optional[dict] = field(default=None, compare=False, hash=False)

    def __post_init__(self):
        if not (0.0 <= self.support_lower < self.support_upper):
            raise InvalidParameterError(
                f"support must satisfy 0 <= L < H, got L={self.support_lower}, H={self.support_upper}"
            )

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.support_upper)

    @property
    def has_density(self) -> bool:
        return self.density_fn is not None

    def survival(self, p: float) -> float:
        if p < self.support_lower:
            return 1.0
        if p >= self.support_upper:
            return 0.0
        return min(1.0, max(0.0, float(self.survival_fn(p))))

    def cdf(self, p: float) -> float:
        return 1.0 - self.survival(p)

    def density(self, p: float) -> float:
        if self.density_fn is None:
            raise MissingDensityError(f"{self.label} has no density")
        if p < self.support_lower or p >= self.support_upper:
            return 0.0
        return float(self.density_fn(p))

    def tail_integral(self, p: float) -> float:
        """∫_p^∞ F̄(u) du, i.e. the expected surplus E(α − p)₊."""
        if p >= self.support_upper:
            return 0.0
        lower = self.support_lower
        if p < lower:
            return (lower - p) + self.tail_integral(lower)
        if self.closed_forms.tail is not None:
            return float(self.closed_forms.tail(p))
        # absolute tolerance relative to F̄(p) keeps m = tail/F̄ accurate deep in the tail
        abs_tol = max(quad_tolerances()[0] * self.survival(p), 1e-300)
        return integrate_tail(self.survival, p, self.support_upper, points=self.breakpoints, abs_tol=abs_tol)

    @cached_property
    def mean(self) -> float:
        """Computed once, under the quadrature tolerances in force at first use."""
        if self.closed_forms.mean is not None:
            return float(self.closed_forms.mean)
        try:
            value = self.tail_integral(0.0)
        except QuadratureError as e:
            raise DivergentIntegralError(f"mean of {self.label} does not converge: {e}") from e
        if not math.isfinite(value):
            raise DivergentIntegralError(f"mean of {self.label} is infinite")
        return value

    def quantile(self, q: float) -> float:
        if not 0.0 < q < 1.0:
            raise DomainError(f"quantile level must lie in (0, 1), got {q}")
        if self.closed_forms.quantile is not None:
            return float(self.closed_forms.quantile(np.asarray(q, dtype=float)))
        target = 1.0 - q
        lo = self.support_lower
        if self.bounded:
            hi = self.support_upper
        else:
            hi = max(2.0 * lo, 1.0)
            doublings = 0
            while self.survival(hi) > target:
                hi *= 2.0
                doublings += 1
                if doublings > 1100:
                    raise BracketError(f"no upper bracket for quantile {q} of {self.label}")
        return find_root(lambda x: self.survival(x) - target, lo, hi, xtol=1e-14 * max(1.0, hi))

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` i.i.d. draws using the supplied generator."""
        if self.closed_forms.sampler is not None:
            return np.asarray(self.closed_forms.sampler(rng, n), dtype=float)
        u = rng.random(n)
        # Inverse CDF on open (0, 1); a zero draw maps to the lower support end
        u = np.where(u <= 0.0, np.nextafter(0.0, 1.0), u)
        if self.closed_forms.quantile is not None:
            return np.asarray(self.closed_forms.quantile(u), dtype=float)
        return np.array([self.quantile(float(q)) for q in u])

    def with_spec(self, spec: Optional[dict]) -> "DemandDistribution":
        return replace(self, spec=spec)


def mean(dist: DemandDistribution) -> float:
    """E α = ∫₀^∞ F̄(u) du; cached on the distribution."""
    return dist.mean


def quantile(dist: DemandDistribution, q: float) -> float:
    return dist.quantile(q)


def sample(dist: DemandDistribution, seed: int, n: int) -> np.ndarray:
    """Deterministic i.i.d. sample of size ``n`` for the given seed."""
    if n < 1:
        raise InvalidParameterError(f"sample size must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    return dist.draw(rng, n)
