"""Quadrature, root-finding and grid helpers shared by the analysis modules."""

import functools
import inspect
import math
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Callable, Iterable, Iterator, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from app.core.errors import BracketError, QuadratureError

QUAD_ABS_TOL = 1e-10
QUAD_REL_TOL = 1e-8
QUAD_LIMIT = 200
# Survival values below this are treated as numerically zero
UNDERFLOW_SURVIVAL = 1e-300
# Probability mass treated as the end of the numerical horizon
HORIZON_SURVIVAL = 1e-12

_tolerances: ContextVar[Tuple[float, float]] = ContextVar(
    "quad_tolerances", default=(QUAD_ABS_TOL, QUAD_REL_TOL)
)


def quad_tolerances() -> Tuple[float, float]:
    """The (absolute, relative) tail-quadrature tolerances currently in force."""
    return _tolerances.get()


@contextmanager
def using_tolerances(abs_tol: float, rel_tol: float) -> Iterator[None]:
    token = _tolerances.set((float(abs_tol), float(rel_tol)))
    try:
        yield
    finally:
        _tolerances.reset(token)


def config_tolerances(fn):
    """Run ``fn`` under the quadrature tolerances of its ``config`` argument.

    Calls without a config keep whatever tolerances the caller set.
    """
    signature = inspect.signature(fn)

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        config = signature.bind_partial(*args, **kwargs).arguments.get("config")
        if config is None:
            return fn(*args, **kwargs)
        with config.quadrature():
            return fn(*args, **kwargs)

    return wrapper


def _checked_quad(fn, a, b, points, abs_tol, rel_tol, what):
    out = quad(
        fn, a, b,
        epsabs=abs_tol, epsrel=rel_tol, limit=QUAD_LIMIT,
        points=points or None, full_output=1,
    )
    value, abserr = float(out[0]), float(out[1])
    # quad appends a message only when ier > 0
    if len(out) > 3:
        allowed = 1e3 * max(abs_tol, rel_tol * abs(value))
        if not math.isfinite(value) or not abserr <= allowed:
            raise QuadratureError(f"{what}: {out[3]} (value={value:.6g}, abserr={abserr:.3g})")
    if not math.isfinite(value):
        raise QuadratureError(f"{what}: non-finite value {value}")
    return value


def integrate_tail(
    fn: Callable[[float], float],
    lower: float,
    upper: float = math.inf,
    *,
    points: Iterable[float] = (),
    abs_tol: Optional[float] = None,
    rel_tol: Optional[float] = None,
) -> float:
    """Integrate ``fn`` over ``[lower, upper)``.

    Finite ranges go straight to adaptive Gauss-Kronrod. An unbounded range is
    mapped onto ``[0, 1)`` with ``u = lower + s*t/(1-t)`` where the scale ``s``
    is ``max(1, |lower|)``, so tails that start far out are not squeezed
    against ``t = 1``. Kinks listed in ``points`` are passed on as breakpoints.
    Tolerances left as None come from ``quad_tolerances()``.
    """
    if upper <= lower:
        return 0.0
    default_abs, default_rel = quad_tolerances()
    abs_tol = default_abs if abs_tol is None else abs_tol
    rel_tol = default_rel if rel_tol is None else rel_tol
    if math.isfinite(upper):
        inner = sorted({float(x) for x in points if lower < x < upper})
        return _checked_quad(fn, lower, upper, inner, abs_tol, rel_tol, "finite-range quadrature")

    s = max(1.0, abs(lower))

    def mapped(t):
        one_minus = 1.0 - t
        return fn(lower + s * t / one_minus) * s / (one_minus * one_minus)

    inner = sorted({(x - lower) / (x - lower + s) for x in points if x > lower and math.isfinite(x)})
    return _checked_quad(mapped, 0.0, 1.0, inner, abs_tol, rel_tol, "tail quadrature")


def find_root(fn: Callable[[float], float], a: float, b: float, *, xtol: float = 1e-13) -> float:
    """Brent's method on a sign-changing bracket ``[a, b]``."""
    fa, fb = fn(a), fn(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise BracketError(f"no sign change on [{a:.6g}, {b:.6g}]")
    return float(brentq(fn, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500))


def bisect_predicate(pred: Callable[[float], bool], good: float, bad: float, *, iterations: int = 80) -> float:
    """Move ``good`` towards ``bad`` while ``pred`` stays true; returns the last good point."""
    for _ in range(iterations):
        mid = 0.5 * (good + bad)
        if mid in (good, bad):
            break
        if pred(mid):
            good = mid
        else:
            bad = mid
    return good


def price_points(lo: float, hi: float, n: int, *, log: bool) -> np.ndarray:
    if log:
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def merge_grid(*parts: Sequence[float], lower: float = 0.0, upper: float = math.inf) -> np.ndarray:
    """Sorted union of grid pieces restricted to the open interval ``(lower, upper)``."""
    merged = np.unique(np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts]))
    keep = (merged > lower) & (merged < upper) & np.isfinite(merged)
    return merged[keep]


def relative_spread(values: Sequence[float]) -> Optional[float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        return None
    scale = float(np.max(np.abs(arr)))
    if scale == 0.0:
        return 0.0
    return float((arr.max() - arr.min()) / scale)
