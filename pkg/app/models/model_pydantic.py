import math
from enum import Enum
from typing import List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from app.core.errors import NoFiniteMaximizerError, SpecError
from app.core.numerics import using_tolerances

NOT_CONVERGED = "not-converged"

# A tail limit is a number (possibly +inf) or the not-converged marker
LimitValue = Union[float, Literal["not-converged"]]


def json_number(value: Optional[float], missing: str = "none"):
    """JSON-safe rendering of a float that may be infinite or absent."""
    if value is None:
        return missing
    if isinstance(value, str):
        return value
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


class Verdict(str, Enum):
    HOLDS = "holds"
    FAILS = "fails-with-witness"
    UNKNOWN = "unknown"


class Certificate(str, Enum):
    DGMRD_STRICT = "dgmrd-strict"
    DGMRD_WEAK_SAFE = "dgmrd-weak-safe"
    IGFR = "igfr"
    NOT_CERTIFIED = "not-certified"


class Shape(str, Enum):
    NONINCREASING = "nonincreasing"
    NONDECREASING = "nondecreasing"
    CONSTANT = "constant"
    NON_MONOTONE = "non-monotone"


class MonotoneResult(BaseModel):
    """Shape of a sampled curve with the largest rise and fall found, as price pairs."""

    shape: Shape
    rise: Optional[Tuple[float, float]] = None
    rise_values: Optional[Tuple[float, float]] = None
    fall: Optional[Tuple[float, float]] = None
    fall_values: Optional[Tuple[float, float]] = None

    @property
    def nonincreasing(self) -> bool:
        return self.shape in (Shape.NONINCREASING, Shape.CONSTANT)

    @property
    def nondecreasing(self) -> bool:
        return self.shape in (Shape.NONDECREASING, Shape.CONSTANT)


class NumericConfig(BaseModel):
    """Tolerances and grid policy shared by every analysis."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    quad_abs_tol: float = Field(1e-10, gt=0)
    quad_rel_tol: float = Field(1e-8, gt=0)
    mono_slack: float = Field(1e-7, gt=0)
    grid_points: int = 512
    root_tol: float = Field(1e-10, gt=0)
    tail_probe_max_doublings: int = Field(40, gt=0)
    tail_agree_tol: float = Field(1e-4, gt=0)
    verify_grid_points: int = Field(2048, gt=0)
    mc_workers: int = Field(4, gt=0)

    @field_validator("grid_points")
    def grid_must_be_dense_enough(cls, v):
        if v < 16:
            raise ValueError("grid_points must be at least 16")
        return v

    def quadrature(self):
        """Context manager applying ``quad_abs_tol`` / ``quad_rel_tol`` to tail quadrature."""
        return using_tolerances(self.quad_abs_tol, self.quad_rel_tol)

    def with_overrides(self, pairs: Sequence[str]) -> "NumericConfig":
        """Apply ``key=value`` overrides as given to ``--set``."""
        updates = {}
        for item in pairs:
            key, sep, raw = item.partition("=")
            key = key.strip()
            if not sep or key not in type(self).model_fields:
                raise SpecError(f"unknown config override {item!r}")
            updates[key] = raw.strip()
        try:
            return type(self).model_validate({**self.model_dump(), **updates})
        except ValidationError as e:
            raise SpecError(f"invalid config override: {e.errors()[0]['msg']}") from e


class ReliabilityCurves(BaseModel):
    grid: List[float]
    m_values: List[Optional[float]]
    l_values: List[Optional[float]]
    h_values: Optional[List[Optional[float]]] = None
    g_values: Optional[List[Optional[float]]] = None
    eps_values: List[Optional[float]]
    r_values: List[Optional[float]]


class ClassVerdict(BaseModel):
    verdict: Verdict
    witness: Optional[Tuple[float, float]] = None
    values: Optional[Tuple[float, float]] = None
    reason: Optional[str] = None

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS

    @property
    def fails(self) -> bool:
        return self.verdict is Verdict.FAILS

    def to_json_dict(self) -> dict:
        return {"verdict": self.verdict.value, "witness": list(self.witness) if self.witness else None}


class ClassificationReport(BaseModel):
    ifr: ClassVerdict
    dmrd: ClassVerdict
    igfr: ClassVerdict
    dgmrd: ClassVerdict
    dgmrd_strict: bool = False
    gmrd_limit_c: LimitValue = NOT_CONVERGED
    gfr_limit_kappa: LimitValue = NOT_CONVERGED
    second_moment_finite: Verdict = Verdict.UNKNOWN
    tolerance_used: float
    mrd_log_convex: ClassVerdict
    log_convex_implication: Literal["consistent", "violated", "inapplicable"] = "inapplicable"
    lattice_consistent: bool = True
    limit_relation_residual: Optional[float] = None

    def to_json_dict(self) -> dict:
        return {
            "ifr": self.ifr.to_json_dict(),
            "dmrd": self.dmrd.to_json_dict(),
            "igfr": self.igfr.to_json_dict(),
            "dgmrd": self.dgmrd.to_json_dict(),
            "c": json_number(self.gmrd_limit_c),
            "kappa": json_number(self.gfr_limit_kappa),
            "second_moment_finite": self.second_moment_finite.value,
            "tolerance": self.tolerance_used,
            "dgmrd_strict": self.dgmrd_strict,
            "mrd_log_convex": self.mrd_log_convex.to_json_dict(),
            "log_convex_implication": self.log_convex_implication,
            "lattice_consistent": self.lattice_consistent,
            "limit_relation_residual": self.limit_relation_residual,
        }


class PricingSolution(BaseModel):
    fixed_points: List[float]
    rays: List[Tuple[float, float]] = []
    p1: float
    unimodality_certificate: Certificate
    certificate_reason: str = ""
    optimal_price: Optional[float] = None
    optimal_revenue: Optional[float] = None
    elasticity_at_optimum: Optional[float] = None

    def require_optimum(self) -> float:
        if self.optimal_price is None:
            raise NoFiniteMaximizerError(f"no-finite-maximizer: {self.certificate_reason}")
        return self.optimal_price

    def to_json_dict(self) -> dict:
        return {
            "fixed_points": self.fixed_points,
            "rays": [[json_number(a), json_number(b)] for a, b in self.rays],
            "p1": json_number(self.p1),
            "certificate": self.unimodality_certificate.value,
            "certificate_reason": self.certificate_reason,
            "optimal_price": json_number(self.optimal_price),
            "optimal_revenue": json_number(self.optimal_revenue),
            "elasticity_at_optimum": json_number(self.elasticity_at_optimum),
        }


class SingleUnitSolution(BaseModel):
    """Reservation-price model: one unit sold iff the price is below α."""

    roots: List[float]
    certificate: Certificate
    certificate_reason: str = ""
    optimal_price: Optional[float] = None
    optimal_revenue: Optional[float] = None
    gfr_at_optimum: Optional[float] = None

    def to_json_dict(self) -> dict:
        return {
            "roots": self.roots,
            "certificate": self.certificate.value,
            "certificate_reason": self.certificate_reason,
            "optimal_price": json_number(self.optimal_price),
            "optimal_revenue": json_number(self.optimal_revenue),
            "gfr_at_optimum": json_number(self.gfr_at_optimum),
        }


class McEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    stderr: float = Field(ge=0)
    n: int
    seed: int


class CheckResult(BaseModel):
    check: str
    p: float
    analytic: float
    mc: Optional[float] = None
    stderr: Optional[float] = None
    z: Optional[float] = None
    residual: Optional[float] = None
    passed: bool = Field(serialization_alias="pass")

    def to_json_line(self) -> str:
        return self.model_dump_json(by_alias=True, exclude_none=True)
