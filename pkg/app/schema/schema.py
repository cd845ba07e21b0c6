"""DistributionSpec: the JSON grammar describing a demand distribution.

A leaf names a family and its parameters, a node names a combinator and
wraps child specs::

    {"family": "pareto1", "L": 1.0, "k": 3.0}
    {"op": "mixture", "weights": [0.25, 0.75], "components": [<spec>, <spec>]}
    {"op": "scale", "factor": 2.0, "of": <spec>}
    {"op": "shift", "offset": 1.0, "of": <spec>}
    {"op": "truncate_left", "at": 2.0, "of": <spec>}
    {"op": "power", "exponent": 0.5, "of": <spec>}
    {"op": "convolve", "of": [<spec>, <spec>]}
"""

from pathlib import Path
from typing import Annotated, Any, List, Literal, Union

from pydantic import BaseModel, ConfigDict, Discriminator, Field, Tag, TypeAdapter, ValidationError

from app.core.distributions import combinators
from app.core.distributions.base import DemandDistribution
from app.core.distributions.families import FAMILIES, make_family
from app.core.errors import SpecError


class FamilySpec(BaseModel):
    model_config = ConfigDict(extra="allow")

    family: str

    @property
    def params(self) -> dict:
        return dict(self.model_extra or {})


class MixtureSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["mixture"]
    weights: List[float] = Field(min_length=1)
    components: List["DistributionSpec"] = Field(min_length=1)


class ScaleSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["scale"]
    factor: float
    of: "DistributionSpec"


class ShiftSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["shift"]
    offset: float
    of: "DistributionSpec"


class TruncateLeftSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["truncate_left"]
    at: float
    of: "DistributionSpec"


class PowerSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["power"]
    exponent: float
    of: "DistributionSpec"


class ConvolveSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["convolve"]
    of: List["DistributionSpec"] = Field(min_length=2, max_length=2)


def _spec_kind(value: Any) -> str:
    if isinstance(value, dict):
        return value.get("op", "family")
    return getattr(value, "op", "family")


DistributionSpec = Annotated[
    Union[
        Annotated[FamilySpec, Tag("family")],
        Annotated[MixtureSpec, Tag("mixture")],
        Annotated[ScaleSpec, Tag("scale")],
        Annotated[ShiftSpec, Tag("shift")],
        Annotated[TruncateLeftSpec, Tag("truncate_left")],
        Annotated[PowerSpec, Tag("power")],
        Annotated[ConvolveSpec, Tag("convolve")],
    ],
    Discriminator(_spec_kind),
]

for _model in (MixtureSpec, ScaleSpec, ShiftSpec, TruncateLeftSpec, PowerSpec, ConvolveSpec):
    _model.model_rebuild()

_adapter = TypeAdapter(DistributionSpec)


def parse_spec(document: Union[str, dict]) -> BaseModel:
    """Validate a spec given as JSON text or an already-decoded mapping."""
    try:
        if isinstance(document, str):
            return _adapter.validate_json(document)
        return _adapter.validate_python(document)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise SpecError(f"invalid distribution spec at {where}: {first['msg']}") from e


def dump_spec(spec: BaseModel) -> dict:
    return _adapter.dump_python(spec, mode="json")


def build_distribution(spec: BaseModel) -> DemandDistribution:
    """Construct the distribution a validated spec describes."""
    if isinstance(spec, FamilySpec):
        if spec.family not in FAMILIES:
            raise SpecError(f"unknown family {spec.family!r}; expected one of {sorted(FAMILIES)}")
        return make_family(spec.family, spec.params)
    if isinstance(spec, MixtureSpec):
        return combinators.mixture([build_distribution(c) for c in spec.components], spec.weights)
    if isinstance(spec, ScaleSpec):
        return combinators.scale(build_distribution(spec.of), spec.factor)
    if isinstance(spec, ShiftSpec):
        return combinators.shift(build_distribution(spec.of), spec.offset)
    if isinstance(spec, TruncateLeftSpec):
        return combinators.left_truncate(build_distribution(spec.of), spec.at)
    if isinstance(spec, PowerSpec):
        return combinators.power(build_distribution(spec.of), spec.exponent)
    if isinstance(spec, ConvolveSpec):
        first, second = (build_distribution(c) for c in spec.of)
        return combinators.convolve(first, second)
    raise SpecError(f"unsupported spec node {type(spec).__name__}")


def load_spec(path: Union[str, Path]) -> DemandDistribution:
    """Read, validate and build a spec file; parse errors surface as SpecError."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise SpecError(f"cannot read spec file {path}: {e}") from e
    return build_distribution(parse_spec(text))


__all__ = [
    "DistributionSpec",
    "parse_spec",
    "dump_spec",
    "build_distribution",
    "load_spec",
]
