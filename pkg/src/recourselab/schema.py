"""Feature schema, applicant profiles, and normalized per-feature deltas.

The five-feature credit application schema is fixed in v1: income,
credit_score, employment_type, education_level, loan_amount, in that order.
Every other module takes ranges, ordinal encodings, and direction
constraints from here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable

SCHEMA_FORMAT_VERSION = 1


class Direction(str, Enum):
    """Which way a feature is allowed to move in a plausible recourse."""

    INCREASE_ONLY = "increase_only"
    DECREASE_ONLY = "decrease_only"
    ANY = "any"


@dataclass(frozen=True)
class CategoricalLevel:
    name: str
    code: int  # ordinal code, ordered by desirability
    desirability: float  # in [0, 1]


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # "continuous" | "categorical"
    lo: float | None = None
    hi: float | None = None
    integer: bool = False
    levels: tuple[CategoricalLevel, ...] = ()
    direction: Direction = Direction.ANY
    unit: str = ""

    def __post_init__(self):
        if self.kind == "continuous":
            if self.lo is None or self.hi is None or not self.lo < self.hi:
                raise ValueError(f"{self.name}: continuous feature needs lo < hi")
        elif self.kind == "categorical":
            if len(self.levels) < 2:
                raise ValueError(f"{self.name}: categorical feature needs >= 2 levels")
            codes = [lv.code for lv in self.levels]
            if len(set(codes)) != len(codes):
                raise ValueError(f"{self.name}: duplicate ordinal codes")
            for lv in self.levels:
                if not 0.0 <= lv.desirability <= 1.0:
                    raise ValueError(f"{self.name}: desirability outside [0,1]")
        else:
            raise ValueError(f"{self.name}: unknown kind {self.kind!r}")
        if self.range <= 0:
            raise ValueError(f"{self.name}: nonpositive range")

    @cached_property
    def range(self) -> float:
        """Normalization denominator: max-min for continuous, levels-1 for categorical."""
        if self.kind == "continuous":
            return float(self.hi) - float(self.lo)
        codes = [lv.code for lv in self.levels]
        return float(max(codes) - min(codes))

    @cached_property
    def code_lo(self) -> float:
        if self.kind == "continuous":
            return float(self.lo)
        return float(min(lv.code for lv in self.levels))

    @cached_property
    def code_hi(self) -> float:
        if self.kind == "continuous":
            return float(self.hi)
        return float(max(lv.code for lv in self.levels))

    def level_by_code(self, code: int) -> CategoricalLevel:
        for lv in self.levels:
            if lv.code == code:
                return lv
        raise KeyError(f"{self.name}: no level with code {code}")

    def level_by_name(self, name: str) -> CategoricalLevel:
        for lv in self.levels:
            if lv.name == name:
                return lv
        raise KeyError(f"{self.name}: no level named {name!r}")


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]

    def __post_init__(self):
        if len(self.features) != 5:
            raise ValueError("schema must have exactly 5 features")
        expected = ("income", "credit_score", "employment_type", "education_level", "loan_amount")
        names = tuple(f.name for f in self.features)
        if names != expected:
            raise ValueError(f"feature order must be {expected}, got {names}")

    @property
    def d(self) -> int:
        return len(self.features)

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def spec(self, name: str) -> FeatureSpec:
        return self.features[self.index(name)]

    def to_json_dict(self) -> dict:
        return {
            "format_version": SCHEMA_FORMAT_VERSION,
            "features": [
                {
                    "name": f.name,
                    "kind": f.kind,
                    "lo": f.lo,
                    "hi": f.hi,
                    "integer": f.integer,
                    "levels": [
                        {"name": lv.name, "code": lv.code, "desirability": lv.desirability}
                        for lv in f.levels
                    ],
                    "direction": f.direction.value,
                    "unit": f.unit,
                }
                for f in self.features
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "FeatureSchema":
        feats = []
        for fd in doc["features"]:
            feats.append(
                FeatureSpec(
                    name=fd["name"],
                    kind=fd["kind"],
                    lo=fd["lo"],
                    hi=fd["hi"],
                    integer=fd.get("integer", False),
                    levels=tuple(
                        CategoricalLevel(lv["name"], lv["code"], lv["desirability"])
                        for lv in fd.get("levels", [])
                    ),
                    direction=Direction(fd.get("direction", "any")),
                    unit=fd.get("unit", ""),
                )
            )
        return cls(features=tuple(feats))


EMPLOYMENT_LEVELS = (
    CategoricalLevel("Unemployed", 0, 0.0),
    CategoricalLevel("Self-employed", 1, 0.4),
    CategoricalLevel("Private", 2, 0.7),
    CategoricalLevel("Government", 3, 1.0),
)

EDUCATION_LEVELS = (
    CategoricalLevel("HighSchool", 0, 0.0),
    CategoricalLevel("Associate", 1, 0.25),
    CategoricalLevel("Bachelor", 2, 0.5),
    CategoricalLevel("Master", 3, 0.75),
    CategoricalLevel("Doctorate", 4, 1.0),
)


def default_schema() -> FeatureSchema:
    """The v1 credit application schema."""
    return FeatureSchema(
        features=(
            FeatureSpec(
                name="income", kind="continuous", lo=10_000, hi=500_000,
                direction=Direction.INCREASE_ONLY, unit="USD/year",
            ),
            FeatureSpec(
                name="credit_score", kind="continuous", lo=300, hi=850, integer=True,
                direction=Direction.INCREASE_ONLY, unit="points",
            ),
            FeatureSpec(
                name="employment_type", kind="categorical", levels=EMPLOYMENT_LEVELS,
                direction=Direction.ANY,
            ),
            FeatureSpec(
                name="education_level", kind="categorical", levels=EDUCATION_LEVELS,
                direction=Direction.INCREASE_ONLY,
            ),
            FeatureSpec(
                name="loan_amount", kind="continuous", lo=1_000, hi=50_000,
                direction=Direction.DECREASE_ONLY, unit="USD",
            ),
        )
    )


@dataclass(frozen=True)
class ApplicantProfile:
    """One loan application over the 5-feature schema.

    Categorical features are stored as ordinal codes; use `value_of` for the
    numeric view and the schema's level tables for display names.
    """

    income: float
    credit_score: int
    employment_type: int
    education_level: int
    loan_amount: float

    def value_of(self, schema: FeatureSchema, i: int) -> float:
        return float(getattr(self, schema.names[i]))

    def values(self, schema: FeatureSchema) -> tuple[float, ...]:
        return tuple(self.value_of(schema, i) for i in range(schema.d))

    def replace_value(self, schema: FeatureSchema, i: int, value: float) -> "ApplicantProfile":
        name = schema.names[i]
        spec = schema.features[i]
        if spec.kind == "categorical" or spec.integer:
            value = int(round(value))
        kwargs = self.to_dict()
        kwargs[name] = value
        return ApplicantProfile(**kwargs)

    def to_dict(self) -> dict:
        return {
            "income": self.income,
            "credit_score": self.credit_score,
            "employment_type": self.employment_type,
            "education_level": self.education_level,
            "loan_amount": self.loan_amount,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ApplicantProfile":
        return cls(
            income=float(doc["income"]),
            credit_score=int(doc["credit_score"]),
            employment_type=int(doc["employment_type"]),
            education_level=int(doc["education_level"]),
            loan_amount=float(doc["loan_amount"]),
        )

    @classmethod
    def from_values(cls, schema: FeatureSchema, values: Iterable[float]) -> "ApplicantProfile":
        vals = list(values)
        if len(vals) != schema.d:
            raise ValueError(f"expected {schema.d} values, got {len(vals)}")
        doc = {}
        for spec, v in zip(schema.features, vals):
            if spec.kind == "categorical" or spec.integer:
                doc[spec.name] = int(round(v))
            else:
                doc[spec.name] = float(v)
        return cls.from_dict(doc)


def normalized_delta(x: ApplicantProfile, x_prime: ApplicantProfile, i: int,
                     schema: FeatureSchema | None = None) -> float:
    """|x_i - x'_i| / Range_i; categorical features compare ordinal codes."""
    schema = schema or default_schema()
    if not 0 <= i < schema.d:
        raise IndexError(f"feature index {i} out of range")
    spec = schema.features[i]
    return abs(x.value_of(schema, i) - x_prime.value_of(schema, i)) / spec.range


def delta_vector(x: ApplicantProfile, x_prime: ApplicantProfile,
                 schema: FeatureSchema) -> tuple[float, ...]:
    return tuple(normalized_delta(x, x_prime, i, schema) for i in range(schema.d))


def validate_profile(x: ApplicantProfile, schema: FeatureSchema | None = None) -> list[str]:
    """Empty list iff every schema bound holds; one entry per violation."""
    schema = schema or default_schema()
    violations = []
    for i, spec in enumerate(schema.features):
        v = x.value_of(schema, i)
        if spec.kind == "continuous":
            if v < spec.lo:
                violations.append(f"{spec.name} < {spec.lo}")
            elif v > spec.hi:
                violations.append(f"{spec.name} > {spec.hi}")
            if spec.integer and v != int(v):
                violations.append(f"{spec.name} not an integer")
        else:
            codes = {lv.code for lv in spec.levels}
            if int(v) not in codes or v != int(v):
                violations.append(f"{spec.name} code {v} not a schema level")
    return violations


def schema_json(schema: FeatureSchema) -> str:
    return json.dumps(schema.to_json_dict(), indent=2, sort_keys=True)
