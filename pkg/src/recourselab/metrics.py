"""Recourse cost metrics: normalized L1 proximity and its weighted variant."""

from __future__ import annotations

from dataclasses import dataclass

from .schema import ApplicantProfile, FeatureSchema, default_schema, delta_vector


@dataclass(frozen=True)
class FeatureWeights:
    """Per-feature positive weights, one per schema feature.

    Normalized weights sum to d, so uniform weights are all 1.0 and the
    weighted metric reduces to the unweighted one.
    """

    values: tuple[float, ...]

    def __post_init__(self):
        if any(w <= 0 for w in self.values):
            raise ValueError("weights must be positive")

    @classmethod
    def uniform(cls, d: int = 5) -> "FeatureWeights":
        return cls(values=(1.0,) * d)

    def normalized(self) -> "FeatureWeights":
        d = len(self.values)
        s = sum(self.values)
        return FeatureWeights(values=tuple(w * d / s for w in self.values))

    def scaled(self, c: float) -> "FeatureWeights":
        return FeatureWeights(values=tuple(w * c for w in self.values))

    def to_json_dict(self, schema: FeatureSchema | None = None) -> dict:
        schema = schema or default_schema()
        return dict(zip(schema.names, self.values))

    @classmethod
    def from_json_dict(cls, doc: dict, schema: FeatureSchema | None = None) -> "FeatureWeights":
        schema = schema or default_schema()
        return cls(values=tuple(float(doc[name]) for name in schema.names))


@dataclass(frozen=True)
class CostReport:
    deltas: tuple[float, ...]
    prox: float
    weighted_prox: float
    sparsity: int

    def to_json_dict(self, schema: FeatureSchema | None = None) -> dict:
        schema = schema or default_schema()
        return {
            "deltas": dict(zip(schema.names, self.deltas)),
            "prox": self.prox,
            "weighted_prox": self.weighted_prox,
            "sparsity": self.sparsity,
        }


def prox(x: ApplicantProfile, x_prime: ApplicantProfile,
         schema: FeatureSchema | None = None) -> float:
    """Unweighted normalized L1 distance between the two profiles."""
    schema = schema or default_schema()
    return sum(delta_vector(x, x_prime, schema))


def weighted_prox(x: ApplicantProfile, x_prime: ApplicantProfile,
                  w: FeatureWeights, schema: FeatureSchema | None = None) -> float:
    """Sum of w_i * |x_i - x'_i| / Range_i."""
    schema = schema or default_schema()
    deltas = delta_vector(x, x_prime, schema)
    return sum(wi * di for wi, di in zip(w.values, deltas))


def cost_report(x: ApplicantProfile, x_prime: ApplicantProfile,
                w: FeatureWeights | None = None,
                schema: FeatureSchema | None = None) -> CostReport:
    schema = schema or default_schema()
    w = w or FeatureWeights.uniform(schema.d)
    deltas = delta_vector(x, x_prime, schema)
    return CostReport(
        deltas=deltas,
        prox=sum(deltas),
        weighted_prox=sum(wi * di for wi, di in zip(w.values, deltas)),
        sparsity=sum(1 for d in deltas if d > 0),
    )
