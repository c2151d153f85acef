"""Two-stage recourse choice model: acceptability filter, then weighted proximity.

Stage 1 drops every recourse that pushes any feature past the user's
acceptability cap for that feature. Stage 2 picks the survivor with the
lowest personalized weighted proximity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .metrics import FeatureWeights, weighted_prox
from .recourse import Recourse
from .schema import ApplicantProfile, Direction, FeatureSchema, default_schema

THRESHOLDS_FORMAT_VERSION = 1

NONE_ACCEPTABLE = "none_acceptable"
ONLY_ONE_ACCEPTABLE = "only_one_acceptable"
CHOSEN = "chosen"


@dataclass(frozen=True)
class Thresholds:
    """Per-user caps on how far each feature may be pushed.

    Caps bound the *target* value in the feature's change direction: an upper
    cap for increase-only features, a lower cap for decrease-only. Employment
    carries a set of acceptable target levels instead (None = all levels).
    Missing entries mean unbounded.
    """

    caps: dict[str, float] = field(default_factory=dict)
    employment_levels: frozenset[int] | None = None

    def cap_for(self, name: str) -> float | None:
        return self.caps.get(name)

    def violations(self, x: ApplicantProfile, r: Recourse,
                   schema: FeatureSchema) -> list[str]:
        """Names of changed features whose targets exceed their caps."""
        out = []
        for i, spec in enumerate(schema.features):
            xv = x.value_of(schema, i)
            tv = r.counterfactual.value_of(schema, i)
            if tv == xv:
                continue  # unchanged features never violate
            if spec.name == "employment_type":
                if self.employment_levels is not None and int(tv) not in self.employment_levels:
                    out.append(spec.name)
                continue
            cap = self.cap_for(spec.name)
            if cap is None:
                continue
            if spec.direction == Direction.DECREASE_ONLY:
                if tv < cap:
                    out.append(spec.name)
            elif tv > cap:
                out.append(spec.name)
        return out

    def relaxed(self, name: str) -> "Thresholds":
        caps = dict(self.caps)
        caps.pop(name, None)
        return Thresholds(caps=caps, employment_levels=self.employment_levels)

    def to_json_dict(self) -> dict:
        return {
            "format_version": THRESHOLDS_FORMAT_VERSION,
            "caps": dict(self.caps),
            "employment_levels": (sorted(self.employment_levels)
                                  if self.employment_levels is not None else None),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Thresholds":
        levels = doc.get("employment_levels")
        return cls(caps={k: float(v) for k, v in doc.get("caps", {}).items()},
                   employment_levels=frozenset(levels) if levels is not None else None)


@dataclass(frozen=True)
class Verdict:
    recourse_index: int
    acceptable: bool
    violated_features: tuple[str, ...]


@dataclass(frozen=True)
class AwpPrediction:
    outcome: str  # NONE_ACCEPTABLE | ONLY_ONE_ACCEPTABLE | CHOSEN
    chosen_index: int | None
    verdicts: tuple[Verdict, ...]
    weighted_prox_values: dict[int, float]  # survivors only

    def to_json_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "chosen_index": self.chosen_index,
            "verdicts": [
                {"recourse_index": v.recourse_index, "acceptable": v.acceptable,
                 "violated_features": list(v.violated_features)}
                for v in self.verdicts
            ],
            "weighted_prox": {str(k): v for k, v in self.weighted_prox_values.items()},
        }


def stage1_filter(x: ApplicantProfile, candidates: list[Recourse],
                  alpha: Thresholds,
                  schema: FeatureSchema | None = None) -> list[Verdict]:
    """One verdict per candidate: acceptable iff no changed feature exceeds its cap."""
    schema = schema or default_schema()
    verdicts = []
    for idx, r in enumerate(candidates):
        violated = alpha.violations(x, r, schema)
        verdicts.append(Verdict(recourse_index=idx, acceptable=not violated,
                                violated_features=tuple(violated)))
    return verdicts


def stage2_select(survivors: list[tuple[int, Recourse]], x: ApplicantProfile,
                  w: FeatureWeights,
                  schema: FeatureSchema | None = None) -> int:
    """Index of the survivor with lowest weighted proximity.

    Ties break by lower prox, then lower target-leaf id.
    """
    schema = schema or default_schema()
    if not survivors:
        raise ValueError("no surviving recourses to select from")
    def key(item):
        idx, r = item
        return (weighted_prox(x, r.counterfactual, w, schema), r.cost.prox, r.leaf_id)
    return min(survivors, key=key)[0]


def predict(x: ApplicantProfile, candidates: list[Recourse], w: FeatureWeights,
            alpha: Thresholds,
            schema: FeatureSchema | None = None) -> AwpPrediction:
    """Filter by acceptability caps, then pick the cheapest survivor."""
    schema = schema or default_schema()
    if not candidates:
        raise ValueError("candidates must be nonempty")
    verdicts = stage1_filter(x, candidates, alpha, schema)
    survivors = [(v.recourse_index, candidates[v.recourse_index])
                 for v in verdicts if v.acceptable]
    wp = {idx: weighted_prox(x, r.counterfactual, w, schema) for idx, r in survivors}
    if not survivors:
        return AwpPrediction(NONE_ACCEPTABLE, None, tuple(verdicts), wp)
    if len(survivors) == 1:
        return AwpPrediction(ONLY_ONE_ACCEPTABLE, survivors[0][0], tuple(verdicts), wp)
    chosen = stage2_select(survivors, x, w, schema)
    return AwpPrediction(CHOSEN, chosen, tuple(verdicts), wp)


def save_thresholds(path: str, alpha: Thresholds) -> None:
    with open(path, "w") as f:
        json.dump(alpha.to_json_dict(), f, indent=2)


def load_thresholds(path: str) -> Thresholds:
    with open(path) as f:
        return Thresholds.from_json_dict(json.load(f))
