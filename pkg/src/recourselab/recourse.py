"""Counterfactual recourse generation by minimal projection onto accepting leaves.

For a hyperrectangular leaf region, the L1-minimal feasible point is the
coordinate-wise clamp of x into the region, so the top-K search reduces to
projecting onto every accepting leaf and ranking by proximity. A shortest-path
pass over the complete leaf graph (scipy's all-pairs solver) is kept behind a
flag as a cross-check; with edge costs derived from projection distances the
direct edge is always shortest, so both routes must agree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .metrics import CostReport, FeatureWeights, cost_report
from .schema import ApplicantProfile, Direction, FeatureSchema, default_schema
from .tree import APPROVED, REJECTED, DecisionTree, LeafRegion

RECOURSE_FORMAT_VERSION = 1

EPSILON_FRACTION = 1e-6  # strict-boundary offset as a fraction of Range_i

DEFAULT_ROUNDING_STEPS = {"income": 500.0, "loan_amount": 500.0, "credit_score": 10.0}


@dataclass(frozen=True)
class GenerationConfig:
    k: int = 15
    epsilon_fraction: float = EPSILON_FRACTION
    rounding_steps: dict | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.epsilon_fraction <= 0:
            raise ValueError("epsilon must be positive")

    def step_for(self, name: str) -> float | None:
        steps = self.rounding_steps if self.rounding_steps is not None else DEFAULT_ROUNDING_STEPS
        return steps.get(name)


@dataclass(frozen=True)
class Recourse:
    source: ApplicantProfile
    counterfactual: ApplicantProfile
    leaf_id: int
    cost: CostReport

    def changed_features(self, schema: FeatureSchema) -> list[int]:
        return [i for i, d in enumerate(self.cost.deltas) if d > 0]

    def to_json_dict(self, schema: FeatureSchema | None = None) -> dict:
        schema = schema or default_schema()
        return {
            "format_version": RECOURSE_FORMAT_VERSION,
            "source": self.source.to_dict(),
            "counterfactual": self.counterfactual.to_dict(),
            "leaf_id": self.leaf_id,
            "cost": self.cost.to_json_dict(schema),
        }

    @classmethod
    def from_json_dict(cls, doc: dict, w: FeatureWeights | None = None,
                       schema: FeatureSchema | None = None) -> "Recourse":
        schema = schema or default_schema()
        source = ApplicantProfile.from_dict(doc["source"])
        cf = ApplicantProfile.from_dict(doc["counterfactual"])
        return cls(source=source, counterfactual=cf, leaf_id=doc["leaf_id"],
                   cost=cost_report(source, cf, w, schema))


def _clamp_feature(x_val: float, spec, lo: float, hi: float, lo_strict: bool,
                   eps_fraction: float) -> float | None:
    """Nearest feasible value for one feature, or None if the interval is empty."""
    is_int = spec.kind == "categorical" or spec.integer
    if lo_strict:
        lo_eff = math.floor(lo) + 1 if is_int else lo + eps_fraction * spec.range
    else:
        lo_eff = math.ceil(lo) if is_int else lo
    hi_eff = math.floor(hi) if is_int else hi
    if lo_eff > hi_eff:
        return None
    if x_val < lo_eff:
        return lo_eff
    if x_val > hi_eff:
        return hi_eff
    return x_val


def project_to_leaf(x: ApplicantProfile, region: LeafRegion,
                    schema: FeatureSchema | None = None,
                    cfg: GenerationConfig | None = None,
                    w: FeatureWeights | None = None) -> Recourse | None:
    """L1-minimal move of x into the region; None if infeasible.

    A move is infeasible when the feature interval is empty on the value grid
    or the required move direction violates the feature's constraint.
    """
    schema = schema or default_schema()
    cfg = cfg or GenerationConfig()
    vals = []
    for i, spec in enumerate(schema.features):
        xv = x.value_of(schema, i)
        target = _clamp_feature(xv, spec, region.lo[i], region.hi[i],
                                region.lo_strict[i], cfg.epsilon_fraction)
        if target is None:
            return None
        if target > xv and spec.direction == Direction.DECREASE_ONLY:
            return None
        if target < xv and spec.direction == Direction.INCREASE_ONLY:
            return None
        vals.append(target)
    cf = ApplicantProfile.from_values(schema, vals)
    return Recourse(source=x, counterfactual=cf, leaf_id=region.leaf_id,
                    cost=cost_report(x, cf, w, schema))


def _rank_key(r: Recourse, weighted: bool):
    cost = r.cost.weighted_prox if weighted else r.cost.prox
    return (cost, r.leaf_id)


def generate_top_k(tree: DecisionTree, x: ApplicantProfile,
                   schema: FeatureSchema | None = None,
                   cfg: GenerationConfig | None = None,
                   w: FeatureWeights | None = None,
                   use_graph_search: bool = False) -> list[Recourse]:
    """Top-K feasible recourses for a rejected profile, cheapest first.

    Ranks by prox, or by weighted_prox when weights are given; ties break by
    ascending leaf id. Returns fewer than K when fewer feasible leaves exist.
    """
    schema = schema or default_schema()
    cfg = cfg or GenerationConfig()
    label, _ = tree.predict(x, schema)
    if label != REJECTED:
        raise ValueError("profile is not rejected; no recourse needed")
    candidates = []
    for region in tree.accepting_leaves(schema):
        r = project_to_leaf(x, region, schema, cfg, w)
        if r is not None:
            candidates.append(r)
    if use_graph_search:
        costs = graph_search_costs(tree, x, schema, cfg, w)
        for r in candidates:
            direct = r.cost.weighted_prox if w is not None else r.cost.prox
            if not math.isclose(costs[r.leaf_id], direct, rel_tol=1e-9, abs_tol=1e-12):
                raise AssertionError(
                    f"graph search disagrees with projection at leaf {r.leaf_id}")
    candidates.sort(key=lambda r: _rank_key(r, weighted=w is not None))
    return candidates[:cfg.k]


def graph_search_costs(tree: DecisionTree, x: ApplicantProfile,
                       schema: FeatureSchema, cfg: GenerationConfig,
                       w: FeatureWeights | None = None) -> dict[int, float]:
    """All-pairs shortest-path reading of leaf-to-leaf recourse cost.

    Nodes are the source point plus every feasible accepting leaf; the edge
    u -> v costs the projection distance from u's representative point into
    v's region. Cross-check only; see module docstring.
    """
    from scipy.sparse.csgraph import floyd_warshall

    regions = [r for r in tree.accepting_leaves(schema)]
    points: list[ApplicantProfile] = [x]
    ids: list[int] = [-1]
    projections: dict[int, Recourse] = {}
    for region in regions:
        r = project_to_leaf(x, region, schema, cfg, w)
        if r is not None:
            projections[region.leaf_id] = r
            points.append(r.counterfactual)
            ids.append(region.leaf_id)
    n = len(points)
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    feasible_regions = {r.leaf_id: r for r in regions if r.leaf_id in projections}
    for a in range(n):
        for b in range(1, n):
            if a == b:
                continue
            rb = project_to_leaf(points[a], feasible_regions[ids[b]], schema, cfg, w)
            if rb is not None:
                dist[a, b] = rb.cost.weighted_prox if w is not None else rb.cost.prox
    shortest = floyd_warshall(dist)
    return {ids[b]: float(shortest[0, b]) for b in range(1, n)}


def _round_away(x_val: float, target: float, step: float) -> float:
    """Round the target away from x to the next multiple of step."""
    if target >= x_val:
        return math.ceil(round(target / step, 9)) * step
    return math.floor(round(target / step, 9)) * step


def rounded_variant(r: Recourse, tree: DecisionTree,
                    cfg: GenerationConfig | None = None,
                    schema: FeatureSchema | None = None,
                    w: FeatureWeights | None = None) -> Recourse | None:
    """Recourse with each changed continuous feature rounded away from x.

    Returns None when the rounded profile no longer reaches an approving leaf
    (rounding exits the accepting region and cannot be repaired by clamping
    back into it).
    """
    schema = schema or default_schema()
    cfg = cfg or GenerationConfig()
    vals = []
    changed_any = False
    for i, spec in enumerate(schema.features):
        xv = r.source.value_of(schema, i)
        tv = r.counterfactual.value_of(schema, i)
        step = cfg.step_for(spec.name)
        if spec.kind == "continuous" and tv != xv and step is not None:
            rounded = _round_away(xv, tv, step)
            if spec.integer:
                rounded = round(rounded)
            lo, hi = spec.code_lo, spec.code_hi
            rounded = min(max(rounded, lo), hi)
            if rounded != tv:
                changed_any = True
            vals.append(rounded)
        else:
            vals.append(tv)
    if not changed_any:
        return r
    cf = ApplicantProfile.from_values(schema, vals)
    label, leaf = tree.predict(cf, schema)
    if label != APPROVED:
        return None
    return Recourse(source=r.source, counterfactual=cf, leaf_id=leaf,
                    cost=cost_report(r.source, cf, w, schema))


def write_recourses(path: str, recourses: list[Recourse],
                    schema: FeatureSchema | None = None) -> None:
    schema = schema or default_schema()
    doc = {"format_version": RECOURSE_FORMAT_VERSION,
           "recourses": [r.to_json_dict(schema) for r in recourses]}
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
