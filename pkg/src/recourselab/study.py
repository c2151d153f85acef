"""Scenario construction, iterative threshold probing, simulated users, evaluation.

Three scenario kinds are built from a trained tree and a labeled dataset:

* tradeoff — one side wins on raw proximity, the other on weighted proximity
  under the construction weights;
* probing — two single-feature recourses on distinct features, used to run
  the escalate-and-pivot protocol that brackets acceptability thresholds;
* rounding — an exact recourse against its rounded-away variant.

Simulated users carry ground-truth weights and caps and answer through the
same two-stage choice rule the predictor assumes, with optional logistic
choice noise. They stand in for human participants at desk scale.
"""

from __future__ import annotations

import json
import math
import uuid
from dataclasses import dataclass, field, replace

import numpy as np

from .awp import CHOSEN, Thresholds, predict as awp_predict, stage1_filter
from .metrics import FeatureWeights, cost_report, weighted_prox
from .preference import PairwiseComparison
from .recourse import GenerationConfig, Recourse, generate_top_k, rounded_variant
from .schema import ApplicantProfile, Direction, FeatureSchema, default_schema
from .tree import APPROVED, REJECTED, DecisionTree

SCENARIO_FORMAT_VERSION = 1

# Weighted-prox gap temperature for noisy simulated choices: at tau=1 a gap of
# 0.1 in weighted proximity is a ~73% call.
NOISE_SCALE = 0.1

# Escalation step sizes for the probing protocol, per probed feature.
DEFAULT_PROBING_STEPS = {
    "income": 500.0,
    "credit_score": 20.0,
    "loan_amount": 500.0,
    "education_level": 1.0,
}

# Non-uniform construction weights used for Session-1 scenarios (sum = d).
GLOBAL_CONSTRUCTION_WEIGHTS = FeatureWeights(values=(1.6, 1.2, 0.4, 1.2, 0.6))

REJECT_BOTH = "reject_both"

PIVOT_THRESHOLD = "threshold"
PIVOT_PREFERENCE = "preference"


@dataclass(frozen=True)
class Scenario:
    id: str
    kind: str  # "tradeoff" | "probing" | "rounding"
    source: ApplicantProfile
    recourse_a: Recourse
    recourse_b: Recourse
    meta: dict = field(default_factory=dict)

    def recourse(self, side: str) -> Recourse:
        return self.recourse_a if side == "A" else self.recourse_b

    def to_json_dict(self, schema: FeatureSchema | None = None) -> dict:
        schema = schema or default_schema()
        return {
            "format_version": SCENARIO_FORMAT_VERSION,
            "id": self.id,
            "kind": self.kind,
            "source": self.source.to_dict(),
            "recourse_a": self.recourse_a.to_json_dict(schema),
            "recourse_b": self.recourse_b.to_json_dict(schema),
            "meta": self.meta,
        }

    @classmethod
    def from_json_dict(cls, doc: dict, schema: FeatureSchema | None = None) -> "Scenario":
        schema = schema or default_schema()
        return cls(
            id=doc["id"],
            kind=doc["kind"],
            source=ApplicantProfile.from_dict(doc["source"]),
            recourse_a=Recourse.from_json_dict(doc["recourse_a"], schema=schema),
            recourse_b=Recourse.from_json_dict(doc["recourse_b"], schema=schema),
            meta=doc.get("meta", {}),
        )


@dataclass(frozen=True)
class ScenarioResponse:
    scenario_id: str
    choice: str  # "A" | "B" | "reject_both"
    reason: str = ""

    def to_json_dict(self) -> dict:
        return {"scenario_id": self.scenario_id, "choice": self.choice,
                "reason": self.reason}


def _scenario_id(kind: str, rng: np.random.Generator) -> str:
    raw = int.from_bytes(rng.bytes(16), "big")
    return f"{kind}-{uuid.UUID(int=raw, version=4)}"


def _rejected_profiles(dataset, tree: DecisionTree, schema: FeatureSchema,
                       rng: np.random.Generator):
    """Rejected-by-the-tree profiles from the dataset, in random order."""
    pool = [lp.profile for lp in dataset]
    order = rng.permutation(len(pool))
    for k in order:
        x = pool[k]
        if tree.predict(x, schema)[0] == REJECTED:
            yield x


def _cached_top_k(tree: DecisionTree, x: ApplicantProfile,
                  schema: FeatureSchema, cfg: GenerationConfig) -> list:
    """Top-K candidates memoized on the tree; the ranking ignores weights."""
    cache = tree.__dict__.setdefault("_topk_cache", {})
    key = (x, cfg.k)
    if key not in cache:
        cache[key] = generate_top_k(tree, x, schema, cfg)
    return cache[key]


def _divergent(prox_a, wp_a, prox_b, wp_b, margin: float) -> bool:
    """True when one recourse wins on prox, the other on weighted prox."""
    gap_p = abs(prox_a - prox_b)
    gap_w = abs(wp_a - wp_b)
    base_p = max(prox_a, prox_b)
    base_w = max(wp_a, wp_b)
    if gap_p < margin * base_p or gap_w < margin * base_w:
        return False
    return (prox_a < prox_b) != (wp_a < wp_b)


def build_tradeoff_scenarios(tree: DecisionTree, dataset, w: FeatureWeights,
                             n: int, seed: int,
                             schema: FeatureSchema | None = None,
                             cfg: GenerationConfig | None = None,
                             margin: float = 0.1) -> tuple[list[Scenario], bool]:
    """n trade-off scenarios under construction weights w.

    Returns (scenarios, complete); complete is False when the dataset ran out
    of qualifying profiles before n scenarios were found.
    """
    schema = schema or default_schema()
    cfg = cfg or GenerationConfig()
    if max(w.values) / min(w.values) < 1.0 + 1e-9:
        raise ValueError("uniform construction weights admit no trade-off pairs")
    rng = np.random.default_rng(seed)
    scenarios: list[Scenario] = []
    for x in _rejected_profiles(dataset, tree, schema, rng):
        if len(scenarios) >= n:
            break
        candidates = _cached_top_k(tree, x, schema, cfg)
        pairs = []
        for i in range(len(candidates)):
            for j in range(i + 1, len(candidates)):
                ri, rj = candidates[i], candidates[j]
                wi = weighted_prox(x, ri.counterfactual, w, schema)
                wj = weighted_prox(x, rj.counterfactual, w, schema)
                if _divergent(ri.cost.prox, wi, rj.cost.prox, wj, margin):
                    pairs.append((ri, rj))
        if not pairs:
            continue
        ri, rj = pairs[int(rng.integers(len(pairs)))]
        if rng.integers(2):
            ri, rj = rj, ri
        lower_prox = "A" if ri.cost.prox < rj.cost.prox else "B"
        scenarios.append(Scenario(
            id=_scenario_id("tradeoff", rng), kind="tradeoff", source=x,
            recourse_a=ri, recourse_b=rj,
            meta={"lower_prox": lower_prox,
                  "lower_weighted_prox": "B" if lower_prox == "A" else "A"},
        ))
    return scenarios, len(scenarios) >= n


def build_probing_scenarios(tree: DecisionTree, dataset, w: FeatureWeights,
                            n: int, seed: int,
                            schema: FeatureSchema | None = None,
                            cfg: GenerationConfig | None = None,
                            margin: float = 0.1) -> tuple[list[Scenario], bool]:
    """n probing scenarios: single-feature recourse pairs on distinct features."""
    schema = schema or default_schema()
    cfg = cfg or GenerationConfig()
    rng = np.random.default_rng(seed)
    probe_ok = set(DEFAULT_PROBING_STEPS)
    scenarios: list[Scenario] = []
    for x in _rejected_profiles(dataset, tree, schema, rng):
        if len(scenarios) >= n:
            break
        candidates = _cached_top_k(tree, x, schema, cfg)
        singles: dict[str, Recourse] = {}
        for r in candidates:
            changed = r.changed_features(schema)
            if len(changed) != 1:
                continue
            name = schema.names[changed[0]]
            if name in probe_ok and name not in singles:
                singles[name] = r
        if len(singles) < 2:
            continue
        names = sorted(singles)
        pairs = []
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                ra, rb = singles[names[i]], singles[names[j]]
                wa = weighted_prox(x, ra.counterfactual, w, schema)
                wb = weighted_prox(x, rb.counterfactual, w, schema)
                gap = abs(wa - wb)
                if gap >= margin * max(wa, wb):
                    pairs.append((ra, rb))
        if not pairs:
            continue
        ra, rb = pairs[int(rng.integers(len(pairs)))]
        if rng.integers(2):
            ra, rb = rb, ra
        scenarios.append(Scenario(
            id=_scenario_id("probing", rng), kind="probing", source=x,
            recourse_a=ra, recourse_b=rb,
            meta={"feature_a": schema.names[ra.changed_features(schema)[0]],
                  "feature_b": schema.names[rb.changed_features(schema)[0]]},
        ))
    return scenarios, len(scenarios) >= n


# Normalized-delta ratios swept by the elicitation battery. The wide tails
# matter: a ratio outside the swept range is only ever bracketed on one side,
# leaving that weight's magnitude censored.
ELICITATION_RATIOS = (0.15, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 1.0,
                      4.0 / 3.0, 2.0, 2.5, 3.0, 4.0)


def default_battery_source(schema: FeatureSchema | None = None) -> ApplicantProfile:
    """Source profile with full headroom on every feature's allowed direction."""
    return ApplicantProfile(income=10_000.0, credit_score=300,
                            employment_type=0, education_level=0,
                            loan_amount=50_000.0)


def _headroom(x: ApplicantProfile, schema: FeatureSchema, i: int) -> tuple[float, int]:
    """(max normalized move, sign) available to feature i from x."""
    spec = schema.features[i]
    v = x.value_of(schema, i)
    lo = spec.lo if spec.kind == "continuous" else spec.code_lo
    hi = spec.hi if spec.kind == "continuous" else spec.code_hi
    up = (hi - v) / spec.range
    down = (v - lo) / spec.range
    if spec.direction is Direction.INCREASE_ONLY:
        return up, 1
    if spec.direction is Direction.DECREASE_ONLY:
        return down, -1
    return (up, 1) if up >= down else (down, -1)


def _single_feature_variant(x: ApplicantProfile, schema: FeatureSchema,
                            i: int, delta: float) -> Recourse | None:
    """Recourse changing only feature i by normalized delta, or None."""
    room, sign = _headroom(x, schema, i)
    if delta <= 0 or delta > room + 1e-9:
        return None
    spec = schema.features[i]
    step = delta * spec.range
    if spec.kind == "categorical" or spec.integer:
        step = round(step)
        if step == 0:
            return None
    cf = x.replace_value(schema, i, x.value_of(schema, i) + sign * step)
    return Recourse(source=x, counterfactual=cf, leaf_id=-1,
                    cost=cost_report(x, cf, None, schema))


def _pair_delta_grid(schema: FeatureSchema, x: ApplicantProfile,
                     i: int, j: int, per_pair: int) -> list[tuple[float, float]]:
    """Up to per_pair (delta_i, delta_j) combos, equal-delta ones first."""
    def grid(k: int) -> list[float] | None:
        spec = schema.features[k]
        room, _ = _headroom(x, schema, k)
        if spec.kind == "categorical":
            levels = int(spec.range)
            return [s / levels for s in range(1, levels + 1) if s / levels <= room + 1e-9]
        return None  # continuous: any delta up to room

    gi, gj = grid(i), grid(j)
    room_i, _ = _headroom(x, schema, i)
    room_j, _ = _headroom(x, schema, j)
    combos: list[tuple[float, float]] = []
    if gi is not None and gj is not None:
        combos = [(a, b) for a in gi for b in gj]
    elif gi is not None:
        combos = [(a, r * a) for a in gi for r in ELICITATION_RATIOS if r * a <= room_j + 1e-9]
    elif gj is not None:
        combos = [(r * b, b) for b in gj for r in ELICITATION_RATIOS if r * b <= room_i + 1e-9]
    else:
        for base in (0.15, 0.25):
            combos += [(base, r * base) for r in ELICITATION_RATIOS
                       if base <= room_i and r * base <= room_j]
    # equal-delta combos reveal the weight order directly; extreme ratios pin
    # the magnitude. Sort by ratio balance, then interleave front and back so
    # the per-pair cap keeps both kinds.
    combos.sort(key=lambda c: (abs(math.log(c[0] / c[1])), -(c[0] + c[1])))
    picked: list[tuple[float, float]] = []
    lo, hi = 0, len(combos) - 1
    while lo <= hi and len(picked) < per_pair:
        picked.append(combos[lo])
        lo += 1
        if lo <= hi and len(picked) < per_pair:
            picked.append(combos[hi])
            hi -= 1
    return picked


def _shrink_single_feature(x: ApplicantProfile, schema: FeatureSchema,
                           r: Recourse) -> Recourse | None:
    """Halve a single-feature recourse's move; None when already minimal."""
    changed = r.changed_features(schema)
    if len(changed) != 1:
        return None
    i = changed[0]
    spec = schema.features[i]
    delta = r.cost.deltas[i]
    if spec.kind == "categorical" or spec.integer:
        steps = round(delta * spec.range)
        if steps <= 1 and spec.kind == "categorical":
            return None
        new_delta = max(1, steps // 2) / spec.range
    else:
        new_delta = delta / 2.0
        if new_delta * spec.range < 1.0:
            return None
    if abs(new_delta - delta) * spec.range < 0.5:
        return None
    return _single_feature_variant(x, schema, i, new_delta)


def _parse_threshold_reason(reason: str) -> tuple[set[str], set[str]]:
    """Feature names blamed on each side of a "threshold:..." rationale."""
    a_feats: set[str] = set()
    b_feats: set[str] = set()
    _, _, body = reason.partition(":")
    for entry in body.split(","):
        side, _, name = entry.partition(":")
        (a_feats if side == "A" else b_feats).add(name)
    return a_feats, b_feats


def backoff_battery_retries(user, tainted: list[tuple[Scenario, str]],
                            rng: np.random.Generator,
                            schema: FeatureSchema | None = None,
                            rounds: int = 3) -> list[PairwiseComparison]:
    """Re-ask cap-rejected battery comparisons with smaller moves.

    A cap rejection names the offending feature but says nothing about the
    user's weights, so the comparison is re-posed with the blamed side's
    move halved until both sides clear the caps or the move bottoms out.
    Returns every retry asked, preference-driven or not.
    """
    schema = schema or default_schema()
    out: list[PairwiseComparison] = []
    queue = list(tainted)
    for _ in range(rounds):
        next_queue: list[tuple[Scenario, str]] = []
        for sc, reason in queue:
            a_blamed, b_blamed = _parse_threshold_reason(reason)
            ra = _shrink_single_feature(sc.source, schema, sc.recourse_a) if a_blamed else sc.recourse_a
            rb = _shrink_single_feature(sc.source, schema, sc.recourse_b) if b_blamed else sc.recourse_b
            if ra is None or rb is None or ra.cost.deltas == rb.cost.deltas:
                continue
            retry = Scenario(id=_scenario_id("battery", rng), kind="tradeoff",
                             source=sc.source, recourse_a=ra, recourse_b=rb,
                             meta=dict(sc.meta))
            choice, retry_reason = user.forced_choice_with_reason(
                retry.source, ra, rb, rng, schema)
            out.append(PairwiseComparison(
                scenario_id=retry.id, source=retry.source, recourse_a=ra,
                recourse_b=rb, choice=choice, reason=retry_reason))
            if retry_reason.startswith(PIVOT_THRESHOLD):
                next_queue.append((retry, retry_reason))
        queue = next_queue
    return out


def build_elicitation_battery(seed: int,
                              source: ApplicantProfile | None = None,
                              schema: FeatureSchema | None = None,
                              per_pair: int = 10) -> list[Scenario]:
    """Single-feature comparison battery covering every feature pair.

    For each of the d·(d-1)/2 feature pairs, builds up to per_pair
    comparisons between two hypothetical single-feature recourses whose
    normalized deltas sweep ELICITATION_RATIOS, always leading with an
    equal-delta comparison when both features' grids admit one. A noiseless
    chooser's answers pin the order of every weight pair, which the
    margin-filtered trade-off scenarios alone do not guarantee.
    """
    schema = schema or default_schema()
    x = source or default_battery_source(schema)
    rng = np.random.default_rng(seed)
    scenarios: list[Scenario] = []
    for i in range(schema.d):
        for j in range(i + 1, schema.d):
            for k, (di, dj) in enumerate(_pair_delta_grid(schema, x, i, j, per_pair)):
                ri = _single_feature_variant(x, schema, i, di)
                rj = _single_feature_variant(x, schema, j, dj)
                if ri is None or rj is None:
                    continue
                ra, rb = (ri, rj) if k % 2 == 0 else (rj, ri)
                scenarios.append(Scenario(
                    id=_scenario_id("battery", rng), kind="tradeoff",
                    source=x, recourse_a=ra, recourse_b=rb,
                    meta={"battery_pair": [schema.names[i], schema.names[j]]},
                ))
    return scenarios


def build_rounding_scenarios(tree: DecisionTree, dataset, n: int, seed: int,
                             schema: FeatureSchema | None = None,
                             cfg: GenerationConfig | None = None) -> tuple[list[Scenario], bool]:
    """n rounding scenarios: exact recourse vs its rounded-away variant."""
    schema = schema or default_schema()
    cfg = cfg or GenerationConfig()
    rng = np.random.default_rng(seed)
    scenarios: list[Scenario] = []
    for x in _rejected_profiles(dataset, tree, schema, rng):
        if len(scenarios) >= n:
            break
        candidates = _cached_top_k(tree, x, schema, cfg)
        for r in candidates:
            rv = rounded_variant(r, tree, cfg, schema)
            if rv is None or rv.counterfactual == r.counterfactual:
                continue
            exact_side = "A" if rng.integers(2) else "B"
            ra, rb = (r, rv) if exact_side == "A" else (rv, r)
            scenarios.append(Scenario(
                id=_scenario_id("rounding", rng), kind="rounding", source=x,
                recourse_a=ra, recourse_b=rb,
                meta={"exact": exact_side,
                      "rounded": "B" if exact_side == "A" else "A"},
            ))
            break
    return scenarios, len(scenarios) >= n


# ---------------------------------------------------------------------------
# Probing state machine


@dataclass(frozen=True)
class ThresholdInterval:
    """Bracket on a user's acceptability cap for one feature, in target values.

    `last_accepted` is the largest-change target the user accepted (the source
    value when the side was never accepted); `first_rejected` the first target
    they refused. `cap_is_schema_bound` marks escalations that ran out of
    schema range without a refusal.
    """

    feature: str
    last_accepted: float
    first_rejected: float | None
    cap_is_schema_bound: bool = False

    def contains(self, alpha: float,
                 schema: FeatureSchema | None = None) -> bool:
        """Whether alpha is consistent with the recorded bracket.

        For decrease-only features the escalation direction is downward, so
        the accepted/rejected targets arrive in the opposite order; the
        bracket is the closed interval between them either way.
        """
        if self.cap_is_schema_bound:
            schema = schema or default_schema()
            if schema.spec(self.feature).direction == Direction.DECREASE_ONLY:
                return alpha <= self.last_accepted
            return alpha >= self.last_accepted
        lo, hi = sorted((self.last_accepted, self.first_rejected))
        return lo <= alpha <= hi

    def to_json_dict(self) -> dict:
        return {"feature": self.feature, "last_accepted": self.last_accepted,
                "first_rejected": self.first_rejected,
                "cap_is_schema_bound": self.cap_is_schema_bound}


PHASE_ESCALATE_FIRST = "EscalateFirst"
PHASE_ESCALATE_SECOND = "EscalateSecond"
PHASE_TERMINATED = "Terminated"


@dataclass(frozen=True)
class ProbingSession:
    """Escalate-and-pivot protocol state for one probing scenario.

    The initially chosen side escalates step by step; a pivot hands escalation
    to the other side against the last accepted variant; reject-both ends the
    session. Threshold intervals are recorded at pivots corroborated as
    threshold-driven and at reject-both events.
    """

    scenario: Scenario
    phase: str
    first_side: str  # side chosen initially ("A" or "B")
    offer_first: Recourse  # current escalated variant of the first side
    offer_second: Recourse  # current variant of the other side
    last_accepted_first: Recourse
    second_ever_accepted: bool
    history: tuple[tuple[str, str], ...]  # (phase, choice)
    intervals: tuple[ThresholdInterval, ...]
    steps: dict = field(default_factory=lambda: dict(DEFAULT_PROBING_STEPS))

    @property
    def terminated(self) -> bool:
        return self.phase == PHASE_TERMINATED

    def current_pair(self) -> tuple[Recourse, Recourse]:
        """(escalating offer, standing offer) for the next question."""
        return self.offer_first, self.offer_second

    def to_json_dict(self, schema: FeatureSchema | None = None) -> dict:
        schema = schema or default_schema()
        return {
            "scenario": self.scenario.to_json_dict(schema),
            "phase": self.phase,
            "first_side": self.first_side,
            "offer_first": self.offer_first.to_json_dict(schema),
            "offer_second": self.offer_second.to_json_dict(schema),
            "last_accepted_first": self.last_accepted_first.to_json_dict(schema),
            "second_ever_accepted": self.second_ever_accepted,
            "history": [list(h) for h in self.history],
            "intervals": [iv.to_json_dict() for iv in self.intervals],
            "steps": self.steps,
        }

    @classmethod
    def from_json_dict(cls, doc: dict, schema: FeatureSchema | None = None) -> "ProbingSession":
        schema = schema or default_schema()
        return cls(
            scenario=Scenario.from_json_dict(doc["scenario"], schema),
            phase=doc["phase"],
            first_side=doc["first_side"],
            offer_first=Recourse.from_json_dict(doc["offer_first"], schema=schema),
            offer_second=Recourse.from_json_dict(doc["offer_second"], schema=schema),
            last_accepted_first=Recourse.from_json_dict(doc["last_accepted_first"], schema=schema),
            second_ever_accepted=doc["second_ever_accepted"],
            history=tuple((h[0], h[1]) for h in doc["history"]),
            intervals=tuple(
                ThresholdInterval(iv["feature"], iv["last_accepted"],
                                  iv["first_rejected"], iv["cap_is_schema_bound"])
                for iv in doc["intervals"]),
            steps=doc["steps"],
        )


def probed_feature(r: Recourse, schema: FeatureSchema) -> str:
    changed = r.changed_features(schema)
    if len(changed) != 1:
        raise ValueError("probing recourse must change exactly one feature")
    return schema.names[changed[0]]


def start_probing(scenario: Scenario, initial_choice: str,
                  schema: FeatureSchema | None = None,
                  steps: dict | None = None) -> ProbingSession:
    """Open the protocol after the user's initial A/B choice.

    An initial reject-both is terminal: both probed features get a bracket
    with first-rejected at the initially offered magnitude.
    """
    schema = schema or default_schema()
    steps = dict(steps or DEFAULT_PROBING_STEPS)
    fa = probed_feature(scenario.recourse_a, schema)
    fb = probed_feature(scenario.recourse_b, schema)
    if initial_choice == REJECT_BOTH:
        intervals = tuple(
            ThresholdInterval(
                feature=f,
                last_accepted=scenario.source.value_of(schema, schema.index(f)),
                first_rejected=r.counterfactual.value_of(schema, schema.index(f)),
            )
            for f, r in ((fa, scenario.recourse_a), (fb, scenario.recourse_b))
        )
        return ProbingSession(
            scenario=scenario, phase=PHASE_TERMINATED, first_side="A",
            offer_first=scenario.recourse_a, offer_second=scenario.recourse_b,
            last_accepted_first=scenario.recourse_a, second_ever_accepted=False,
            history=(("Initial", REJECT_BOTH),), intervals=intervals, steps=steps)
    if initial_choice not in ("A", "B"):
        raise ValueError(f"initial choice must be A, B or reject_both, got {initial_choice!r}")
    first = scenario.recourse(initial_choice)
    second = scenario.recourse("B" if initial_choice == "A" else "A")
    return ProbingSession(
        scenario=scenario, phase=PHASE_ESCALATE_FIRST, first_side=initial_choice,
        offer_first=first, offer_second=second, last_accepted_first=first,
        second_ever_accepted=False, history=(("Initial", initial_choice),),
        intervals=(), steps=steps)


def _escalate(r: Recourse, feature: str, step: float, tree: DecisionTree,
              schema: FeatureSchema) -> Recourse | None:
    """Next valid escalated variant of r, or None at the schema bound.

    Steps the probed feature one increment further in its change direction,
    skipping over variants the tree rejects.
    """
    i = schema.index(feature)
    spec = schema.features[i]
    sign = -1.0 if spec.direction == Direction.DECREASE_ONLY else 1.0
    v = r.counterfactual.value_of(schema, i)
    while True:
        v = v + sign * step
        if v < spec.code_lo or v > spec.code_hi:
            return None
        cand = r.counterfactual.replace_value(schema, i, v)
        label, leaf = tree.predict(cand, schema)
        if label == APPROVED:
            from .metrics import cost_report
            return Recourse(source=r.source, counterfactual=cand, leaf_id=leaf,
                            cost=cost_report(r.source, cand, None, schema))


def probing_step(session: ProbingSession, choice: str, tree: DecisionTree,
                 pivot_reason: str = PIVOT_THRESHOLD,
                 schema: FeatureSchema | None = None) -> ProbingSession:
    """Advance the protocol with the user's answer to the current pair.

    `choice` is "escalate" (still prefer the escalating side), "other"
    (pivot to the standing side), or "reject_both". Pivots record a threshold
    bracket only when corroborated as threshold-driven.
    """
    schema = schema or default_schema()
    if session.terminated:
        raise ValueError("session already terminated")
    f_first = probed_feature(session.offer_first, schema)
    f_second = probed_feature(session.offer_second, schema)
    i_first = schema.index(f_first)
    i_second = schema.index(f_second)
    history = session.history + ((session.phase, choice),)

    if choice == "escalate":
        nxt = _escalate(session.offer_first, f_first, session.steps[f_first],
                        tree, schema)
        if nxt is None:
            # escalation ran out of schema range: cap = schema bound
            iv = ThresholdInterval(
                feature=f_first,
                last_accepted=session.offer_first.counterfactual.value_of(schema, i_first),
                first_rejected=None, cap_is_schema_bound=True)
            return replace(session, phase=PHASE_TERMINATED, history=history,
                           last_accepted_first=session.offer_first,
                           intervals=session.intervals + (iv,))
        return replace(session, offer_first=nxt, history=history,
                       last_accepted_first=session.offer_first)

    if choice == "other":
        intervals = session.intervals
        if pivot_reason == PIVOT_THRESHOLD:
            intervals = intervals + (ThresholdInterval(
                feature=f_first,
                last_accepted=session.last_accepted_first.counterfactual.value_of(schema, i_first),
                first_rejected=session.offer_first.counterfactual.value_of(schema, i_first),
            ),)
        if session.phase == PHASE_ESCALATE_SECOND:
            # pivot back to the first side ends the protocol
            return replace(session, phase=PHASE_TERMINATED, history=history,
                           intervals=intervals)
        # hand escalation to the other side, against the last accepted variant
        return replace(
            session, phase=PHASE_ESCALATE_SECOND, history=history,
            offer_first=session.offer_second,
            offer_second=session.last_accepted_first,
            last_accepted_first=session.offer_second,
            second_ever_accepted=True,
            intervals=intervals,
        )

    if choice == REJECT_BOTH:
        intervals = session.intervals + (ThresholdInterval(
            feature=f_first,
            last_accepted=session.last_accepted_first.counterfactual.value_of(schema, i_first),
            first_rejected=session.offer_first.counterfactual.value_of(schema, i_first),
        ),)
        if not session.second_ever_accepted and session.phase == PHASE_ESCALATE_FIRST:
            # the standing side was never within the acceptable range
            intervals = intervals + (ThresholdInterval(
                feature=f_second,
                last_accepted=session.scenario.source.value_of(schema, i_second),
                first_rejected=session.offer_second.counterfactual.value_of(schema, i_second),
            ),)
        return replace(session, phase=PHASE_TERMINATED, history=history,
                       intervals=intervals)

    raise ValueError(f"unknown probing choice {choice!r}")


# ---------------------------------------------------------------------------
# Simulated users


@dataclass(frozen=True)
class SimulatedUser:
    """Desk-scale surrogate participant with known weights and caps.

    tau = 0 reproduces the two-stage choice rule exactly; tau > 0 adds
    logistic noise to the weighted-proximity comparison. Cap-driven
    rejections stay deterministic at any tau.
    """

    weights: FeatureWeights
    thresholds: Thresholds
    tau: float = 0.0
    seed: int = 0

    def _acceptable(self, x, r, schema) -> bool:
        return not self.thresholds.violations(x, r, schema)

    def _pick(self, x, ra: Recourse, rb: Recourse, rng, schema) -> str:
        wa = weighted_prox(x, ra.counterfactual, self.weights, schema)
        wb = weighted_prox(x, rb.counterfactual, self.weights, schema)
        if self.tau <= 0:
            return "A" if wa <= wb else "B"
        p_a = 1.0 / (1.0 + math.exp(-(wb - wa) / (self.tau * NOISE_SCALE)))
        return "A" if rng.random() < p_a else "B"

    def choose(self, x: ApplicantProfile, ra: Recourse, rb: Recourse,
               rng: np.random.Generator,
               schema: FeatureSchema | None = None) -> str:
        """"A", "B", or "reject_both"."""
        schema = schema or default_schema()
        ok_a = self._acceptable(x, ra, schema)
        ok_b = self._acceptable(x, rb, schema)
        if not ok_a and not ok_b:
            return REJECT_BOTH
        if ok_a != ok_b:
            return "A" if ok_a else "B"
        return self._pick(x, ra, rb, rng, schema)

    def forced_choice(self, x: ApplicantProfile, ra: Recourse, rb: Recourse,
                      rng: np.random.Generator,
                      schema: FeatureSchema | None = None) -> str:
        """Forced A/B pick (Session-1 format: no reject option)."""
        return self.forced_choice_with_reason(x, ra, rb, rng, schema)[0]

    def forced_choice_with_reason(self, x: ApplicantProfile, ra: Recourse,
                                  rb: Recourse, rng: np.random.Generator,
                                  schema: FeatureSchema | None = None) -> tuple[str, str]:
        """Forced A/B pick plus the stated reason for it.

        The reason is "preference" when both options clear the user's caps
        (the pick reflects weighted proximity) and "threshold" when
        acceptability forced or tainted the pick. Mirrors the free-text
        rationales collected alongside each comparison; only
        preference-driven picks carry weight information.
        """
        schema = schema or default_schema()
        viol_a = self.thresholds.violations(x, ra, schema)
        viol_b = self.thresholds.violations(x, rb, schema)
        if not viol_a and not viol_b:
            return self._pick(x, ra, rb, rng, schema), PIVOT_PREFERENCE
        # name the offending features, as a participant's rationale would
        named = sorted({f"A:{f}" for f in viol_a} | {f"B:{f}" for f in viol_b})
        reason = PIVOT_THRESHOLD + ":" + ",".join(named)
        if bool(viol_a) != bool(viol_b):
            return ("A" if not viol_a else "B"), reason
        return self._pick(x, ra, rb, rng, schema), reason


def run_probing_session(scenario: Scenario, user: SimulatedUser,
                        tree: DecisionTree, rng: np.random.Generator,
                        schema: FeatureSchema | None = None,
                        steps: dict | None = None) -> ProbingSession:
    """Drive the probing protocol with a simulated user until termination."""
    schema = schema or default_schema()
    x = scenario.source
    initial = user.choose(x, scenario.recourse_a, scenario.recourse_b, rng, schema)
    session = start_probing(scenario, initial, schema, steps)
    guard = 0
    while not session.terminated:
        guard += 1
        if guard > 10_000:
            raise RuntimeError("probing session failed to terminate")
        first, second = session.current_pair()
        ok_first = user._acceptable(x, first, schema)
        ok_second = user._acceptable(x, second, schema)
        if not ok_first and not ok_second:
            session = probing_step(session, REJECT_BOTH, tree, schema=schema)
        elif not ok_first:
            session = probing_step(session, "other", tree,
                                   pivot_reason=PIVOT_THRESHOLD, schema=schema)
        elif not ok_second:
            session = probing_step(session, "escalate", tree, schema=schema)
        else:
            pick = user._pick(x, first, second, rng, schema)
            if pick == "A":
                session = probing_step(session, "escalate", tree, schema=schema)
            else:
                session = probing_step(session, "other", tree,
                                       pivot_reason=PIVOT_PREFERENCE, schema=schema)
    return session


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class EvaluationReport:
    n_scenarios: int
    bin_none_acceptable: int
    bin_one_acceptable: int
    bin_both_acceptable: int
    awp_accuracy: float | None  # None when the both-acceptable bin is empty
    n_awp_evaluated: int
    prox_match_rate: float | None
    weighted_prox_match_rate: float | None
    sparsity_match_rate: float | None
    rounded_choice_rate: float | None

    def to_json_dict(self) -> dict:
        return {
            "n_scenarios": self.n_scenarios,
            "bins": {"none_acceptable": self.bin_none_acceptable,
                     "one_acceptable": self.bin_one_acceptable,
                     "both_acceptable": self.bin_both_acceptable},
            "awp_accuracy": self.awp_accuracy,
            "n_awp_evaluated": self.n_awp_evaluated,
            "prox_match_rate": self.prox_match_rate,
            "weighted_prox_match_rate": self.weighted_prox_match_rate,
            "sparsity_match_rate": self.sparsity_match_rate,
            "rounded_choice_rate": self.rounded_choice_rate,
        }

    def render_table(self) -> str:
        rows = [
            ("scenarios", self.n_scenarios),
            ("bin: none acceptable", self.bin_none_acceptable),
            ("bin: one acceptable", self.bin_one_acceptable),
            ("bin: both acceptable", self.bin_both_acceptable),
            ("two-stage accuracy (both-acceptable)",
             "n/a" if self.awp_accuracy is None else f"{self.awp_accuracy:.4f}"),
            ("evaluated pairs", self.n_awp_evaluated),
            ("choices matching lower prox",
             "n/a" if self.prox_match_rate is None else f"{self.prox_match_rate:.4f}"),
            ("choices matching lower weighted prox",
             "n/a" if self.weighted_prox_match_rate is None else f"{self.weighted_prox_match_rate:.4f}"),
            ("choices matching lower sparsity",
             "n/a" if self.sparsity_match_rate is None else f"{self.sparsity_match_rate:.4f}"),
            ("rounded side chosen",
             "n/a" if self.rounded_choice_rate is None else f"{self.rounded_choice_rate:.4f}"),
        ]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def _rate(hits: int, total: int) -> float | None:
    return hits / total if total else None


def evaluate_session(responses: list[ScenarioResponse], w: FeatureWeights,
                     alpha: Thresholds, scenarios: list[Scenario],
                     schema: FeatureSchema | None = None) -> EvaluationReport:
    """Bin scenarios by acceptability and score the two-stage predictions.

    The predictive-accuracy figure covers the both-acceptable bin, excluding
    rounding pairs (functionally equivalent sides make near-ties, and they
    probe presentation, not preference structure). Metric-match rates cover
    every definite A/B choice.
    """
    schema = schema or default_schema()
    by_id = {s.id: s for s in scenarios}
    missing = [r.scenario_id for r in responses if r.scenario_id not in by_id]
    if missing:
        raise ValueError(f"responses reference unknown scenarios: {missing[:3]}")
    bins = {0: 0, 1: 0, 2: 0}
    awp_hits = awp_total = 0
    prox_hits = prox_total = 0
    wp_hits = wp_total = 0
    sp_hits = sp_total = 0
    round_hits = round_total = 0
    for resp in responses:
        sc = by_id[resp.scenario_id]
        pair = [sc.recourse_a, sc.recourse_b]
        verdicts = stage1_filter(sc.source, pair, alpha, schema)
        n_ok = sum(v.acceptable for v in verdicts)
        bins[n_ok] += 1
        if resp.choice not in ("A", "B"):
            continue
        chosen = sc.recourse(resp.choice)
        other = sc.recourse("B" if resp.choice == "A" else "A")
        if chosen.cost.prox != other.cost.prox:
            prox_total += 1
            prox_hits += chosen.cost.prox < other.cost.prox
        wa = weighted_prox(sc.source, chosen.counterfactual, w, schema)
        wb = weighted_prox(sc.source, other.counterfactual, w, schema)
        if wa != wb:
            wp_total += 1
            wp_hits += wa < wb
        if chosen.cost.sparsity != other.cost.sparsity:
            sp_total += 1
            sp_hits += chosen.cost.sparsity < other.cost.sparsity
        if sc.kind == "rounding":
            round_total += 1
            round_hits += resp.choice == sc.meta.get("rounded")
        if n_ok == 2 and sc.kind != "rounding":
            pred = awp_predict(sc.source, pair, w, alpha, schema)
            assert pred.outcome == CHOSEN
            awp_total += 1
            awp_hits += ("A" if pred.chosen_index == 0 else "B") == resp.choice
    return EvaluationReport(
        n_scenarios=len(responses),
        bin_none_acceptable=bins[0],
        bin_one_acceptable=bins[1],
        bin_both_acceptable=bins[2],
        awp_accuracy=_rate(awp_hits, awp_total),
        n_awp_evaluated=awp_total,
        prox_match_rate=_rate(prox_hits, prox_total),
        weighted_prox_match_rate=_rate(wp_hits, wp_total),
        sparsity_match_rate=_rate(sp_hits, sp_total),
        rounded_choice_rate=_rate(round_hits, round_total),
    )


# ---------------------------------------------------------------------------
# Cohort simulation pipeline


@dataclass(frozen=True)
class StudyConfig:
    session1_tradeoff: int = 25
    session1_battery: bool = True
    battery_per_pair: int = 20
    backoff_rounds: int = 3
    session2_tradeoff: int = 15
    session2_probing: int = 10
    session2_rounding: int = 10
    margin: float = 0.25
    reg: float = 1e-4
    unbounded_cap_prob: float = 0.35

    def to_json_dict(self) -> dict:
        return {
            "session1_tradeoff": self.session1_tradeoff,
            "session1_battery": self.session1_battery,
            "battery_per_pair": self.battery_per_pair,
            "backoff_rounds": self.backoff_rounds,
            "session2_tradeoff": self.session2_tradeoff,
            "session2_probing": self.session2_probing,
            "session2_rounding": self.session2_rounding,
            "margin": self.margin,
            "reg": self.reg,
            "unbounded_cap_prob": self.unbounded_cap_prob,
        }


def sample_user(rng: np.random.Generator, schema: FeatureSchema | None = None,
                tau: float = 0.0, min_weight_ratio: float = 2.0,
                unbounded_cap_prob: float = 0.35) -> SimulatedUser:
    """Random ground-truth user: weights with a real spread, loose-ish caps."""
    schema = schema or default_schema()
    while True:
        raw = rng.uniform(0.4, 2.5, size=schema.d)
        if raw.max() / raw.min() >= min_weight_ratio:
            break
    w = FeatureWeights(values=tuple(raw)).normalized()
    caps: dict[str, float] = {}
    if rng.random() > unbounded_cap_prob:
        caps["income"] = float(rng.uniform(60_000, 400_000))
    if rng.random() > unbounded_cap_prob:
        caps["credit_score"] = float(rng.uniform(650, 850))
    if rng.random() > unbounded_cap_prob:
        caps["education_level"] = float(rng.integers(2, 5))
    if rng.random() > unbounded_cap_prob:
        caps["loan_amount"] = float(rng.uniform(1_000, 15_000))
    return SimulatedUser(weights=w, thresholds=Thresholds(caps=caps),
                         tau=tau, seed=int(rng.integers(2**31)))


@dataclass(frozen=True)
class UserRun:
    user: SimulatedUser
    fitted_weights: FeatureWeights
    session1: list[PairwiseComparison]
    session2_scenarios: list[Scenario]
    session2_responses: list[ScenarioResponse]
    probing_sessions: list[ProbingSession]
    report: EvaluationReport


def simulate_user_run(tree: DecisionTree, dataset, user: SimulatedUser,
                      seed: int, cfg: StudyConfig | None = None,
                      schema: FeatureSchema | None = None,
                      construction_weights: FeatureWeights | None = None) -> UserRun:
    """Session 1 -> fit -> personalized Session 2 -> evaluation, one user."""
    from .preference import fit_bt, weights_from_beta

    schema = schema or default_schema()
    cfg = cfg or StudyConfig()
    gw = construction_weights or GLOBAL_CONSTRUCTION_WEIGHTS
    rng = np.random.default_rng(seed)

    s1, _ = build_tradeoff_scenarios(
        tree, dataset, gw, cfg.session1_tradeoff, int(rng.integers(2**31)),
        schema, margin=cfg.margin)
    if cfg.session1_battery:
        s1 = s1 + build_elicitation_battery(int(rng.integers(2**31)), schema=schema,
                                            per_pair=cfg.battery_per_pair)
    comparisons = []
    tainted: list[tuple[Scenario, str]] = []
    for sc in s1:
        choice, reason = user.forced_choice_with_reason(
            sc.source, sc.recourse_a, sc.recourse_b, rng, schema)
        comparisons.append(PairwiseComparison(
            scenario_id=sc.id, source=sc.source, recourse_a=sc.recourse_a,
            recourse_b=sc.recourse_b, choice=choice, reason=reason))
        if reason.startswith(PIVOT_THRESHOLD) and sc.meta.get("battery_pair"):
            tainted.append((sc, reason))
    if cfg.session1_battery and tainted:
        comparisons += backoff_battery_retries(user, tainted, rng, schema,
                                               rounds=cfg.backoff_rounds)
    # cap-driven picks say nothing about the user's weights; fit on the rest
    preference_only = [c for c in comparisons
                       if not c.reason.startswith(PIVOT_THRESHOLD)]
    model = fit_bt(preference_only or comparisons, schema, reg=cfg.reg)
    w_hat = weights_from_beta(model)

    s2_trade, _ = build_tradeoff_scenarios(
        tree, dataset, w_hat, cfg.session2_tradeoff, int(rng.integers(2**31)),
        schema, margin=cfg.margin)
    s2_probe, _ = build_probing_scenarios(
        tree, dataset, w_hat, cfg.session2_probing, int(rng.integers(2**31)),
        schema, margin=cfg.margin)
    s2_round, _ = build_rounding_scenarios(
        tree, dataset, cfg.session2_rounding, int(rng.integers(2**31)), schema)
    scenarios = s2_trade + s2_probe + s2_round

    responses: list[ScenarioResponse] = []
    probing_sessions: list[ProbingSession] = []
    for sc in scenarios:
        if sc.kind == "probing":
            session = run_probing_session(sc, user, tree, rng, schema)
            probing_sessions.append(session)
            responses.append(ScenarioResponse(sc.id, session.history[0][1]))
        else:
            choice = user.choose(sc.source, sc.recourse_a, sc.recourse_b, rng, schema)
            responses.append(ScenarioResponse(sc.id, choice))

    report = evaluate_session(responses, w_hat, user.thresholds, scenarios, schema)
    return UserRun(user=user, fitted_weights=w_hat, session1=comparisons,
                   session2_scenarios=scenarios, session2_responses=responses,
                   probing_sessions=probing_sessions, report=report)


@dataclass(frozen=True)
class CohortReport:
    n_users: int
    tau: float
    awp_accuracy: float | None
    n_awp_evaluated: int
    bins: dict
    prox_match_rate: float | None
    weighted_prox_match_rate: float | None
    reports: tuple[EvaluationReport, ...] = field(repr=False, default=())

    def to_json_dict(self) -> dict:
        return {
            "n_users": self.n_users,
            "tau": self.tau,
            "awp_accuracy": self.awp_accuracy,
            "n_awp_evaluated": self.n_awp_evaluated,
            "bins": self.bins,
            "prox_match_rate": self.prox_match_rate,
            "weighted_prox_match_rate": self.weighted_prox_match_rate,
            "per_user": [r.to_json_dict() for r in self.reports],
        }


def simulate_cohort(tree: DecisionTree, dataset, n_users: int, tau: float,
                    seed: int, cfg: StudyConfig | None = None,
                    schema: FeatureSchema | None = None) -> CohortReport:
    """Full two-session pipeline over a simulated cohort; pooled report."""
    schema = schema or default_schema()
    cfg = cfg or StudyConfig()
    rng = np.random.default_rng(seed)
    reports = []
    awp_hits = awp_total = 0
    bins = {"none_acceptable": 0, "one_acceptable": 0, "both_acceptable": 0}
    for _ in range(n_users):
        user = sample_user(rng, schema, tau=tau,
                           unbounded_cap_prob=cfg.unbounded_cap_prob)
        run = simulate_user_run(tree, dataset, user, int(rng.integers(2**31)),
                                cfg, schema)
        rep = run.report
        reports.append(rep)
        if rep.awp_accuracy is not None:
            awp_hits += round(rep.awp_accuracy * rep.n_awp_evaluated)
            awp_total += rep.n_awp_evaluated
        bins["none_acceptable"] += rep.bin_none_acceptable
        bins["one_acceptable"] += rep.bin_one_acceptable
        bins["both_acceptable"] += rep.bin_both_acceptable
    prox_rates = [r.prox_match_rate for r in reports if r.prox_match_rate is not None]
    wp_rates = [r.weighted_prox_match_rate for r in reports
                if r.weighted_prox_match_rate is not None]
    return CohortReport(
        n_users=n_users, tau=tau,
        awp_accuracy=_rate(awp_hits, awp_total),
        n_awp_evaluated=awp_total,
        bins=bins,
        prox_match_rate=sum(prox_rates) / len(prox_rates) if prox_rates else None,
        weighted_prox_match_rate=sum(wp_rates) / len(wp_rates) if wp_rates else None,
        reports=tuple(reports),
    )


def write_scenarios_jsonl(path: str, scenarios: list[Scenario],
                          schema: FeatureSchema | None = None) -> None:
    with open(path, "w") as f:
        for sc in scenarios:
            f.write(json.dumps(sc.to_json_dict(schema)) + "\n")


def read_scenarios_jsonl(path: str, schema: FeatureSchema | None = None) -> list[Scenario]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(Scenario.from_json_dict(json.loads(line), schema))
    return out
