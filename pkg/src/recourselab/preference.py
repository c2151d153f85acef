"""Per-user Bradley-Terry preference model over feature changes.

Each pairwise comparison pits two recourses for the same source profile; the
utility of a recourse is the sum of per-feature strengths times normalized
deltas, and choices are logistic in the utility difference. The additive
complement of the fitted strengths gives the user's feature-change weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .metrics import FeatureWeights
from .recourse import Recourse
from .schema import ApplicantProfile, FeatureSchema, default_schema

BT_FORMAT_VERSION = 1

GRAD_TOL = 1e-8
MAX_ITER = 10_000
DEFAULT_REG = 1e-3
WEIGHT_FLOOR = 0.1


@dataclass(frozen=True)
class PairwiseComparison:
    scenario_id: str
    source: ApplicantProfile
    recourse_a: Recourse
    recourse_b: Recourse
    choice: str  # "A" | "B"
    reason: str = ""

    def __post_init__(self):
        if self.choice not in ("A", "B"):
            raise ValueError(f"choice must be 'A' or 'B', got {self.choice!r}")
        if self.recourse_a.cost.deltas == self.recourse_b.cost.deltas:
            raise ValueError("recourses must differ in at least one feature")

    def chosen(self) -> Recourse:
        return self.recourse_a if self.choice == "A" else self.recourse_b

    def other(self) -> Recourse:
        return self.recourse_b if self.choice == "A" else self.recourse_a

    def to_json_dict(self, schema: FeatureSchema | None = None) -> dict:
        schema = schema or default_schema()
        return {
            "scenario_id": self.scenario_id,
            "source": self.source.to_dict(),
            "recourse_a": self.recourse_a.to_json_dict(schema),
            "recourse_b": self.recourse_b.to_json_dict(schema),
            "choice": self.choice,
            "reason": self.reason,
        }

    @classmethod
    def from_json_dict(cls, doc: dict, schema: FeatureSchema | None = None) -> "PairwiseComparison":
        schema = schema or default_schema()
        return cls(
            scenario_id=doc["scenario_id"],
            source=ApplicantProfile.from_dict(doc["source"]),
            recourse_a=Recourse.from_json_dict(doc["recourse_a"], schema=schema),
            recourse_b=Recourse.from_json_dict(doc["recourse_b"], schema=schema),
            choice=doc["choice"],
            reason=doc.get("reason", ""),
        )


@dataclass(frozen=True)
class BTModel:
    beta: tuple[float, ...]
    log_likelihood: float
    iterations: int
    converged: bool
    reg: float
    objective_trace: tuple[float, ...] = field(default=(), repr=False)

    def to_json_dict(self, schema: FeatureSchema | None = None) -> dict:
        schema = schema or default_schema()
        return {
            "format_version": BT_FORMAT_VERSION,
            "beta": dict(zip(schema.names, self.beta)),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "reg": self.reg,
            "weights": weights_from_beta(self).to_json_dict(schema),
        }

    @classmethod
    def from_json_dict(cls, doc: dict, schema: FeatureSchema | None = None) -> "BTModel":
        schema = schema or default_schema()
        return cls(
            beta=tuple(float(doc["beta"][name]) for name in schema.names),
            log_likelihood=float(doc["log_likelihood"]),
            iterations=int(doc["iterations"]),
            converged=bool(doc["converged"]),
            reg=float(doc["reg"]),
        )


def fit_bt(comparisons: list[PairwiseComparison],
           schema: FeatureSchema | None = None,
           reg: float = DEFAULT_REG) -> BTModel:
    """L2-penalized maximum likelihood for the per-feature strengths.

    Unlike item-level Bradley-Terry, the strengths here are coefficients on
    feature deltas: adding a constant to every beta shifts each recourse's
    utility by a recourse-dependent amount, so the betas are fully
    identified and no gauge constraint is imposed. The ridge term keeps the
    optimum finite on separable data.

    Deterministic: zero initialization, L-BFGS, stop at gradient inf-norm
    below 1e-8 or 10k iterations.
    """
    if not comparisons:
        raise ValueError("need at least one comparison")
    schema = schema or default_schema()
    d = schema.d
    # z_k = deltas(chosen) - deltas(other); logistic likelihood of z.beta > 0
    Z = np.array([
        np.subtract(c.chosen().cost.deltas, c.other().cost.deltas)
        for c in comparisons
    ])
    trace: list[float] = []

    def objective(beta: np.ndarray) -> tuple[float, np.ndarray]:
        s = Z @ beta
        # -log sigma(s) computed stably
        nll = np.logaddexp(0.0, -s).sum() + reg * float(beta @ beta)
        sig = 1.0 / (1.0 + np.exp(-np.clip(s, -500, 500)))
        grad = -Z.T @ (1.0 - sig) + 2.0 * reg * beta
        return nll, grad

    def record(beta: np.ndarray) -> None:
        trace.append(-objective(beta)[0])

    beta0 = np.zeros(d)
    record(beta0)
    res = minimize(objective, beta0, jac=True, method="L-BFGS-B",
                   callback=record,
                   options={"gtol": GRAD_TOL, "maxiter": MAX_ITER, "ftol": 0.0})
    beta = res.x
    s = Z @ beta
    ll = float(-np.logaddexp(0.0, -s).sum())
    grad_norm = float(np.abs(res.jac).max())
    return BTModel(
        beta=tuple(float(b) for b in beta),
        log_likelihood=ll,
        iterations=int(res.nit),
        converged=bool(res.success or grad_norm < 1e-5),
        reg=reg,
        objective_trace=tuple(trace),
    )


def weights_from_beta(model: BTModel, floor: float = WEIGHT_FLOOR) -> FeatureWeights:
    """w_i = -beta_i, floored at 0.1 and rescaled to sum to d.

    A feature the user happily changes (high beta) gets a low weight, i.e. a
    low perceived cost. The floor keeps every feature's change from being
    free; rescaling makes the neutral model come out uniform.
    """
    raw = [-b for b in model.beta]
    lo = min(raw)
    if lo < floor:
        raw = [r + (floor - lo) for r in raw]  # rank-preserving shift
    d = len(raw)
    s = sum(raw)
    return FeatureWeights(values=tuple(r * d / s for r in raw))


def read_comparisons_jsonl(path: str, schema: FeatureSchema | None = None) -> list[PairwiseComparison]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(PairwiseComparison.from_json_dict(json.loads(line), schema))
    return out


def write_comparisons_jsonl(path: str, comparisons: list[PairwiseComparison],
                            schema: FeatureSchema | None = None) -> None:
    with open(path, "w") as f:
        for c in comparisons:
            f.write(json.dumps(c.to_json_dict(schema)) + "\n")
