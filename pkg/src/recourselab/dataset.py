"""Synthetic credit application dataset: sampling, desirability scoring, labeling.

Profiles are sampled independently per feature (log-normal income, left-skewed
beta credit score, uniform loan amount, fixed categorical marginals). Labels
come from a bank-style desirability score: the bottom half of the ranking is
rejected, the top half approved.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .schema import ApplicantProfile, FeatureSchema, default_schema, validate_profile

DATASET_FORMAT_VERSION = 1

# ln-median of the income log-normal, corrected for the [$10k, $500k]
# truncation so the *realized* median lands on $42k (the raw ln(42000) would
# drift the truncated median up to ~$43.5k because the lower cutoff removes
# more mass than the upper one).
INCOME_LN_MEDIAN = 10.605552322550473
INCOME_SIGMA = 0.8

DEFAULT_EDUCATION_PROBS = (0.40, 0.10, 0.30, 0.15, 0.05)
DEFAULT_EMPLOYMENT_PROBS = (0.05, 0.10, 0.70, 0.15)


@dataclass(frozen=True)
class LabeledProfile:
    profile: ApplicantProfile
    desirability: float
    decision: int  # 0 = rejected, 1 = approved


@dataclass(frozen=True)
class LabelingConfig:
    """Weights and desirability maps for the scoring rule.

    The four weights (credit score, income:amount ratio, education,
    employment) are positive and sum to 1.
    """

    w_credit: float = 0.40
    w_ratio: float = 0.30
    w_education: float = 0.15
    w_employment: float = 0.15
    education_desirability: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    employment_desirability: tuple[float, ...] = (0.0, 0.4, 0.7, 1.0)
    education_probs: tuple[float, ...] = DEFAULT_EDUCATION_PROBS
    employment_probs: tuple[float, ...] = DEFAULT_EMPLOYMENT_PROBS
    seed: int = 0

    def __post_init__(self):
        w = (self.w_credit, self.w_ratio, self.w_education, self.w_employment)
        if any(x <= 0 for x in w):
            raise ValueError("feature weights must be positive")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ValueError("feature weights must sum to 1")
        for probs in (self.education_probs, self.employment_probs):
            if abs(sum(probs) - 1.0) > 1e-9:
                raise ValueError("categorical marginals must sum to 1")

    def to_json_dict(self) -> dict:
        return {
            "format_version": DATASET_FORMAT_VERSION,
            "w_credit": self.w_credit,
            "w_ratio": self.w_ratio,
            "w_education": self.w_education,
            "w_employment": self.w_employment,
            "education_desirability": list(self.education_desirability),
            "employment_desirability": list(self.employment_desirability),
            "education_probs": list(self.education_probs),
            "employment_probs": list(self.employment_probs),
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LabelingConfig":
        kwargs = {k: doc[k] for k in (
            "w_credit", "w_ratio", "w_education", "w_employment", "seed") if k in doc}
        for k in ("education_desirability", "employment_desirability",
                  "education_probs", "employment_probs"):
            if k in doc:
                kwargs[k] = tuple(doc[k])
        return cls(**kwargs)


@dataclass(frozen=True)
class MinMaxStats:
    """Dataset min-max over the two normalized continuous components."""

    ratio_min: float
    ratio_max: float
    credit_min: float
    credit_max: float

    def __post_init__(self):
        if self.ratio_max <= self.ratio_min or self.credit_max <= self.credit_min:
            raise ValueError("zero-range feature in min-max stats")


def sample_profiles(n: int, seed: int, schema: FeatureSchema | None = None,
                    cfg: LabelingConfig | None = None) -> list[ApplicantProfile]:
    """Draw n applicant profiles; deterministic given the seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    schema = schema or default_schema()
    cfg = cfg or LabelingConfig()
    rng = np.random.default_rng(seed)

    income_spec = schema.spec("income")
    incomes = np.empty(n)
    filled = 0
    while filled < n:
        draw = rng.lognormal(mean=INCOME_LN_MEDIAN, sigma=INCOME_SIGMA, size=n - filled)
        keep = draw[(draw >= income_spec.lo) & (draw <= income_spec.hi)]
        incomes[filled:filled + len(keep)] = keep
        filled += len(keep)
    incomes = np.round(incomes, 2)

    credit = np.rint(850.0 - 550.0 * rng.beta(2.0, 4.0, size=n)).astype(int)
    credit = np.clip(credit, 300, 850)

    loan_spec = schema.spec("loan_amount")
    loans = np.round(rng.uniform(loan_spec.lo, loan_spec.hi, size=n), 2)

    employment = rng.choice(len(cfg.employment_probs), size=n, p=cfg.employment_probs)
    education = rng.choice(len(cfg.education_probs), size=n, p=cfg.education_probs)

    return [
        ApplicantProfile(
            income=float(incomes[k]),
            credit_score=int(credit[k]),
            employment_type=int(employment[k]),
            education_level=int(education[k]),
            loan_amount=float(loans[k]),
        )
        for k in range(n)
    ]


def minmax_stats(profiles: list[ApplicantProfile]) -> MinMaxStats:
    ratios = [p.income / p.loan_amount for p in profiles]
    credits = [float(p.credit_score) for p in profiles]
    return MinMaxStats(min(ratios), max(ratios), min(credits), max(credits))


def desirability(x: ApplicantProfile, cfg: LabelingConfig, norm: MinMaxStats) -> float:
    """Weighted sum of the four normalized components, in [0, 1]."""
    ratio = x.income / x.loan_amount
    ratio_n = (ratio - norm.ratio_min) / (norm.ratio_max - norm.ratio_min)
    credit_n = (x.credit_score - norm.credit_min) / (norm.credit_max - norm.credit_min)
    ratio_n = min(max(ratio_n, 0.0), 1.0)
    credit_n = min(max(credit_n, 0.0), 1.0)
    edu = cfg.education_desirability[x.education_level]
    emp = cfg.employment_desirability[x.employment_type]
    return (cfg.w_credit * credit_n + cfg.w_ratio * ratio_n
            + cfg.w_education * edu + cfg.w_employment * emp)


def label_dataset(profiles: list[ApplicantProfile],
                  cfg: LabelingConfig | None = None) -> list[LabeledProfile]:
    """Rank ascending by desirability; bottom half rejected, top half approved.

    Ties at the median break by original index (lower index ranks lower). The
    returned list preserves the input order.
    """
    if len(profiles) % 2 != 0:
        raise ValueError("dataset size must be even for a 50/50 split")
    cfg = cfg or LabelingConfig()
    norm = minmax_stats(profiles)
    scores = [desirability(p, cfg, norm) for p in profiles]
    order = sorted(range(len(profiles)), key=lambda k: (scores[k], k))
    decisions = [0] * len(profiles)
    for rank, k in enumerate(order):
        decisions[k] = 0 if rank < len(profiles) // 2 else 1
    return [LabeledProfile(p, s, dec) for p, s, dec in zip(profiles, scores, decisions)]


def synthesize(n: int, seed: int, cfg: LabelingConfig | None = None,
               schema: FeatureSchema | None = None) -> list[LabeledProfile]:
    schema = schema or default_schema()
    cfg = cfg or LabelingConfig()
    profiles = sample_profiles(n, seed, schema, cfg)
    bad = [v for p in profiles for v in validate_profile(p, schema)]
    if bad:
        raise AssertionError(f"sampled out-of-schema profiles: {bad[:5]}")
    return label_dataset(profiles, cfg)


def write_csv(path: str, labeled: list[LabeledProfile], schema: FeatureSchema,
              seed: int, cfg: LabelingConfig) -> None:
    meta = {"artifact": "dataset", "format_version": DATASET_FORMAT_VERSION,
            "seed": seed, "config": cfg.to_json_dict()}
    with open(path, "w", newline="") as f:
        f.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        writer = csv.writer(f)
        writer.writerow(list(schema.names) + ["desirability", "decision"])
        for lp in labeled:
            row = [lp.profile.value_of(schema, i) for i in range(schema.d)]
            writer.writerow(row + [f"{lp.desirability:.10f}", lp.decision])


def read_csv(path: str, schema: FeatureSchema | None = None) -> list[LabeledProfile]:
    schema = schema or default_schema()
    out = []
    with open(path) as f:
        first = f.readline()
        if not first.startswith("#"):
            f.seek(0)
        reader = csv.DictReader(f)
        for row in reader:
            profile = ApplicantProfile.from_values(
                schema, (float(row[name]) for name in schema.names))
            out.append(LabeledProfile(profile, float(row["desirability"]),
                                      int(row["decision"])))
    return out
