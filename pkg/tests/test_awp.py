"""Two-stage choice model: acceptability filter and weighted-proximity pick."""

import pytest

from recourselab.awp import (
    CHOSEN,
    NONE_ACCEPTABLE,
    ONLY_ONE_ACCEPTABLE,
    Thresholds,
    load_thresholds,
    predict,
    save_thresholds,
    stage1_filter,
    stage2_select,
)
from recourselab.metrics import FeatureWeights, cost_report
from recourselab.recourse import Recourse
from recourselab.schema import default_schema

from helpers import make_profile

SCHEMA = default_schema()

X = make_profile(income=30_000.0, credit_score=600, employment_type=2,
                 education_level=1, loan_amount=20_000.0)


def recourse_to(**targets):
    cf = X
    for name, v in targets.items():
        cf = cf.replace_value(SCHEMA, SCHEMA.index(name), v)
    return Recourse(source=X, counterfactual=cf, leaf_id=-1,
                    cost=cost_report(X, cf, None, SCHEMA))


class TestViolations:
    def test_increase_cap(self):
        alpha = Thresholds(caps={"income": 50_000.0})
        assert alpha.violations(X, recourse_to(income=60_000.0), SCHEMA) == ["income"]
        assert alpha.violations(X, recourse_to(income=50_000.0), SCHEMA) == []

    def test_decrease_cap_for_loan(self):
        # cap bounds the target from below for a decrease-only feature
        alpha = Thresholds(caps={"loan_amount": 10_000.0})
        assert alpha.violations(X, recourse_to(loan_amount=8_000.0), SCHEMA) == ["loan_amount"]
        assert alpha.violations(X, recourse_to(loan_amount=12_000.0), SCHEMA) == []

    def test_unchanged_feature_never_violates(self):
        alpha = Thresholds(caps={"income": 20_000.0})  # below current income
        assert alpha.violations(X, recourse_to(credit_score=700.0), SCHEMA) == []

    def test_employment_level_set(self):
        alpha = Thresholds(employment_levels=frozenset({2, 3}))
        assert alpha.violations(X, recourse_to(employment_type=1.0), SCHEMA) == ["employment_type"]
        assert alpha.violations(X, recourse_to(employment_type=3.0), SCHEMA) == []

    def test_missing_caps_mean_unbounded(self):
        r = recourse_to(income=499_000.0, credit_score=850.0, loan_amount=1_000.0)
        assert Thresholds().violations(X, r, SCHEMA) == []

    def test_multiple_violations_listed(self):
        alpha = Thresholds(caps={"income": 40_000.0, "credit_score": 650.0})
        r = recourse_to(income=60_000.0, credit_score=700.0)
        assert alpha.violations(X, r, SCHEMA) == ["income", "credit_score"]

    def test_relaxed_drops_one_cap(self):
        alpha = Thresholds(caps={"income": 40_000.0, "credit_score": 650.0})
        relaxed = alpha.relaxed("income")
        assert relaxed.cap_for("income") is None
        assert relaxed.cap_for("credit_score") == 650.0
        assert alpha.cap_for("income") == 40_000.0  # original untouched


class TestStage1:
    def test_one_verdict_per_candidate(self):
        alpha = Thresholds(caps={"income": 40_000.0})
        cands = [recourse_to(income=35_000.0), recourse_to(income=60_000.0),
                 recourse_to(credit_score=700.0)]
        verdicts = stage1_filter(X, cands, alpha, SCHEMA)
        assert [v.acceptable for v in verdicts] == [True, False, True]
        assert verdicts[1].violated_features == ("income",)
        assert [v.recourse_index for v in verdicts] == [0, 1, 2]


class TestStage2:
    def test_picks_lowest_weighted_prox(self):
        w = FeatureWeights(values=(4.0, 0.2, 0.2, 0.3, 0.3))
        cheap_credit = recourse_to(credit_score=800.0)   # heavy delta, light weight
        pricey_income = recourse_to(income=80_000.0)     # light delta, heavy weight
        idx = stage2_select([(0, pricey_income), (1, cheap_credit)], X, w, SCHEMA)
        assert idx == 1

    def test_tie_breaks_by_prox_then_leaf(self):
        w = FeatureWeights.uniform()
        a = recourse_to(income=30_000.0 + 0.1 * 490_000)
        b = recourse_to(credit_score=600 + 0.1 * 550)
        # equal prox and weighted prox; leaf ids equal -> first wins
        idx = stage2_select([(0, a), (1, b)], X, w, SCHEMA)
        assert idx == 0

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            stage2_select([], X, FeatureWeights.uniform(), SCHEMA)


class TestPredict:
    W = FeatureWeights(values=(2.0, 0.5, 0.5, 1.0, 1.0))

    def test_none_acceptable(self):
        alpha = Thresholds(caps={"income": 35_000.0, "credit_score": 620.0})
        pred = predict(X, [recourse_to(income=60_000.0),
                           recourse_to(credit_score=700.0)], self.W, alpha, SCHEMA)
        assert pred.outcome == NONE_ACCEPTABLE
        assert pred.chosen_index is None
        assert pred.weighted_prox_values == {}

    def test_only_one_acceptable(self):
        alpha = Thresholds(caps={"income": 35_000.0})
        pred = predict(X, [recourse_to(income=60_000.0),
                           recourse_to(credit_score=700.0)], self.W, alpha, SCHEMA)
        assert pred.outcome == ONLY_ONE_ACCEPTABLE
        assert pred.chosen_index == 1

    def test_chosen_among_survivors(self):
        pred = predict(X, [recourse_to(income=128_000.0),   # delta 0.2, weight 2.0
                           recourse_to(credit_score=710.0)],  # delta 0.2, weight 0.5
                       self.W, Thresholds(), SCHEMA)
        assert pred.outcome == CHOSEN
        assert pred.chosen_index == 1
        assert pred.weighted_prox_values[1] < pred.weighted_prox_values[0]

    def test_empty_candidates_raise(self):
        with pytest.raises(ValueError):
            predict(X, [], self.W, Thresholds(), SCHEMA)

    def test_json_dict_shape(self):
        pred = predict(X, [recourse_to(credit_score=700.0)], self.W,
                       Thresholds(), SCHEMA)
        doc = pred.to_json_dict()
        assert doc["outcome"] == ONLY_ONE_ACCEPTABLE
        assert doc["verdicts"][0]["acceptable"] is True


class TestSerialization:
    def test_round_trip(self, tmp_path):
        alpha = Thresholds(caps={"income": 40_000.0, "loan_amount": 5_000.0},
                           employment_levels=frozenset({0, 2}))
        path = str(tmp_path / "alpha.json")
        save_thresholds(path, alpha)
        assert load_thresholds(path) == alpha

    def test_round_trip_no_levels(self, tmp_path):
        alpha = Thresholds(caps={"credit_score": 700.0})
        path = str(tmp_path / "alpha.json")
        save_thresholds(path, alpha)
        assert load_thresholds(path) == alpha
