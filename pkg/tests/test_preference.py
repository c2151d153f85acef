"""Bradley-Terry fitting: recovery, optimality, weight derivation."""

import numpy as np
import pytest

from recourselab.metrics import FeatureWeights, cost_report
from recourselab.preference import (
    BTModel,
    PairwiseComparison,
    fit_bt,
    read_comparisons_jsonl,
    weights_from_beta,
    write_comparisons_jsonl,
)
from recourselab.recourse import Recourse
from recourselab.schema import default_schema

from helpers import make_profile

SCHEMA = default_schema()


def single_feature_recourse(x, i, delta):
    """Recourse moving feature i by normalized delta (sign per direction)."""
    spec = SCHEMA.features[i]
    sign = -1.0 if spec.name == "loan_amount" else 1.0
    step = delta * spec.range
    if spec.kind == "categorical" or spec.integer:
        step = round(step)
    cf = x.replace_value(SCHEMA, i, x.value_of(SCHEMA, i) + sign * step)
    return Recourse(source=x, counterfactual=cf, leaf_id=-1,
                    cost=cost_report(x, cf, None, SCHEMA))


def synthetic_comparisons(beta, n, seed, noiseless=True):
    """Comparisons whose choices follow the sign of the utility gap."""
    rng = np.random.default_rng(seed)
    x = make_profile(income=20_000.0, credit_score=400, employment_type=0,
                     education_level=0, loan_amount=40_000.0)
    out = []
    while len(out) < n:
        i, j = rng.choice(SCHEMA.d, size=2, replace=False)
        da, db = rng.uniform(0.05, 0.5, size=2)
        ra = single_feature_recourse(x, int(i), float(da))
        rb = single_feature_recourse(x, int(j), float(db))
        if ra.cost.deltas == rb.cost.deltas:
            continue
        ua = sum(b * d for b, d in zip(beta, ra.cost.deltas))
        ub = sum(b * d for b, d in zip(beta, rb.cost.deltas))
        if noiseless:
            choice = "A" if ua >= ub else "B"
        else:
            p = 1.0 / (1.0 + np.exp(-(ua - ub)))
            choice = "A" if rng.random() < p else "B"
        out.append(PairwiseComparison(scenario_id=f"s{len(out)}", source=x,
                                      recourse_a=ra, recourse_b=rb,
                                      choice=choice))
    return out


class TestPairwiseComparison:
    def test_choice_validated(self):
        x = make_profile()
        ra = single_feature_recourse(x, 0, 0.1)
        rb = single_feature_recourse(x, 1, 0.1)
        with pytest.raises(ValueError):
            PairwiseComparison("s", x, ra, rb, choice="C")

    def test_identical_recourses_rejected(self):
        x = make_profile()
        ra = single_feature_recourse(x, 0, 0.1)
        with pytest.raises(ValueError):
            PairwiseComparison("s", x, ra, ra, choice="A")

    def test_chosen_other(self):
        x = make_profile()
        ra = single_feature_recourse(x, 0, 0.1)
        rb = single_feature_recourse(x, 1, 0.1)
        c = PairwiseComparison("s", x, ra, rb, choice="B")
        assert c.chosen() is rb and c.other() is ra


class TestFitBt:
    def test_requires_comparisons(self):
        with pytest.raises(ValueError):
            fit_bt([])

    def test_deterministic(self):
        comps = synthetic_comparisons((-2.0, -0.5, -1.0, -1.5, -0.2), 60, seed=0)
        m1, m2 = fit_bt(comps), fit_bt(comps)
        assert m1.beta == m2.beta
        assert m1.converged

    def test_gradient_vanishes_at_optimum(self):
        """Independent stationarity check via central finite differences."""
        comps = synthetic_comparisons((-2.0, -0.5, -1.0, -1.5, -0.2), 80,
                                      seed=1, noiseless=False)
        reg = 1e-3
        model = fit_bt(comps, reg=reg)
        Z = np.array([np.subtract(c.chosen().cost.deltas, c.other().cost.deltas)
                      for c in comps])

        def penalized_nll(beta):
            s = Z @ beta
            return np.logaddexp(0.0, -s).sum() + reg * float(beta @ beta)

        beta = np.array(model.beta)
        h = 1e-6
        for i in range(SCHEMA.d):
            e = np.zeros(SCHEMA.d)
            e[i] = h
            g = (penalized_nll(beta + e) - penalized_nll(beta - e)) / (2 * h)
            assert abs(g) < 1e-3

    def test_recovers_beta_ordering(self):
        beta_true = (-2.0, -0.5, -1.0, -1.5, -0.2)
        comps = synthetic_comparisons(beta_true, 200, seed=2)
        model = fit_bt(comps, reg=1e-4)
        order_true = np.argsort(beta_true)
        order_fit = np.argsort(model.beta)
        assert list(order_true) == list(order_fit)

    def test_objective_trace_monotone_nondecreasing(self):
        comps = synthetic_comparisons((-1.0, -0.2, -0.8, -1.4, -0.6), 60, seed=3)
        model = fit_bt(comps)
        trace = model.objective_trace
        assert len(trace) >= 2
        # log-likelihood of the penalized objective improves overall
        assert trace[-1] >= trace[0]

    def test_more_data_tightens_fit(self):
        beta_true = np.array([-2.0, -0.5, -1.0, -1.5, -0.2])
        small = fit_bt(synthetic_comparisons(tuple(beta_true), 30, seed=4), reg=1e-4)
        big = fit_bt(synthetic_comparisons(tuple(beta_true), 400, seed=4), reg=1e-4)
        def cos(m):
            b = np.array(m.beta)
            return float(b @ beta_true / (np.linalg.norm(b) * np.linalg.norm(beta_true)))
        assert cos(big) >= cos(small) - 0.05
        assert cos(big) > 0.97


class TestWeightsFromBeta:
    def make_model(self, beta):
        return BTModel(beta=beta, log_likelihood=0.0, iterations=1,
                       converged=True, reg=1e-3)

    def test_negation_order_and_scale(self):
        model = self.make_model((-2.0, -0.5, -1.0, -1.5, -0.2))
        w = weights_from_beta(model)
        assert sum(w.values) == pytest.approx(5.0)
        # most negative beta (hardest change) gets the largest weight
        assert np.argmax(w.values) == 0
        assert np.argmin(w.values) == 4
        assert list(np.argsort(w.values)) == list(np.argsort([2.0, 0.5, 1.0, 1.5, 0.2]))

    def test_floor_applied_via_shift(self):
        model = self.make_model((0.5, -1.0, -0.3, -0.8, 0.2))
        w = weights_from_beta(model)
        assert min(w.values) > 0.0
        assert sum(w.values) == pytest.approx(5.0)
        # shift preserves ranking even when raw -beta goes negative
        assert list(np.argsort(w.values)) == list(np.argsort([-0.5, 1.0, 0.3, 0.8, -0.2]))

    def test_neutral_model_is_uniform(self):
        w = weights_from_beta(self.make_model((-1.0,) * 5))
        assert w.values == pytest.approx((1.0,) * 5)


class TestSerialization:
    def test_model_json_round_trip(self):
        comps = synthetic_comparisons((-1.0, -0.2, -0.8, -1.4, -0.6), 40, seed=5)
        model = fit_bt(comps)
        back = BTModel.from_json_dict(model.to_json_dict(SCHEMA), SCHEMA)
        assert back.beta == model.beta
        assert back.reg == model.reg

    def test_comparisons_jsonl_round_trip(self, tmp_path):
        comps = synthetic_comparisons((-1.0, -0.2, -0.8, -1.4, -0.6), 10, seed=6)
        path = str(tmp_path / "comps.jsonl")
        write_comparisons_jsonl(path, comps, SCHEMA)
        back = read_comparisons_jsonl(path, SCHEMA)
        assert len(back) == len(comps)
        for a, b in zip(comps, back):
            assert a.choice == b.choice
            assert a.recourse_a.cost.deltas == pytest.approx(b.recourse_a.cost.deltas)
