"""Proximity metrics: L1 laws, weighting, and the uniform reduction."""

import pytest
from hypothesis import given, strategies as st

from recourselab.metrics import FeatureWeights, cost_report, prox, weighted_prox
from recourselab.schema import default_schema

from helpers import make_profile, profiles, weight_tuples

SCHEMA = default_schema()


class TestFeatureWeights:
    def test_uniform(self):
        w = FeatureWeights.uniform()
        assert w.values == (1.0,) * 5

    def test_must_be_positive(self):
        with pytest.raises(ValueError):
            FeatureWeights(values=(1.0, 0.0, 1.0, 1.0, 1.0))
        with pytest.raises(ValueError):
            FeatureWeights(values=(1.0, -0.3, 1.0, 1.0, 1.0))

    @given(weight_tuples())
    def test_normalized_sums_to_d(self, vals):
        w = FeatureWeights(values=vals).normalized()
        assert sum(w.values) == pytest.approx(5.0)
        # normalization preserves ratios
        assert w.values[0] / w.values[1] == pytest.approx(vals[0] / vals[1])

    def test_json_round_trip(self):
        w = FeatureWeights(values=(1.6, 1.2, 0.4, 1.2, 0.6))
        assert FeatureWeights.from_json_dict(w.to_json_dict(SCHEMA), SCHEMA) == w


class TestL1Laws:
    @given(profiles(), profiles())
    def test_nonnegative_and_symmetric(self, x, y):
        assert prox(x, y, SCHEMA) >= 0.0
        assert prox(x, y, SCHEMA) == prox(y, x, SCHEMA)

    @given(profiles())
    def test_identity(self, x):
        assert prox(x, x, SCHEMA) == 0.0

    @given(profiles(), profiles())
    def test_zero_iff_equal(self, x, y):
        if prox(x, y, SCHEMA) == 0.0:
            assert x.values(SCHEMA) == y.values(SCHEMA)

    @given(profiles(), profiles(), profiles())
    def test_triangle_inequality(self, x, y, z):
        assert prox(x, z, SCHEMA) <= prox(x, y, SCHEMA) + prox(y, z, SCHEMA) + 1e-12

    @given(profiles(), profiles())
    def test_bounded_by_d(self, x, y):
        assert prox(x, y, SCHEMA) <= SCHEMA.d


class TestWeightedProx:
    @given(profiles(), profiles())
    def test_uniform_weights_reduce_to_prox(self, x, y):
        w = FeatureWeights.uniform()
        assert weighted_prox(x, y, w, SCHEMA) == pytest.approx(prox(x, y, SCHEMA))

    @given(profiles(), profiles(), profiles(), weight_tuples(),
           st.floats(0.01, 100.0))
    def test_argmin_scale_invariance(self, x, a, b, vals, c):
        w = FeatureWeights(values=vals)
        wa, wb = weighted_prox(x, a, w, SCHEMA), weighted_prox(x, b, w, SCHEMA)
        ws = w.scaled(c)
        sa, sb = weighted_prox(x, a, ws, SCHEMA), weighted_prox(x, b, ws, SCHEMA)
        if wa < wb:
            assert sa < sb + 1e-9 * max(sa, sb, 1.0)
        elif wa > wb:
            assert sa > sb - 1e-9 * max(sa, sb, 1.0)

    @given(profiles(), profiles(), weight_tuples(), st.floats(0.01, 100.0))
    def test_scaling_is_linear(self, x, y, vals, c):
        w = FeatureWeights(values=vals)
        assert weighted_prox(x, y, w.scaled(c), SCHEMA) == pytest.approx(
            c * weighted_prox(x, y, w, SCHEMA))


class TestCostReport:
    @given(profiles(), profiles(), weight_tuples())
    def test_report_internally_consistent(self, x, y, vals):
        w = FeatureWeights(values=vals)
        rep = cost_report(x, y, w, SCHEMA)
        assert rep.prox == pytest.approx(sum(rep.deltas))
        assert rep.weighted_prox == pytest.approx(
            sum(wi * di for wi, di in zip(vals, rep.deltas)))
        assert rep.sparsity == sum(1 for d in rep.deltas if d > 0)

    @given(profiles(), profiles())
    def test_default_weights_are_uniform(self, x, y):
        rep = cost_report(x, y, None, SCHEMA)
        assert rep.weighted_prox == pytest.approx(rep.prox)

    def test_json_shape(self):
        x = make_profile()
        doc = cost_report(x, x, None, SCHEMA).to_json_dict(SCHEMA)
        assert set(doc) == {"deltas", "prox", "weighted_prox", "sparsity"}
        assert set(doc["deltas"]) == set(SCHEMA.names)
