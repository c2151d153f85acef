"""Shared strategies and builders for the test suite."""

from hypothesis import strategies as st

from recourselab.schema import ApplicantProfile, default_schema

SCHEMA = default_schema()


def profiles():
    return st.builds(
        ApplicantProfile,
        income=st.floats(10_000, 500_000, allow_nan=False),
        credit_score=st.integers(300, 850),
        employment_type=st.integers(0, 3),
        education_level=st.integers(0, 4),
        loan_amount=st.floats(1_000, 50_000, allow_nan=False),
    )


def weight_tuples():
    return st.tuples(*[st.floats(0.05, 10.0, allow_nan=False)] * 5)


def make_profile(**overrides):
    base = dict(income=50_000.0, credit_score=700, employment_type=2,
                education_level=1, loan_amount=10_000.0)
    base.update(overrides)
    return ApplicantProfile(**base)


# ---------------------------------------------------------------------------
# Small random trees over the two unconstrained-range continuous features
# (income, loan_amount), plus an exhaustive-grid proximity oracle for them.

INCOME, LOAN = 0, 4


def random_small_tree(rng, max_leaves=6):
    """Random tree splitting only on income and loan_amount, 2..max_leaves leaves.

    Regenerates until both labels appear among the leaves.
    """
    from recourselab.tree import APPROVED, REJECTED, DecisionTree, Node

    while True:
        nodes = []

        def leaf(label):
            nodes.append(Node(id=len(nodes), label=int(label)))
            return len(nodes) - 1

        def build(depth, bounds):
            if depth == 0 or rng.random() < 0.35:
                return leaf(rng.integers(2))
            f = int(rng.choice([INCOME, LOAN]))
            lo, hi = bounds[f]
            t = float(rng.uniform(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo)))
            left = build(depth - 1, {**bounds, f: (lo, t)})
            right = build(depth - 1, {**bounds, f: (t, hi)})
            nodes.append(Node(id=len(nodes), feature=f, threshold=t,
                              left=left, right=right))
            return len(nodes) - 1

        root = build(2, {INCOME: (10_000.0, 500_000.0), LOAN: (1_000.0, 50_000.0)})
        tree = DecisionTree(nodes=tuple(nodes), root=root,
                            schema_names=SCHEMA.names)
        labels = {n.label for n in tree.leaves()}
        if labels == {REJECTED, APPROVED} and len(tree.leaves()) <= max_leaves:
            return tree


def grid_min_prox(tree, x, schema=None, steps=1000):
    """Cheapest approved prox over the direction-feasible income/loan grid.

    Exhaustive oracle: sweeps income upward and loan downward from x at
    granularity Range/steps (other features held at x) and takes the minimum
    prox over grid points inside any accepting leaf region. Returns inf when
    no grid point is approved.
    """
    import numpy as np

    schema = schema or SCHEMA
    inc_spec, loan_spec = schema.features[INCOME], schema.features[LOAN]
    inc_step = inc_spec.range / steps
    loan_step = loan_spec.range / steps
    incomes = np.arange(x.income, inc_spec.hi + inc_step / 2, inc_step)
    loans = np.arange(x.loan_amount, loan_spec.lo - loan_step / 2, -loan_step)
    I, L = np.meshgrid(incomes, loans, indexing="ij")
    prox_grid = (I - x.income) / inc_spec.range + (x.loan_amount - L) / loan_spec.range
    best = float("inf")
    for region in tree.accepting_leaves(schema):
        ok = True
        for i in range(schema.d):
            if i in (INCOME, LOAN):
                continue
            v = x.value_of(schema, i)
            inside = region.lo[i] < v if region.lo_strict[i] else region.lo[i] <= v
            if not (inside and v <= region.hi[i]):
                ok = False
                break
        if not ok:
            continue
        mask = np.ones_like(prox_grid, dtype=bool)
        for f, vals in ((INCOME, I), (LOAN, L)):
            lo_ok = vals > region.lo[f] if region.lo_strict[f] else vals >= region.lo[f]
            mask &= lo_ok & (vals <= region.hi[f])
        if mask.any():
            best = min(best, float(prox_grid[mask].min()))
    return best
