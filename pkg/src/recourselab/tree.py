"""Decision-tree loan classifier: CART induction, leaf regions, serialization.

The tree splits on numeric values and ordinal codes only, so every leaf's
feasible region is a hyperrectangle — the property the recourse projection
relies on. The tie rule at a threshold is "route left" (the <= branch).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .schema import ApplicantProfile, FeatureSchema, default_schema

TREE_FORMAT_VERSION = 1

REJECTED, APPROVED = 0, 1


@dataclass(frozen=True)
class Node:
    """One tree node. Internal nodes carry a split; leaves carry a label."""

    id: int
    feature: int = -1  # -1 for leaves
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    label: int = -1  # -1 for internal nodes
    n_samples: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass(frozen=True)
class LeafRegion:
    """Hyperrectangle of constraints accumulated on a root-to-leaf path.

    Intervals are (lo_i, hi_i] when lo_strict[i] else [lo_i, hi_i]; both
    already intersected with schema bounds.
    """

    leaf_id: int
    label: int
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    lo_strict: tuple[bool, ...]
    n_samples: int

    def contains(self, x: ApplicantProfile, schema: FeatureSchema) -> bool:
        for i in range(schema.d):
            v = x.value_of(schema, i)
            if self.lo_strict[i]:
                if not self.lo[i] < v <= self.hi[i]:
                    return False
            elif not self.lo[i] <= v <= self.hi[i]:
                return False
        return True

    def midpoint(self, schema: FeatureSchema) -> ApplicantProfile:
        vals = []
        for i, spec in enumerate(schema.features):
            m = 0.5 * (self.lo[i] + self.hi[i])
            if spec.kind == "categorical" or spec.integer:
                m = float(round(m))
                # stay on the integer grid inside an open lower endpoint
                if self.lo_strict[i] and m <= self.lo[i]:
                    m = float(np.floor(self.lo[i])) + 1.0
                if m > self.hi[i]:
                    m = float(np.floor(self.hi[i]))
            vals.append(float(m))
        return ApplicantProfile.from_values(schema, vals)


@dataclass(frozen=True)
class DecisionTree:
    nodes: tuple[Node, ...]
    root: int
    schema_names: tuple[str, ...]

    def route(self, x: ApplicantProfile, schema: FeatureSchema) -> int:
        """Leaf id reached by x."""
        nid = self.root
        while True:
            node = self.nodes[nid]
            if node.is_leaf:
                return nid
            v = x.value_of(schema, node.feature)
            nid = node.left if v <= node.threshold else node.right

    def predict(self, x: ApplicantProfile, schema: FeatureSchema | None = None) -> tuple[int, int]:
        """(label, leaf id) for profile x."""
        schema = schema or default_schema()
        leaf = self.route(x, schema)
        return self.nodes[leaf].label, leaf

    def leaves(self) -> list[Node]:
        return [n for n in self.nodes if n.is_leaf]

    def leaf_regions(self, schema: FeatureSchema) -> list[LeafRegion]:
        """All leaf regions, ordered by leaf id. Memoized per schema."""
        cache = self.__dict__.setdefault("_region_cache", {})
        if schema in cache:
            return cache[schema]
        d = schema.d
        lo0 = [spec.code_lo for spec in schema.features]
        hi0 = [spec.code_hi for spec in schema.features]
        out: list[LeafRegion] = []

        def walk(nid: int, lo, hi, strict):
            node = self.nodes[nid]
            if node.is_leaf:
                out.append(LeafRegion(nid, node.label, tuple(lo), tuple(hi),
                                      tuple(strict), node.n_samples))
                return
            f, t = node.feature, node.threshold
            lhi = list(hi)
            lhi[f] = min(hi[f], t)
            walk(node.left, list(lo), lhi, list(strict))
            rlo, rstrict = list(lo), list(strict)
            if t >= rlo[f]:
                rlo[f] = t
                rstrict[f] = True
            walk(node.right, rlo, list(hi), rstrict)

        walk(self.root, lo0, hi0, [False] * d)
        out.sort(key=lambda r: r.leaf_id)
        cache[schema] = out
        return out

    def accepting_leaves(self, schema: FeatureSchema | None = None) -> list[LeafRegion]:
        schema = schema or default_schema()
        return [r for r in self.leaf_regions(schema) if r.label == APPROVED]

    def to_json_dict(self) -> dict:
        return {
            "format_version": TREE_FORMAT_VERSION,
            "root": self.root,
            "schema_names": list(self.schema_names),
            "nodes": [
                {"id": n.id, "feature": n.feature, "threshold": n.threshold,
                 "left": n.left, "right": n.right, "label": n.label,
                 "n_samples": n.n_samples}
                for n in self.nodes
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DecisionTree":
        if doc.get("format_version") != TREE_FORMAT_VERSION:
            raise ValueError(f"unsupported tree format version {doc.get('format_version')}")
        nodes = tuple(
            Node(id=nd["id"], feature=nd["feature"], threshold=nd["threshold"],
                 left=nd["left"], right=nd["right"], label=nd["label"],
                 n_samples=nd["n_samples"])
            for nd in sorted(doc["nodes"], key=lambda nd: nd["id"])
        )
        return cls(nodes=nodes, root=doc["root"], schema_names=tuple(doc["schema_names"]))


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best (feature, threshold) by Gini impurity decrease, or None.

    Ties break by lower feature index, then lower threshold, for determinism.
    """
    n, d = X.shape
    best = None  # (weighted_gini, feature, threshold)
    for f in range(d):
        v = X[:, f]
        order = np.argsort(v, kind="stable")
        vs, ys = v[order], y[order]
        # prefix counts of class 1 after each position
        ones = np.cumsum(ys)
        total_ones = ones[-1]
        # candidate split after position k (1-based count k on the left)
        k = np.arange(1, n)
        valid = (vs[1:] != vs[:-1]) & (k >= min_leaf) & (n - k >= min_leaf)
        if not valid.any():
            continue
        k = k[valid]
        left_ones = ones[k - 1]
        right_ones = total_ones - left_ones
        nl = k.astype(float)
        nr = (n - k).astype(float)
        pl = left_ones / nl
        pr = right_ones / nr
        gini = (nl * 2 * pl * (1 - pl) + nr * 2 * pr * (1 - pr)) / n
        j = int(np.argmin(gini))
        thr = 0.5 * (vs[k[j] - 1] + vs[k[j]])
        cand = (float(gini[j]), f, float(thr))
        if best is None or cand < best:
            best = cand
    return best


def _grow(X: np.ndarray, y: np.ndarray, min_leaf: int, max_depth: int | None,
          nodes: list[dict], depth: int = 0) -> int:
    nid = len(nodes)
    nodes.append({})
    n = len(y)
    ones = int(y.sum())
    majority = APPROVED if ones * 2 > n else REJECTED
    pure = ones == 0 or ones == n
    if pure or n < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
        nodes[nid] = {"leaf": True, "label": majority, "n": n}
        return nid
    best = _best_split(X, y, min_leaf)
    if best is None:
        nodes[nid] = {"leaf": True, "label": majority, "n": n}
        return nid
    _, f, thr = best
    mask = X[:, f] <= thr
    left = _grow(X[mask], y[mask], min_leaf, max_depth, nodes, depth + 1)
    right = _grow(X[~mask], y[~mask], min_leaf, max_depth, nodes, depth + 1)
    nodes[nid] = {"leaf": False, "feature": f, "threshold": thr,
                  "left": left, "right": right, "n": n}
    return nid


def dataset_matrix(labeled, schema: FeatureSchema) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([[lp.profile.value_of(schema, i) for i in range(schema.d)]
                  for lp in labeled])
    y = np.array([lp.decision for lp in labeled], dtype=np.int64)
    return X, y


def train(labeled, split_seed: int = 0, min_leaf: int = 5,
          max_depth: int | None = None,
          schema: FeatureSchema | None = None) -> tuple[DecisionTree, float]:
    """Train on an 80/20 split; returns the tree and held-out accuracy."""
    schema = schema or default_schema()
    if not labeled:
        raise ValueError("empty dataset")
    X, y = dataset_matrix(labeled, schema)
    if len(np.unique(y)) < 2:
        raise ValueError("dataset contains a single class")
    rng = np.random.default_rng(split_seed)
    perm = rng.permutation(len(y))
    cut = int(round(0.8 * len(y)))
    tr, te = perm[:cut], perm[cut:]
    raw: list[dict] = []
    root = _grow(X[tr], y[tr], min_leaf, max_depth, raw)
    nodes = tuple(
        Node(id=i, feature=-1 if nd["leaf"] else nd["feature"],
             threshold=0.0 if nd["leaf"] else nd["threshold"],
             left=-1 if nd["leaf"] else nd["left"],
             right=-1 if nd["leaf"] else nd["right"],
             label=nd["label"] if nd["leaf"] else -1,
             n_samples=nd["n"])
        for i, nd in enumerate(raw)
    )
    tree = DecisionTree(nodes=nodes, root=root, schema_names=schema.names)
    if len(te):
        preds = predict_matrix(tree, X[te])
        accuracy = float((preds == y[te]).mean())
    else:
        accuracy = float("nan")
    return tree, accuracy


def predict_matrix(tree: DecisionTree, X: np.ndarray) -> np.ndarray:
    """Vectorized batch prediction over a values matrix (schema column order)."""
    out = np.empty(len(X), dtype=np.int64)
    idx = np.arange(len(X))
    stack = [(tree.root, idx)]
    while stack:
        nid, rows = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf:
            out[rows] = node.label
            continue
        mask = X[rows, node.feature] <= node.threshold
        stack.append((node.left, rows[mask]))
        stack.append((node.right, rows[~mask]))
    return out


def save_tree(path: str, tree: DecisionTree, seed: int | None = None,
              accuracy: float | None = None) -> None:
    doc = tree.to_json_dict()
    if seed is not None:
        doc["split_seed"] = seed
    if accuracy is not None:
        doc["test_accuracy"] = accuracy
    with open(path, "w") as f:
        json.dump(doc, f)


def load_tree(path: str) -> DecisionTree:
    with open(path) as f:
        return DecisionTree.from_json_dict(json.load(f))
