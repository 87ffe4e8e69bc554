"""Trees, generative forests, the cross-tree partition, density queries and
model (de)serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import CATEGORICAL, INTEGER, DataError, Dataset, FeatureDomain, Schema
from .measure import (
    CatSubset,
    IntRange,
    NumericInterval,
    Restriction,
    Support,
    uniform_mass,
)

MODEL_FORMAT = "genforest-model"
MODEL_VERSION = 1

PARTITION_CAP_DEFAULT = 10**6


class PartitionSizeError(RuntimeError):
    """Cross-tree partition exceeded the configured element cap."""


@dataclass(frozen=True)
class SplitPredicate:
    """Axis-parallel split; the right branch is predicate-true:
    numeric ``x > threshold``, categorical ``x in subset``."""

    feature: int
    threshold: float | None = None
    subset: frozenset[int] | None = None

    def __post_init__(self):
        if (self.threshold is None) == (self.subset is None):
            raise ValueError("exactly one of threshold/subset required")


def child_restriction(dom: FeatureDomain, parent: Restriction, pred: SplitPredicate, right: bool) -> Restriction:
    if pred.subset is not None:
        codes = parent.codes & pred.subset if right else parent.codes - pred.subset
        return CatSubset(codes)
    t = pred.threshold
    if dom.kind == INTEGER:
        ti = int(np.floor(t))
        return parent.intersect(IntRange(ti + 1, parent.b)) if right else parent.intersect(IntRange(parent.a, ti))
    if right:
        return parent.intersect(NumericInterval(t, parent.hi, lo_open=True))
    return parent.intersect(NumericInterval(parent.lo, t, parent.lo_open))


@dataclass
class _Node:
    pred: SplitPredicate | None = None  # None = leaf
    left: int = -1
    right: int = -1
    depth: int = 0
    count: int = 0  # training rows assigned to the node

    @property
    def is_leaf(self) -> bool:
        return self.pred is None


class Tree:
    """Arena-allocated binary tree with cached per-node supports."""

    def __init__(self, schema: Schema):
        self.schema = schema
        self.nodes: list[_Node] = [_Node()]
        self.supports: list[Support] = [Support.full(schema)]

    @property
    def root(self) -> int:
        return 0

    def is_leaf(self, i: int) -> bool:
        return self.nodes[i].is_leaf

    def leaves(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.is_leaf]

    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes if n.is_leaf)

    def split(self, leaf: int, pred: SplitPredicate) -> tuple[int, int]:
        """Replace a leaf by an internal node with two fresh leaf children."""
        node = self.nodes[leaf]
        if not node.is_leaf:
            raise ValueError("can only split a leaf")
        sup = self.supports[leaf]
        dom = self.schema.domains[pred.feature]
        parent_r = sup.restrictions[pred.feature]
        left_r = child_restriction(dom, parent_r, pred, right=False)
        right_r = child_restriction(dom, parent_r, pred, right=True)
        if left_r.is_empty() or right_r.is_empty():
            raise ValueError("split produces an empty child support")
        li, ri = len(self.nodes), len(self.nodes) + 1
        self.nodes.append(_Node(depth=node.depth + 1))
        self.nodes.append(_Node(depth=node.depth + 1))
        self.supports.append(sup.replace(pred.feature, left_r))
        self.supports.append(sup.replace(pred.feature, right_r))
        node.pred = pred
        node.left, node.right = li, ri
        return li, ri

    def leaf_of(self, values) -> int:
        """Descend to the leaf containing a complete observation (raw values);
        boundary points go left per the half-open convention."""
        i = self.root
        while not self.nodes[i].is_leaf:
            n = self.nodes[i]
            i = n.right if self.supports[n.right].restrictions[n.pred.feature].contains(values[n.pred.feature]) else n.left
        return i

    def descendant_leaves(self, node: int) -> list[int]:
        """Leaf ids in the subtree rooted at ``node``."""
        out, stack = [], [node]
        while stack:
            i = stack.pop()
            n = self.nodes[i]
            if n.is_leaf:
                out.append(i)
            else:
                stack.extend((n.left, n.right))
        return out

    def path_to(self, leaf: int) -> list[int]:
        """Node ids from root (exclusive) down to ``leaf`` (inclusive)."""
        parents = {}
        for i, n in enumerate(self.nodes):
            if not n.is_leaf:
                parents[n.left] = i
                parents[n.right] = i
        path = []
        cur = leaf
        while cur != self.root:
            path.append(cur)
            cur = parents[cur]
        return path[::-1]


@dataclass
class PartitionElement:
    leaf_ids: tuple[int, ...]
    support: Support
    count: int | None
    umass: float
    rows: np.ndarray | None = None

    def depth(self, forest: "GenerativeForest") -> int:
        return sum(t.nodes[l].depth for t, l in zip(forest.trees, self.leaf_ids))


def approx_branch_prob(u_ct: float, u_right: float, u_cf: float, u_left: float, p_arc: float) -> float:
    """Uniform-corrected branch probability of an ensemble of generative
    trees: p_U[C_t|X_r] p / (p_U[C_t|X_r] p + p_U[C_f|X_l] (1 - p))."""
    qt = (u_ct / u_right) * p_arc if u_right > 0 else 0.0
    qf = (u_cf / u_left) * (1.0 - p_arc) if u_left > 0 else 0.0
    denom = qt + qf
    assert denom > 0, "unreachable: both branches have zero corrected mass"
    return qt / denom


class GenerativeForest:
    """A set of consistent trees bound either to the training data (GF mode)
    or to per-arc empirical branch probabilities (EOGT mode)."""

    def __init__(
        self,
        schema: Schema,
        trees: list[Tree],
        pi: float = 0.5,
        mode: str = "gf",
        dataset: Dataset | None = None,
        leaf_rows: list[dict[int, np.ndarray]] | None = None,
        arc_p: list[dict[int, float]] | None = None,
        data_hash: int | None = None,
    ):
        if mode not in ("gf", "eogt"):
            raise ValueError(f"bad mode {mode!r}")
        if not 0 < pi < 1:
            raise ValueError("pi must be in (0, 1)")
        self.schema = schema
        self.trees = trees
        self.pi = pi
        self.mode = mode
        self.dataset = dataset
        self.leaf_rows = leaf_rows
        self.arc_p = arc_p
        self.data_hash = data_hash
        self._node_masks: list[dict[int, np.ndarray]] = [{} for _ in trees]
        if mode == "gf":
            if dataset is None or leaf_rows is None:
                raise ValueError("gf mode needs the dataset binding")
            if data_hash is None:
                self.data_hash = dataset.content_hash()
        else:
            if arc_p is None:
                raise ValueError("eogt mode needs arc probabilities")
            for t, probs in zip(trees, arc_p):
                for i, p in probs.items():
                    if not 0.0 <= p <= 1.0:
                        raise ValueError(f"arc probability {p} outside [0, 1] at node {i}")

    @property
    def T(self) -> int:
        return len(self.trees)

    # -- partition -----------------------------------------------------------

    def node_member_mask(self, t_idx: int, node: int) -> np.ndarray:
        """Boolean row mask of the training rows assigned to ``node`` of tree
        ``t_idx`` (union of its descendant leaves' row lists). GF mode only."""
        cache = self._node_masks[t_idx]
        mask = cache.get(node)
        if mask is None:
            mask = np.zeros(self.dataset.m, dtype=bool)
            per_tree = self.leaf_rows[t_idx]
            for leaf in self.trees[t_idx].descendant_leaves(node):
                rows = per_tree.get(leaf)
                if rows is not None and len(rows):
                    mask[rows] = True
            cache[node] = mask
        return mask

    def enumerate_partition(self, cap: int = PARTITION_CAP_DEFAULT, prune_zero_count: bool = False):
        """All non-empty leaf-tuple support intersections, built by the
        sequential chop over trees. GF mode attaches exact counts and rows
        (each training row lives in exactly one element, per its per-tree leaf
        assignment)."""
        with_rows = self.mode == "gf"
        ds = self.dataset
        init_rows = np.arange(ds.m) if with_rows else None
        states = [(Support.full(self.schema), init_rows, ())]
        for t_idx, tree in enumerate(self.trees):
            new_states = []
            for sup, rows, leaf_ids in states:
                stack = [(tree.root, sup, rows)]
                while stack:
                    node_id, cur, cur_rows = stack.pop()
                    node = tree.nodes[node_id]
                    if node.is_leaf:
                        new_states.append((cur, cur_rows, leaf_ids + (node_id,)))
                        if len(new_states) > cap:
                            raise PartitionSizeError(f"partition exceeds cap {cap}")
                        continue
                    j = node.pred.feature
                    for child in (node.left, node.right):
                        child_r = cur.restrictions[j].intersect(tree.supports[child].restrictions[j])
                        if child_r.is_empty():
                            continue
                        child_sup = cur.replace(j, child_r)
                        if with_rows:
                            child_rows = cur_rows[self.node_member_mask(t_idx, child)[cur_rows]]
                            if prune_zero_count and len(child_rows) == 0:
                                continue
                        else:
                            child_rows = None
                        stack.append((child, child_sup, child_rows))
            states = new_states
        out = []
        for sup, rows, leaf_ids in states:
            out.append(
                PartitionElement(
                    leaf_ids=leaf_ids,
                    support=sup,
                    count=len(rows) if rows is not None else None,
                    umass=uniform_mass(self.schema, sup),
                    rows=rows,
                )
            )
        return out

    def partition_element_of(self, values) -> PartitionElement:
        """The unique partition element containing a complete observation."""
        if not Support.full(self.schema).contains(values):
            raise ValueError("observation outside the learned domain")
        leaf_ids = tuple(t.leaf_of(values) for t in self.trees)
        sup = Support.full(self.schema)
        for t, l in zip(self.trees, leaf_ids):
            sup = sup.intersect(t.supports[l])
        if self.mode == "gf":
            member = np.ones(self.dataset.m, dtype=bool)
            for t_idx, leaf in enumerate(leaf_ids):
                member &= self.node_member_mask(t_idx, leaf)
            rows = np.flatnonzero(member)
        else:
            rows = None
        return PartitionElement(
            leaf_ids=leaf_ids,
            support=sup,
            count=len(rows) if rows is not None else None,
            umass=uniform_mass(self.schema, sup),
            rows=rows,
        )

    # -- density -------------------------------------------------------------

    def domain_volume(self) -> float:
        vol = 1.0
        for dom in self.schema.domains:
            if dom.kind == CATEGORICAL:
                vol *= len(dom.categories)
            elif dom.kind == INTEGER:
                vol *= dom.n_values()
            else:
                width = dom.hi - dom.lo
                vol *= width if width > 0 else 1.0
        return vol

    def density(self, values) -> tuple[float, bool]:
        """Piecewise-uniform density at a complete observation, w.r.t. the
        natural product measure. Returns (value, point_mass_flag); for a
        zero-volume cell the cell probability itself is returned."""
        elem = self.partition_element_of(values)
        if self.mode == "gf":
            p_cell = elem.count / self.dataset.m
        else:
            p_cell = self._eogt_cell_prob(values)
        volume = elem.umass * self.domain_volume()
        if volume == 0.0:
            return p_cell, True
        return p_cell / volume, False

    def _eogt_cell_prob(self, values) -> float:
        """Probability the approximate sampler lands in the cell of ``values``,
        following the deterministic iterative tree order."""
        cur = Support.full(self.schema)
        prob = 1.0
        for t_idx, tree in enumerate(self.trees):
            node = tree.root
            while not tree.nodes[node].is_leaf:
                n = tree.nodes[node]
                j = n.pred.feature
                c_t = cur.intersect(tree.supports[n.right])
                c_f = cur.intersect(tree.supports[n.left])
                p_hat = approx_branch_prob(
                    uniform_mass(self.schema, c_t),
                    uniform_mass(self.schema, tree.supports[n.right]),
                    uniform_mass(self.schema, c_f),
                    uniform_mass(self.schema, tree.supports[n.left]),
                    self.arc_p[t_idx][node],
                )
                go_right = tree.supports[n.right].restrictions[j].contains(values[j])
                prob *= p_hat if go_right else (1.0 - p_hat)
                cur = c_t if go_right else c_f
                node = n.right if go_right else n.left
        return prob

    # -- conversions / summaries --------------------------------------------

    def to_eogt(self) -> "GenerativeForest":
        """Annotate every internal node with its empirical right-branch
        probability and drop the dataset binding."""
        if self.mode != "gf":
            return GenerativeForest(self.schema, self.trees, self.pi, "eogt", arc_p=self.arc_p)
        arc_p = []
        for t_idx, tree in enumerate(self.trees):
            probs = {}
            counts = self._node_counts(t_idx)
            for i, n in enumerate(tree.nodes):
                if n.is_leaf:
                    continue
                parent = counts[i]
                assert parent > 0, "internal node with zero training mass"
                probs[i] = counts[n.right] / parent
            arc_p.append(probs)
        return GenerativeForest(self.schema, self.trees, self.pi, "eogt", arc_p=arc_p)

    def _node_counts(self, t_idx: int) -> dict[int, int]:
        """Per-node assigned row counts: leaf row lists are disjoint, so every
        internal count is the sum over its descendant leaves."""
        tree = self.trees[t_idx]
        per_tree = self.leaf_rows[t_idx]
        counts = {}
        for i in range(len(tree.nodes)):
            if tree.nodes[i].is_leaf:
                counts[i] = len(per_tree.get(i, ()))
        for i in range(len(tree.nodes) - 1, -1, -1):
            n = tree.nodes[i]
            if not n.is_leaf:
                counts[i] = counts[n.left] + counts[n.right]
        return counts

    def expected_depth(self, cap: int = PARTITION_CAP_DEFAULT) -> float:
        if self.mode == "gf":
            elems = self.enumerate_partition(cap=cap)
            m = self.dataset.m
            return sum((e.count / m) * e.depth(self) for e in elems)
        from .sampler import support_distribution

        dist = support_distribution(self)
        return sum(p * e.depth(self) for e, p in dist)

    def leaf_count_summary(self) -> list[int]:
        return [t.n_leaves() for t in self.trees]

    # -- serialization -------------------------------------------------------

    def save(self, path) -> None:
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "mode": self.mode,
            "pi": self.pi,
            "schema": _schema_to_doc(self.schema),
            "trees": [_tree_to_doc(t) for t in self.trees],
        }
        if self.mode == "eogt":
            doc["arc_p"] = [{str(i): p for i, p in probs.items()} for probs in self.arc_p]
        else:
            doc["data_hash"] = self.data_hash
            doc["leaf_rows"] = [
                {str(l): rows.tolist() for l, rows in per_tree.items()} for per_tree in self.leaf_rows
            ]
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path, dataset: Dataset | None = None) -> "GenerativeForest":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"cannot read model {path}: {e}") from e
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise DataError("not a recognized model file")
        schema = _schema_from_doc(doc["schema"])
        trees = [_tree_from_doc(schema, td) for td in doc["trees"]]
        if doc["mode"] == "eogt":
            arc_p = [{int(i): p for i, p in probs.items()} for probs in doc["arc_p"]]
            return cls(schema, trees, pi=doc["pi"], mode="eogt", arc_p=arc_p)
        if dataset is None:
            raise DataError("gf model requires the training dataset")
        if dataset.content_hash() != doc["data_hash"]:
            raise DataError("training data hash mismatch: dataset changed since the model was saved")
        leaf_rows = [
            {int(l): np.asarray(rows, dtype=np.int64) for l, rows in per_tree.items()}
            for per_tree in doc["leaf_rows"]
        ]
        return cls(
            schema, trees, pi=doc["pi"], mode="gf",
            dataset=dataset, leaf_rows=leaf_rows, data_hash=doc["data_hash"],
        )


def support_of_node(tree: Tree, node: int) -> Support:
    if not 0 <= node < len(tree.nodes):
        raise ValueError(f"node {node} not in tree")
    return tree.supports[node]


def _schema_to_doc(schema: Schema) -> dict:
    feats = []
    for name, dom in schema:
        if dom.kind == CATEGORICAL:
            feats.append({"name": name, "kind": dom.kind, "categories": list(dom.categories)})
        else:
            feats.append({"name": name, "kind": dom.kind, "lo": dom.lo, "hi": dom.hi})
    return {"features": feats}


def _schema_from_doc(doc: dict) -> Schema:
    names, domains = [], []
    for f in doc["features"]:
        names.append(f["name"])
        if f["kind"] == CATEGORICAL:
            domains.append(FeatureDomain(CATEGORICAL, categories=tuple(f["categories"])))
        else:
            domains.append(FeatureDomain(f["kind"], lo=f["lo"], hi=f["hi"]))
    return Schema(tuple(names), tuple(domains))


def _tree_to_doc(tree: Tree) -> dict:
    nodes = []
    for n in tree.nodes:
        if n.is_leaf:
            nodes.append({"leaf": True, "count": n.count})
        else:
            nd = {
                "leaf": False,
                "feature": n.pred.feature,
                "left": n.left,
                "right": n.right,
                "count": n.count,
            }
            if n.pred.threshold is not None:
                nd["threshold"] = n.pred.threshold
            else:
                nd["subset"] = sorted(n.pred.subset)
            nodes.append(nd)
    return {"nodes": nodes}


def _tree_from_doc(schema: Schema, doc: dict) -> Tree:
    tree = Tree(schema)
    raw = doc["nodes"]

    def build(tree_leaf: int, idx: int) -> None:
        nd = raw[idx]
        tree.nodes[tree_leaf].count = nd.get("count", 0)
        if nd["leaf"]:
            return
        pred = SplitPredicate(
            feature=nd["feature"],
            threshold=nd.get("threshold"),
            subset=frozenset(nd["subset"]) if "subset" in nd else None,
        )
        li, ri = tree.split(tree_leaf, pred)
        build(li, nd["left"])
        build(ri, nd["right"])

    build(tree.root, 0)
    return tree
