"""Greedy top-down induction of generative forests.

Splits are chosen to minimize ``poprisk``, the expected Bayes risk of
discriminating the training data from uniform noise over the model's
cross-tree partition; every split strictly decreases it whenever the chosen
predicate separates data mass from volume.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .data import CATEGORICAL, INTEGER, Dataset
from .forest import GenerativeForest, SplitPredicate, Tree
from .measure import (
    LossSpec,
    Support,
    cell_risk,
    get_loss,
    restriction_mask,
    uniform_mass,
)


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 1
    n_splits: int = 0
    loss: str = "square"
    pi: float = 0.5
    mode: str = "gf"
    cat_cutoff: int = 22  # exhaustive subset search up to this many modalities
    cat_sample_size: int = 64  # random candidate subsets above the cutoff
    min_child_rows: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.n_splits < 0:
            raise ValueError("n_splits must be >= 0")
        if self.mode not in ("gf", "eogt"):
            raise ValueError(f"bad mode {self.mode!r}")
        if not 0 < self.pi < 1:
            raise ValueError("pi must be in (0, 1)")
        if self.cat_cutoff < 2:
            raise ValueError("cat_cutoff must be >= 2")
        if self.min_child_rows < 1:
            raise ValueError("min_child_rows must be >= 1")
        get_loss(self.loss)


@dataclass
class SplitRecord:
    """One training iteration: the applied split plus its weak-learning
    witness statistics."""

    iteration: int
    tree: int
    leaf: int
    feature: int
    threshold: float | None
    subset: tuple[int, ...] | None
    delta: float
    poprisk: float
    gamma_hat: float  # |p_R[pred | leaf] - p_U[pred | leaf]|
    kappa_hat: float  # pi p_R[leaf] / p_M[leaf]
    leaf_mass: float  # p_M[leaf]
    leaf_bound: float  # 1 / (number of leaves before the split)


def write_history_csv(history: list[SplitRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["iteration", "tree", "leaf", "feature", "threshold", "subset",
             "delta", "poprisk", "gamma_hat", "kappa_hat", "leaf_mass", "leaf_bound"]
        )
        for r in history:
            w.writerow(
                [r.iteration, r.tree, r.leaf, r.feature,
                 "" if r.threshold is None else repr(r.threshold),
                 "" if r.subset is None else " ".join(map(str, r.subset)),
                 repr(r.delta), repr(r.poprisk),
                 repr(r.gamma_hat), repr(r.kappa_hat),
                 repr(r.leaf_mass), repr(r.leaf_bound)]
            )


# ---------------------------------------------------------------------------
# split scoring


def _assignment_arrays(leaf_rows, m):
    """Per-tree row -> leaf-id arrays derived from the disjoint leaf row
    lists."""
    out = []
    for per_tree in leaf_rows:
        arr = np.full(m, -1, dtype=np.int32)
        for leaf, rows in per_tree.items():
            arr[rows] = leaf
        out.append(arr)
    return out


class Cells:
    """Array-backed view of the partition cells affected by one leaf split:
    per-cell row index arrays, per-feature restriction bounds (numeric) or
    modality masks (categorical), and per-feature uniform fractions."""

    __slots__ = ("rows", "sizes", "fracs", "restr")

    def __init__(self, rows, sizes, fracs, restr):
        self.rows = rows
        self.sizes = sizes
        self.fracs = fracs
        self.restr = restr

    def __len__(self):
        return len(self.rows)


def _build_cells(trees, other, support, combos, row_lists, schema):
    """Assemble a Cells block from leaf-id combinations over the other trees
    by intersecting restriction bounds feature-wise, vectorized over cells."""
    n = len(row_lists)
    restr = []
    fracs = np.empty((n, schema.d))
    for j, dom in enumerate(schema.domains):
        base = support.restrictions[j]
        if dom.kind == CATEGORICAL:
            n_cats = len(dom.categories)
            sel = np.zeros((n, n_cats), dtype=bool)
            sel[:, list(base.codes)] = True
            for c, t_idx in enumerate(other):
                tree = trees[t_idx]
                node_sel = np.zeros((len(tree.nodes), n_cats), dtype=bool)
                for nid in set(combos[:, c].tolist()):
                    node_sel[nid, list(tree.supports[nid].restrictions[j].codes)] = True
                sel &= node_sel[combos[:, c]]
            restr.append(("cat", sel))
            fracs[:, j] = sel.sum(axis=1) / n_cats
        elif dom.kind == INTEGER:
            a = np.full(n, base.a, dtype=np.int64)
            b = np.full(n, base.b, dtype=np.int64)
            for c, t_idx in enumerate(other):
                tree = trees[t_idx]
                node_a = np.array([r.restrictions[j].a for r in tree.supports], dtype=np.int64)
                node_b = np.array([r.restrictions[j].b for r in tree.supports], dtype=np.int64)
                np.maximum(a, node_a[combos[:, c]], out=a)
                np.minimum(b, node_b[combos[:, c]], out=b)
            restr.append(("int", a, b))
            fracs[:, j] = (b - a + 1) / dom.n_values()
        else:
            lo = np.full(n, base.lo)
            hi = np.full(n, base.hi)
            for c, t_idx in enumerate(other):
                tree = trees[t_idx]
                node_lo = np.array([r.restrictions[j].lo for r in tree.supports])
                node_hi = np.array([r.restrictions[j].hi for r in tree.supports])
                np.maximum(lo, node_lo[combos[:, c]], out=lo)
                np.minimum(hi, node_hi[combos[:, c]], out=hi)
            restr.append(("num", lo, hi))
            width = dom.hi - dom.lo
            fracs[:, j] = np.maximum(hi - lo, 0.0) / width if width > 0 else 1.0
    sizes = np.array([len(r) for r in row_lists])
    return Cells(row_lists, sizes, fracs, restr)


def _affected_cells(trees, skip_tree, support, rows, ds, assign) -> Cells:
    """Non-empty partition cells inside ``support``: group the leaf's rows by
    their leaf assignment in every other tree. Zero-count cells carry zero
    risk before and after any split, so they never materialize."""
    other = [t for t in range(len(trees)) if t != skip_tree]
    schema = ds.schema
    if not other:
        return _build_cells(trees, [], support, np.zeros((1, 0), dtype=np.int32), [rows], schema)
    labels = np.stack([assign[t][rows] for t in other], axis=1)
    uniq, inverse = np.unique(labels, axis=0, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
    row_lists = [rows[np.sort(order[bounds[i]:bounds[i + 1]])] for i in range(len(uniq))]
    return _build_cells(trees, other, support, uniq.astype(np.int32), row_lists, schema)


def _leaf_only_cells(trees, t_idx, leaf, rows, schema) -> Cells:
    return _build_cells(
        trees, [], trees[t_idx].supports[leaf], np.zeros((1, 0), dtype=np.int32), [rows], schema
    )


def _flatten_cells(cells: Cells, col):
    """Concatenate the cells' column values with their cell ids."""
    rows_flat = np.concatenate(cells.rows)
    cell_flat = np.repeat(np.arange(len(cells)), cells.sizes)
    return cells.sizes, cell_flat, col[rows_flat]


def _score_numeric(cells: Cells, j, dom, cand, col, loss, pi, m):
    """Risk delta of every candidate threshold, vectorized over (cell,
    candidate). ``col`` is the full-length routing column (no missing)."""
    n_cells, k = len(cells), len(cand)
    fracs = cells.fracs
    u_rest = np.prod(np.delete(fracs, j, axis=1), axis=1)  # (n_cells,)

    sizes, cell_flat, vals = _flatten_cells(cells, col)
    # value v reaches the left child of candidate t_k iff v <= t_k, i.e. for
    # every bin index >= searchsorted(cand, v); histogram + cumsum gives the
    # per-cell left counts for all candidates at once
    bins = np.searchsorted(cand, vals, side="left")
    hist = np.bincount(cell_flat * (k + 1) + bins, minlength=n_cells * (k + 1))
    n_left = np.cumsum(hist.reshape(n_cells, k + 1), axis=1)[:, :k]
    r_l = n_left / m
    r_r = (sizes[:, None] - n_left) / m

    if dom.kind == INTEGER:
        _, ia, ib = cells.restr[j]
        a, b = ia.astype(float), ib.astype(float)
        width = dom.n_values()
        span = (b - a + 1.0)[:, None]
        c_left = np.clip(np.floor(cand)[None, :] - a[:, None] + 1.0, 0.0, span)
        u_l = u_rest[:, None] * c_left / width
        u_r = u_rest[:, None] * (span - c_left) / width
    else:
        _, lo, hi = cells.restr[j]
        width = dom.hi - dom.lo
        if width > 0:
            cut = np.clip(cand[None, :], lo[:, None], hi[:, None])
            u_l = u_rest[:, None] * (cut - lo[:, None]) / width
            u_r = u_rest[:, None] * (hi[:, None] - cut) / width
        else:
            u_l = np.zeros((n_cells, k))
            u_r = np.zeros((n_cells, k))

    pre = cell_risk(loss, sizes / m, u_rest * fracs[:, j], pi)
    post = cell_risk(loss, r_l, u_l, pi) + cell_risk(loss, r_r, u_r, pi)
    return post.sum(axis=0) - float(np.sum(pre))


def _score_categorical(cells: Cells, j, dom, subsets, col, loss, pi, m):
    """Risk delta of every candidate right-branch subset. ``col`` is the
    full-length routing column (no missing)."""
    n_cats = len(dom.categories)
    n_cells = len(cells)
    fracs = cells.fracs
    u_rest = np.prod(np.delete(fracs, j, axis=1), axis=1)
    sizes, cell_flat, vals = _flatten_cells(cells, col)
    counts = np.bincount(
        cell_flat * n_cats + vals.astype(np.int64), minlength=n_cells * n_cats
    ).reshape(n_cells, n_cats).astype(float)
    sel = cells.restr[j][1]
    pre = float(np.sum(cell_risk(loss, sizes / m, u_rest * fracs[:, j], pi)))

    deltas = np.empty(len(subsets))
    for s_idx, sub in enumerate(subsets):
        a = np.zeros(n_cats, dtype=bool)
        a[list(sub)] = True
        r_r = counts[:, a].sum(axis=1) / m
        r_l = counts[:, ~a].sum(axis=1) / m
        u_r = u_rest * (sel & a).sum(axis=1) / n_cats
        u_l = u_rest * (sel & ~a).sum(axis=1) / n_cats
        deltas[s_idx] = (
            cell_risk(loss, r_r, u_r, pi).sum() + cell_risk(loss, r_l, u_l, pi).sum() - pre
        )
    return deltas


def _numeric_candidates(col):
    """Midpoints of consecutive distinct observed values. Midpoints keep both
    children at positive width (and hence positive uniform mass), so no
    candidate can carve a degenerate zero-volume cell out of the domain."""
    obs = col[~np.isnan(col)]
    vals = np.unique(obs)
    if len(vals) < 2:
        return vals[:0]
    return 0.5 * (vals[:-1] + vals[1:])


def _categorical_candidates(codes, cfg, rng_key):
    """Right-branch subsets: all binary partitions of the leaf's modalities
    when small, a seeded random sample otherwise. Canonical order: anchored on
    the smallest code staying left, subsets by size then lexicographically."""
    codes = sorted(codes)
    if len(codes) < 2:
        return []
    rest = codes[1:]
    if len(codes) <= cfg.cat_cutoff:
        out = []
        for r in range(1, len(rest) + 1):
            out.extend(frozenset(c) for c in combinations(rest, r))
        return out
    rng = np.random.default_rng(np.random.SeedSequence(entropy=rng_key))
    seen = set()
    for _ in range(cfg.cat_sample_size * 2):
        mask = rng.random(len(rest)) < 0.5
        sub = frozenset(np.asarray(rest)[mask].tolist())
        if sub:
            seen.add(sub)
        if len(seen) >= cfg.cat_sample_size:
            break
    return sorted(seen, key=lambda s: (len(s), tuple(sorted(s))))


def split_pred(trees, t_idx, leaf, rows, ds, cfg, loss, iteration, assign):
    """Best admissible split of a leaf, or None. GF mode scores candidates over
    every non-empty partition cell inside the leaf; EOGT mode scores the leaf
    alone (empirical cell masses prorated by volume collapse to the leaf's own
    mass pair). Ties break toward the lowest feature index, then the lowest
    threshold / first canonical subset."""
    tree = trees[t_idx]
    sup = tree.supports[leaf]
    m = ds.m
    route = ds.routing_columns()
    if cfg.mode == "gf":
        cells = _affected_cells(trees, t_idx, sup, rows, ds, assign)
    else:
        cells = _leaf_only_cells(trees, t_idx, leaf, rows, ds.schema)

    best = None  # (delta, feature, kind_key, predicate)
    for j, dom in enumerate(ds.schema.domains):
        col = route[j][rows]
        if dom.kind == CATEGORICAL:
            subsets = _categorical_candidates(
                sup.restrictions[j].codes, cfg, (cfg.seed, iteration, j)
            )
            if not subsets:
                continue
            # admissibility: both children keep >= min_child_rows rows
            cnts = np.bincount(col.astype(np.int64), minlength=len(dom.categories))
            kept_sets = []
            for sub in subsets:
                n_r = int(cnts[list(sub)].sum())
                n_l = len(rows) - n_r
                if n_r >= cfg.min_child_rows and n_l >= cfg.min_child_rows:
                    kept_sets.append(sub)
            if not kept_sets:
                continue
            deltas = _score_categorical(cells, j, dom, kept_sets, route[j], loss, cfg.pi, m)
            i = int(np.argmin(deltas))
            key = (len(kept_sets[i]), tuple(sorted(kept_sets[i])))
            cand_best = (float(deltas[i]), j, key, SplitPredicate(j, subset=kept_sets[i]))
        else:
            cand = _numeric_candidates(col)
            if len(cand) == 0:
                continue
            obs = np.sort(col)
            n_left = np.searchsorted(obs, cand, side="right")
            ok = (n_left >= cfg.min_child_rows) & (len(rows) - n_left >= cfg.min_child_rows)
            cand = cand[ok]
            if len(cand) == 0:
                continue
            deltas = _score_numeric(cells, j, dom, cand, route[j], loss, cfg.pi, m)
            i = int(np.argmin(deltas))
            cand_best = (float(deltas[i]), j, float(cand[i]), SplitPredicate(j, threshold=float(cand[i])))
        if best is None or (cand_best[0], cand_best[1]) < (best[0], best[1]):
            best = cand_best
    if best is None:
        return None
    return best[3], best[0]


def risk_delta(forest: GenerativeForest, t_idx: int, leaf: int, pred: SplitPredicate, loss: LossSpec) -> float:
    """Incremental poprisk change of applying ``pred`` at a leaf of a trained
    GF; restricted to the affected cells, exact."""
    rows = forest.leaf_rows[t_idx][leaf]
    tree = forest.trees[t_idx]
    assign = _assignment_arrays(forest.leaf_rows, forest.dataset.m)
    cells = _affected_cells(forest.trees, t_idx, tree.supports[leaf], rows, forest.dataset, assign)
    j = pred.feature
    dom = forest.schema.domains[j]
    col = forest.dataset.routing_columns()[j]
    if pred.threshold is not None:
        deltas = _score_numeric(
            cells, j, dom, np.array([pred.threshold]), col, loss, forest.pi, forest.dataset.m
        )
    else:
        deltas = _score_categorical(
            cells, j, dom, [pred.subset], col, loss, forest.pi, forest.dataset.m
        )
    return float(deltas[0])


def full_poprisk(forest: GenerativeForest, loss: LossSpec) -> float:
    """Objective recomputed from scratch over the whole partition (oracle for
    the incremental bookkeeping)."""
    elems = forest.enumerate_partition(prune_zero_count=True)
    m = forest.dataset.m
    return float(sum(cell_risk(loss, e.count / m, e.umass, forest.pi) for e in elems))


# ---------------------------------------------------------------------------
# the training loop


def pick_tree_and_leaf(leaf_rows, skip=()):
    """Heaviest leaf by empirical mass; ties break by (tree index, leaf id)."""
    best = None
    for t_idx, per_tree in enumerate(leaf_rows):
        for leaf, rows in per_tree.items():
            if (t_idx, leaf) in skip:
                continue
            key = (-len(rows), t_idx, leaf)
            if best is None or key < best[0]:
                best = (key, t_idx, leaf)
    if best is None:
        return None
    return best[1], best[2]


def train(ds: Dataset, cfg: TrainConfig) -> tuple[GenerativeForest, list[SplitRecord]]:
    """Grow ``n_trees`` trees with ``n_splits`` greedy splits overall, always
    splitting the heaviest splittable leaf. Deterministic given the config.
    Stops early when no leaf admits a split."""
    if ds.m == 0:
        raise ValueError("empty dataset")
    loss = get_loss(cfg.loss)
    trees = [Tree(ds.schema) for _ in range(cfg.n_trees)]
    for t in trees:
        t.nodes[0].count = ds.m
    leaf_rows: list[dict[int, np.ndarray]] = [{0: np.arange(ds.m)} for _ in trees]
    assign = [np.zeros(ds.m, dtype=np.int32) for _ in trees]
    route = ds.routing_columns()
    unsplittable: set[tuple[int, int]] = set()
    poprisk = cell_risk(loss, 1.0, 1.0, cfg.pi)
    history: list[SplitRecord] = []

    for it in range(cfg.n_splits):
        applied = False
        skip = set(unsplittable)
        while True:
            pick = pick_tree_and_leaf(leaf_rows, skip=skip)
            if pick is None:
                break
            t_idx, leaf = pick
            res = split_pred(trees, t_idx, leaf, leaf_rows[t_idx][leaf], ds, cfg, loss, it, assign)
            if res is None:
                unsplittable.add((t_idx, leaf))
                skip.add((t_idx, leaf))
                continue
            pred, delta = res
            tree = trees[t_idx]
            rows = leaf_rows[t_idx].pop(leaf)
            li, ri = tree.split(leaf, pred)
            j = pred.feature
            dom = ds.schema.domains[j]
            col = route[j][rows]
            go_left = restriction_mask(dom, tree.supports[li].restrictions[j], col)
            rows_l = rows[go_left]
            rows_r = rows[~go_left]
            assign[t_idx][rows_r] = ri
            assign[t_idx][rows_l] = li
            tree.nodes[li].count = len(rows_l)
            tree.nodes[ri].count = len(rows_r)
            leaf_rows[t_idx][li] = rows_l
            leaf_rows[t_idx][ri] = rows_r

            n_leaves_before = sum(len(d) for d in leaf_rows) - 1
            r_leaf = len(rows) / ds.m
            u_leaf = uniform_mass(ds.schema, tree.supports[leaf])
            u_right = uniform_mass(ds.schema, tree.supports[ri])
            p_pred_r = len(rows_r) / len(rows)
            p_pred_u = u_right / u_leaf if u_leaf > 0 else 0.0
            p_m = cfg.pi * r_leaf + (1 - cfg.pi) * u_leaf
            poprisk += delta
            history.append(
                SplitRecord(
                    iteration=it, tree=t_idx, leaf=leaf, feature=j,
                    threshold=pred.threshold,
                    subset=tuple(sorted(pred.subset)) if pred.subset else None,
                    delta=delta, poprisk=poprisk,
                    gamma_hat=abs(p_pred_r - p_pred_u),
                    kappa_hat=cfg.pi * r_leaf / p_m,
                    leaf_mass=p_m,
                    leaf_bound=1.0 / n_leaves_before,
                )
            )
            applied = True
            break
        if not applied:
            break  # no splittable leaf anywhere

    forest = GenerativeForest(
        ds.schema, trees, pi=cfg.pi, mode="gf", dataset=ds, leaf_rows=leaf_rows
    )
    if cfg.mode == "eogt":
        forest = forest.to_eogt()
    return forest, history
