"""Univariate Gini classification trees with case weights, surrogate splits
and cross-validated cost-complexity pruning.

Growth works on a presorted, feature-major copy of the data: every node owns
one contiguous segment per feature in which its rows with that feature
present are sorted by value.  Splitting a node stably partitions each
segment, so children stay sorted without re-sorting.  Missing values (NaN)
never appear in segments; they are excluded from split search and routed by
surrogates, or by the majority direction when no surrogate applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .sampling import make_rng

MAX_SURROGATES = 5


class SchemaError(ValueError):
    """Feature rows do not carry the columns a tree was trained on."""


def gini(fractions) -> float:
    """Gini impurity ``1 - sum(f^2)`` of a class distribution."""
    f = np.asarray(fractions, dtype=np.float64)
    if f.ndim != 1 or f.size == 0 or np.any(f < 0) or abs(math.fsum(f) - 1.0) > 1e-9:
        raise ValueError("fractions must be nonnegative and sum to 1")
    return 1.0 - math.fsum(f * f)


@dataclass(frozen=True)
class Controls:
    min_node_size: int = 20
    min_rel_gain: float = 1e-4
    max_depth: int = 30
    folds: int = 10

    def __post_init__(self):
        if self.min_node_size < 2 or self.max_depth < 0 or self.min_rel_gain < 0:
            raise ValueError("invalid tree controls")


@dataclass(frozen=True)
class Surrogate:
    feature: int
    threshold: float
    sense: int          # +1: value <= threshold goes left; -1: goes right
    agreement: float    # weighted share of node rows routed like the primary

    def goes_left(self, x):
        le = x <= self.threshold
        return le if self.sense > 0 else ~le


@dataclass(frozen=True)
class SplitRule:
    feature: int
    threshold: float
    surrogates: tuple[Surrogate, ...] = ()
    majority_left: bool = True
    gain: float = 0.0


@dataclass
class Node:
    id: int                      # root 1, children 2i and 2i + 1
    depth: int
    n: int
    weight: float
    counts: np.ndarray           # weighted class distribution
    label: int                   # class index into the tree's class list
    rule: SplitRule | None = None
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.rule is None

    @property
    def risk(self) -> float:
        """Weighted misclassification mass if this node were a leaf."""
        return float(self.weight - self.counts[self.label])

    @property
    def impurity(self) -> float:
        if self.weight <= 0:
            return 0.0
        f = self.counts / self.weight
        return float(1.0 - np.sum(f * f))


@dataclass
class ClassificationTree:
    features: list[str]
    classes: np.ndarray              # class codes, ascending
    root: Node
    controls: Controls = field(default_factory=Controls)
    cp_table: list[tuple[float, int, float, float, float]] = field(default_factory=list)
    _train: tuple | None = field(default=None, repr=False, compare=False)
    _flat: dict | None = field(default=None, repr=False, compare=False)

    # ---- structure
    def nodes(self) -> list[Node]:
        out, stack = [], [self.root]
        while stack:
            nd = stack.pop()
            out.append(nd)
            if not nd.is_leaf:
                stack.append(nd.right)
                stack.append(nd.left)
        return out

    def leaves(self) -> list[Node]:
        return [nd for nd in self.nodes() if nd.is_leaf]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    @property
    def depth(self) -> int:
        return max(nd.depth for nd in self.nodes())

    def features_used(self) -> list[str]:
        used = sorted({nd.rule.feature for nd in self.nodes() if not nd.is_leaf})
        return [self.features[i] for i in used]

    # ---- prediction
    def _flatten(self) -> dict:
        if self._flat is not None:
            return self._flat
        nodes = self.nodes()
        pos = {id(nd): i for i, nd in enumerate(nodes)}
        m = len(nodes)
        flat = {
            "feature": np.full(m, -1, dtype=np.int64),
            "threshold": np.zeros(m),
            "left": np.full(m, -1, dtype=np.int64),
            "right": np.full(m, -1, dtype=np.int64),
            "majority_left": np.ones(m, dtype=bool),
            "label": np.array([nd.label for nd in nodes], dtype=np.int64),
            "sur_feature": np.full((m, MAX_SURROGATES), -1, dtype=np.int64),
            "sur_threshold": np.zeros((m, MAX_SURROGATES)),
            "sur_sense": np.zeros((m, MAX_SURROGATES), dtype=np.int64),
        }
        for i, nd in enumerate(nodes):
            if nd.is_leaf:
                continue
            r = nd.rule
            flat["feature"][i] = r.feature
            flat["threshold"][i] = r.threshold
            flat["left"][i] = pos[id(nd.left)]
            flat["right"][i] = pos[id(nd.right)]
            flat["majority_left"][i] = r.majority_left
            for s, sg in enumerate(r.surrogates):
                flat["sur_feature"][i, s] = sg.feature
                flat["sur_threshold"][i, s] = sg.threshold
                flat["sur_sense"][i, s] = sg.sense
        self._flat = flat
        return flat

    def _route(self, X: np.ndarray) -> np.ndarray:
        """Flat index of the leaf reached by each row of ``X`` (n, F)."""
        fl = self._flatten()
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(fl["feature"][node] >= 0)
        while active.size:
            node[active] = _route_step(fl, X[active], node[active])
            active = active[fl["feature"][node[active]] >= 0]
        return node

    def _matrix(self, rows, feature_names: Sequence[str] | None) -> np.ndarray:
        X = np.asarray(rows, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if feature_names is None:
            if X.shape[1] != len(self.features):
                raise SchemaError(f"expected {len(self.features)} columns, got {X.shape[1]}")
            return X
        names = list(feature_names)
        missing = [f for f in self.features if f not in names]
        if missing:
            raise SchemaError(f"rows lack tree features {missing}")
        return X[:, [names.index(f) for f in self.features]]

    def predict_index(self, X, feature_names: Sequence[str] | None = None) -> np.ndarray:
        X = self._matrix(X, feature_names)
        return self._flatten()["label"][self._route(X)]

    def predict(self, X, feature_names: Sequence[str] | None = None) -> np.ndarray:
        """Class codes for each row of ``X``; NaN marks a missing value."""
        return self.classes[self.predict_index(X, feature_names)]

    def predict_one(self, row, feature_names: Sequence[str] | None = None) -> int:
        return int(self.predict(np.asarray(row, dtype=np.float64)[None, :], feature_names)[0])

    # ---- serialization
    def to_text(self) -> str:
        c = self.controls
        lines = [
            "# alsc classification tree v1",
            "features " + ",".join(self.features),
            "classes " + ",".join(str(int(k)) for k in self.classes),
            f"controls min_node_size={c.min_node_size} min_rel_gain={c.min_rel_gain!r} "
            f"max_depth={c.max_depth} folds={c.folds}",
        ]
        for row in self.cp_table:
            lines.append("cp " + " ".join(repr(float(v)) for v in row))
        for nd in self.nodes():
            counts = ",".join(repr(float(v)) for v in nd.counts)
            head = (f"node {nd.id} depth={nd.depth} n={nd.n} weight={nd.weight!r} "
                    f"label={int(self.classes[nd.label])} counts={counts}")
            if nd.is_leaf:
                lines.append(head + " leaf")
                continue
            r = nd.rule
            sur = ";".join(f"{self.features[s.feature]}:{s.threshold!r}:{s.sense}:{s.agreement!r}"
                           for s in r.surrogates) or "-"
            lines.append(head + f" split={self.features[r.feature]}<={r.threshold!r} "
                         f"gain={r.gain!r} majority={'left' if r.majority_left else 'right'} "
                         f"surrogates={sur}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ClassificationTree":
        features: list[str] = []
        classes = np.empty(0, dtype=np.int64)
        controls = Controls()
        cp_table = []
        by_id: dict[int, Node] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(" ")
            try:
                if key == "features":
                    features = rest.split(",") if rest else []
                elif key == "classes":
                    classes = np.array([int(v) for v in rest.split(",")], dtype=np.int64)
                elif key == "controls":
                    kv = dict(p.split("=") for p in rest.split())
                    controls = Controls(int(kv["min_node_size"]), float(kv["min_rel_gain"]),
                                        int(kv["max_depth"]), int(kv["folds"]))
                elif key == "cp":
                    v = [float(t) for t in rest.split()]
                    cp_table.append((v[0], int(v[1]), v[2], v[3], v[4]))
                elif key == "node":
                    by_id_node = _parse_node(rest, features, classes)
                    by_id[by_id_node.id] = by_id_node
                else:
                    raise ValueError(f"unknown record {key!r}")
            except (ValueError, KeyError, IndexError) as exc:
                raise ValueError(f"tree file line {lineno}: {exc}") from None
        if 1 not in by_id:
            raise ValueError("tree file has no root node")
        for nid, nd in by_id.items():
            if not nd.is_leaf:
                nd.left, nd.right = by_id[2 * nid], by_id[2 * nid + 1]
        return cls(features, classes, by_id[1], controls, cp_table)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def read(cls, path: str | Path) -> "ClassificationTree":
        return cls.from_text(Path(path).read_text())


def _parse_node(rest: str, features: list[str], classes: np.ndarray) -> Node:
    parts = rest.split()
    nid = int(parts[0])
    kv = {}
    for p in parts[1:]:
        k, _, v = p.partition("=")
        kv[k] = v
    counts = np.array([float(v) for v in kv["counts"].split(",")])
    label = int(np.searchsorted(classes, int(kv["label"])))
    nd = Node(nid, int(kv["depth"]), int(kv["n"]), float(kv["weight"]), counts, label)
    if "split" in kv:
        fname, thr = kv["split"].split("<=")
        surs = []
        if kv["surrogates"] != "-":
            for s in kv["surrogates"].split(";"):
                f, t, sense, agree = s.split(":")
                surs.append(Surrogate(features.index(f), float(t), int(sense), float(agree)))
        nd.rule = SplitRule(features.index(fname), float(thr), tuple(surs),
                            kv["majority"] == "left", float(kv["gain"]))
    return nd


# ------------------------------------------------------------------ growth

def _prepare(X, y, weights, classes):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional (rows, features)")
    y = np.asarray(y).astype(np.int64)
    n = len(X)
    if n == 0:
        raise ValueError("cannot grow a tree on an empty training set")
    if len(y) != n:
        raise ValueError("X and y lengths differ")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if len(w) != n or np.any(~(w > 0)):
        raise ValueError("weights must be positive, one per row")
    classes = np.unique(y) if classes is None else np.asarray(classes, dtype=np.int64)
    yi = np.searchsorted(classes, y)
    if np.any(yi >= len(classes)) or not np.array_equal(classes[yi], y):
        raise ValueError("labels outside the class list")
    return X, yi.astype(np.int32), np.ascontiguousarray(w), classes


def grow(X, y, weights=None, feature_names: Sequence[str] | None = None,
         controls: Controls | None = None, classes=None) -> ClassificationTree:
    """Recursive Gini partitioning of rows ``X`` (n, F) with labels ``y``."""
    controls = controls or Controls()
    X, yi, w, classes = _prepare(X, y, weights, classes)
    n, F = X.shape
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(F)]
    if len(names) != F:
        raise ValueError("feature_names length differs from column count")
    C = len(classes)
    impl = kernels.impl
    XT = np.ascontiguousarray(X.T)
    order = np.zeros((F, n), dtype=np.int32)
    start = np.zeros(F, dtype=np.int64)
    end = np.zeros(F, dtype=np.int64)
    for f in range(F):
        present = np.flatnonzero(~np.isnan(XT[f]))
        srt = present[np.argsort(XT[f, present], kind="stable")]
        order[f, :len(srt)] = srt
        end[f] = len(srt)
    direction = np.full(n, -1, dtype=np.int8)
    goes = np.zeros(n, dtype=np.int8)

    root_counts = np.bincount(yi, weights=w, minlength=C)
    W0 = float(root_counts.sum())
    root_mass = W0 - float(np.sum(root_counts * root_counts)) / W0
    min_gain = controls.min_rel_gain * root_mass

    root = None
    stack = [(np.arange(n, dtype=np.int64), start, end, 0, 1, None, True)]
    while stack:
        rows, s, e, depth, nid, parent, is_left = stack.pop()
        counts = np.bincount(yi[rows], weights=w[rows], minlength=C)
        node = Node(nid, depth, len(rows), float(counts.sum()), counts, int(np.argmax(counts)))
        if parent is None:
            root = node
        elif is_left:
            parent.left = node
        else:
            parent.right = node
        if (len(rows) < controls.min_node_size or depth >= controls.max_depth
                or np.count_nonzero(counts) < 2):
            continue
        f, thr, gain, _ = impl.best_split(XT, yi, w, order, s, e, C)
        if f < 0 or not gain > 0 or gain < min_gain:
            continue
        xf = XT[f, rows]
        present = ~np.isnan(xf)
        prow = rows[present]
        pleft = xf[present] <= thr
        direction[prow] = pleft
        sthr, sense, agree, total, major = impl.surrogate_scan(XT, w, order, s, e, direction)
        wl = float(w[prow][pleft].sum())
        majority_left = wl >= float(w[prow].sum()) - wl
        cands = []
        for g in range(F):
            if g == f or sense[g] == 0 or not agree[g] > major[g] or not total[g] > 0:
                continue
            cands.append((-float(agree[g] / total[g]), g))
        cands.sort()
        surrogates = tuple(Surrogate(g, float(sthr[g]), int(sense[g]), -a)
                           for a, g in cands[:MAX_SURROGATES])
        left_mask = np.empty(len(rows), dtype=bool)
        left_mask[present] = pleft
        miss = np.flatnonzero(~present)
        if miss.size:
            undecided = np.ones(miss.size, dtype=bool)
            for sg in surrogates:
                xs = XT[sg.feature, rows[miss]]
                ok = undecided & ~np.isnan(xs)
                left_mask[miss[ok]] = sg.goes_left(xs[ok])
                undecided &= ~ok
            left_mask[miss[undecided]] = majority_left
        direction[prow] = -1
        goes[rows] = left_mask
        nleft = impl.partition(order, s, e, goes)
        node.rule = SplitRule(int(f), float(thr), surrogates, bool(majority_left), float(gain))
        mid = s + np.asarray(nleft, dtype=np.int64)
        stack.append((rows[~left_mask], mid, e.copy(), depth + 1, 2 * nid + 1, node, False))
        stack.append((rows[left_mask], s.copy(), mid, depth + 1, 2 * nid, node, True))
    tree = ClassificationTree(names, classes, root, controls)
    tree._train = (X, classes[yi], w)
    return tree


# ------------------------------------------------------------------ pruning

def _prune_alphas(tree: ClassificationTree):
    """Weakest-link sequence.

    Returns the flat node list, each node's collapse threshold ``alpha*``
    (a node is a leaf of the pruned tree at ``alpha`` iff ``alpha* <= alpha``;
    leaves carry -inf), and the table of (alpha, leaves, risk) steps.
    """
    nodes = tree.nodes()
    m = len(nodes)
    pos = {id(nd): i for i, nd in enumerate(nodes)}
    parent = np.full(m, -1, dtype=np.int64)
    internal = np.zeros(m, dtype=bool)
    for i, nd in enumerate(nodes):
        if not nd.is_leaf:
            internal[i] = True
            parent[pos[id(nd.left)]] = i
            parent[pos[id(nd.right)]] = i
    R = np.array([nd.risk for nd in nodes])
    L = np.where(internal, 0.0, 1.0)
    S = np.where(internal, 0.0, R)
    # nodes() is preorder, so reversed order visits children before parents
    for i in range(m - 1, 0, -1):
        L[parent[i]] += L[i]
        S[parent[i]] += S[i]
    alpha = np.full(m, -np.inf)
    alive = internal.copy()
    steps = [(0.0, int(L[0]), float(S[0]))]
    while alive.any():
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(alive, (R - S) / (L - 1.0), np.inf)
        t = int(np.argmin(g))
        a = max(float(g[t]), 0.0)
        alpha[t] = a
        alive[t] = False
        stack = [t]
        while stack:
            nd = nodes[stack.pop()]
            if nd.is_leaf:
                continue
            for ch in (pos[id(nd.left)], pos[id(nd.right)]):
                if alive[ch]:
                    alive[ch] = False
                    alpha[ch] = a
                stack.append(ch)
        dl, ds = L[t] - 1.0, S[t] - R[t]
        L[t], S[t] = 1.0, R[t]
        p = parent[t]
        while p >= 0:
            L[p] -= dl
            S[p] -= ds
            p = parent[p]
        if a > steps[-1][0]:
            steps.append((a, int(L[0]), float(S[0])))
        else:
            steps[-1] = (steps[-1][0], int(L[0]), float(S[0]))
    # a child never outlives its parent
    for i in range(1, m):
        p = parent[i]
        if internal[i] and alpha[i] > alpha[p]:
            alpha[i] = alpha[p]
    return nodes, alpha, steps


def prune_at(tree: ClassificationTree, alpha: float) -> ClassificationTree:
    """Copy of ``tree`` with every branch collapsed whose ``alpha*`` is at most ``alpha``."""
    nodes, astar, _ = _prune_alphas(tree)
    keep = {id(nd): astar[i] > alpha for i, nd in enumerate(nodes)}

    def copy(nd: Node) -> Node:
        out = Node(nd.id, nd.depth, nd.n, nd.weight, nd.counts.copy(), nd.label)
        if not nd.is_leaf and keep[id(nd)]:
            out.rule = nd.rule
            out.left, out.right = copy(nd.left), copy(nd.right)
        return out

    res = ClassificationTree(list(tree.features), tree.classes.copy(), copy(tree.root),
                             tree.controls, list(tree.cp_table))
    res._train = tree._train
    return res


def _route_step(fl: dict, X: np.ndarray, nd: np.ndarray) -> np.ndarray:
    """Child of internal nodes ``nd`` taken by rows ``X`` (one row per node)."""
    x = X[np.arange(len(X)), fl["feature"][nd]]
    left = x <= fl["threshold"][nd]
    todo = np.isnan(x)
    for s in range(MAX_SURROGATES):
        if not todo.any():
            break
        sf = fl["sur_feature"][nd, s]
        rows = np.flatnonzero(todo & (sf >= 0))
        if rows.size == 0:
            break
        xs = X[rows, sf[rows]]
        ok = ~np.isnan(xs)
        rows, xs = rows[ok], xs[ok]
        le = xs <= fl["sur_threshold"][nd[rows], s]
        left[rows] = np.where(fl["sur_sense"][nd[rows], s] > 0, le, ~le)
        todo[rows] = False
    left[todo] = fl["majority_left"][nd[todo]]
    return np.where(left, fl["left"][nd], fl["right"][nd])


def _path_labels(tree: ClassificationTree, X: np.ndarray, astar: np.ndarray,
                 cps: np.ndarray) -> np.ndarray:
    """Predicted class index of each row of ``X`` under pruning at each ``cps``.

    ``astar`` must be indexed like ``tree.nodes()``.  Collapse thresholds
    never grow along a root-to-leaf path, so the leaf at ``cp`` is the first
    node on the path with ``astar <= cp``.
    """
    fl = tree._flatten()
    n = len(X)
    depth = tree.depth
    path = np.zeros((n, depth + 1), dtype=np.int64)
    cur = np.zeros(n, dtype=np.int64)
    for d in range(1, depth + 1):
        idx = np.flatnonzero(fl["feature"][cur] >= 0)
        if idx.size:
            cur[idx] = _route_step(fl, X[idx], cur[idx])
        path[:, d] = cur
    A = astar[path]
    labels = fl["label"][path]
    out = np.empty((len(cps), n), dtype=np.int64)
    rows = np.arange(n)
    for k, cp in enumerate(cps):
        out[k] = labels[rows, np.argmax(A <= cp, axis=1)]
    return out


def prune(tree: ClassificationTree, folds: int | None = None, seed: int = 0,
          data: tuple | None = None) -> ClassificationTree:
    """Cost-complexity pruning with the one-standard-error rule.

    Cross-validation regrows the tree on ``folds - 1`` folds of the training
    rows (``data`` or the rows the tree was grown on), scores every subtree
    in the weakest-link sequence on the held-out fold, and keeps the
    smallest subtree whose CV error is within one SE of the minimum.
    """
    folds = folds or tree.controls.folds
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if data is None:
        if tree._train is None:
            raise ValueError("tree carries no training data; pass data=(X, y, w)")
        data = tree._train
    X, y, w = data
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=np.float64)
    n = len(y)
    if n < folds:
        raise ValueError(f"{n} rows cannot be split into {folds} folds")
    nodes, astar, steps = _prune_alphas(tree)
    alphas = np.array([s[0] for s in steps])
    # score each subtree at the geometric mean of its alpha interval
    upper = np.append(alphas[1:], np.inf)
    cps = np.where(np.isinf(upper), alphas * 2.0 + 1.0,
                   np.sqrt(np.maximum(alphas, 0.0) * upper))
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[make_rng(seed).permutation(n)] = np.arange(n) % folds
    err = np.zeros((len(cps), n))
    yi = np.searchsorted(tree.classes, y)
    for k in range(folds):
        tr = fold_of != k
        te = ~tr
        sub = grow(X[tr], y[tr], w[tr], tree.features, tree.controls, tree.classes)
        _, sastar, _ = _prune_alphas(sub)
        pred = _path_labels(sub, X[te], sastar, cps)
        err[:, te] = pred != yi[te]
    W = w.sum()
    xerr = (err * w).sum(axis=1) / W
    # weighted standard error of the mean 0/1 loss
    xstd = np.sqrt(((err - xerr[:, None]) ** 2 * w).sum(axis=1) / W / n)
    best = int(np.argmin(xerr))
    limit = xerr[best] + xstd[best]
    chosen = max(i for i in range(len(cps)) if xerr[i] <= limit)
    table = [(float(alphas[i]), int(steps[i][1]), float(steps[i][2]), float(xerr[i]),
              float(xstd[i])) for i in range(len(cps))]
    pruned = prune_at(tree, float(cps[chosen]))
    pruned.cp_table = table
    return pruned


def fit(X, y, weights=None, feature_names=None, controls: Controls | None = None,
        seed: int = 0, classes=None, pruned: bool = True) -> ClassificationTree:
    """Grow and (by default) prune in one call."""
    tree = grow(X, y, weights, feature_names, controls, classes)
    return prune(tree, seed=seed) if pruned else tree
