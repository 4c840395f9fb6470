"""Small gradient-boosted decision trees for binary classification.

Second-order (Newton) boosting on the logistic loss with depth-limited trees
grown level by level on quantile-binned features. Split gain is the usual
``G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - G^2/(H+lam)``; per-feature importance is
the gain summed over every split of every tree.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["GbtParams", "GbtModel", "Binner", "fit", "feature_importance"]

MODEL_FORMAT_VERSION = 1
_MIN_GAIN = 1e-12


@dataclass(frozen=True)
class GbtParams:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    subsample_fraction: float = 1.0
    seed: int = 0
    max_bins: int = 64
    reg_lambda: float = 1.0

    def __post_init__(self):
        for name in ("n_trees", "max_depth", "min_samples_leaf", "max_bins"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.max_bins < 2:
            raise ValueError("max_bins must be >= 2")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValueError("subsample_fraction must lie in (0, 1]")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


class Binner:
    """Per-column split candidates.

    Columns with at most ``max_bins`` distinct values get every midpoint as a
    candidate, so splits are exact; wider columns use quantile midpoints.
    ``codes[i, j] <= b`` iff ``X[i, j] <= thresholds[j][b]``.
    """

    def __init__(self, X, max_bins: int = 64):
        X = np.asarray(X, dtype=float)
        self.max_bins = max_bins
        self.thresholds = []
        codes = np.empty(X.shape, dtype=np.int32)
        for j in range(X.shape[1]):
            col = X[:, j]
            uniq = np.unique(col)
            if len(uniq) > max_bins:
                qs = np.quantile(col, np.linspace(0, 1, max_bins + 1)[1:-1],
                                 method="lower")
                qs = np.unique(qs)
                qs = qs[qs < uniq[-1]]
                nxt = uniq[np.searchsorted(uniq, qs, side="right")]
                thr = 0.5 * (qs + nxt)
            else:
                thr = 0.5 * (uniq[:-1] + uniq[1:])
            self.thresholds.append(thr)
            codes[:, j] = np.searchsorted(thr, col, side="left")
        self.codes = codes
        self.n_bins = np.array([len(t) + 1 for t in self.thresholds], dtype=np.int64)


@dataclass
class GbtModel:
    """Fitted ensemble. Trees are flat arrays; ``feature == -1`` marks a leaf."""

    n_features: int
    mask: np.ndarray
    base_score: float
    trees: list
    gains: np.ndarray
    degenerate: bool = False
    constant_class: int | None = None

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            out += _apply_tree(tree, X)
        return out

    def predict_proba(self, X) -> np.ndarray:
        if self.degenerate:
            return np.full(np.asarray(X).shape[0], float(self.constant_class))
        return 1.0 / (1.0 + np.exp(-self.decision_function(X)))

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(np.int8)

    def to_json(self) -> str:
        """Versioned audit dump; not meant as an interchange format."""
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "n_features": self.n_features,
            "mask": [int(b) for b in self.mask],
            "base_score": self.base_score,
            "degenerate": self.degenerate,
            "constant_class": self.constant_class,
            "trees": [
                {"feature": f.tolist(), "threshold": t.tolist(),
                 "left": l.tolist(), "right": r.tolist(), "value": v.tolist()}
                for f, t, l, r, v in self.trees
            ],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GbtModel":
        doc = json.loads(text)
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
        trees = [
            (np.asarray(t["feature"], dtype=np.int64), np.asarray(t["threshold"], dtype=float),
             np.asarray(t["left"], dtype=np.int64), np.asarray(t["right"], dtype=np.int64),
             np.asarray(t["value"], dtype=float))
            for t in doc["trees"]
        ]
        n = doc["n_features"]
        return cls(n_features=n, mask=np.asarray(doc["mask"], dtype=np.int8),
                   base_score=doc["base_score"], trees=trees, gains=np.zeros(n),
                   degenerate=doc["degenerate"], constant_class=doc["constant_class"])


def _grow_tree(codes, n_bins, thresholds, cols, g, h, params):
    """Grow one tree level by level on binned ``codes`` (rows already subsampled).

    Returns the flat node arrays and the split gain accumulated per column.
    """
    n, F = codes.shape
    B = int(n_bins.max())
    lam = params.reg_lambda
    min_leaf = params.min_samples_leaf
    valid_bin = np.arange(B)[None, :] < (n_bins - 1)[:, None]  # (F, B)
    col_offset = (np.arange(F) * B)[None, :]

    feature, threshold, left, right = [-1], [0.0], [-1], [-1]
    col_gain = np.zeros(F)
    node_of = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    level_nodes = [0]
    parent_hist = None   # (G, H, C) of the previous level, indexed by slot
    build = None         # parent slot of each left/right child pair

    for depth in range(params.max_depth):
        K = len(level_nodes)
        if depth == 0:
            keys = (col_offset + codes).ravel()
            size = F * B
            G = np.bincount(keys, weights=np.repeat(g, F), minlength=size).reshape(1, F, B)
            H = np.bincount(keys, weights=np.repeat(h, F), minlength=size).reshape(1, F, B)
            C = np.bincount(keys, minlength=size).reshape(1, F, B)
        else:
            # histogram the left children only; right = parent - left
            Kp = K // 2
            slot_lookup = np.full(len(feature), -1, dtype=np.int64)
            slot_lookup[level_nodes[0::2]] = np.arange(Kp)
            rows = np.flatnonzero(active)
            slot = slot_lookup[node_of[rows]]
            sel = slot >= 0
            rows, slot = rows[sel], slot[sel]
            keys = (slot[:, None] * (F * B) + col_offset + codes[rows]).ravel()
            size = Kp * F * B
            GLc = np.bincount(keys, weights=np.repeat(g[rows], F), minlength=size).reshape(Kp, F, B)
            HLc = np.bincount(keys, weights=np.repeat(h[rows], F), minlength=size).reshape(Kp, F, B)
            CLc = np.bincount(keys, minlength=size).reshape(Kp, F, B)
            Gp, Hp, Cp = (a[build] for a in parent_hist)
            G = np.empty((K, F, B)); H = np.empty((K, F, B))
            C = np.empty((K, F, B), dtype=np.int64)
            G[0::2], H[0::2], C[0::2] = GLc, HLc, CLc
            G[1::2], H[1::2], C[1::2] = Gp - GLc, Hp - HLc, Cp - CLc
        GL, HL, CL = G.cumsum(2), H.cumsum(2), C.cumsum(2)
        Gt, Ht, Ct = GL[:, :, -1:], HL[:, :, -1:], CL[:, :, -1:]
        GR, HR, CR = Gt - GL, Ht - HL, Ct - CL
        gain = GL ** 2 / (HL + lam) + GR ** 2 / (HR + lam) - Gt ** 2 / (Ht + lam)
        ok = valid_bin[None] & (CL >= min_leaf) & (CR >= min_leaf)
        gain = np.where(ok, gain, -np.inf).reshape(K, F * B)
        best = gain.argmax(axis=1)  # first maximum: lowest column, then lowest bin
        best_gain = gain[np.arange(K), best]
        parent_hist = (G, H, C)
        build = []

        slot_lookup = np.full(len(feature), -1, dtype=np.int64)
        slot_lookup[level_nodes] = np.arange(K)
        rows = np.flatnonzero(active)
        slot = slot_lookup[node_of[rows]]
        children = []
        for s, node_id in enumerate(level_nodes):
            in_node = rows[slot == s]
            if not best_gain[s] > _MIN_GAIN:
                active[in_node] = False
                continue
            j, b = divmod(int(best[s]), B)
            feature[node_id] = int(cols[j])
            threshold[node_id] = float(thresholds[j][b])
            col_gain[j] += best_gain[s]
            left[node_id], right[node_id] = len(feature), len(feature) + 1
            feature += [-1, -1]
            threshold += [0.0, 0.0]
            left += [-1, -1]
            right += [-1, -1]
            go_right = codes[in_node, j] > b
            node_of[in_node] = np.where(go_right, right[node_id], left[node_id])
            children += [left[node_id], right[node_id]]
            build.append(s)
        level_nodes = children
        build = np.asarray(build, dtype=np.int64)
        if not level_nodes:
            break

    n_nodes = len(feature)
    Gn = np.bincount(node_of, weights=g, minlength=n_nodes)
    Hn = np.bincount(node_of, weights=h, minlength=n_nodes)
    value = np.where(np.asarray(feature) < 0,
                     -params.learning_rate * Gn / (Hn + lam), 0.0)
    tree = (np.asarray(feature, dtype=np.int64), np.asarray(threshold, dtype=float),
            np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64), value)
    return tree, col_gain


def fit(X, y, mask, params: GbtParams = GbtParams(), binner: Binner | None = None) -> GbtModel:
    """Fit boosted trees on the columns of ``X`` selected by ``mask``.

    ``X`` holds all N columns; unselected columns are never looked at. A
    prebuilt ``binner`` over the full ``X`` may be passed to skip binning.
    Training labels of a single class give a degenerate constant model.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(float)
    mask = np.asarray(mask).astype(np.int8)
    n, N = X.shape
    if mask.shape != (N,):
        raise ValueError(f"mask has shape {mask.shape}, expected ({N},)")
    cols = np.flatnonzero(mask)
    if cols.size == 0:
        raise ValueError("cannot fit on an empty feature mask")
    if len(y) != n:
        raise ValueError(f"{len(y)} labels for {n} samples")

    classes = np.unique(y)
    if classes.size < 2:
        cls = int(classes[0]) if classes.size else 0
        return GbtModel(N, mask.copy(), 0.0, [], np.zeros(N), degenerate=True,
                        constant_class=cls)

    if binner is None:
        binner = Binner(X[:, cols], params.max_bins)
        codes, thresholds, n_bins = binner.codes, binner.thresholds, binner.n_bins
    else:
        codes = binner.codes[:, cols]
        thresholds = [binner.thresholds[j] for j in cols]
        n_bins = binner.n_bins[cols]

    p0 = y.mean()
    base = float(np.log(p0 / (1.0 - p0)))
    raw = np.full(n, base)
    rng = np.random.default_rng(params.seed)
    n_sub = max(1, int(round(params.subsample_fraction * n)))
    gains = np.zeros(N)
    trees = []
    for _ in range(params.n_trees):
        p = 1.0 / (1.0 + np.exp(-raw))
        g = p - y
        h = p * (1.0 - p)
        if n_sub < n:
            rows = np.sort(rng.choice(n, size=n_sub, replace=False))
            tree, col_gain = _grow_tree(codes[rows], n_bins, thresholds, cols,
                                        g[rows], h[rows], params)
        else:
            tree, col_gain = _grow_tree(codes, n_bins, thresholds, cols, g, h, params)
        gains[cols] += col_gain
        trees.append(tree)
        raw += _apply_tree(tree, X)
    return GbtModel(N, mask.copy(), base, trees, gains)


def _apply_tree(tree, X):
    feature, threshold, left, right, value = tree
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        rows = np.flatnonzero(feature[node] >= 0)
        if rows.size == 0:
            return value[node]
        nd = node[rows]
        go_left = X[rows, feature[nd]] <= threshold[nd]
        node[rows] = np.where(go_left, left[nd], right[nd])


def feature_importance(model: GbtModel) -> np.ndarray:
    """Total split gain per feature, normalized to sum to one.

    All zeros for a degenerate model or one that never split.
    """
    total = model.gains.sum()
    if model.degenerate or total <= 0:
        return np.zeros(model.n_features)
    return model.gains / total
