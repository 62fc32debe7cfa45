"""Three-class gradient-boosted regression trees, from scratch.

One depth-limited tree per class per boosting round, fit to the softmax
cross-entropy gradient/hessian of the running scores. Splits are exact
greedy (every distinct-value boundary considered) with Newton leaf values
and L2 leaf regularization. Training is fully deterministic: no sampling,
ties broken by lowest feature index then lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError

N_CLASSES = 3


@dataclass
class GbdtConfig:
    iterations: int = 500
    depth: int = 6
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.iterations < 1 or self.depth < 1 or self.learning_rate <= 0:
            raise ValueError("iterations/depth must be >= 1 and learning_rate > 0")


@dataclass
class RegTree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf score for each row (route left when x[feature] < threshold)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        node = np.zeros(x.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return self.value[node]
            nid = node[internal]
            go_left = x[internal, feat[internal]] < self.threshold[nid]
            node[internal] = np.where(go_left, self.left[nid], self.right[nid])

    def max_depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for nid in range(self.n_nodes):
            if self.feature[nid] >= 0:
                depth[self.left[nid]] = depth[nid] + 1
                depth[self.right[nid]] = depth[nid] + 1
        return int(depth.max()) if self.n_nodes else 0


@dataclass
class Ensemble:
    base_scores: np.ndarray  # (3,) class log-priors
    trees: list  # trees[iteration][class] -> RegTree
    config: GbdtConfig
    loss_trace: list = field(default_factory=list)

    @property
    def n_trees(self) -> int:
        return sum(len(group) for group in self.trees)


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def raw_scores(ensemble: Ensemble, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    scores = np.tile(ensemble.base_scores, (x.shape[0], 1))
    lr = ensemble.config.learning_rate
    for group in ensemble.trees:
        for k, tree in enumerate(group):
            scores[:, k] += lr * tree.apply(x)
    return scores


def softmax_scores(ensemble: Ensemble, x: np.ndarray) -> np.ndarray:
    """Per-class probabilities for each row."""
    return softmax(raw_scores(ensemble, x))


def grad_hess(probs: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray]:
    """Softmax cross-entropy g = p - onehot(label), h = p(1-p), per class."""
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    onehot = np.zeros_like(p)
    onehot[np.arange(p.shape[0]), y] = 1.0
    g = p - onehot
    h = p * (1.0 - p)
    if np.ndim(probs) == 1:
        return g[0], h[0]
    return g, h


def build_tree(x, g, h, depth_limit: int = 6, reg_lambda: float = 1.0,
               min_samples_leaf: int = 1, presorted=None):
    """Greedy exact-split regression tree on (gradient, hessian) targets.

    Gain for a candidate split: GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam);
    leaf value -G/(H+lam). Returns (RegTree, leaf_node_of_row).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n, d = x.shape
    if n < 1:
        raise ValueError("need at least one row")
    if presorted is None:
        presorted = np.argsort(x, axis=0, kind="stable")
    lam = reg_lambda
    min_leaf = max(1, min_samples_leaf)

    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    node_g = [float(g.sum())]
    node_h = [float(h.sum())]
    node_count = [n]
    node_of_row = np.zeros(n, dtype=np.int64)
    active = [0]

    for _ in range(depth_limit):
        if not active:
            break
        n_nodes = len(feature)
        can_split = np.zeros(n_nodes, dtype=bool)
        for nid in active:
            can_split[nid] = node_count[nid] >= 2 * min_leaf and node_count[nid] >= 2
        if not can_split.any():
            break

        G = np.asarray(node_g)
        H = np.asarray(node_h)
        C = np.asarray(node_count)
        parent_term = G * G / (H + lam)
        best_gain = np.zeros(n_nodes)  # only strictly positive gains accepted
        best_feat = np.full(n_nodes, -1, dtype=np.int64)
        best_thr = np.zeros(n_nodes)

        for j in range(d):
            o = presorted[:, j]
            keep = can_split[node_of_row[o]]
            rows = o[keep]
            if rows.size < 2:
                continue
            nids = node_of_row[rows]
            order = np.argsort(nids, kind="stable")  # groups rows by node,
            rows = rows[order]                       # value-sorted within
            nids = nids[order]
            xv = x[rows, j]
            start = np.empty(rows.size, dtype=bool)
            start[0] = True
            start[1:] = nids[1:] != nids[:-1]
            seg_starts = np.flatnonzero(start)
            seg_id = np.cumsum(start) - 1
            seg_nid = nids[seg_starts]

            cg = np.cumsum(g[rows])
            ch = np.cumsum(h[rows])
            base_g = np.where(seg_starts > 0, cg[seg_starts - 1], 0.0)
            base_h = np.where(seg_starts > 0, ch[seg_starts - 1], 0.0)
            gl = cg - base_g[seg_id]
            hl = ch - base_h[seg_id]
            left_cnt = np.arange(rows.size) - seg_starts[seg_id] + 1
            gr = G[nids] - gl
            hr = H[nids] - hl
            right_cnt = C[nids] - left_cnt

            valid = np.zeros(rows.size, dtype=bool)
            valid[:-1] = (seg_id[:-1] == seg_id[1:]) & (xv[:-1] != xv[1:])
            valid &= (left_cnt >= min_leaf) & (right_cnt >= min_leaf)
            gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent_term[nids]
            gain = np.where(valid, gain, -np.inf)

            seg_max = np.maximum.reduceat(gain, seg_starts)
            pos = np.where(gain == seg_max[seg_id], np.arange(rows.size), rows.size)
            seg_pos = np.minimum.reduceat(pos, seg_starts)  # lowest threshold
            improved = np.isfinite(seg_max) & (seg_max > best_gain[seg_nid])
            upd = seg_nid[improved]
            at = seg_pos[improved]
            best_gain[upd] = seg_max[improved]
            best_feat[upd] = j
            lo = xv[at]
            hi = xv[at + 1]
            mid = (lo + hi) / 2.0
            best_thr[upd] = np.where(mid > lo, mid, hi)

        split_ids = [nid for nid in active if best_feat[nid] >= 0]
        if not split_ids:
            break

        left_id = np.full(n_nodes, -1, dtype=np.int64)
        right_id = np.full(n_nodes, -1, dtype=np.int64)
        first_child = len(feature)
        for nid in split_ids:
            feature[nid] = int(best_feat[nid])
            threshold[nid] = float(best_thr[nid])
            left[nid] = left_id[nid] = len(feature)
            feature.append(-1); threshold.append(0.0)
            left.append(-1); right.append(-1)
            right[nid] = right_id[nid] = len(feature)
            feature.append(-1); threshold.append(0.0)
            left.append(-1); right.append(-1)

        is_split = np.zeros(n_nodes, dtype=bool)
        is_split[split_ids] = True
        r = np.flatnonzero(is_split[node_of_row])
        nid_r = node_of_row[r]
        go_left = x[r, best_feat[nid_r]] < best_thr[nid_r]
        node_of_row[r] = np.where(go_left, left_id[nid_r], right_id[nid_r])

        n_children = 2 * len(split_ids)
        child = node_of_row[r] - first_child
        node_g.extend(np.bincount(child, weights=g[r], minlength=n_children))
        node_h.extend(np.bincount(child, weights=h[r], minlength=n_children))
        node_count.extend(np.bincount(child, minlength=n_children))
        active = list(range(first_child, first_child + n_children))

    feature_arr = np.asarray(feature, dtype=np.int64)
    value = np.zeros(len(feature))
    leaves = feature_arr < 0
    gg = np.asarray(node_g)
    hh = np.asarray(node_h)
    value[leaves] = -gg[leaves] / (hh[leaves] + lam)

    tree = RegTree(
        feature=feature_arr,
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=value,
    )
    return tree, node_of_row.copy()


def log_loss(probs: np.ndarray, y: np.ndarray) -> float:
    return float(-np.mean(np.log(probs[np.arange(len(y)), y])))


def train(config: GbdtConfig, x: np.ndarray, y: np.ndarray) -> Ensemble:
    """Boost `config.iterations` rounds of one tree per class.

    Records the training log-loss before each round plus once after the
    last, so `loss_trace` has iterations + 1 entries.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = x.shape[0]
    counts = np.bincount(y, minlength=N_CLASSES)
    base = np.log(np.maximum(counts, 1) / n)
    scores = np.tile(base, (n, 1))
    presorted = np.argsort(x, axis=0, kind="stable")

    ensemble = Ensemble(base_scores=base, trees=[], config=config)
    for it in range(config.iterations):
        probs = softmax(scores)
        loss = log_loss(probs, y)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite training loss at iteration {it}", epoch=it)
        ensemble.loss_trace.append(loss)
        g, h = grad_hess(probs, y)
        group = []
        for k in range(N_CLASSES):
            tree, leaf_of_row = build_tree(
                x, g[:, k], h[:, k],
                depth_limit=config.depth,
                reg_lambda=config.reg_lambda,
                min_samples_leaf=config.min_samples_leaf,
                presorted=presorted,
            )
            scores[:, k] += config.learning_rate * tree.value[leaf_of_row]
            group.append(tree)
        ensemble.trees.append(group)
    ensemble.loss_trace.append(log_loss(softmax(scores), y))
    return ensemble


def predict(ensemble: Ensemble, x: np.ndarray) -> np.ndarray:
    """Class with the highest boosted score (ties -> lowest index)."""
    return np.argmax(softmax_scores(ensemble, x), axis=1)


def ensemble_to_dict(ensemble: Ensemble) -> dict:
    return {
        "base_scores": ensemble.base_scores.tolist(),
        "config": {
            "iterations": ensemble.config.iterations,
            "depth": ensemble.config.depth,
            "learning_rate": ensemble.config.learning_rate,
            "reg_lambda": ensemble.config.reg_lambda,
            "min_samples_leaf": ensemble.config.min_samples_leaf,
        },
        "loss_trace": list(ensemble.loss_trace),
        "trees": [
            [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in group
            ]
            for group in ensemble.trees
        ],
    }


def ensemble_from_dict(doc: dict) -> Ensemble:
    config = GbdtConfig(**doc["config"])
    trees = [
        [
            RegTree(
                feature=np.asarray(t["feature"], dtype=np.int64),
                threshold=np.asarray(t["threshold"], dtype=np.float64),
                left=np.asarray(t["left"], dtype=np.int64),
                right=np.asarray(t["right"], dtype=np.int64),
                value=np.asarray(t["value"], dtype=np.float64),
            )
            for t in group
        ]
        for group in doc["trees"]
    ]
    return Ensemble(
        base_scores=np.asarray(doc["base_scores"], dtype=np.float64),
        trees=trees,
        config=config,
        loss_trace=list(doc.get("loss_trace", [])),
    )
