"""Multi-class gradient-boosted regression trees, written from scratch on numpy.

One ensemble is one committee member. Each boosting round fits one regression
tree per class against the Newton gradients of the weighted softmax
cross-entropy, taken at the margins from the start of the round. Split search
is exact greedy over sorted unique feature values with midpoint thresholds,
which keeps training deterministic and cheap to verify against brute force at
the pool sizes this project works at.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core import N_CLASSES, ValidationError


@dataclass(frozen=True)
class TrainParams:
    rounds: int = 50
    learning_rate: float = 0.1
    max_depth: int = 3
    min_child_weight: float = 1.0
    lambda_l2: float = 1.0
    sample_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.rounds < 1:
            raise ValidationError(f"rounds must be >= 1, got {self.rounds}")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ValidationError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.max_depth < 1:
            raise ValidationError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.lambda_l2 < 0:
            raise ValidationError(f"lambda_l2 must be >= 0, got {self.lambda_l2}")
        if self.min_child_weight < 0:
            raise ValidationError(f"min_child_weight must be >= 0, got {self.min_child_weight}")
        if self.sample_weights is not None:
            w = np.asarray(self.sample_weights, dtype=float)
            if w.ndim != 1 or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValidationError("sample_weights must be finite, non-negative, 1-d")
            object.__setattr__(self, "sample_weights", w)

    def hyper_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "min_child_weight": self.min_child_weight,
            "lambda_l2": self.lambda_l2,
        }

    @classmethod
    def from_hyper_dict(cls, d: dict, sample_weights: Optional[np.ndarray] = None) -> "TrainParams":
        return cls(
            rounds=d["rounds"],
            learning_rate=d["learning_rate"],
            max_depth=d["max_depth"],
            min_child_weight=d["min_child_weight"],
            lambda_l2=d["lambda_l2"],
            sample_weights=sample_weights,
        )


@dataclass(frozen=True)
class Leaf:
    weight: float


@dataclass(frozen=True)
class Split:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


def softmax(margins: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax."""
    m = np.asarray(margins, dtype=float)
    z = m - m.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_grad_hess(
    margins: np.ndarray, labels: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample gradient and diagonal hessian of weighted softmax cross-entropy.

    grad[i, k] = w_i * (p[i, k] - 1{y_i = k}), hess[i, k] = w_i * p[i, k] * (1 - p[i, k]).
    """
    margins = np.asarray(margins, dtype=float)
    labels = np.asarray(labels, dtype=int)
    weights = np.asarray(weights, dtype=float)
    n, k = margins.shape
    if labels.shape != (n,) or weights.shape != (n,):
        raise ValidationError("margins, labels and weights must agree on sample count")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValidationError(f"labels must lie in [0, {k})")
    p = softmax(margins)
    grad = p.copy()
    grad[np.arange(n), labels] -= 1.0
    grad *= weights[:, None]
    hess = p * (1.0 - p) * weights[:, None]
    return grad, hess


def weighted_cross_entropy(
    margins: np.ndarray, labels: np.ndarray, weights: np.ndarray
) -> float:
    p = softmax(margins)
    n = margins.shape[0]
    picked = np.clip(p[np.arange(n), np.asarray(labels, dtype=int)], 1e-300, None)
    return float(-(np.asarray(weights, dtype=float) * np.log(picked)).sum())


def _sorted_feature_order(X: np.ndarray) -> np.ndarray:
    """Per-column stable argsort of X; computed once per training run."""
    return np.argsort(X, axis=0, kind="stable")


def _filter_order(order: np.ndarray, member: np.ndarray) -> np.ndarray:
    """Restrict a presorted [m x d] row-index table to rows flagged in ``member``.

    Every column keeps its relative order, so child nodes inherit sortedness
    without re-sorting.
    """
    kept = member[order.T]
    d = order.shape[1]
    return order.T[kept].reshape(d, -1).T


def _leaf_weight(grad_sum: float, hess_sum: float, lambda_l2: float) -> float:
    denom = hess_sum + lambda_l2
    if denom <= 0.0:
        return 0.0
    return float(-grad_sum / denom)


_COL_IDS_CACHE: dict[int, np.ndarray] = {}


def _col_ids(d: int) -> np.ndarray:
    got = _COL_IDS_CACHE.get(d)
    if got is None:
        got = _COL_IDS_CACHE[d] = np.arange(d)[None, :]
    return got


def _best_split_presorted(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    order: np.ndarray,
    lambda_l2: float,
    min_child_weight: float,
) -> Optional[tuple[int, int, float]]:
    """Exact greedy search over all (feature, midpoint) candidates.

    ``order`` holds this node's row indices presorted per column. Returns
    (feature_index, split_position, threshold) for the highest-gain valid
    split, or None when no candidate has positive gain. Ties resolve to the
    lowest feature index, then the lowest threshold; both fall out of argmax
    returning the first maximum over ascending candidates.
    """
    m, d = order.shape
    if m < 2:
        return None
    xs = X[order, _col_ids(d)]
    gs = grad[order]
    hs = hess[order]
    gl = np.cumsum(gs, axis=0)[:-1]
    hl = np.cumsum(hs, axis=0)[:-1]
    g_tot = grad[order[:, 0]].sum()
    h_tot = hess[order[:, 0]].sum()
    gr = g_tot - gl
    hr = h_tot - hl

    valid = xs[1:] > xs[:-1]
    valid &= (hl >= min_child_weight) & (hr >= min_child_weight)
    if not valid.any():
        return None

    denom_p = h_tot + lambda_l2
    parent = g_tot * g_tot / denom_p if denom_p > 0 else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = 0.5 * (gl * gl / (hl + lambda_l2) + gr * gr / (hr + lambda_l2) - parent)
    gain[~valid] = -np.inf

    per_col_idx = np.argmax(gain, axis=0)
    per_col_gain = gain[per_col_idx, np.arange(d)]
    j = int(np.argmax(per_col_gain))
    best = per_col_gain[j]
    if not np.isfinite(best) or best <= 0.0:
        return None
    i = int(per_col_idx[j])
    lo, hi = xs[i, j], xs[i + 1, j]
    thr = (lo + hi) / 2.0
    if thr <= lo:  # adjacent floats: keep the partition exact under x < thr
        thr = hi
    return j, i, float(thr)


def fit_tree(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    params: TrainParams,
    _order: Optional[np.ndarray] = None,
) -> TreeNode:
    """Fit one regression tree to per-sample gradients and hessians.

    A split is kept only if its gain is positive and both children carry at
    least ``min_child_weight`` hessian mass; otherwise the node becomes a leaf
    with the Newton weight -G/(H+lambda).
    """
    X = np.asarray(X, dtype=float)
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    if X.ndim != 2 or grad.shape != (X.shape[0],) or hess.shape != (X.shape[0],):
        raise ValidationError("fit_tree needs X [n x d] with matching grad/hess vectors")
    order0 = _sorted_feature_order(X) if _order is None else _order
    n = X.shape[0]
    member = np.zeros(n, dtype=bool)

    def build(order: np.ndarray, depth: int) -> TreeNode:
        rows = order[:, 0]
        if depth >= params.max_depth:
            return Leaf(_leaf_weight(grad[rows].sum(), hess[rows].sum(), params.lambda_l2))
        found = _best_split_presorted(
            X, grad, hess, order, params.lambda_l2, params.min_child_weight
        )
        if found is None:
            return Leaf(_leaf_weight(grad[rows].sum(), hess[rows].sum(), params.lambda_l2))
        j, i, thr = found
        left_rows = order[: i + 1, j]
        member[left_rows] = True
        left_order = _filter_order(order, member)
        member[left_rows] = False
        right_rows = order[i + 1 :, j]
        member[right_rows] = True
        right_order = _filter_order(order, member)
        member[right_rows] = False
        return Split(
            feature_index=j,
            threshold=thr,
            left=build(left_order, depth + 1),
            right=build(right_order, depth + 1),
        )

    return build(order0, 0)


def tree_predict(node: TreeNode, X: np.ndarray) -> np.ndarray:
    """Evaluate one tree on a batch of rows."""
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[0], dtype=float)
    stack: list[tuple[TreeNode, np.ndarray]] = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if isinstance(nd, Leaf):
            out[idx] = nd.weight
            continue
        mask = X[idx, nd.feature_index] < nd.threshold
        stack.append((nd.left, idx[mask]))
        stack.append((nd.right, idx[~mask]))
    return out


@dataclass
class BoostedEnsemble:
    """A trained boosting model: rounds x n_classes trees over a fixed base score."""

    n_classes: int
    n_features: int
    params: TrainParams
    base_score: np.ndarray
    trees: list[list[TreeNode]]
    train_loss: list[float] = field(default_factory=list, compare=False)

    @property
    def rounds(self) -> int:
        return len(self.trees)


def train(X: np.ndarray, y: np.ndarray, params: TrainParams = TrainParams()) -> BoostedEnsemble:
    """Train a multi-class boosted ensemble.

    Zero-weight samples are removed up front: they contribute nothing to the
    objective and must not influence split candidates either, so a model
    trained with extra zero-weight rows is identical to one trained without
    them. Empty classes are fine; add-one smoothing keeps every class prior
    positive in the base score.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2:
        raise ValidationError("X must be a 2-d matrix")
    n = X.shape[0]
    if n == 0:
        raise ValidationError("cannot train on an empty dataset")
    if y.shape != (n,):
        raise ValidationError("y must have one label per row of X")
    k = N_CLASSES
    if y.min() < 0 or y.max() >= k:
        raise ValidationError(f"labels must lie in [0, {k})")

    if params.sample_weights is not None:
        w = np.asarray(params.sample_weights, dtype=float)
        if w.shape != (n,):
            raise ValidationError("sample_weights length must match X")
    else:
        w = np.ones(n)
    keep = w > 0.0
    X, y, w = X[keep], y[keep], w[keep]
    if X.shape[0] == 0:
        raise ValidationError("all sample weights are zero")

    class_weight = np.bincount(y, weights=w, minlength=k)
    base_score = np.log((class_weight + 1.0) / (class_weight.sum() + k))

    margins = np.tile(base_score, (X.shape[0], 1))
    losses = [weighted_cross_entropy(margins, y, w)]
    all_trees: list[list[TreeNode]] = []
    order0 = _sorted_feature_order(X)
    for _ in range(params.rounds):
        grad, hess = softmax_grad_hess(margins, y, w)
        round_trees = [fit_tree(X, grad[:, c], hess[:, c], params, _order=order0) for c in range(k)]
        for c, tree in enumerate(round_trees):
            margins[:, c] += params.learning_rate * tree_predict(tree, X)
        all_trees.append(round_trees)
        losses.append(weighted_cross_entropy(margins, y, w))

    return BoostedEnsemble(
        n_classes=k,
        n_features=X.shape[1],
        params=params,
        base_score=base_score,
        trees=all_trees,
        train_loss=losses,
    )


def predict_margin(model: BoostedEnsemble, X: np.ndarray) -> np.ndarray:
    """Raw class margins for one vector or an [n x d] batch."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValidationError(
            f"dimension mismatch: model expects {model.n_features} features, got {X.shape[1]}"
        )
    margins = np.tile(model.base_score, (X.shape[0], 1))
    lr = model.params.learning_rate
    for round_trees in model.trees:
        for c, tree in enumerate(round_trees):
            margins[:, c] += lr * tree_predict(tree, X)
    return margins[0] if single else margins


def predict_proba(model: BoostedEnsemble, X: np.ndarray) -> np.ndarray:
    """Class probabilities (softmax of margins); rows sum to 1."""
    return softmax(predict_margin(model, X))


def _node_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"weight": float(node.weight)}
    return {
        "feature_index": int(node.feature_index),
        "threshold": float(node.threshold),
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict) -> TreeNode:
    if "weight" in d:
        return Leaf(weight=d["weight"])
    return Split(
        feature_index=d["feature_index"],
        threshold=d["threshold"],
        left=_node_from_dict(d["left"]),
        right=_node_from_dict(d["right"]),
    )


def model_to_dict(model: BoostedEnsemble) -> dict:
    return {
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "params": model.params.hyper_dict(),
        "base_score": [float(x) for x in model.base_score],
        "trees": [[_node_to_dict(t) for t in round_trees] for round_trees in model.trees],
    }


def model_from_dict(d: dict) -> BoostedEnsemble:
    return BoostedEnsemble(
        n_classes=d["n_classes"],
        n_features=d["n_features"],
        params=TrainParams.from_hyper_dict(d["params"]),
        base_score=np.asarray(d["base_score"], dtype=float),
        trees=[[_node_from_dict(t) for t in r] for r in d["trees"]],
    )


def model_to_json(model: BoostedEnsemble) -> str:
    """Canonical JSON form; identical training inputs give identical bytes."""
    return json.dumps(model_to_dict(model), sort_keys=True)


def model_from_json(text: str) -> BoostedEnsemble:
    return model_from_dict(json.loads(text))
