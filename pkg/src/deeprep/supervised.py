"""Regression learners applied on top of the representations: RF, Lasso, linear SVR."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .numkit import ParameterError, RngStream, ShapeError


class ConvergenceWarning(UserWarning):
    pass


def rmse(y, y_hat) -> float:
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.size == 0 or y.size != y_hat.size:
        raise ParameterError(f"rmse needs equal non-empty lengths, got {y.size} and {y_hat.size}")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def soft_threshold(z, lam):
    if np.any(np.asarray(lam) < 0):
        raise ParameterError(f"threshold must be >= 0, got {lam}")
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def _check_X(X, width: Optional[int] = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-D, got shape {X.shape}")
    if width is not None and X.shape[1] != width:
        raise ShapeError(f"X has {X.shape[1]} columns, model was trained on {width}")
    return X


# ---------------------------------------------------------------------------
# linear models

@dataclass
class LinearModel:
    w: np.ndarray
    b: float
    lam: float = 0.0
    n_iter: int = 0
    converged: bool = True

    def predict(self, X):
        return _check_X(X, len(self.w)) @ self.w + self.b


def lasso_objective(X, y, w, b, lam) -> float:
    r = y - X @ w - b
    return float(0.5 * np.mean(r * r) + lam * np.sum(np.abs(w)))


def train_lasso(X, y, lam: float, tol: float = 1e-7, max_iter: int = 10_000) -> LinearModel:
    """Cyclic coordinate descent on ``1/(2n) ||y - Xw - b||^2 + lam ||w||_1``.

    The intercept is unpenalized (handled by centering).  Stops when the
    largest coefficient change in a sweep drops below ``tol``; otherwise a
    :class:`ConvergenceWarning` is emitted and ``converged`` is False.
    """
    if lam < 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    X = _check_X(X)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    x_mean, y_mean = X.mean(axis=0), y.mean()
    Xc, yc = X - x_mean, y - y_mean
    col_sq = np.einsum("ij,ij->j", Xc, Xc) / n
    w = np.zeros(p)
    # same expression as lambda_max, so lam >= lambda_max gives exact zeros
    if p == 0 or lam >= np.max(np.abs(Xc.T @ yc)) / n:
        return LinearModel(w, float(y_mean), lam, 0, True)
    r = yc.copy()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            old = w[j]
            rho = Xc[:, j] @ r / n + col_sq[j] * old
            new = soft_threshold(rho, lam) / col_sq[j]
            if new != old:
                r -= Xc[:, j] * (new - old)
                w[j] = new
                max_delta = max(max_delta, abs(new - old))
        if max_delta < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"lasso did not converge in {max_iter} sweeps", ConvergenceWarning, stacklevel=2)
    return LinearModel(w, float(y_mean - x_mean @ w), lam, it, converged)


def lambda_max(X, y) -> float:
    """Smallest penalty for which the lasso solution is all zeros."""
    X = _check_X(X)
    y = np.asarray(y, dtype=np.float64)
    Xc, yc = X - X.mean(axis=0), y - y.mean()
    return float(np.max(np.abs(Xc.T @ yc)) / len(y))


@dataclass
class SvrModel:
    w: np.ndarray
    b: float
    epsilon: float = 0.1
    C: float = 1.0
    history: list[float] = field(default_factory=list)

    def predict(self, X):
        return _check_X(X, len(self.w)) @ self.w + self.b


def svr_objective(X, y, w, b, C, epsilon) -> float:
    loss = np.maximum(np.abs(y - X @ w - b) - epsilon, 0.0)
    return float(0.5 * w @ w + C * loss.sum())


@dataclass(frozen=True)
class SvrConfig:
    C: float = 1.0
    epsilon: float = 0.1
    epochs: int = 100
    lr: float = 0.1
    batch_size: int = 32
    seed: int = 0


def train_svr(X, y, cfg: Optional[SvrConfig] = None, init: Optional[tuple] = None) -> SvrModel:
    """Linear epsilon-insensitive regression by minibatch subgradient descent.

    Works on the objective divided by ``C * n`` (same minimizer) with step
    size ``lr / sqrt(1 + epoch)``; returns the iterate with the lowest full
    objective seen at the end of an epoch.  ``history[e]`` is the objective
    after epoch ``e`` (``history[0]`` at the starting point).
    """
    cfg = cfg or SvrConfig()
    if not cfg.C > 0:
        raise ParameterError(f"C must be > 0, got {cfg.C}")
    if cfg.epsilon < 0:
        raise ParameterError(f"epsilon must be >= 0, got {cfg.epsilon}")
    X = _check_X(X)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    w = np.zeros(p) if init is None else np.array(init[0], dtype=np.float64)
    b = 0.0 if init is None else float(init[1])
    rng = RngStream(cfg.seed, (0x5F,))
    reg = 1.0 / (cfg.C * n)
    history = [svr_objective(X, y, w, b, cfg.C, cfg.epsilon)]
    best = (history[0], w.copy(), b)
    for epoch in range(cfg.epochs):
        lr = cfg.lr / np.sqrt(1.0 + epoch)
        order = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            r = y[idx] - X[idx] @ w - b
            active = np.abs(r) > cfg.epsilon
            g_out = np.where(active, -np.sign(r), 0.0)
            gw = reg * w + X[idx].T @ g_out / len(idx)
            gb = g_out.mean()
            w -= lr * gw
            b -= lr * gb
        history.append(svr_objective(X, y, w, b, cfg.C, cfg.epsilon))
        if history[-1] < best[0]:
            best = (history[-1], w.copy(), b)
    return SvrModel(best[1], best[2], cfg.epsilon, cfg.C, history)


# ---------------------------------------------------------------------------
# random forest

@dataclass
class Tree:
    feature: np.ndarray     # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    def apply(self, X) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                return node
            rows = np.flatnonzero(inner)
            go_left = X[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    m_try: Optional[int] = None    # None = max(1, p // 3)
    min_leaf: int = 5
    max_depth: Optional[int] = None
    seed: int = 0


@dataclass
class RfModel:
    trees: list[Tree]
    in_bag: np.ndarray       # (n_trees, n_train) bootstrap counts
    n_features: int
    config: ForestConfig

    def predict(self, X):
        X = _check_X(X, self.n_features)
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def oob_predict(self, X_train) -> np.ndarray:
        """Out-of-bag predictions for the training rows (NaN where every tree saw the row)."""
        X_train = _check_X(X_train, self.n_features)
        total = np.zeros(len(X_train))
        count = np.zeros(len(X_train))
        for tree, bag in zip(self.trees, self.in_bag):
            out = bag == 0
            total[out] += tree.predict(X_train[out])
            count[out] += 1
        with np.errstate(invalid="ignore"):
            return np.where(count > 0, total / np.maximum(count, 1), np.nan)


def _best_split(Xn, yn, feats, min_leaf):
    """Lowest child-SSE split over ``feats``; ties go to lower feature, then threshold."""
    n = len(yn)
    sub = Xn[:, feats]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = yn[order]
    cs = np.cumsum(ys, axis=0)
    cs2 = np.cumsum(ys * ys, axis=0)
    lo, hi = min_leaf - 1, n - min_leaf        # left holds positions 0..i
    if hi <= lo:
        return None
    n_left = np.arange(lo + 1, hi + 1)[:, None].astype(np.float64)
    sl, sl2 = cs[lo:hi], cs2[lo:hi]
    sr, sr2 = cs[-1] - sl, cs2[-1] - sl2
    sse = (sl2 - sl * sl / n_left) + (sr2 - sr * sr / (n - n_left))
    valid = xs[lo:hi] < xs[lo + 1:hi + 1]
    if not valid.any():
        return None
    sse = np.where(valid, sse, np.inf).T        # (features, positions)
    k = int(np.argmin(sse))
    fi, pos = divmod(k, sse.shape[1])
    i = lo + pos
    return int(feats[fi]), 0.5 * (xs[i, fi] + xs[i + 1, fi]), float(sse[fi, pos])


def fit_tree(X, y, m_try: int, min_leaf: int, max_depth: Optional[int], rng: RngStream) -> Tree:
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        count.append(len(idx))
        return len(feature) - 1

    p = X.shape[1]
    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        if len(idx) < 2 * min_leaf or (max_depth is not None and depth >= max_depth) or np.ptp(yn) == 0:
            continue
        feats = np.sort(rng.choice(p, m_try, replace=False))
        split = _best_split(X[idx], yn, feats, min_leaf)
        if split is None:
            continue
        f, thr, _ = split
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(value), np.array(count))


def train_random_forest(X, y, cfg: Optional[ForestConfig] = None) -> RfModel:
    """Bagged regression trees with a random feature subset at every node."""
    cfg = cfg or ForestConfig()
    X = _check_X(X)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n < 2:
        raise ParameterError("random forest needs at least 2 rows")
    m_try = cfg.m_try or max(1, p // 3)
    m_try = min(m_try, p)
    rng = RngStream(cfg.seed, (0x7F,))
    trees, bags = [], np.zeros((cfg.n_trees, n), dtype=np.int64)
    for t in range(cfg.n_trees):
        tr = rng.derive(t)
        sample = tr.integers(0, n, size=n)
        bags[t] = np.bincount(sample, minlength=n)
        trees.append(fit_tree(X[sample], y[sample], m_try, cfg.min_leaf, cfg.max_depth, tr))
    return RfModel(trees, bags, p, cfg)


Model = Union[RfModel, LinearModel, SvrModel]


def predict(model: Model, X) -> np.ndarray:
    return model.predict(X)
