"""Linear probing: L2-regularized multinomial logistic regression via L-BFGS.

``C`` is the inverse regularization strength (larger C = weaker penalty);
the objective is ``sum-CE + ||W||^2 / (2C)`` with an unpenalized bias. The
regularization value is chosen on a validation split by macro F1 over a
deterministic log grid, replacing a stochastic hyperparameter search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .metrics import MetricReport, classify_metrics


def default_c_grid(n_points: int = 25) -> list[float]:
    return list(np.logspace(-10, 5, n_points))


@dataclass
class ProbeConfig:
    c_grid: list[float] = field(default_factory=default_c_grid)
    max_iter: int = 200
    fixed_c: float | None = None        # human-guided mode pins C instead of searching

    def __post_init__(self):
        if any(c <= 0 for c in self.c_grid):
            raise ValueError("all C values must be positive")
        if self.fixed_c is not None and self.fixed_c <= 0:
            raise ValueError("fixed_c must be positive")


@dataclass
class LinearClassifier:
    weights: np.ndarray      # (d, K)
    bias: np.ndarray         # (K,)
    classes: np.ndarray      # (K,) original class ids

    def scores(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities in columns indexed by original class id."""
        z = x @ self.weights + self.bias
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        n_cols = int(self.classes.max()) + 1
        out = np.zeros((len(x), n_cols), dtype=np.float64)
        out[:, self.classes] = p
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(x @ self.weights + self.bias, axis=1)]


def fit_logreg(features: np.ndarray, labels: np.ndarray, c_value: float,
               max_iter: int = 200) -> LinearClassifier:
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError(f"need >= 2 classes to fit a classifier, got {classes.tolist()}")
    k = len(classes)
    n, d = x.shape
    y_idx = np.searchsorted(classes, y)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y_idx] = 1.0

    def objective(theta):
        w = theta[:d * k].reshape(d, k)
        b = theta[d * k:]
        z = x @ w + b
        z -= z.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        loss = -logp[np.arange(n), y_idx].sum() + float(w.reshape(-1) @ w.reshape(-1)) / (2.0 * c_value)
        p = np.exp(logp)
        gz = p - onehot
        gw = x.T @ gz + w / c_value
        gb = gz.sum(axis=0)
        return loss, np.concatenate([gw.reshape(-1), gb])

    theta0 = np.zeros(d * k + k)
    res = minimize(objective, theta0, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter})
    w = res.x[:d * k].reshape(d, k)
    b = res.x[d * k:]
    return LinearClassifier(weights=w, bias=b, classes=classes)


# -- fold discipline ---------------------------------------------------------

class FoldError(ValueError):
    pass


def make_folds(group_keys, n_folds: int = 4, seed: int = 0) -> np.ndarray:
    """Fold index per item; a grouping key never straddles folds."""
    group_keys = list(group_keys)
    uniq = sorted(set(group_keys))
    if len(uniq) < n_folds:
        raise FoldError(f"{len(uniq)} groups cannot fill {n_folds} folds")
    rng = np.random.default_rng(seed)
    order = [uniq[i] for i in rng.permutation(len(uniq))]
    fold_of_group = {g: i % n_folds for i, g in enumerate(order)}
    return np.array([fold_of_group[g] for g in group_keys], dtype=np.int64)


def train_val_split(indices: np.ndarray, labels: np.ndarray, val_frac: float = 0.2,
                    seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Stratified 80/20 split of the training pool (per-class rounding)."""
    rng = np.random.default_rng(seed)
    train, val = [], []
    for c in np.unique(labels[indices]):
        pool = indices[labels[indices] == c]
        pool = pool[rng.permutation(len(pool))]
        n_val = int(round(val_frac * len(pool)))
        if len(pool) >= 2:
            n_val = max(1, min(n_val, len(pool) - 1))
        else:
            n_val = 0
        val.extend(pool[:n_val])
        train.extend(pool[n_val:])
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(val), dtype=np.int64)


def probe_fold(features, labels, train_idx, val_idx, test_idx,
               config: ProbeConfig) -> tuple[LinearClassifier, MetricReport, float]:
    """Fit with C selected on the validation split; report test metrics."""
    if config.fixed_c is not None:
        best_c = config.fixed_c
        best_model = fit_logreg(features[train_idx], labels[train_idx], best_c, config.max_iter)
    else:
        best_model, best_c, best_f1 = None, None, -1.0
        for c in config.c_grid:
            model = fit_logreg(features[train_idx], labels[train_idx], c, config.max_iter)
            rep = classify_metrics(labels[val_idx], model.predict(features[val_idx]),
                                   model.scores(features[val_idx]))
            if rep.macro_f1 > best_f1:
                best_model, best_c, best_f1 = model, c, rep.macro_f1
        assert best_model is not None
    report = classify_metrics(labels[test_idx], best_model.predict(features[test_idx]),
                              best_model.scores(features[test_idx]))
    return best_model, report, best_c


def probe_cv(features, labels, group_keys, config: ProbeConfig | None = None,
             n_folds: int = 4, seed: int = 0,
             train_filter=None) -> tuple[list[MetricReport], np.ndarray]:
    """Grouped k-fold linear probing; returns per-fold reports.

    ``train_filter(train_indices, fold, labels)`` may subsample the
    training pool (few-shot protocols) before the 80/20 validation split.
    """
    config = config or ProbeConfig()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    folds = make_folds(group_keys, n_folds=n_folds, seed=seed)
    reports = []
    for fold in range(n_folds):
        test_idx = np.flatnonzero(folds == fold)
        pool = np.flatnonzero(folds != fold)
        if train_filter is not None:
            pool = np.asarray(train_filter(pool, fold, labels), dtype=np.int64)
        train_idx, val_idx = train_val_split(pool, labels, seed=seed + fold)
        if config.fixed_c is not None:
            train_idx = np.array(sorted(np.concatenate([train_idx, val_idx])), dtype=np.int64)
        _, report, _ = probe_fold(features, labels, train_idx, val_idx, test_idx, config)
        reports.append(report)
    return reports, folds
