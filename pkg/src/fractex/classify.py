"""KNN, Gaussian-Bayes and LDA classifiers with a stratified CV harness.

All classifiers consume a FeatureTable and a matrix of query rows and
return integer class indices. Tie-breaking is deterministic everywhere
(class index, never training-row order), so predictions are invariant
under permutations of the training rows and repeated runs are
bit-identical for a fixed seed.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConditioningError

_PCA_KEEP_VARIANCE = 0.999


@dataclass(frozen=True)
class FeatureTable:
    """n x d feature rows with integer class labels."""

    rows: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    feature_kind: str = "original"

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if rows.ndim != 2 or labels.shape != (rows.shape[0],):
            raise ValueError("rows must be (n, d) with one label per row")
        if not np.all(np.isfinite(rows)):
            raise ValueError("feature rows contain non-finite entries")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise ValueError("label index outside class_names range")
        counts = np.bincount(labels, minlength=len(self.class_names))
        thin = [self.class_names[i] for i in np.nonzero(counts < 2)[0]]
        if thin:
            raise ValueError(f"classes with fewer than 2 rows: {', '.join(thin)}")
        for arr in (rows, labels):
            arr.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def _unchecked(cls, rows, labels, class_names, feature_kind) -> "FeatureTable":
        # fold-train subsets may hold a single row of some class; the public
        # >=2-per-class invariant applies to ingested tables, not subsets
        obj = object.__new__(cls)
        object.__setattr__(obj, "rows", rows)
        object.__setattr__(obj, "labels", labels)
        object.__setattr__(obj, "class_names", class_names)
        object.__setattr__(obj, "feature_kind", feature_kind)
        return obj

    @classmethod
    def from_labeled(cls, rows, label_strings, feature_kind: str = "original") -> "FeatureTable":
        """Build a table from string labels, numbering classes by first appearance."""
        names: list[str] = []
        index: dict[str, int] = {}
        labels = []
        for s in label_strings:
            if s not in index:
                index[s] = len(names)
                names.append(s)
            labels.append(index[s])
        return cls(rows=np.asarray(rows, dtype=np.float64), labels=np.asarray(labels),
                   class_names=tuple(names), feature_kind=feature_kind)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def _sq_distances(queries: np.ndarray, rows: np.ndarray) -> np.ndarray:
    d2 = (queries ** 2).sum(axis=1)[:, None] + (rows ** 2).sum(axis=1)[None, :] \
        - 2.0 * (queries @ rows.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def knn_classify(train: FeatureTable, test_rows, k: int) -> np.ndarray:
    """k-nearest-neighbor vote under Euclidean distance.

    Vote ties go to the class with the smallest mean distance among its
    tied members, then to the smallest class index. Neighbor selection at
    equal distance is resolved by class index, keeping predictions
    independent of training-row order.
    """
    queries = np.atleast_2d(np.asarray(test_rows, dtype=np.float64))
    if not 1 <= k <= train.n:
        raise ValueError(f"k must be in [1, {train.n}], got {k}")
    d2 = _sq_distances(queries, train.rows)
    preds = np.empty(queries.shape[0], dtype=np.int64)
    for i in range(queries.shape[0]):
        order = np.lexsort((train.labels, d2[i]))[:k]
        nb_labels = train.labels[order]
        nb_d2 = d2[i][order]
        counts = np.bincount(nb_labels, minlength=train.n_classes)
        top = counts.max()
        tied = np.nonzero(counts == top)[0]
        if tied.size == 1:
            preds[i] = tied[0]
            continue
        best, best_mean = tied[0], np.inf
        for c in tied:
            mean_d = nb_d2[nb_labels == c].mean()
            if mean_d < best_mean:
                best, best_mean = c, mean_d
        preds[i] = best
    return preds


def bayes_log_posterior(train: FeatureTable, test_rows) -> np.ndarray:
    """Per-class log posterior of a diagonal-covariance Gaussian model.

    Per-class variances are floored at max(1e-9, 1e-6 * global feature
    variance); features with zero variance across all training rows are
    dropped with a warning.
    """
    queries = np.atleast_2d(np.asarray(test_rows, dtype=np.float64))
    rows = train.rows
    keep = rows.max(axis=0) > rows.min(axis=0)
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} zero-variance feature(s)",
                      stacklevel=2)
        rows = rows[:, keep]
        queries = queries[:, keep]
    counts = np.bincount(train.labels, minlength=train.n_classes)
    if counts.min() < 2:
        thin = train.class_names[int(np.argmin(counts))]
        raise ValueError(f"class '{thin}' needs at least 2 training rows for a variance estimate")
    global_var = rows.var(axis=0, ddof=1)
    floor = np.maximum(1e-9, 1e-6 * global_var)
    c = train.n_classes
    scores = np.empty((queries.shape[0], c))
    for ci in range(c):
        members = rows[train.labels == ci]
        mu = members.mean(axis=0)
        var = np.maximum(members.var(axis=0, ddof=1), floor)
        log_prior = np.log(members.shape[0] / train.n)
        ll = -0.5 * (np.log(2.0 * np.pi * var)[None, :]
                     + (queries - mu[None, :]) ** 2 / var[None, :]).sum(axis=1)
        scores[:, ci] = ll + log_prior
    return scores


def bayes_classify(train: FeatureTable, test_rows) -> np.ndarray:
    """Maximum log-posterior class; ties go to the lower class index."""
    return np.argmax(bayes_log_posterior(train, test_rows), axis=1)


def lda_scores(train: FeatureTable, test_rows, shrinkage: float = 1e-4) -> np.ndarray:
    """Linear discriminant values g_c(x) = mu_c' S^-1 x - mu_c' S^-1 mu_c / 2 + log prior.

    The pooled within-class covariance is shrunk toward its own diagonal:
    (1 - shrinkage) * Sw + shrinkage * diag(Sw). When n - c < d the
    features are first projected onto the principal components retaining
    99.9% of the variance (capped at n - c components) so the pooled
    covariance stays invertible.
    """
    queries = np.atleast_2d(np.asarray(test_rows, dtype=np.float64))
    if not 0.0 <= shrinkage <= 1.0:
        raise ValueError(f"shrinkage must be in [0, 1], got {shrinkage}")
    rows = train.rows
    n, d = rows.shape
    c = train.n_classes
    if n <= c:
        raise ValueError(f"pooled covariance needs more rows ({n}) than classes ({c})")
    if n - c < d:
        center = rows.mean(axis=0)
        _, sing, vt = np.linalg.svd(rows - center, full_matrices=False)
        var = sing ** 2
        ratio = np.cumsum(var) / var.sum()
        n_comp = int(np.searchsorted(ratio, _PCA_KEEP_VARIANCE) + 1)
        n_comp = max(1, min(n_comp, n - c))
        proj = vt[:n_comp].T
        rows = (rows - center) @ proj
        queries = (queries - center) @ proj
        d = n_comp
    means = np.stack([rows[train.labels == ci].mean(axis=0) for ci in range(c)])
    centered = rows - means[train.labels]
    pooled = centered.T @ centered / (n - c)
    reg = (1.0 - shrinkage) * pooled + shrinkage * np.diag(np.diag(pooled))
    try:
        chol = cho_factor(reg, lower=True)
    except np.linalg.LinAlgError:
        raise ConditioningError("regularized covariance is singular; "
                                "increase shrinkage") from None
    coef = cho_solve(chol, means.T)                    # d x c
    priors = np.bincount(train.labels, minlength=c) / n
    intercept = -0.5 * np.sum(means * coef.T, axis=1) + np.log(priors)
    return queries @ coef + intercept[None, :]


def lda_classify(train: FeatureTable, test_rows, shrinkage: float = 1e-4) -> np.ndarray:
    """Maximum-discriminant class; ties go to the lower class index."""
    return np.argmax(lda_scores(train, test_rows, shrinkage), axis=1)


@dataclass(frozen=True)
class ClassifierConfig:
    name: str
    k: int = 1
    shrinkage: float = 1e-4
    standardize: bool = False


def predict(config: ClassifierConfig, train: FeatureTable, test_rows) -> np.ndarray:
    if config.name == "knn":
        return knn_classify(train, test_rows, config.k)
    if config.name == "bayes":
        return bayes_classify(train, test_rows)
    if config.name == "lda":
        return lda_classify(train, test_rows, config.shrinkage)
    raise ValueError(f"unknown classifier {config.name!r}")


def stratified_folds(labels: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Fold index per row; each class is spread across folds within one row.

    Rows of each class are shuffled with the seeded generator and dealt
    round-robin, with the starting fold rotated by class so total fold
    sizes stay balanced.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    fold = np.empty(labels.shape[0], dtype=np.int64)
    for ci in range(labels.max() + 1):
        idx = np.nonzero(labels == ci)[0]
        perm = rng.permutation(idx)
        fold[perm] = (np.arange(perm.size) + ci) % n_folds
    return fold


@dataclass(frozen=True)
class EvaluationReport:
    classifier: str
    feature_kind: str
    n_features: int
    fold_correct: tuple[int, ...]
    fold_total: tuple[int, ...]
    mean_accuracy: float
    deviation: float
    n_folds: int
    seed: int
    config: dict = field(default_factory=dict)
    confusion: np.ndarray | None = None

    @property
    def fold_accuracies(self) -> tuple[float, ...]:
        return tuple(100.0 * c / t for c, t in zip(self.fold_correct, self.fold_total))

    def summary_line(self) -> str:
        return (f"{self.classifier} {self.feature_kind} d={self.n_features} "
                f"acc={self.mean_accuracy:.1f}±{self.deviation:.1f}")

    def to_json(self) -> str:
        doc = {
            "classifier": self.classifier,
            "feature_kind": self.feature_kind,
            "n_features": self.n_features,
            "folds": [{"correct": c, "total": t, "accuracy": 100.0 * c / t}
                      for c, t in zip(self.fold_correct, self.fold_total)],
            "mean": self.mean_accuracy,
            "std": self.deviation,
            "seed": self.seed,
            "config": self.config,
        }
        return json.dumps(doc, indent=2)


def cross_validate(table: FeatureTable, config: ClassifierConfig,
                   folds: int = 10, seed: int = 42) -> EvaluationReport:
    """Stratified k-fold evaluation; deterministic for a fixed seed.

    The deviation reported is the sample standard deviation of the
    per-fold accuracies. If some class has fewer rows than folds, the fold
    count is reduced to the smallest class size with a warning.
    """
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if table.n_classes < 2:
        raise ValueError("need at least 2 classes to evaluate")
    min_class = int(np.bincount(table.labels).min())
    if min_class < folds:
        warnings.warn(f"reducing folds from {folds} to smallest class size {min_class}",
                      stacklevel=2)
        folds = min_class
    fold_of = stratified_folds(table.labels, folds, seed)
    correct, total = [], []
    confusion = np.zeros((table.n_classes, table.n_classes), dtype=np.int64)
    for f in range(folds):
        test_mask = fold_of == f
        train_rows = table.rows[~test_mask]
        test_rows = table.rows[test_mask]
        if config.standardize:
            mu = train_rows.mean(axis=0)
            sd = train_rows.std(axis=0, ddof=0)
            sd[sd == 0] = 1.0
            train_rows = (train_rows - mu) / sd
            test_rows = (test_rows - mu) / sd
        fold_train = FeatureTable._unchecked(train_rows, table.labels[~test_mask],
                                             table.class_names, table.feature_kind)
        preds = predict(config, fold_train, test_rows)
        truth = table.labels[test_mask]
        np.add.at(confusion, (truth, preds), 1)
        correct.append(int((preds == truth).sum()))
        total.append(int(truth.size))
    accs = np.array([100.0 * c / t for c, t in zip(correct, total)])
    cfg = {"k": config.k, "shrinkage": config.shrinkage,
           "standardize": config.standardize, "n_folds": folds}
    return EvaluationReport(classifier=config.name, feature_kind=table.feature_kind,
                            n_features=table.d, fold_correct=tuple(correct),
                            fold_total=tuple(total),
                            mean_accuracy=float(accs.mean()),
                            deviation=float(accs.std(ddof=1)),
                            n_folds=folds, seed=seed, config=cfg,
                            confusion=confusion)
