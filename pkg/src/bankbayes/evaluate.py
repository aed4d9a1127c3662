"""Posterior-predictive classification, K-fold ELPD, and classic baselines."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .glm_core import GlmModel, PriorSpec, sigmoid
from .ingest import RawTable
from .nuts import ChainFailed, PosteriorDraws, SamplerConfig, run_chains
from .preprocess import (
    DimensionMismatch,
    LabeledMatrix,
    apply_scaler,
    fit_scaler,
    stratified_kfold,
)


class LengthMismatch(ValueError):
    pass


class MisalignedFolds(ValueError):
    pass


class FoldFitFailed(RuntimeError):
    pass


class MissingRatio(ValueError):
    pass


class SingularSystem(RuntimeError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int
    positive_label: int

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    def to_dict(self) -> dict:
        return {
            "tn": self.tn, "fp": self.fp, "fn": self.fn, "tp": self.tp,
            "positive_label": self.positive_label,
        }


@dataclass(frozen=True)
class MetricSet:
    """Accuracy/precision/recall/F1 as percentages; zero-denominator metrics
    are reported as 0 and listed in ``undefined``."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1,
            "undefined": list(self.undefined),
        }


@dataclass(frozen=True)
class ElpdResult:
    elpd: float
    per_point: np.ndarray
    se: float
    fold_of: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {"elpd": self.elpd, "se": self.se, "n": int(self.per_point.shape[0])}


def posterior_predictive_prob(
    draws: PosteriorDraws, X_new: np.ndarray, chunk: int = 1024
) -> np.ndarray:
    """Monte Carlo posterior predictive: mean of sigmoid(eta) over all draws."""
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.ndim != 2 or draws.n_params != X_new.shape[1] + 1:
        raise DimensionMismatch(
            f"draws have {draws.n_params} parameters, X has {X_new.shape[1]} features"
        )
    pooled = draws.pooled()
    total = np.zeros(X_new.shape[0])
    for start in range(0, pooled.shape[0], chunk):
        block = pooled[start:start + chunk]
        eta = X_new @ block[:, 1:].T + block[:, 0]
        total += sigmoid(eta).sum(axis=1)
    return total / pooled.shape[0]


def classify(probs: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Label 1 iff prob strictly exceeds the threshold (ties go to 0)."""
    probs = np.asarray(probs, dtype=np.float64)
    if ((probs < 0.0) | (probs > 1.0)).any():
        raise ValueError("probabilities must lie in [0, 1]")
    return (probs > threshold).astype(np.int64)


def confusion(pred, actual, positive_label: int = 1) -> ConfusionMatrix:
    pred = np.asarray(pred)
    actual = np.asarray(actual)
    if pred.shape != actual.shape or pred.ndim != 1:
        raise LengthMismatch(f"pred has shape {pred.shape}, actual {actual.shape}")
    for name, arr in (("pred", pred), ("actual", actual)):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must contain only 0/1 labels")
    if positive_label not in (0, 1):
        raise ValueError("positive_label must be 0 or 1")
    pos_pred = pred == positive_label
    pos_act = actual == positive_label
    return ConfusionMatrix(
        tn=int((~pos_pred & ~pos_act).sum()),
        fp=int((pos_pred & ~pos_act).sum()),
        fn=int((~pos_pred & pos_act).sum()),
        tp=int((pos_pred & pos_act).sum()),
        positive_label=positive_label,
    )


def metrics(cm: ConfusionMatrix) -> MetricSet:
    undefined = []

    def ratio(num, den, name):
        if den == 0:
            undefined.append(name)
            return 0.0
        return 100.0 * num / den

    accuracy = ratio(cm.tp + cm.tn, cm.total, "accuracy")
    precision = ratio(cm.tp, cm.tp + cm.fp, "precision")
    recall = ratio(cm.tp, cm.tp + cm.fn, "recall")
    if precision + recall == 0.0:
        undefined.append("f1")
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return MetricSet(accuracy, precision, recall, f1, tuple(undefined))


def elpd_pointwise_from_draws(
    draws: PosteriorDraws, X: np.ndarray, y: np.ndarray, chunk: int = 512
) -> np.ndarray:
    """Per-row log predictive density: log mean_s p(y_i | beta_s), stable."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or draws.n_params != X.shape[1] + 1 or y.shape != (X.shape[0],):
        raise DimensionMismatch("draws, X and y have incompatible shapes")
    pooled = draws.pooled()
    log_s = np.log(pooled.shape[0])
    out = np.empty(X.shape[0])
    sign = 1.0 - 2.0 * y
    for start in range(0, X.shape[0], chunk):
        stop = min(start + chunk, X.shape[0])
        eta = X[start:stop] @ pooled[:, 1:].T + pooled[:, 0]   # rows x draws
        loglik = -np.logaddexp(0.0, sign[start:stop, None] * eta)
        out[start:stop] = logsumexp(loglik, axis=1) - log_s
    return out


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(7001, fold)).generate_state(1)[0])


def kfold_elpd(
    data: LabeledMatrix,
    k: int,
    sampler_config: SamplerConfig,
    priors: PriorSpec | None = None,
    sampler=run_chains,
    fold_seed: int | None = None,
) -> ElpdResult:
    """Stratified K-fold expected log pointwise predictive density.

    ``data`` is unscaled; each fold refits the scaler on its training part.
    Per-fold sampler seeds derive from ``sampler_config.seed``, so results do
    not depend on execution order.
    """
    folds = stratified_kfold(
        data.y, k, sampler_config.seed if fold_seed is None else fold_seed
    )
    per_point = np.full(data.n_rows, np.nan)
    fold_of = np.full(data.n_rows, -1, dtype=np.int64)
    for fold_id, (train_idx, heldout_idx) in enumerate(folds):
        train = LabeledMatrix(data.X[train_idx], data.y[train_idx], data.feature_ids)
        scaler = fit_scaler(train)
        model = GlmModel(apply_scaler(scaler, train), priors)
        config = replace(sampler_config, seed=_fold_seed(sampler_config.seed, fold_id))
        try:
            draws = sampler(model, config)
        except ChainFailed as exc:
            raise FoldFitFailed(f"fold {fold_id}: {exc}") from exc
        X_heldout = (data.X[heldout_idx] - scaler.means) / scaler.sds
        per_point[heldout_idx] = elpd_pointwise_from_draws(
            draws, X_heldout, data.y[heldout_idx]
        )
        fold_of[heldout_idx] = fold_id
    se = float(np.sqrt(per_point.shape[0] * per_point.var(ddof=1)))
    return ElpdResult(float(per_point.sum()), per_point, se, fold_of)


def elpd_diff(a: ElpdResult, b: ElpdResult) -> tuple[float, float]:
    """ELPD difference a - b with its standard error."""
    if a.per_point.shape != b.per_point.shape:
        raise MisalignedFolds("per-point vectors have different lengths")
    if (
        a.fold_of is not None
        and b.fold_of is not None
        and not np.array_equal(a.fold_of, b.fold_of)
    ):
        raise MisalignedFolds("fold assignments differ between the two results")
    delta = a.per_point - b.per_point
    diff = float(a.elpd - b.elpd)
    se = float(np.sqrt(delta.shape[0] * delta.var(ddof=1)))
    return diff, se


def render_elpd_comparison(name_a: str, a: ElpdResult, name_b: str, b: ElpdResult) -> str:
    """Two-row comparison table with the better model normalized to 0.0."""
    diff, se = elpd_diff(a, b)
    if diff >= 0:
        rows = [(name_a, 0.0, 0.0), (name_b, -abs(diff), se)]
    else:
        rows = [(name_b, 0.0, 0.0), (name_a, -abs(diff), se)]
    lines = ["| Model | ELPD difference | Std Error |", "| --- | --- | --- |"]
    for name, d, s in rows:
        lines.append(f"| {name} | {d:.1f} | {s:.1f} |")
    return "\n".join(lines)


# Altman's classic five-ratio Z-score (book-value-of-equity variant):
# Z = 1.2 * working capital/TA + 1.4 * retained earnings/TA + 3.3 * EBIT/TA
#     + 0.6 * book equity/total liabilities + 1.0 * sales/TA
ALTMAN_FEATURES = ("attr3", "attr6", "attr7", "attr8", "attr9")
ALTMAN_WEIGHTS = np.array([1.2, 1.4, 3.3, 0.6, 1.0])
ALTMAN_DISTRESS = 1.81
ALTMAN_SAFE = 2.99


def altman_zscore(ratios) -> tuple[float, int, str]:
    """Z-score and class for one company from its five unscaled ratios.

    ``ratios`` is a mapping with keys attr3/attr6/attr7/attr8/attr9 or a
    sequence in that order.  Classifies bankrupt (1) below 1.81; the
    1.81-2.99 band is labelled ``grey`` but classified 0.
    """
    if hasattr(ratios, "keys"):
        try:
            vals = np.array([float(ratios[f]) for f in ALTMAN_FEATURES])
        except KeyError as exc:
            raise MissingRatio(f"missing ratio {exc.args[0]!r}") from exc
    else:
        vals = np.asarray(ratios, dtype=np.float64)
        if vals.shape != (5,):
            raise MissingRatio("expected exactly five ratios (attr3,6,7,8,9)")
    if not np.isfinite(vals).all():
        raise MissingRatio("Altman ratios must be present and finite")
    z = float(ALTMAN_WEIGHTS @ vals)
    if z < ALTMAN_DISTRESS:
        return z, 1, "distress"
    if z < ALTMAN_SAFE:
        return z, 0, "grey"
    return z, 0, "safe"


def altman_classify(table: RawTable) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Vectorized Z-score over a raw (unscaled) table."""
    missing_cols = [f for f in ALTMAN_FEATURES if f not in table.column_names]
    if missing_cols:
        raise MissingRatio(f"table lacks Altman ratio columns: {missing_cols}")
    cols = np.column_stack([table.column(f) for f in ALTMAN_FEATURES])
    if not np.isfinite(cols).all():
        bad = int(np.flatnonzero(~np.isfinite(cols).all(axis=1))[0])
        raise MissingRatio(f"row {bad} has a missing Altman ratio")
    z = cols @ ALTMAN_WEIGHTS
    pred = (z < ALTMAN_DISTRESS).astype(np.int64)
    zones = [
        "distress" if v < ALTMAN_DISTRESS else ("grey" if v < ALTMAN_SAFE else "safe")
        for v in z
    ]
    return z, pred, zones


@dataclass(frozen=True)
class IrlsResult:
    beta: np.ndarray
    converged: bool
    n_iter: int
    separation: bool


def irls_fit(data: LabeledMatrix, max_iter: int = 100, tol: float = 1e-8) -> IrlsResult:
    """Maximum-likelihood logistic regression via iteratively reweighted
    least squares; intercept-first coefficient layout.

    Separation is flagged when any coefficient magnitude passes 1e3.  On
    non-convergence the last iterate is returned with ``converged=False``.
    """
    n = data.n_rows
    X1 = np.column_stack([np.ones(n), data.X])
    y = data.y
    beta = np.zeros(X1.shape[1])
    for it in range(1, max_iter + 1):
        eta = X1 @ beta
        mu = sigmoid(eta)
        w = mu * (1.0 - mu)
        hessian = X1.T @ (X1 * w[:, None])
        grad = X1.T @ (y - mu)
        try:
            step = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(
                f"weighted normal equations singular at iteration {it}"
            ) from exc
        beta = beta + step
        if np.abs(beta).max() > 1e3:
            return IrlsResult(beta, False, it, True)
        if np.abs(step).max() < tol:
            return IrlsResult(beta, True, it, False)
    return IrlsResult(beta, False, max_iter, False)


@dataclass(frozen=True)
class EvalReport:
    """Classification report on one dataset, both label orientations."""

    threshold: float
    headline_positive_label: int
    confusion_pos1: ConfusionMatrix
    confusion_pos0: ConfusionMatrix
    metrics_pos1: MetricSet
    metrics_pos0: MetricSet
    elpd: ElpdResult | None = None

    @property
    def headline_metrics(self) -> MetricSet:
        return self.metrics_pos1 if self.headline_positive_label == 1 else self.metrics_pos0

    def to_json_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "headline_positive_label": self.headline_positive_label,
            "bankrupt_positive": {
                "confusion": self.confusion_pos1.to_dict(),
                "metrics": self.metrics_pos1.to_dict(),
            },
            "nonbankrupt_positive": {
                "confusion": self.confusion_pos0.to_dict(),
                "metrics": self.metrics_pos0.to_dict(),
            },
            "elpd": None if self.elpd is None else self.elpd.to_dict(),
        }

    def render_markdown(self, title: str) -> str:
        cm = self.confusion_pos1
        lines = [
            f"## {title}",
            "",
            "Confusion matrix (bankrupt = positive):",
            "",
            "|  | Predicted NO | Predicted YES |",
            "| --- | --- | --- |",
            f"| True NO | {cm.tn} | {cm.fp} |",
            f"| True YES | {cm.fn} | {cm.tp} |",
            "",
            "| Orientation | Accuracy | Precision | Recall | F1 |",
            "| --- | --- | --- | --- | --- |",
        ]
        for label, ms in (("bankrupt=positive", self.metrics_pos1),
                          ("non-bankrupt=positive", self.metrics_pos0)):
            lines.append(
                f"| {label} | {ms.accuracy:.3f} | {ms.precision:.3f} "
                f"| {ms.recall:.3f} | {ms.f1:.3f} |"
            )
        if self.elpd is not None:
            lines += ["", f"ELPD: {self.elpd.elpd:.3f} (se {self.elpd.se:.3f})"]
        return "\n".join(lines)


def evaluation_report(
    pred: np.ndarray,
    actual: np.ndarray,
    threshold: float,
    headline_positive_label: int = 1,
    elpd: ElpdResult | None = None,
) -> EvalReport:
    return EvalReport(
        threshold=threshold,
        headline_positive_label=headline_positive_label,
        confusion_pos1=confusion(pred, actual, positive_label=1),
        confusion_pos0=confusion(pred, actual, positive_label=0),
        metrics_pos1=metrics(confusion(pred, actual, positive_label=1)),
        metrics_pos0=metrics(confusion(pred, actual, positive_label=0)),
        elpd=elpd,
    )
