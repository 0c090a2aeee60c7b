"""Training losses and benchmark metrics for depth and semantic predictions."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import RejectedInputError, UndefinedLossError

DEFAULT_ALPHA = 0.75
IGNORE_LABEL = 255
PROB_FLOOR = 1e-12
NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True)
class DepthMetrics:
    mean_error: float
    rms_error: float
    abs_rel: float
    sq_rel: float
    delta1: float
    delta2: float
    delta3: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SegMetrics:
    per_class_iou: np.ndarray  # NaN where the class is absent from both grids
    mean_iou_class: float
    mean_iou_category: float

    def as_dict(self) -> dict:
        return {
            "per_class_iou": [None if np.isnan(x) else float(x) for x in self.per_class_iou],
            "mean_iou_class": self.mean_iou_class,
            "mean_iou_category": self.mean_iou_category,
        }


def _masked_pair(pred, gt, mask):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise RejectedInputError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    mask = np.ones(gt.shape, bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != gt.shape:
        raise RejectedInputError(f"mask shape {mask.shape} does not match {gt.shape}")
    p, g = pred[mask], gt[mask]
    if p.size == 0:
        raise UndefinedLossError("validity mask selects no pixels")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(g))):
        raise RejectedInputError("non-finite depth under mask")
    if np.any(p <= 0) or np.any(g <= 0):
        raise RejectedInputError("depth must be positive wherever the mask is set")
    return p, g


def scale_invariant_loss(pred, gt, mask=None) -> float:
    """Log-space depth loss that ignores a global scale factor.

    ``mean(d**2) - sum(d)**2 / (2 n**2)`` with ``d = ln(pred) - ln(gt)`` over
    masked pixels.
    """
    p, g = _masked_pair(pred, gt, mask)
    d = np.log(p) - np.log(g)
    n = d.size
    value = np.dot(d, d) / n - d.sum() ** 2 / (2.0 * n * n)
    # the expression equals var(d) + mean(d)**2 / 2, so rounding is the only way below 0
    return max(float(value), 0.0)


def cross_entropy_loss(pred_probs, gt, mask=None) -> float:
    """Mean negative log-likelihood of the true class over masked pixels.

    ``pred_probs`` has shape ``(H, W, num_classes)``. Probabilities are
    floored at 1e-12 before the log.
    """
    probs = np.asarray(pred_probs, dtype=np.float64)
    gt = np.asarray(gt)
    if probs.ndim != gt.ndim + 1 or probs.shape[:-1] != gt.shape:
        raise RejectedInputError(f"probability grid {probs.shape} does not match labels {gt.shape}")
    mask = np.ones(gt.shape, bool) if mask is None else np.asarray(mask, dtype=bool)
    rows, labels = probs[mask], gt[mask].astype(np.int64)
    if labels.size == 0:
        raise UndefinedLossError("validity mask selects no pixels")
    num_classes = probs.shape[-1]
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise RejectedInputError(f"labels must lie in [0, {num_classes})")
    if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=-1) - 1.0) > NORMALIZATION_TOL):
        raise RejectedInputError("class probabilities must be non-negative and sum to 1")
    true_prob = rows[np.arange(labels.size), labels]
    return float(-np.mean(np.log(np.maximum(true_prob, PROB_FLOOR))))


def combined_loss(ls: float, ld: float, alpha: float = DEFAULT_ALPHA) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise RejectedInputError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha * ls + (1.0 - alpha) * ld


def depth_metrics(pred, gt, mask=None) -> DepthMetrics:
    p, g = _masked_pair(pred, gt, mask)
    diff = p - g
    sq = diff * diff
    ratio = np.maximum(p / g, g / p)
    return DepthMetrics(
        mean_error=float(np.mean(np.abs(diff))),
        rms_error=float(np.sqrt(np.mean(sq))),
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(sq / g)),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25**2)),
        delta3=float(np.mean(ratio < 1.25**3)),
    )


def confusion_matrix(pred, gt, num_classes: int, ignore_label: int = IGNORE_LABEL) -> np.ndarray:
    """Rows are ground truth, columns prediction. Ignored gt pixels are dropped;
    a prediction equal to ``ignore_label`` lands in an extra last column."""
    pred = np.asarray(pred).ravel().astype(np.int64)
    gt = np.asarray(gt).ravel().astype(np.int64)
    if pred.shape != gt.shape:
        raise RejectedInputError("label grids differ in size")
    keep = gt != ignore_label
    pred, gt = pred[keep], gt[keep]
    pred = np.where(pred == ignore_label, num_classes, pred)
    bad = (gt < 0) | (gt >= num_classes) | (pred < 0) | (pred > num_classes)
    if np.any(bad):
        raise RejectedInputError(f"labels must be < {num_classes} or the ignore id {ignore_label}")
    cm = np.bincount(gt * (num_classes + 1) + pred, minlength=num_classes * (num_classes + 1))
    return cm.reshape(num_classes, num_classes + 1)


def _iou_from_confusion(cm: np.ndarray) -> np.ndarray:
    n = cm.shape[0]
    tp = np.diag(cm[:, :n]).astype(np.float64)
    fn = cm.sum(axis=1) - tp
    fp = cm[:, :n].sum(axis=0) - tp
    union = tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(union > 0, tp / union, np.nan)


def _nanmean(x: np.ndarray) -> float:
    x = x[~np.isnan(x)]
    return float(x.mean()) if x.size else float("nan")


def segmentation_iou(
    pred,
    gt,
    num_classes: int,
    category_map=None,
    ignore_label: int = IGNORE_LABEL,
) -> SegMetrics:
    """Per-class and per-category intersection over union.

    Classes with an empty union (absent from both grids) are reported as NaN
    and left out of the means. ``category_map[c]`` gives the category of class
    ``c``; without one, the category mean equals the class mean.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    per_class = _iou_from_confusion(confusion_matrix(pred, gt, num_classes, ignore_label))
    if category_map is None:
        cat_mean = _nanmean(per_class)
    else:
        table = np.asarray(category_map, dtype=np.int64)
        num_cats = int(table.max()) + 1

        def to_cat(grid):
            grid = grid.astype(np.int64)
            out = np.full(grid.shape, ignore_label, np.int64)
            ok = (grid >= 0) & (grid < table.size)
            out[ok] = table[grid[ok]]
            return out

        cm = confusion_matrix(to_cat(pred), to_cat(gt), num_cats, ignore_label)
        cat_mean = _nanmean(_iou_from_confusion(cm))
    return SegMetrics(per_class, _nanmean(per_class), cat_mean)
