"""Segmentation evaluation: greedy IoU instance matching and confusion-matrix
semantic scores.  All reported values are percentages in [0, 100]."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass
class SegmentationResult:
    """Per-point predictions aligned 1:1 with a ground-truth cloud."""

    instance: np.ndarray
    semantic: np.ndarray | None = None


@dataclass
class InstanceMatch:
    pred_id: int
    gt_id: int
    iou: float


@dataclass
class InstanceMetrics:
    mean_iou: float
    precision: float
    recall: float
    f1: float
    matches: list[InstanceMatch] = field(default_factory=list)
    n_pred: int = 0
    n_gt: int = 0

    def as_dict(self) -> dict:
        return {
            "mean_iou": round(self.mean_iou, 3),
            "precision": round(self.precision, 3),
            "recall": round(self.recall, 3),
            "f1": round(self.f1, 3),
            "n_pred": self.n_pred,
            "n_gt": self.n_gt,
            "true_positives": len(self.matches),
        }


def _pair_ious(pred: np.ndarray, gt: np.ndarray):
    """IoU for every overlapping (pred, gt) instance pair via the contingency
    table; instance 0 (unlabeled/ground) is never a matchable instance but
    its points still count toward the other side's set sizes."""
    pred_ids, pred_inv = np.unique(pred, return_inverse=True)
    gt_ids, gt_inv = np.unique(gt, return_inverse=True)
    inter = np.zeros((len(pred_ids), len(gt_ids)), dtype=np.int64)
    np.add.at(inter, (pred_inv, gt_inv), 1)
    pred_sizes = inter.sum(axis=1)
    gt_sizes = inter.sum(axis=0)

    pairs = []
    pi_nz, gi_nz = np.nonzero(inter)
    for pi, gi in zip(pi_nz, gi_nz):
        p_id = int(pred_ids[pi])
        g_id = int(gt_ids[gi])
        if p_id == 0 or g_id == 0:
            continue
        i = int(inter[pi, gi])
        union = int(pred_sizes[pi]) + int(gt_sizes[gi]) - i
        pairs.append((p_id, g_id, i / union))
    n_pred = int((pred_ids != 0).sum())
    n_gt = int((gt_ids != 0).sum())
    return pairs, n_pred, n_gt


def evaluate_instances(
    pred,
    gt,
    iou_threshold: float = 0.5,
    mean_iou_mode: str = "matched",
) -> InstanceMetrics:
    """Greedy one-to-one matching in descending IoU order.

    Pairs with IoU >= iou_threshold are true positives.  precision counts
    over predicted instances, recall over ground-truth instances; mean IoU
    averages matched pairs ("matched") or all ground truth with unmatched
    counted as zero ("all_gt").
    """
    pred = np.asarray(pred.instance if isinstance(pred, SegmentationResult) else pred)
    gt = np.asarray(gt.instance if isinstance(gt, SegmentationResult) else gt)
    if pred.shape != gt.shape:
        raise ValidationError("prediction and ground truth must align 1:1")
    if mean_iou_mode not in ("matched", "all_gt"):
        raise ValidationError(f"unknown mean_iou_mode {mean_iou_mode!r}")

    pairs, n_pred, n_gt = _pair_ious(pred, gt)
    # Descending IoU; deterministic tie-break on (pred id, gt id).
    pairs.sort(key=lambda t: (-t[2], t[0], t[1]))
    used_pred: set[int] = set()
    used_gt: set[int] = set()
    matches: list[InstanceMatch] = []
    for p, g, iou in pairs:
        if iou < iou_threshold:
            break
        if p in used_pred or g in used_gt:
            continue
        used_pred.add(p)
        used_gt.add(g)
        matches.append(InstanceMatch(pred_id=p, gt_id=g, iou=iou))

    tp = len(matches)
    precision = 100.0 * tp / n_pred if n_pred else 0.0
    recall = 100.0 * tp / n_gt if n_gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    if mean_iou_mode == "matched":
        mean_iou = 100.0 * sum(m.iou for m in matches) / tp if tp else 0.0
    else:
        mean_iou = 100.0 * sum(m.iou for m in matches) / n_gt if n_gt else 0.0
    return InstanceMetrics(
        mean_iou=mean_iou,
        precision=precision,
        recall=recall,
        f1=f1,
        matches=matches,
        n_pred=n_pred,
        n_gt=n_gt,
    )


@dataclass
class ClassMetrics:
    iou: float
    precision: float
    recall: float


@dataclass
class SemanticMetrics:
    per_class: dict[int, ClassMetrics]
    accuracy: float

    def as_dict(self) -> dict:
        out = {"accuracy": round(self.accuracy, 3)}
        for c, m in sorted(self.per_class.items()):
            out[f"class_{c}_iou"] = round(m.iou, 3)
            out[f"class_{c}_precision"] = round(m.precision, 3)
            out[f"class_{c}_recall"] = round(m.recall, 3)
        return out


def evaluate_semantics(pred, gt) -> SemanticMetrics:
    """Confusion-matrix scores per class; classes absent from both are omitted."""
    pred = np.asarray(pred.semantic if isinstance(pred, SegmentationResult) else pred)
    gt = np.asarray(gt.semantic if isinstance(gt, SegmentationResult) else gt)
    if pred.shape != gt.shape:
        raise ValidationError("prediction and ground truth must align 1:1")
    classes = np.union1d(np.unique(pred), np.unique(gt))
    per_class = {}
    for c in classes:
        tp = int(np.count_nonzero((pred == c) & (gt == c)))
        fp = int(np.count_nonzero((pred == c) & (gt != c)))
        fn = int(np.count_nonzero((pred != c) & (gt == c)))
        denom_iou = tp + fp + fn
        per_class[int(c)] = ClassMetrics(
            iou=100.0 * tp / denom_iou if denom_iou else 0.0,
            precision=100.0 * tp / (tp + fp) if tp + fp else 0.0,
            recall=100.0 * tp / (tp + fn) if tp + fn else 0.0,
        )
    accuracy = 100.0 * np.count_nonzero(pred == gt) / len(pred) if len(pred) else 0.0
    return SemanticMetrics(per_class=per_class, accuracy=accuracy)


def aggregate_instance_metrics(
    results: list[InstanceMetrics], weights: list[float] | None = None
) -> InstanceMetrics:
    """Mean over samples; unweighted by default, optionally weighted."""
    if not results:
        return InstanceMetrics(0.0, 0.0, 0.0, 0.0)
    if weights is None:
        weights = [1.0] * len(results)
    if len(weights) != len(results):
        raise ValidationError("weights must align with results")
    total = sum(weights)

    def mean(attr):
        return sum(getattr(r, attr) * w for r, w in zip(results, weights)) / total

    return InstanceMetrics(
        mean_iou=mean("mean_iou"),
        precision=mean("precision"),
        recall=mean("recall"),
        f1=mean("f1"),
        matches=[],
        n_pred=sum(r.n_pred for r in results),
        n_gt=sum(r.n_gt for r in results),
    )
