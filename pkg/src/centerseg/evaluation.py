"""Mask IoU, average precision, and multi-threshold mAP.

Protocol: detections are ranked by descending score and greedily matched
to the unmatched ground truth of highest IoU (a match needs IoU at or
above the threshold); matching is per frame, detections are pooled
across frames per class before the precision-recall curve; AP is the
area under the curve with interpolated (monotone non-increasing)
precision; mAP averages AP over the IoU thresholds 0.50:0.05:0.95 and
over the classes present in the ground truth. Detections and ground
truths are :class:`~centerseg.instances.Instance` records (ground-truth
scores are ignored).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grids import BinaryMask, DimensionMismatch
from .instances import Instance

IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union of two masks; 0.0 when both are empty."""
    if a.dims != b.dims:
        raise DimensionMismatch(
            f"{a.dims.width}x{a.dims.height} vs {b.dims.width}x{b.dims.height}"
        )
    inter = int(np.count_nonzero(a.pixels & b.pixels))
    union = int(np.count_nonzero(a.pixels | b.pixels))
    return 0.0 if union == 0 else inter / union


def _iou_matrix(det_masks: list[BinaryMask], gt_masks: list[BinaryMask]) -> np.ndarray:
    """Pairwise mask IoU via sorted flat-index intersections."""
    det_idx = [m.flat_indices() for m in det_masks]
    gt_idx = [m.flat_indices() for m in gt_masks]
    table = np.zeros((len(det_masks), len(gt_masks)))
    for i, a in enumerate(det_idx):
        for j, b in enumerate(gt_idx):
            inter = np.intersect1d(a, b, assume_unique=True).size
            union = a.size + b.size - inter
            table[i, j] = 0.0 if union == 0 else inter / union
    return table


def _greedy_match(iou: np.ndarray, scores: np.ndarray, iou_thresh: float):
    """Greedy score-ordered matching given a detection x gt IoU matrix.

    Returns (scores_ranked, tp_flags, matches) with matches as
    (det_index, gt_index) pairs in original detection indices. Score
    ties keep the original detection order; IoU ties go to the lowest
    ground-truth index; a zero-IoU pair never matches.
    """
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    n_gt = iou.shape[1]
    taken = np.zeros(n_gt, dtype=bool)
    ranked = np.empty(len(scores))
    tp = np.zeros(len(scores), dtype=bool)
    matches = []
    for rank, di in enumerate(order):
        ranked[rank] = scores[di]
        if n_gt:
            row = np.where(taken, -1.0, iou[di])
            gi = int(np.argmax(row))
            if row[gi] > 0.0 and row[gi] >= iou_thresh:
                taken[gi] = True
                tp[rank] = True
                matches.append((di, gi))
    return ranked, tp, matches


def _match_frame(dets: list[Instance], gt_masks: list[BinaryMask], iou_thresh: float):
    """Greedy score-ordered matching within one frame."""
    iou = _iou_matrix([d.mask for d in dets], gt_masks)
    return _greedy_match(iou, np.array([d.score for d in dets]), iou_thresh)


def _ap_from_pool(scores: np.ndarray, tp: np.ndarray, n_gt: int) -> float:
    """Area under the interpolated precision-recall curve."""
    if n_gt == 0:
        return 1.0 if scores.size == 0 else 0.0
    if scores.size == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    tp_sorted = tp[order].astype(np.float64)
    cum_tp = np.cumsum(tp_sorted)
    cum_fp = np.cumsum(1.0 - tp_sorted)
    recall = cum_tp / n_gt
    precision = cum_tp / (cum_tp + cum_fp)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    steps = np.flatnonzero(mrec[1:] != mrec[:-1]) + 1
    return float(((mrec[steps] - mrec[steps - 1]) * mpre[steps]).sum())


def average_precision(
    dets: list[Instance], gts: list[BinaryMask], iou_thresh: float = 0.5
) -> float:
    """Single-pool AP of one detection list against one ground-truth list."""
    scores, tp, _ = _match_frame(dets, gts, iou_thresh)
    return _ap_from_pool(scores, tp, len(gts))


@dataclass
class APResult:
    """Per-threshold, per-class, and combined average precision."""

    per_class_threshold: dict[tuple[str, float], float]
    per_threshold: dict[float, float]
    per_class: dict[str, float]
    map: float
    # matches[(cls, thr)][frame] -> list of (det_index, gt_index) pairs
    matches: dict[tuple[str, float], list[list[tuple[int, int]]]] = field(default_factory=dict)


def map_eval(
    pred_frames: list[list[Instance]],
    gt_frames: list[list[Instance]],
    thresholds: tuple[float, ...] = IOU_THRESHOLDS,
) -> APResult:
    """Multi-frame, multi-threshold mAP.

    Frame lists must be aligned. Classes enter the average only when
    they appear in the ground truth. A fully empty evaluation (no ground
    truth anywhere) is vacuous: mAP 1.0 when there are no detections
    either, 0.0 otherwise, with a warning in both cases.
    """
    if len(pred_frames) != len(gt_frames):
        raise ValueError(f"{len(pred_frames)} prediction frames vs {len(gt_frames)} ground-truth frames")
    classes = sorted({inst.cls for frame in gt_frames for inst in frame})
    if not classes:
        n_dets = sum(len(frame) for frame in pred_frames)
        warnings.warn("no ground-truth instances; mAP is vacuous", stacklevel=2)
        value = 1.0 if n_dets == 0 else 0.0
        return APResult({}, {}, {}, value)

    per_ct: dict[tuple[str, float], float] = {}
    all_matches: dict[tuple[str, float], list[list[tuple[int, int]]]] = {}
    for cls in classes:
        cls_preds = [[d for d in frame if d.cls == cls] for frame in pred_frames]
        cls_gts = [[g.mask for g in frame if g.cls == cls] for frame in gt_frames]
        n_gt = sum(len(frame) for frame in cls_gts)
        # one IoU matrix per frame, shared across all thresholds
        tables = [
            (_iou_matrix([d.mask for d in dets], gts), np.array([d.score for d in dets]))
            for dets, gts in zip(cls_preds, cls_gts)
        ]
        for thr in thresholds:
            pooled_scores = []
            pooled_tp = []
            frame_matches = []
            for iou, scores in tables:
                ranked, tp, matches = _greedy_match(iou, scores, thr)
                pooled_scores.append(ranked)
                pooled_tp.append(tp)
                frame_matches.append(matches)
            per_ct[(cls, thr)] = _ap_from_pool(
                np.concatenate(pooled_scores), np.concatenate(pooled_tp), n_gt
            )
            all_matches[(cls, thr)] = frame_matches

    per_threshold = {
        thr: float(np.mean([per_ct[(cls, thr)] for cls in classes])) for thr in thresholds
    }
    per_class = {
        cls: float(np.mean([per_ct[(cls, thr)] for thr in thresholds])) for cls in classes
    }
    overall = float(np.mean(list(per_class.values())))
    return APResult(per_ct, per_threshold, per_class, overall, all_matches)
