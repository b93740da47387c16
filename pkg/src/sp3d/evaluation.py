"""Class-agnostic instance-segmentation average precision with grouped and
per-size breakdowns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scene_io import UNLABELED

SIZE_CLASSES = {"tiny": (0, 1000), "small": (1000, 2000), "normal": (2000, None)}
STRICT_THRESHOLDS = [0.5 + 0.05 * i for i in range(10)]  # 0.50 .. 0.95
DEFAULT_CONTAINMENT = 0.8


@dataclass(frozen=True)
class Prediction:
    points: np.ndarray  # sorted unique cloud indices
    score: float
    label: int = -1


@dataclass(frozen=True)
class GroundTruth:
    labels: np.ndarray  # (N,) uint32, UNLABELED marks unannotated (ignored) points

    @property
    def ignore(self) -> np.ndarray:
        return self.labels == UNLABELED

    def instances(self) -> dict[int, np.ndarray]:
        out = {}
        for iid in np.unique(self.labels):
            if iid != UNLABELED:
                out[int(iid)] = np.flatnonzero(self.labels == iid)
        return out


@dataclass
class EvalReport:
    ap: float
    ap50: float
    ap25: float
    per_size: dict[str, float]
    matches: list = field(default_factory=list)  # (pred label, gt id, iou) at 0.5

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "ap25": self.ap25,
            "per_size": dict(self.per_size),
            "matches": [
                {"pred": int(p), "gt": int(g), "iou": float(i)} for p, g, i in self.matches
            ],
        }


def predictions_from_labels(labels: np.ndarray, scores: dict[int, float] | None = None
                            ) -> list[Prediction]:
    preds = []
    for iid in np.unique(labels):
        if iid == UNLABELED:
            continue
        pts = np.flatnonzero(labels == iid)
        score = scores.get(int(iid), 1.0) if scores else 1.0
        preds.append(Prediction(pts, float(score), int(iid)))
    return preds


def instance_iou(pred_points: np.ndarray, gt_points: np.ndarray,
                 ignore: np.ndarray | None = None) -> float:
    p = np.asarray(pred_points)
    if ignore is not None:
        p = p[~ignore[p]]
    inter = np.intersect1d(p, gt_points, assume_unique=True).size
    union = p.size + np.asarray(gt_points).size - inter
    return inter / union if union else 0.0


def _greedy_match(preds: list[Prediction], gt_sets: list[np.ndarray],
                  ignore: np.ndarray, iou_threshold: float):
    """Match predictions (descending score, stable) to their best-IoU unmatched
    GT. Returns per-prediction (matched gt index or -1, iou)."""
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, i))
    matched_gt = np.zeros(len(gt_sets), dtype=bool)
    assignment = [(-1, 0.0)] * len(preds)
    for pi in order:
        best_j, best_iou = -1, -1.0
        for j, g in enumerate(gt_sets):
            if matched_gt[j]:
                continue
            iou = instance_iou(preds[pi].points, g, ignore)
            if iou > best_iou:
                best_j, best_iou = j, iou
        if best_j >= 0 and best_iou >= iou_threshold:
            matched_gt[best_j] = True
            assignment[pi] = (best_j, best_iou)
        else:
            assignment[pi] = (-1, max(best_iou, 0.0))
    return assignment, order


def _ap_from_flags(flags: list[bool], n_gt: int) -> float:
    """All-point-interpolated AP from a score-ordered TP/FP sequence."""
    if n_gt == 0:
        return 1.0 if not flags else 0.0
    if not flags:
        return 0.0
    tp = np.cumsum(flags)
    fp = np.cumsum([not f for f in flags])
    recall = tp / n_gt
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = 0.0
    ap = 0.0
    for r, p in zip(recall, envelope):
        ap += (r - prev_r) * p
        prev_r = r
    return float(ap)


def average_precision(preds: list[Prediction], gts: GroundTruth,
                      iou_threshold: float) -> float:
    ignore = gts.ignore
    gt_sets = list(gts.instances().values())
    usable = [p for p in preds if np.count_nonzero(~ignore[p.points])]
    assignment, order = _greedy_match(usable, gt_sets, ignore, iou_threshold)
    flags = [assignment[pi][0] >= 0 for pi in order]
    return _ap_from_flags(flags, len(gt_sets))


def _size_class_ap(preds: list[Prediction], gts: GroundTruth, lo: int, hi: int | None,
                   iou_threshold: float = 0.5) -> float:
    ignore = gts.ignore
    gt_items = list(gts.instances().items())
    gt_sets = [g for _, g in gt_items]
    in_class = [lo <= g.size and (hi is None or g.size < hi) for g in gt_sets]
    usable = [p for p in preds if np.count_nonzero(~ignore[p.points])]
    assignment, order = _greedy_match(usable, gt_sets, ignore, iou_threshold)
    flags = []
    for pi in order:
        j, _ = assignment[pi]
        if j >= 0:
            if in_class[j]:
                flags.append(True)
            # matched an out-of-class GT: ignored for this class
        else:
            sz = usable[pi].points.size
            if lo <= sz and (hi is None or sz < hi):
                flags.append(False)
            # out-of-range unmatched predictions are ignored too
    return _ap_from_flags(flags, sum(in_class))


def group_predictions(preds: list[Prediction], gts: GroundTruth,
                      containment: float = DEFAULT_CONTAINMENT) -> list[Prediction]:
    """Union all predictions mostly (> containment) inside one GT instance into a
    single prediction carrying the best member score."""
    ignore = gts.ignore
    grouped: dict[int, list[Prediction]] = {}
    passthrough: list[Prediction] = []
    for p in preds:
        pts = p.points[~ignore[p.points]]
        target = None
        if pts.size:
            for gid, g in gts.instances().items():
                inside = np.intersect1d(pts, g, assume_unique=True).size
                if inside / pts.size > containment:
                    target = gid
                    break
        if target is None:
            passthrough.append(p)
        else:
            grouped.setdefault(target, []).append(p)
    out = list(passthrough)
    for gid in sorted(grouped):
        members = grouped[gid]
        pts = np.unique(np.concatenate([m.points for m in members]))
        out.append(Prediction(pts, max(m.score for m in members),
                              min(m.label for m in members)))
    return out


def evaluate(preds: list[Prediction], gts: GroundTruth,
             grouped: bool = False, containment: float = DEFAULT_CONTAINMENT) -> EvalReport:
    if grouped:
        preds = group_predictions(preds, gts, containment)
    ap = float(np.mean([average_precision(preds, gts, t) for t in STRICT_THRESHOLDS]))
    ap50 = average_precision(preds, gts, 0.5)
    ap25 = average_precision(preds, gts, 0.25)
    per_size = {
        name: _size_class_ap(preds, gts, lo, hi)
        for name, (lo, hi) in SIZE_CLASSES.items()
    }
    # matched pairs at IoU 0.5 for inspection
    ignore = gts.ignore
    gt_items = list(gts.instances().items())
    usable = [p for p in preds if np.count_nonzero(~ignore[p.points])]
    assignment, _ = _greedy_match(usable, [g for _, g in gt_items], ignore, 0.5)
    matches = [
        (usable[pi].label, gt_items[j][0], iou)
        for pi, (j, iou) in enumerate(assignment) if j >= 0
    ]
    return EvalReport(ap, ap50, ap25, per_size, matches)
