"""View-guided prompt selection: per-frame mask examination, cross-frame
accumulation of (s, c) counters, and retention thresholding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SelectionNotSubset
from .masks import MaskRecord
from .unionfind import UnionFind

VARIANTS = ("threshold", "soft", "topk")


@dataclass(frozen=True)
class SelectionConfig:
    theta_retain: float = 0.5
    nms_box_iou: float = 80.0
    min_predicted_iou: float = 70.0
    min_stability: float = 60.0
    overlap_dedup_iou: float = 0.8
    variant: str = "threshold"
    k: int = 0  # topk only

    def __post_init__(self):
        if not (0 <= self.theta_retain <= 1):
            raise ConfigError("theta_retain must be in [0,1]")
        for name in ("nms_box_iou", "min_predicted_iou", "min_stability"):
            v = getattr(self, name)
            if not (0 <= v <= 100):
                raise ConfigError(f"{name} must be in [0,100]")
        if not (0 <= self.overlap_dedup_iou <= 1):
            raise ConfigError("overlap_dedup_iou must be in [0,1]")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if self.variant == "topk" and self.k < 1:
            raise ConfigError("topk variant needs k >= 1")


@dataclass
class PromptStateTable:
    m: int
    s: np.ndarray = field(init=False)
    c: np.ndarray = field(init=False)
    soft_sum: np.ndarray = field(init=False)

    def __post_init__(self):
        self.s = np.zeros(self.m, dtype=np.int64)
        self.c = np.zeros(self.m, dtype=np.int64)
        self.soft_sum = np.zeros(self.m, dtype=np.float64)


def _box_iou_matrix(boxes: np.ndarray) -> np.ndarray:
    # boxes: (n, 4) inclusive (u0, v0, u1, v1)
    w = (boxes[:, 2] - boxes[:, 0] + 1).astype(np.float64)
    h = (boxes[:, 3] - boxes[:, 1] + 1).astype(np.float64)
    area = w * h
    u0 = np.maximum(boxes[:, None, 0], boxes[None, :, 0])
    v0 = np.maximum(boxes[:, None, 1], boxes[None, :, 1])
    u1 = np.minimum(boxes[:, None, 2], boxes[None, :, 2])
    v1 = np.minimum(boxes[:, None, 3], boxes[None, :, 3])
    iw = np.clip(u1 - u0 + 1, 0, None).astype(np.float64)
    ih = np.clip(v1 - v0 + 1, 0, None).astype(np.float64)
    inter = iw * ih
    return inter / (area[:, None] + area[None, :] - inter)


def per_frame_select(records: list[MaskRecord], cfg: SelectionConfig) -> set[int]:
    """One frame's examination: quality gate, greedy box NMS, then pixel-overlap
    dedup keeping the highest-confidence member of each overlap group.

    Deterministic and invariant to input order: all ties break by smaller
    prompt id.
    """
    recs = [r for r in records
            if r.predicted_iou >= cfg.min_predicted_iou and r.stability >= cfg.min_stability]
    if not recs:
        return set()
    recs.sort(key=lambda r: (-r.predicted_iou, r.prompt_id))

    boxes = np.array([r.bbox for r in recs], dtype=np.int64)
    iou = _box_iou_matrix(boxes)
    thr = cfg.nms_box_iou / 100.0
    keep: list[int] = []
    suppressed = np.zeros(len(recs), dtype=bool)
    for i in range(len(recs)):
        if suppressed[i]:
            continue
        keep.append(i)
        suppressed |= iou[i] >= thr
        suppressed[i] = True

    survivors = [recs[i] for i in keep]
    uf = UnionFind(r.prompt_id for r in survivors)
    flat = {r.prompt_id: r.mask.ravel() for r in survivors}
    areas = {pid: int(m.sum()) for pid, m in flat.items()}
    boxes_s = np.array([r.bbox for r in survivors], dtype=np.int64)
    for i in range(len(survivors)):
        bi = boxes_s[i]
        for j in range(i + 1, len(survivors)):
            bj = boxes_s[j]
            if bi[2] < bj[0] or bj[2] < bi[0] or bi[3] < bj[1] or bj[3] < bi[1]:
                continue  # disjoint boxes cannot overlap in pixels
            a, b = survivors[i].prompt_id, survivors[j].prompt_id
            inter = int(np.count_nonzero(flat[a] & flat[b]))
            union = areas[a] + areas[b] - inter
            if union > 0 and inter / union >= cfg.overlap_dedup_iou:
                uf.union(a, b)

    best: dict[int, MaskRecord] = {}
    for r in survivors:
        root = uf.find(r.prompt_id)
        cur = best.get(root)
        if cur is None or (-r.predicted_iou, r.prompt_id) < (-cur.predicted_iou, cur.prompt_id):
            best[root] = r
    return {r.prompt_id for r in best.values()}


def accumulate(states: PromptStateTable, frame_valid: set[int], frame_selected: set[int],
               frame_scores: dict[int, float] | None = None) -> None:
    """Fold one frame into the counters: c for every valid prompt, s for every
    selected one. frame_scores (prompt id -> predicted_iou) feeds soft voting."""
    if not frame_selected <= frame_valid:
        raise SelectionNotSubset("selected prompts must be a subset of valid prompts")
    for pid in frame_valid:
        states.c[pid] += 1
    for pid in frame_selected:
        states.s[pid] += 1
        if frame_scores is not None:
            states.soft_sum[pid] += frame_scores[pid] / 100.0


def finalize(states: PromptStateTable, cfg: SelectionConfig) -> set[int]:
    """Retention decision. Prompts never observed (c = 0) carry no evidence and
    are discarded."""
    c = states.c
    observed = c > 0
    if cfg.variant == "threshold":
        keep = observed & (states.s > cfg.theta_retain * c)
        return set(np.flatnonzero(keep).tolist())
    if cfg.variant == "soft":
        keep = observed & (states.soft_sum > cfg.theta_retain * c)
        return set(np.flatnonzero(keep).tolist())
    # topk: highest s, ties by smaller id
    ids = np.flatnonzero(observed)
    order = sorted(ids.tolist(), key=lambda i: (-int(states.s[i]), i))
    return set(order[: cfg.k])
