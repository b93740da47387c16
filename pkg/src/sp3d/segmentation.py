"""Cross-frame voting over all scene points and nearest-neighbor fill of the
points no mask ever covered."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .consolidation import ConsolidationMap
from .errors import AllUnlabeled
from .masks import MaskRecord
from .projection import project_visible
from .scene_io import Frame, PointCloud, UNLABELED

DEFAULT_K_NEIGHBORS = 16


@dataclass
class VoteTable:
    """Sparse per-point vote tallies, accumulated as flat (point, id) pairs."""
    points: list = field(default_factory=list)
    ids: list = field(default_factory=list)

    def add_frame(self, point_indices: np.ndarray, pseudo_ids: np.ndarray) -> None:
        self.points.append(np.asarray(point_indices, dtype=np.int64))
        self.ids.append(np.asarray(pseudo_ids, dtype=np.int64))


@dataclass
class SegmentationResult:
    labels: np.ndarray  # (N,) uint32, UNLABELED where no vote
    scores: dict[int, float]  # instance id -> mean winning-vote ratio


def assign_frame_votes(cloud: PointCloud, frame: Frame,
                       records: dict[int, MaskRecord],
                       consolidation: ConsolidationMap, tol: float,
                       visibility: tuple | None = None):
    """One frame's vote pass.

    A visible point inside exactly one pseudo-prompt's mask union votes for
    that id; inside several, the covering record with the highest predicted
    IoU wins (ties to the smaller pseudo id); otherwise no vote. Returns
    (point_indices, pseudo_ids).
    """
    h, w = frame.depth.height, frame.depth.width
    best_iou = np.full((h, w), -1.0, dtype=np.float64)
    best_id = np.full((h, w), np.iinfo(np.int64).max, dtype=np.int64)
    for pid, rec in sorted(records.items()):
        if pid not in consolidation.parent:
            continue
        root = consolidation.root(pid)
        m = rec.mask
        upd = m & ((rec.predicted_iou > best_iou)
                   | ((rec.predicted_iou == best_iou) & (root < best_id)))
        best_iou[upd] = rec.predicted_iou
        best_id[upd] = root
    if visibility is not None:
        u, v, visible = visibility
    else:
        u, v, _, visible = project_visible(cloud.positions, frame, tol)
    vis_idx = np.flatnonzero(visible)
    assigned = best_iou[v[vis_idx], u[vis_idx]] >= 0
    vis_idx = vis_idx[assigned]
    return vis_idx, best_id[v[vis_idx], u[vis_idx]]


def finalize_votes(votes: VoteTable, n_points: int) -> SegmentationResult:
    """Majority vote per point (ties to the smaller pseudo id); per-instance
    score is the mean winning-vote ratio over its member points."""
    labels = np.full(n_points, UNLABELED, dtype=np.uint32)
    if not votes.points or sum(p.size for p in votes.points) == 0:
        return SegmentationResult(labels, {})
    pts = np.concatenate(votes.points)
    ids = np.concatenate(votes.ids)
    key = pts * (ids.max() + 1) + ids
    uniq, counts = np.unique(key, return_counts=True)
    upts = uniq // (ids.max() + 1)
    uids = uniq % (ids.max() + 1)
    # order by (point, -count, id): the first row per point is its winner
    order = np.lexsort((uids, -counts, upts))
    upts, uids, counts = upts[order], uids[order], counts[order]
    first = np.ones(upts.size, dtype=bool)
    first[1:] = upts[1:] != upts[:-1]
    totals = np.zeros(n_points, dtype=np.int64)
    np.add.at(totals, upts, counts)
    win_pts = upts[first]
    win_ids = uids[first]
    win_counts = counts[first]
    labels[win_pts] = win_ids.astype(np.uint32)
    ratio = win_counts / totals[win_pts]
    scores: dict[int, float] = {}
    for iid in np.unique(win_ids):
        scores[int(iid)] = float(ratio[win_ids == iid].mean())
    return SegmentationResult(labels, scores)


def fill_unlabeled(result: SegmentationResult, cloud: PointCloud,
                   k_neighbors: int = DEFAULT_K_NEIGHBORS) -> SegmentationResult:
    """Give every unlabeled point the majority label of its k nearest labeled
    points (ties to the smaller id)."""
    labels = result.labels.copy()
    unl = np.flatnonzero(labels == UNLABELED)
    if unl.size == 0:
        return SegmentationResult(labels, dict(result.scores))
    lab = np.flatnonzero(labels != UNLABELED)
    if lab.size == 0:
        raise AllUnlabeled("cannot fill: no labeled point exists")
    tree = cKDTree(cloud.positions[lab])
    k = min(k_neighbors, lab.size)
    _, nn = tree.query(cloud.positions[unl], k=k)
    nn = np.atleast_2d(nn.reshape(unl.size, k))
    neigh_labels = labels[lab[nn]]
    for row, pt in enumerate(unl):
        vals, counts = np.unique(neigh_labels[row], return_counts=True)
        labels[pt] = vals[np.argmax(counts)]  # unique sorts ascending: ties -> smaller id
    return SegmentationResult(labels, dict(result.scores))
