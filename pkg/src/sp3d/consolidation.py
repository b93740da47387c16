"""Surface-based prompt consolidation: merge retained prompts whose 3D masked
surfaces intersect, so one pseudo-prompt covers each large instance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .masks import MaskRecord
from .projection import project_visible
from .scene_io import Frame, PointCloud
from .unionfind import UnionFind

DEFAULT_TAU_MERGE = 0.25
DEFAULT_MIN_SUPPORT = 1


@dataclass
class MaskedSurface:
    prompt_id: int
    point_indices: np.ndarray  # sorted unique indices into the cloud
    support: np.ndarray  # observation count per member, aligned with point_indices


@dataclass(frozen=True)
class ConsolidationMap:
    parent: dict[int, int]  # prompt id -> pseudo-prompt id (component root)

    def root(self, prompt_id: int) -> int:
        return self.parent[prompt_id]

    def roots(self) -> set[int]:
        return set(self.parent.values())


def compute_masked_surfaces(prompt_ids: list[int], frames: list[Frame],
                            records_by_frame: dict[int, dict[int, MaskRecord]],
                            cloud: PointCloud, tol: float,
                            min_support: int = DEFAULT_MIN_SUPPORT,
                            visibility_cache: dict | None = None) -> list[MaskedSurface]:
    """Count, per prompt, how many frames each cloud point falls inside that
    prompt's mask with a passing visibility test; keep points at or above
    min_support."""
    n = len(cloud)
    counts = {pid: np.zeros(n, dtype=np.int32) for pid in prompt_ids}
    for frame in frames:
        recs = records_by_frame.get(frame.id, {})
        wanted = [pid for pid in prompt_ids if pid in recs]
        if not wanted:
            continue
        if visibility_cache is not None and frame.id in visibility_cache:
            u, v, visible = visibility_cache[frame.id]
        else:
            u, v, _, visible = project_visible(cloud.positions, frame, tol)
            if visibility_cache is not None:
                visibility_cache[frame.id] = (u, v, visible)
        vis_idx = np.flatnonzero(visible)
        if vis_idx.size == 0:
            continue
        uu, vv = u[vis_idx], v[vis_idx]
        for pid in wanted:
            inside = recs[pid].mask[vv, uu]
            counts[pid][vis_idx[inside]] += 1
    surfaces = []
    for pid in prompt_ids:
        member = np.flatnonzero(counts[pid] >= min_support)
        surfaces.append(MaskedSurface(pid, member, counts[pid][member]))
    return surfaces


def build_overlap_graph(surfaces: list[MaskedSurface], tau_merge: float = DEFAULT_TAU_MERGE
                        ) -> list[tuple[int, int]]:
    """Edge (a, b) iff |Sa ∩ Sb| / min(|Sa|, |Sb|) >= tau_merge with at least one
    shared point. Overlap is measured against the smaller surface so a part of a
    big instance still links to its siblings."""
    occupied = [s for s in surfaces if s.point_indices.size > 0]
    if len(occupied) < 2:
        return []
    # sparse point-by-surface incidence: its gram matrix holds all intersection sizes
    from scipy import sparse

    n_points = int(max(s.point_indices.max() for s in occupied)) + 1
    indptr = np.cumsum([0] + [s.point_indices.size for s in occupied])
    indices = np.concatenate([s.point_indices for s in occupied])
    mat = sparse.csr_matrix(
        (np.ones(indices.size, dtype=np.int64), indices, indptr),
        shape=(len(occupied), n_points))
    inter = (mat @ mat.T).toarray()
    sizes = np.array([s.point_indices.size for s in occupied], dtype=np.int64)
    ids = np.array([s.prompt_id for s in occupied], dtype=np.int64)
    edges = []
    for i in range(len(occupied)):
        for j in range(i + 1, len(occupied)):
            ov = inter[i, j]
            if ov >= 1 and ov / min(sizes[i], sizes[j]) >= tau_merge:
                a, b = ids[i], ids[j]
                edges.append((int(a), int(b)) if a < b else (int(b), int(a)))
    return edges


def consolidate(edges: list[tuple[int, int]], retained_ids) -> ConsolidationMap:
    """Union-find over the overlap graph; each pseudo-prompt id is the smallest
    prompt id of its component."""
    uf = UnionFind(sorted(retained_ids))
    for a, b in edges:
        uf.union(a, b)
    return ConsolidationMap(uf.roots())
