"""Masked-surface computation and overlap-graph merging."""

import numpy as np

from sp3d.consolidation import (
    ConsolidationMap,
    MaskedSurface,
    build_overlap_graph,
    compute_masked_surfaces,
    consolidate,
)
from sp3d.projection import project_visible
from sp3d.masks import MaskRecord, tight_bbox


def surf(pid, pts):
    pts = np.asarray(sorted(pts), dtype=np.int64)
    return MaskedSurface(pid, pts, np.ones(pts.size, dtype=np.int32))


def naive_overlap_graph(surfaces, tau):
    """Reference: pairwise sorted-array intersections."""
    edges = []
    for i in range(len(surfaces)):
        a = surfaces[i]
        for j in range(i + 1, len(surfaces)):
            b = surfaces[j]
            if a.point_indices.size == 0 or b.point_indices.size == 0:
                continue
            inter = np.intersect1d(a.point_indices, b.point_indices, assume_unique=True).size
            if inter >= 1 and inter / min(a.point_indices.size, b.point_indices.size) >= tau:
                lo, hi = sorted((a.prompt_id, b.prompt_id))
                edges.append((lo, hi))
    return edges


def test_overlap_ratio_against_smaller_surface():
    a = surf(0, range(0, 10))
    b = surf(1, range(5, 15))  # share 5 of min(10, 10)
    assert build_overlap_graph([a, b], tau_merge=0.5) == [(0, 1)]
    assert build_overlap_graph([a, b], tau_merge=0.51) == []


def test_small_part_links_to_large_instance():
    big = surf(2, range(0, 1000))
    part = surf(5, range(0, 30))  # fully contained: ratio 1.0 despite tiny size
    assert build_overlap_graph([big, part], tau_merge=0.9) == [(2, 5)]


def test_disjoint_and_empty_surfaces_never_link():
    a = surf(0, range(0, 10))
    b = surf(1, range(20, 30))
    c = surf(2, [])
    assert build_overlap_graph([a, b, c], tau_merge=0.01) == []


def test_matches_naive_reference_on_random_surfaces():
    rng = np.random.default_rng(3)
    for _ in range(30):
        n = int(rng.integers(2, 12))
        surfaces = []
        for pid in range(n):
            size = int(rng.integers(0, 40))
            pts = rng.choice(200, size=size, replace=False)
            surfaces.append(surf(pid, pts))
        tau = float(rng.uniform(0.05, 0.9))
        assert sorted(build_overlap_graph(surfaces, tau)) == sorted(
            naive_overlap_graph(surfaces, tau))


def test_consolidate_components_take_smallest_id():
    cmap = consolidate([(1, 4), (4, 9), (2, 7)], [1, 2, 4, 7, 9, 11])
    assert cmap.root(9) == 1
    assert cmap.root(4) == 1
    assert cmap.root(7) == 2
    assert cmap.root(11) == 11
    assert cmap.roots() == {1, 2, 11}


def test_consolidation_map_roots():
    cmap = ConsolidationMap({3: 3, 8: 3, 5: 5})
    assert cmap.roots() == {3, 5}
    assert cmap.root(8) == 3


def test_masked_surfaces_match_per_point_recount(tiny_scene):
    cloud, frames, _ = tiny_scene
    frames = frames[:4]
    rng = np.random.default_rng(0)
    # synthesize a mask per frame for two fake prompts from random pixel blocks
    records = {}
    for frame in frames:
        h, w = frame.depth.height, frame.depth.width
        per_frame = {}
        for pid in (0, 1):
            m = np.zeros((h, w), dtype=bool)
            u0, v0 = int(rng.integers(0, w - 10)), int(rng.integers(0, h - 10))
            m[v0:v0 + 10, u0:u0 + 10] = True
            per_frame[pid] = MaskRecord(frame.id, pid, m, tight_bbox(m), 95.0, 90.0)
        records[frame.id] = per_frame
    surfaces = compute_masked_surfaces([0, 1], frames, records, cloud, 0.05, min_support=2)
    # reference: count per point directly
    counts = {0: np.zeros(len(cloud), dtype=int), 1: np.zeros(len(cloud), dtype=int)}
    for frame in frames:
        u, v, _, vis = project_visible(cloud.positions, frame, 0.05)
        for pid in (0, 1):
            mask = records[frame.id][pid].mask
            for i in np.flatnonzero(vis):
                if mask[v[i], u[i]]:
                    counts[pid][i] += 1
    for s in surfaces:
        np.testing.assert_array_equal(s.point_indices, np.flatnonzero(counts[s.prompt_id] >= 2))
        np.testing.assert_array_equal(s.support, counts[s.prompt_id][s.point_indices])


def test_min_support_filters_single_frame_observations(tiny_scene):
    cloud, frames, _ = tiny_scene
    frame = frames[0]
    h, w = frame.depth.height, frame.depth.width
    m = np.ones((h, w), dtype=bool)
    records = {frame.id: {0: MaskRecord(frame.id, 0, m, tight_bbox(m), 95.0, 90.0)}}
    loose = compute_masked_surfaces([0], [frame], records, cloud, 0.05, min_support=1)
    strict = compute_masked_surfaces([0], [frame], records, cloud, 0.05, min_support=2)
    assert loose[0].point_indices.size > 0
    assert strict[0].point_indices.size == 0
