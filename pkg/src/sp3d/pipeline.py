"""End-to-end orchestration: propose -> project -> masks -> select ->
consolidate -> vote -> fill -> save, with per-stage timing and a run manifest."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import consolidation as cons
from .errors import ConfigError
from .masks import FileMaskProvider, NoiseSpec, OracleMaskProvider
from .projection import PixelProjection, project_visible
from .sampling import farthest_point_sample, prompt_ratio_to_count
from .scene_io import UNLABELED, load_frame_manifest, load_labels, load_point_cloud, save_segmentation
from .segmentation import (
    DEFAULT_K_NEIGHBORS,
    SegmentationResult,
    VoteTable,
    assign_frame_votes,
    fill_unlabeled,
    finalize_votes,
)
from .selection import PromptStateTable, SelectionConfig, accumulate, finalize, per_frame_select

log = logging.getLogger(__name__)

PROVIDERS = ("oracle", "oracle-noisy", "file")


@dataclass(frozen=True)
class PipelineConfig:
    prompt_ratio: float = 0.01
    fps_seed: int = 0
    occlusion_tol: float = 0.05
    frame_stride: int = 1
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    selection_enabled: bool = True
    consolidation_enabled: bool = True
    tau_merge: float = cons.DEFAULT_TAU_MERGE
    min_support: int = cons.DEFAULT_MIN_SUPPORT
    k_neighbors: int = DEFAULT_K_NEIGHBORS
    provider: str = "oracle"
    provider_dir: str | None = None  # archive dir for the file provider
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    depth_scale: float = 1000.0
    threads: int = 1
    export_prompts: bool = False

    def __post_init__(self):
        if not (0 < self.prompt_ratio <= 1):
            raise ConfigError("prompt_ratio must be in (0, 1]")
        if self.occlusion_tol <= 0:
            raise ConfigError("occlusion_tol must be positive")
        if self.frame_stride < 1:
            raise ConfigError("frame_stride must be >= 1")
        if not (0 < self.tau_merge <= 1):
            raise ConfigError("tau_merge must be in (0, 1]")
        if self.min_support < 1:
            raise ConfigError("min_support must be >= 1")
        if self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be >= 1")
        if self.provider not in PROVIDERS:
            raise ConfigError(f"provider must be one of {PROVIDERS}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


def _make_provider(cfg: PipelineConfig, scene_dir):
    if cfg.provider == "file":
        return FileMaskProvider(cfg.provider_dir or scene_dir)
    noise = cfg.noise if cfg.provider == "oracle-noisy" else NoiseSpec()
    return OracleMaskProvider(scene_dir, noise)


def run_pipeline(cfg: PipelineConfig, scene_dir, out_dir) -> tuple[SegmentationResult, dict]:
    scene_dir = Path(scene_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    t_start = time.perf_counter()

    def clock(name, t0):
        timings[name] = timings.get(name, 0.0) + (time.perf_counter() - t0)

    t0 = time.perf_counter()
    cloud = load_point_cloud(scene_dir / "cloud.ply")
    frames = load_frame_manifest(scene_dir, cfg.frame_stride, cfg.depth_scale)
    gt_path = scene_dir / "gt.labels.bin"
    gt = load_labels(gt_path) if gt_path.exists() else None
    clock("load", t0)

    # prompt proposal
    t0 = time.perf_counter()
    m = prompt_ratio_to_count(len(cloud), cfg.prompt_ratio)
    prompts = farthest_point_sample(cloud, m, cfg.fps_seed)
    coverage_missing: list[int] = []
    if gt is not None:
        covered = set(gt[prompts.prompt_indices].tolist())
        for iid in np.unique(gt):
            if iid != UNLABELED and int(iid) not in covered:
                coverage_missing.append(int(iid))
        if coverage_missing:
            log.warning("prompt coverage: %d ground-truth instances received no prompt: %s",
                        len(coverage_missing), coverage_missing)
    clock("propose", t0)

    # projection + mask acquisition, frame-parallel with ordered merge
    t0 = time.perf_counter()
    provider = _make_provider(cfg, scene_dir)
    prompt_pos = cloud.positions[prompts.prompt_indices]
    visibility: dict[int, tuple] = {}
    records_by_frame: dict[int, dict] = {}

    def frame_masks(frame):
        u, v, z, vis = project_visible(prompt_pos, frame, cfg.occlusion_tol)
        projs = [
            PixelProjection(frame.id, pid, int(u[pid]), int(v[pid]), float(z[pid]), True)
            for pid in np.flatnonzero(vis)
        ]
        recs = provider.predict_masks(frame, projs)
        return frame.id, {r.prompt_id: r for r in recs}

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        for fid, recs in pool.map(frame_masks, frames):
            records_by_frame[fid] = recs
    if cfg.export_prompts:
        _export_prompts(out_dir, frames, prompt_pos, cfg.occlusion_tol)
    clock("masks", t0)

    # view-guided selection; masks cut by per-frame examination leave the pool,
    # so consolidation and voting only ever see masks that passed it
    t0 = time.perf_counter()
    states = PromptStateTable(m)
    selected_by_frame: dict[int, set] = {}
    for frame in frames:
        recs = records_by_frame[frame.id]
        valid = set(recs)
        if cfg.selection_enabled:
            selected = per_frame_select(list(recs.values()), cfg.selection)
        else:
            selected = set(valid)
        selected_by_frame[frame.id] = selected
        scores = {pid: recs[pid].predicted_iou for pid in selected}
        accumulate(states, valid, selected, scores)
    if cfg.selection_enabled:
        retained = finalize(states, cfg.selection)
    else:
        retained = set(np.flatnonzero(states.c > 0).tolist())
    kept_by_frame = {
        fid: {pid: rec for pid, rec in records_by_frame[fid].items()
              if pid in retained and pid in selected_by_frame[fid]}
        for fid in records_by_frame
    }
    clock("select", t0)

    # whole-cloud visibility, reused by consolidation and voting
    t0 = time.perf_counter()
    def frame_visibility(frame):
        u, v, _, vis = project_visible(cloud.positions, frame, cfg.occlusion_tol)
        return frame.id, (u, v, vis)

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        for fid, entry in pool.map(frame_visibility, frames):
            visibility[fid] = entry
    clock("project", t0)

    # surface-based consolidation
    t0 = time.perf_counter()
    retained_sorted = sorted(retained)
    if cfg.consolidation_enabled:
        surfaces = cons.compute_masked_surfaces(
            retained_sorted, frames, kept_by_frame, cloud,
            cfg.occlusion_tol, cfg.min_support, visibility_cache=visibility)
        edges = cons.build_overlap_graph(surfaces, cfg.tau_merge)
        cmap = cons.consolidate(edges, retained_sorted)
    else:
        cmap = cons.ConsolidationMap({pid: pid for pid in retained_sorted})
    clock("consolidate", t0)

    # cross-frame voting + fill
    t0 = time.perf_counter()
    votes = VoteTable()

    def frame_votes(frame):
        recs = kept_by_frame[frame.id]
        return frame.id, assign_frame_votes(cloud, frame, recs, cmap, cfg.occlusion_tol,
                                            visibility=visibility[frame.id])

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        results = dict(pool.map(frame_votes, frames))
    for frame in frames:
        pts, ids = results[frame.id]
        votes.add_frame(pts, ids)
    result = finalize_votes(votes, len(cloud))
    unlabeled_before_fill = int(np.count_nonzero(result.labels == UNLABELED))
    if unlabeled_before_fill and unlabeled_before_fill < len(cloud):
        result = fill_unlabeled(result, cloud, cfg.k_neighbors)
    clock("segment", t0)

    # outputs
    t0 = time.perf_counter()
    save_segmentation(result.labels, cloud, out_dir / "labels.bin", out_dir / "segmentation.ply")
    (out_dir / "consolidation.json").write_text(json.dumps({
        "tau_merge": cfg.tau_merge,
        "min_support": cfg.min_support,
        "parent": {str(k): int(v) for k, v in sorted(cmap.parent.items())},
    }, indent=2))
    clock("save", t0)

    total = time.perf_counter() - t_start
    timings["other"] = total - sum(timings.values())
    manifest = {
        "config": cfg.to_dict(),
        "scene_dir": str(scene_dir),
        "points": len(cloud),
        "frames": [f.id for f in frames],
        "prompt_count": m,
        "prompt_indices": prompts.prompt_indices.tolist(),
        "retained": retained_sorted,
        "instance_scores": {str(k): v for k, v in sorted(result.scores.items())},
        "pseudo_prompts": sorted(cmap.roots()),
        "coverage_missing": coverage_missing,
        "dropped_records": provider.dropped_records,
        "unlabeled_before_fill": unlabeled_before_fill,
        "timings": timings,
        "total_seconds": total,
    }
    (out_dir / "run.json").write_text(json.dumps(manifest, indent=2))
    return result, manifest


def _export_prompts(out_dir: Path, frames, prompt_pos, tol) -> None:
    pdir = out_dir / "prompts"
    pdir.mkdir(exist_ok=True)
    for frame in frames:
        u, v, _, vis = project_visible(prompt_pos, frame, tol)
        ids = np.flatnonzero(vis)
        payload = {
            "frame_id": frame.id,
            "width": frame.intrinsics.width,
            "height": frame.intrinsics.height,
            "prompts": [
                {"id": int(pid), "u": int(u[pid]), "v": int(v[pid])} for pid in ids
            ],
        }
        (pdir / f"{frame.id}.prompts.json").write_text(json.dumps(payload, indent=2))


def run_ablation(base_cfg: PipelineConfig, scene_dir, grid: list[dict], out_dir) -> list[dict]:
    """One pipeline run per grid point, each evaluated against the scene GT.
    Errors are recorded per cell without aborting the sweep."""
    from .evaluation import GroundTruth, evaluate, predictions_from_labels

    scene_dir = Path(scene_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gt = GroundTruth(load_labels(scene_dir / "gt.labels.bin"))
    rows = []
    for i, overrides in enumerate(grid):
        tag = overrides.get("tag", "+".join(f"{k}={v}" for k, v in overrides.items()))
        params = {k: v for k, v in overrides.items() if k != "tag"}
        row = {"tag": tag, "params": params}
        try:
            sel_fields = {k: v for k, v in params.items()
                          if k in SelectionConfig.__dataclass_fields__}
            top_fields = {k: v for k, v in params.items()
                          if k in PipelineConfig.__dataclass_fields__}
            cfg = replace(base_cfg, **top_fields)
            if sel_fields:
                cfg = replace(cfg, selection=replace(cfg.selection, **sel_fields))
            result, manifest = run_pipeline(cfg, scene_dir, out_dir / f"run_{i:03d}")
            preds = predictions_from_labels(result.labels, result.scores)
            report = evaluate(preds, gt)
            row.update(ap=report.ap, ap50=report.ap50, ap25=report.ap25,
                       per_size=report.per_size, retained=len(manifest["retained"]),
                       pseudo_prompts=len(manifest["pseudo_prompts"]))
        except Exception as e:  # keep sweeping, record the failure
            row["error"] = f"{type(e).__name__}: {e}"
        rows.append(row)
    return rows
