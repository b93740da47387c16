"""Mask providers and the on-disk mask archive format.

A provider returns, per frame and per visible pixel prompt, at most one
MaskRecord. Implementations: a file-backed archive reader and a synthetic
oracle driven by rendered instance-id rasters (optionally noise-perturbed).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import IoError, ProviderUnavailable, RleOverrun
from .projection import PixelProjection
from .rle import rle_decode, rle_encode
from .scene_io import Frame

ARCHIVE_MAGIC = b"SPMK"
ARCHIVE_VERSION = 1
INSTANCE_MAGIC = b"SPID"
BACKGROUND = 0xFFFFFFFF


@dataclass
class MaskRecord:
    frame_id: int
    prompt_id: int
    mask: np.ndarray  # (height, width) bool
    bbox: tuple[int, int, int, int]  # u_min, v_min, u_max, v_max inclusive
    predicted_iou: float  # 0..100
    stability: float  # 0..100


def tight_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    vs, us = np.nonzero(mask)
    if vs.size == 0:
        raise ValueError("empty mask has no bbox")
    return int(us.min()), int(vs.min()), int(us.max()), int(vs.max())


# ---------------------------------------------------------------------------
# instance-id rasters (synthetic datasets only)


def save_instance_raster(ids: np.ndarray, path) -> None:
    ids = np.asarray(ids, dtype=np.uint32)
    h, w = ids.shape
    try:
        with open(path, "wb") as f:
            f.write(INSTANCE_MAGIC)
            f.write(struct.pack("<HH", w, h))
            f.write(ids.astype("<u4").tobytes())
    except OSError as e:
        raise IoError(str(e))


def load_instance_raster(path) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            if f.read(4) != INSTANCE_MAGIC:
                raise IoError(f"bad instance raster magic in {path}")
            w, h = struct.unpack("<HH", f.read(4))
            data = np.frombuffer(f.read(4 * w * h), dtype="<u4")
            if data.size != w * h:
                raise IoError(f"truncated instance raster {path}")
            return data.reshape(h, w).astype(np.uint32)
    except OSError as e:
        raise IoError(str(e))


# ---------------------------------------------------------------------------
# mask archives


def write_archive_file(records: list[MaskRecord], width: int, height: int, path) -> None:
    try:
        with open(path, "wb") as f:
            f.write(ARCHIVE_MAGIC)
            f.write(struct.pack("<IHHI", ARCHIVE_VERSION, width, height, len(records)))
            for rec in records:
                runs = rle_encode(rec.mask)
                f.write(struct.pack("<I4HffI", rec.prompt_id, *rec.bbox,
                                    rec.predicted_iou, rec.stability, runs.size))
                f.write(runs.astype("<u4").tobytes())
    except OSError as e:
        raise IoError(str(e))


def read_archive_file(path, frame_id: int) -> list[MaskRecord]:
    try:
        with open(path, "rb") as f:
            if f.read(4) != ARCHIVE_MAGIC:
                raise IoError(f"bad archive magic in {path}")
            version, width, height, count = struct.unpack("<IHHI", f.read(12))
            if version != ARCHIVE_VERSION:
                raise IoError(f"unsupported archive version {version}")
            records = []
            for _ in range(count):
                prompt_id, u0, v0, u1, v1, piou, stab, nruns = struct.unpack(
                    "<I4HffI", f.read(24))
                runs = np.frombuffer(f.read(4 * nruns), dtype="<u4")
                if runs.size != nruns:
                    raise IoError(f"truncated archive {path}")
                mask = rle_decode(runs, width, height)
                records.append(MaskRecord(frame_id, int(prompt_id), mask,
                                          (u0, v0, u1, v1), float(piou), float(stab)))
            return records
    except OSError as e:
        raise IoError(str(e))


def write_mask_archive(records_by_frame: dict[int, list[MaskRecord]],
                       width: int, height: int, prompt_count: int,
                       provider: str, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for fid, recs in sorted(records_by_frame.items()):
        write_archive_file(sorted(recs, key=lambda r: r.prompt_id),
                           width, height, out_dir / f"{fid}.masks.bin")
    manifest = {
        "width": width,
        "height": height,
        "prompt_count": prompt_count,
        "provider": provider,
        "frames": sorted(records_by_frame),
    }
    (out_dir / "masks.json").write_text(json.dumps(manifest, indent=2))


# ---------------------------------------------------------------------------
# providers


class FileMaskProvider:
    """Reads per-frame mask archives written by any conforming producer."""

    def __init__(self, archive_dir):
        self.dir = Path(archive_dir)
        manifest_path = self.dir / "masks.json"
        if not manifest_path.exists():
            raise ProviderUnavailable(f"no masks.json in {self.dir}")
        self.manifest = json.loads(manifest_path.read_text())
        self.dropped_records = 0
        self._cache: dict[int, dict[int, MaskRecord]] = {}

    def _frame_records(self, frame_id: int) -> dict[int, MaskRecord]:
        if frame_id not in self._cache:
            path = self.dir / f"{frame_id}.masks.bin"
            if not path.exists():
                raise ProviderUnavailable(f"missing archive for frame {frame_id}")
            self._cache[frame_id] = {r.prompt_id: r for r in read_archive_file(path, frame_id)}
        return self._cache[frame_id]

    def predict_masks(self, frame: Frame, prompts: list[PixelProjection]) -> list[MaskRecord]:
        by_id = self._frame_records(frame.id)
        out = []
        for proj in prompts:
            rec = by_id.get(proj.point_index)
            if rec is None:
                continue
            if not rec.mask[proj.v, proj.u]:
                self.dropped_records += 1  # provider contract: mask must contain its prompt
                continue
            out.append(rec)
        return out


SPILL_SCORE_PENALTY = 45.0


@dataclass(frozen=True)
class NoiseSpec:
    """Perturbations applied to oracle masks to emulate an imperfect segmenter."""
    morph_radius: int = 0
    conf_jitter: float = 0.0  # uniform in +/- jitter, applied to both scores
    p_spill: float = 0.0  # chance a mask spills onto one adjacent instance
    seed: int = 0

    @property
    def active(self) -> bool:
        return self.morph_radius > 0 or self.conf_jitter > 0 or self.p_spill > 0


@dataclass
class _FrameOracle:
    raster: np.ndarray
    masks: dict = field(default_factory=dict)  # true_id -> bool raster
    variants: dict = field(default_factory=dict)  # (true, spill, op) -> (mask, bbox)
    neighbors: dict = field(default_factory=dict)  # true_id -> sorted adjacent ids
    bboxes: dict = field(default_factory=dict)


class OracleMaskProvider:
    """Perfect masks from rendered instance-id rasters, optionally noise-perturbed.

    The confidence jitter is keyed per prompt (one draw reused for all of that
    prompt's records) so that relative mask quality is a property of the prompt,
    as it is for a real segmenter; iid per-record jitter would make the per-frame
    dedup winner rotate uniformly among same-instance prompts and starve every
    prompt's selection ratio.
    """

    def __init__(self, scene_dir, noise: NoiseSpec | None = None):
        self.dir = Path(scene_dir)
        self.noise = noise if noise is not None else NoiseSpec()
        self.dropped_records = 0
        self._frames: dict[int, _FrameOracle] = {}
        self._prompt_jitter: dict[int, tuple[float, float]] = {}

    def _frame_oracle(self, frame_id: int) -> _FrameOracle:
        fo = self._frames.get(frame_id)
        if fo is None:
            path = self.dir / f"{frame_id}.inst.bin"
            if not path.exists():
                raise ProviderUnavailable(f"no instance raster for frame {frame_id}")
            fo = _FrameOracle(load_instance_raster(path))
            self._frames[frame_id] = fo
        return fo

    def _base_mask(self, fo: _FrameOracle, true_id: int) -> np.ndarray:
        m = fo.masks.get(true_id)
        if m is None:
            m = fo.raster == true_id
            fo.masks[true_id] = m
        return m

    def _neighbor_ids(self, fo: _FrameOracle, true_id: int) -> list[int]:
        ids = fo.neighbors.get(true_id)
        if ids is None:
            mask = self._base_mask(fo, true_id)
            ring = ndimage.binary_dilation(mask, iterations=2) & ~mask
            cand = np.unique(fo.raster[ring])
            ids = sorted(int(c) for c in cand if c != true_id and c != BACKGROUND)
            fo.neighbors[true_id] = ids
        return ids

    def _variant(self, fo: _FrameOracle, true_id: int, spill_id: int | None, op: str | None):
        key = (true_id, spill_id, op)
        out = fo.variants.get(key)
        if out is None:
            mask = self._base_mask(fo, true_id)
            if spill_id is not None:
                mask = mask | self._base_mask(fo, spill_id)
            r = self.noise.morph_radius
            if op == "dil":
                mask = ndimage.binary_dilation(mask, iterations=r)
            elif op == "ero":
                eroded = ndimage.binary_erosion(mask, iterations=r)
                if eroded.any():
                    mask = eroded
            out = (mask, tight_bbox(mask))
            fo.variants[key] = out
        return out

    def _jitter(self, prompt_id: int) -> tuple[float, float]:
        j = self._prompt_jitter.get(prompt_id)
        if j is None:
            amp = self.noise.conf_jitter
            if amp > 0:
                rng = np.random.default_rng([self.noise.seed, 0x5EED, prompt_id])
                j = (float(rng.uniform(-amp, amp)), float(rng.uniform(-amp, amp)))
            else:
                j = (0.0, 0.0)
            self._prompt_jitter[prompt_id] = j
        return j

    def predict_masks(self, frame: Frame, prompts: list[PixelProjection]) -> list[MaskRecord]:
        fo = self._frame_oracle(frame.id)
        noise = self.noise
        out = []
        for proj in prompts:
            true_id = int(fo.raster[proj.v, proj.u])
            if true_id == BACKGROUND:
                continue
            spill_id = None
            op = None
            if noise.active:
                rng = np.random.default_rng([noise.seed, frame.id, proj.point_index])
                if noise.p_spill > 0 and rng.random() < noise.p_spill:
                    cand = self._neighbor_ids(fo, true_id)
                    if cand:
                        spill_id = cand[int(rng.integers(len(cand)))]
                if noise.morph_radius > 0:
                    op = "dil" if rng.integers(2) == 0 else "ero"
            mask, bbox = self._variant(fo, true_id, spill_id, op)
            if not mask[proj.v, proj.u]:
                self.dropped_records += 1
                continue
            jit_iou, jit_stab = self._jitter(proj.point_index)
            # a spilled mask is a genuinely bad segmentation; real promptable
            # models flag those with a low predicted IoU, so the oracle does too
            penalty = SPILL_SCORE_PENALTY if spill_id is not None else 0.0
            out.append(MaskRecord(
                frame.id, proj.point_index, mask, bbox,
                float(np.clip(100.0 + jit_iou - penalty, 0.0, 100.0)),
                float(np.clip(100.0 + jit_stab, 0.0, 100.0)),
            ))
        return out
