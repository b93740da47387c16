"""Mask archive writer: the fusion pipeline's SPMK wire format.

Implemented against the published byte layout, not by importing the consumer,
so the two codecs stay independently conformant:

    magic "SPMK" | u32 version=1 | u16 width | u16 height | u32 record count
    per record: u32 prompt_id | 4 x u16 bbox (u0,v0,u1,v1 inclusive)
                | f32 predicted_iou | f32 stability | u32 run count | runs u32[]

Runs are row-major run lengths alternating background/foreground, starting
with a (possibly empty) background run. All integers little-endian.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IoError

ARCHIVE_MAGIC = b"SPMK"
ARCHIVE_VERSION = 1


@dataclass
class MaskRecord:
    frame_id: int
    prompt_id: int
    mask: np.ndarray  # (height, width) bool
    bbox: tuple[int, int, int, int]
    predicted_iou: float  # 0..100
    stability: float  # 0..100


def tight_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    vs, us = np.nonzero(mask)
    if vs.size == 0:
        raise ValueError("empty mask has no bbox")
    return int(us.min()), int(vs.min()), int(us.max()), int(vs.max())


def rle_encode(raster: np.ndarray) -> np.ndarray:
    flat = np.asarray(raster, dtype=bool).ravel()
    if flat.size == 0:
        return np.zeros(0, dtype=np.uint32)
    edges = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], edges, [flat.size]))
    runs = np.diff(starts)
    if flat[0]:
        runs = np.concatenate(([0], runs))
    return runs.astype(np.uint32)


def _atomic_write(path: Path, data: bytes) -> None:
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except OSError as e:
        raise IoError(str(e))


def write_archive_file(records: list[MaskRecord], width: int, height: int, path) -> None:
    parts = [ARCHIVE_MAGIC,
             struct.pack("<IHHI", ARCHIVE_VERSION, width, height, len(records))]
    for rec in records:
        runs = rle_encode(rec.mask)
        parts.append(struct.pack("<I4HffI", rec.prompt_id, *rec.bbox,
                                 rec.predicted_iou, rec.stability, runs.size))
        parts.append(runs.astype("<u4").tobytes())
    _atomic_write(Path(path), b"".join(parts))


def write_mask_archive(records_by_frame: dict[int, list[MaskRecord]],
                       width: int, height: int, prompt_count: int,
                       provider: str, out_dir,
                       extra_manifest: dict | None = None) -> None:
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
    if extra_manifest:
        manifest.update(extra_manifest)
    _atomic_write(out_dir / "masks.json",
                  json.dumps(manifest, indent=2).encode("ascii"))
