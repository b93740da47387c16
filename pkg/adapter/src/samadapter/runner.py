"""Per-frame inference loop: prompts in, conforming mask archives out."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .archive import MaskRecord, tight_bbox, write_mask_archive
from .errors import MissingRun, ModelError
from .models import load_model, stability_from_logits
from .prompts import FramePrompts, load_prompt_export


def load_rgb(frames_dir: Path, frame_id: int, width: int, height: int) -> np.ndarray:
    for suffix in (".rgb.png", ".png", ".jpg"):
        path = frames_dir / f"{frame_id}{suffix}"
        if path.exists():
            img = Image.open(path).convert("RGB")
            if img.size != (width, height):
                img = img.resize((width, height), Image.BILINEAR)
            return np.array(img)
    raise MissingRun(f"no RGB image for frame {frame_id} in {frames_dir}")


def infer_frame(model, rgb: np.ndarray, fp: FramePrompts) -> tuple[list[MaskRecord], int]:
    """Run the model once per prompt; drop records whose mask excludes their
    own prompt pixel. Returns (records, dropped count)."""
    records = []
    dropped = 0
    for pid, u, v in fp.prompts:
        try:
            mask, predicted_iou, logits = model.segment(rgb, u, v)
        except Exception as e:
            raise ModelError(f"model {model.name!r} failed on frame "
                             f"{fp.frame_id} prompt {pid}: {e}")
        if not mask.any() or not mask[v, u]:
            dropped += 1
            continue
        stability = stability_from_logits(logits) if logits is not None else 100.0
        if not (0.0 <= predicted_iou <= 100.0 and 0.0 <= stability <= 100.0):
            raise ModelError(f"model {model.name!r} produced out-of-range scores")
        records.append(MaskRecord(fp.frame_id, pid, mask, tight_bbox(mask),
                                  float(predicted_iou), float(stability)))
    return records, dropped


def run_adapter(frames_dir, prompts_dir, out_dir, model_name: str,
                resolution: tuple[int, int] | None = None) -> dict:
    """Full adapter pass; returns a summary of what was written."""
    frames_dir = Path(frames_dir)
    model = load_model(model_name)
    exports = load_prompt_export(prompts_dir)
    if resolution is not None:
        width, height = resolution
    else:
        width, height = exports[0].width, exports[0].height
    by_frame = {}
    total_prompts = 0
    total_dropped = 0
    for fp in exports:
        if (fp.width, fp.height) != (width, height):
            raise MissingRun(f"frame {fp.frame_id} exported at {fp.width}x{fp.height}, "
                             f"expected {width}x{height}")
        rgb = load_rgb(frames_dir, fp.frame_id, width, height)
        records, dropped = infer_frame(model, rgb, fp)
        by_frame[fp.frame_id] = records
        total_prompts += len(fp.prompts)
        total_dropped += dropped
    prompt_count = 1 + max((pid for fp in exports for pid, _, _ in fp.prompts), default=-1)
    write_mask_archive(by_frame, width, height, prompt_count,
                       provider=f"sam-adapter/{model.name}", out_dir=out_dir,
                       extra_manifest={"stability_defaulted": not model.has_logits})
    return {
        "frames": len(exports),
        "prompts": total_prompts,
        "records": sum(len(r) for r in by_frame.values()),
        "dropped": total_dropped,
        "model": model.name,
    }
