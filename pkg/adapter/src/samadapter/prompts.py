"""Reader for the fusion pipeline's per-frame pixel-prompt export.

One JSON per frame: {"frame_id": int, "width": int, "height": int,
"prompts": [{"id": int, "u": int, "v": int}, ...]}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import MissingRun


@dataclass(frozen=True)
class FramePrompts:
    frame_id: int
    width: int
    height: int
    prompts: list[tuple[int, int, int]]  # (prompt_id, u, v)


def load_frame_prompts(path) -> FramePrompts:
    payload = json.loads(Path(path).read_text())
    w, h = int(payload["width"]), int(payload["height"])
    prompts = []
    for entry in payload["prompts"]:
        pid, u, v = int(entry["id"]), int(entry["u"]), int(entry["v"])
        if not (0 <= u < w and 0 <= v < h):
            raise MissingRun(f"prompt {pid} at ({u},{v}) outside {w}x{h} in {path}")
        prompts.append((pid, u, v))
    return FramePrompts(int(payload["frame_id"]), w, h, prompts)


def load_prompt_export(prompts_dir) -> list[FramePrompts]:
    prompts_dir = Path(prompts_dir)
    files = sorted(prompts_dir.glob("*.prompts.json"),
                   key=lambda p: int(p.name.split(".")[0]))
    if not files:
        raise MissingRun(f"no *.prompts.json files in {prompts_dir}; "
                         "run the pipeline with --export-prompts first")
    return [load_frame_prompts(p) for p in files]


def save_frame_prompts(fp: FramePrompts, path) -> None:
    payload = {
        "frame_id": fp.frame_id,
        "width": fp.width,
        "height": fp.height,
        "prompts": [{"id": pid, "u": u, "v": v} for pid, u, v in fp.prompts],
    }
    Path(path).write_text(json.dumps(payload, indent=2))
