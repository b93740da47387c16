"""samadapter: run a promptable image segmenter over exported pixel prompts
and write per-frame mask archives in the fusion pipeline's wire format."""

from .archive import MaskRecord, rle_encode, write_archive_file, write_mask_archive
from .prompts import FramePrompts, load_prompt_export
from .models import MODELS, FloodFillModel, MockModel, load_model

__version__ = "0.1.0"
