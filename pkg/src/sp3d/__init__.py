"""sp3d: zero-shot 3D instance segmentation by fusing promptable 2D masks
across posed RGB-D frames."""

from .scene_io import (
    CameraIntrinsics,
    CameraPose,
    DepthMap,
    Frame,
    PointCloud,
    UNLABELED,
    load_frame_manifest,
    load_labels,
    load_point_cloud,
    save_labels,
    save_point_cloud,
    save_segmentation,
)
from .projection import PixelProjection, project_batch, project_point, visibility_test
from .sampling import PromptSet, farthest_point_sample, prompt_ratio_to_count
from .rle import rle_decode, rle_encode
from .masks import (
    FileMaskProvider,
    MaskRecord,
    NoiseSpec,
    OracleMaskProvider,
    read_archive_file,
    write_archive_file,
    write_mask_archive,
)
from .selection import PromptStateTable, SelectionConfig, accumulate, finalize, per_frame_select
from .consolidation import (
    ConsolidationMap,
    MaskedSurface,
    build_overlap_graph,
    compute_masked_surfaces,
    consolidate,
)
from .segmentation import SegmentationResult, VoteTable, assign_frame_votes, fill_unlabeled, finalize_votes
from .evaluation import EvalReport, GroundTruth, Prediction, evaluate, instance_iou
from .pipeline import PipelineConfig, run_ablation, run_pipeline

__version__ = "0.1.0"
