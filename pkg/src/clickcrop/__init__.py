"""Click-based interactive segmentation with localized crops and progressive merging."""

from .backends import (
    Backend,
    ConstantBackend,
    CoarseOutput,
    NoisyOracleBackend,
    OracleBackend,
    RefineOutput,
    SegmentorInput,
    boundary_target,
    create_backend,
    fuse,
    load_external_backend,
)
from .corruption import DefectConfig, SlicConfig, build_benchmark, simulate_defective_mask, slic
from .crops import (
    SERIES,
    CropSpec,
    ModelSeries,
    crop_area_stats,
    crop_resize,
    expand_box,
    focus_crop,
    get_series,
    paste_back,
    roi_align,
    target_crop,
)
from .harness import EvalConfig, SampleRecord, aggregate, load_dataset, run_sample, run_samples, simulate_next_click
from .raster import (
    BBox,
    Click,
    bbox_of,
    connected_components,
    component_containing,
    dilate,
    distance_transform,
    erode,
    iou,
    largest_component,
    resize,
    stamp_disk,
    xor_diff,
)
from .session import ClickResult, Session, merge_masks, new_session

__version__ = "0.1.0"
