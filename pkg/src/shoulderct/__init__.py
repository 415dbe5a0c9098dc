"""Shoulder CT analysis toolkit.

Bone segmentation with a boundary-aware dual-decoder 3D U-Net, surface
reconstruction via marching cubes, deterministic glenohumeral joint
localization, and concurrent three-task osteoarthritis staging, plus the
synthetic phantom machinery and metrics used to verify the whole chain at
desk scale.
"""

__version__ = "0.1.0"

from .volume import (  # noqa: F401
    LabelMap,
    PatchGrid,
    StagingLabels,
    Volume,
    crop_to_foreground,
    extract_patch,
    flip_sagittal,
    make_patch_grid,
    merge_patches,
    normalize_hu,
)
from .nifti import read_labelmap, read_volume, write_labelmap, write_volume  # noqa: F401
from .edt import class_boundary, exact_edt  # noqa: F401
from .losses import (  # noqa: F401
    LossConfig,
    branch_weight,
    class_weights,
    contour_loss,
    distance_weight_map,
    region_loss,
    soft_dice,
    task_cross_entropy,
    total_loss,
    weighted_cross_entropy,
)
from .mesh import TriMesh, icosphere, read_stl, write_stl  # noqa: F401
from .marching import marching_cubes  # noqa: F401
from .meshdist import (  # noqa: F401
    TriangleBVH,
    hausdorff,
    max_surface_distance,
    surface_rmse,
)
from .staging import stage_hsa, stage_js, stage_os  # noqa: F401
from .ghjoint import HeadFit, fit_humeral_head, gh_bounding_box  # noqa: F401
from .networks import (  # noqa: F401
    DualDecoderUNet3D,
    MultiTaskStagingNet,
    SegmenterConfig,
    StagingConfig,
    forward_cls,
    forward_seg,
    load_checkpoint,
    save_checkpoint,
)
from .metrics import ConfusionMatrix, classification_report, overlap_metrics  # noqa: F401
from .stats import bonferroni, friedman_test, wilcoxon_signed_rank  # noqa: F401
from .phantom import (  # noqa: F401
    PhantomCase,
    PhantomSpec,
    generate_cohort,
    generate_phantom,
    read_manifest,
)
from .config import ExperimentConfig, cache_dir  # noqa: F401
from .pipeline import (  # noqa: F401
    StagingResult,
    evaluate,
    infer,
    segment_volume,
    train_classifier,
    train_segmentation,
    validate_report,
)
