"""posekit: keypoint geometry, evaluation metrics and pose-guided retrieval."""

from .skeleton import (
    COCO_OKS_KAPPAS,
    KEYPOINT_NAMES,
    LIMB_NAMES,
    LIMB_SEGMENTS,
    LR_SWAP,
    MIDPOINT_ENDPOINTS,
    NUM_COCO_KEYPOINTS,
    NUM_KEYPOINTS,
    BoundingBox,
    Keypoint,
    KeypointId,
    KeypointSigmas,
    Skeleton,
    bbox_from_mask,
    derive_midpoints,
    flip_lr,
    padded_crop_region,
    rotate,
)
from .heatmap import (
    decode_keypoints,
    encode_target,
    gaussian_smooth,
    read_heatmap_stack,
    write_heatmap_stack,
)
from .balance import (
    ClassFrequencyTable,
    ClassWeights,
    compute_r,
    expected_per_batch,
    expected_positives_per_batch,
    weight,
    weighted_bce,
    weighted_bce_grad,
)
from .metrics import (
    EvalPair,
    MetricReport,
    MetricValue,
    keypoint_breakdown,
    oks,
    oks_at,
    pckh_at,
    pcpm_at,
    pdj_at,
)
from .descriptor import (
    DESCRIPTOR_DIM,
    IncompleteSkeletonError,
    IndexBuildResult,
    PoseIndex,
    QueryResult,
    build_index,
    descriptor,
    knn,
    load_index,
    save_index,
)

__version__ = "0.1.0"
