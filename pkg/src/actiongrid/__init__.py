"""Hierarchical growing-grid networks for 3D-skeleton action recognition."""

from .skeleton import (
    BodyPartition,
    Dataset,
    SkeletonDataError,
    SkeletonLayout,
    SkeletonSequence,
    generate_synthetic,
    load_dataset,
    load_florence3d,
    load_msr_action3d,
    load_utkinect,
    save_dataset,
)
from .preprocess import (
    CanonicalSkeleton,
    PreprocessConfig,
    attention_select,
    build_canonical,
    compute_ego_basis,
    preprocess_sequence,
    scale_to_canonical,
    to_ego_frame,
)
from .growing_grid import GridConfig, GrowingGrid, WinnerResult, resolve_lambda
from .som import SomConfig, SomNet, som_find_winner, som_train
from .patterns import (
    ActivityPattern,
    OrderedPattern,
    compute_kmax,
    dedup_consecutive,
    polyline_length,
    resample,
    trace_sequence,
)
from .label_layer import ClassScores, LabelConfig, LabelingLayer
from .pipeline import (
    PipelineConfig,
    PipelineModel,
    load_model,
    predict,
    save_model,
    train_pipeline,
)
from .evaluate import (
    BenchReport,
    ConfusionMatrix,
    SplitSpec,
    benchmark_backends,
    cross_validate,
    evaluate,
    split,
)

__version__ = "0.1.0"
