from viewscout.data.records import CropAnnotation, Scene, SceneOracle, load_scenes, save_scenes
from viewscout.data.sampling import (
    InfeasibleSampleError,
    SCORE_THRESHOLDS,
    convert_sample,
    filter_gt,
    sample_init_view,
)
from viewscout.data.synthetic import (
    build_synthetic_dataset,
    make_synthetic_scene,
    oracle_score,
    render_world,
)

__all__ = [
    "CropAnnotation",
    "Scene",
    "SceneOracle",
    "load_scenes",
    "save_scenes",
    "InfeasibleSampleError",
    "SCORE_THRESHOLDS",
    "convert_sample",
    "filter_gt",
    "sample_init_view",
    "build_synthetic_dataset",
    "make_synthetic_scene",
    "oracle_score",
    "render_world",
]
