from .scene import ArtifactSpec, InstrumentSpec, SceneConfig, generate_scene
from .augment import AugmentConfig, apply_affine, apply_photometric
from .dataset import build_dataset, load_dataset, save_dataset

__all__ = [
    "ArtifactSpec",
    "InstrumentSpec",
    "SceneConfig",
    "generate_scene",
    "AugmentConfig",
    "apply_photometric",
    "apply_affine",
    "build_dataset",
    "save_dataset",
    "load_dataset",
]
