"""Run configuration: YAML sections, dotted overrides, frozen copies.

A run config has sections data / model / attention / msff / anchors /
train / eval plus a top-level seed and output directory. Unknown keys are
rejected with their dotted path. Command-line overrides use the same dotted
paths (``train.lr=0.01``); values parse as YAML scalars. Every run writes
its fully resolved config next to its artifacts so it can be re-run as-is.
"""

from __future__ import annotations

import copy
from pathlib import Path

import yaml

from .errors import ConfigError
from .model.anchors import DEFAULT_RATIOS, DEFAULT_SCALES
from .model.network import NetworkConfig
from .synth.augment import AugmentConfig
from .synth.scene import ARTIFACT_KINDS, SceneConfig
from .train.loop import TrainConfig

DEFAULTS: dict = {
    "seed": 0,
    "out": "runs/run",
    "data": {
        "n_train": 500,
        "n_test": 100,
        "image_size": [96, 96],
        "n_min": 1,
        "n_max": 3,
        "empty_prob": 0.17,
        "artifact_probs": {
            "flare": 0.15,
            "blood_occlusion": 0.15,
            "smoke": 0.15,
            "underexposure": 0.15,
            "motion_blur": 0.15,
            "organ_occlusion": 0.1,
            "crossing": 0.2,
        },
        "alpha_range": [0.55, 1.0],
        "length_range": [40.0, 72.0],
        "width_range": [6.0, 12.0],
        "forked_prob": 0.3,
        "background_noise": 0.06,
    },
    "model": {
        "widths": [16, 32, 64, 128],
        "blocks_per_stage": 2,
        "fpn_width": 32,
        "head_levels": 5,
        "num_prototypes": 8,
    },
    "attention": {
        "kind": "none",
        "placement": "full",
        "cbam_r": 4,
        "ccam_R": 2,
    },
    "msff": {"enabled": False},
    "anchors": {
        "scales": list(DEFAULT_SCALES),
        "ratios": list(DEFAULT_RATIOS),
    },
    "train": {
        "lr": 0.001,
        "momentum": 0.9,
        "weight_decay": 5.0e-4,
        "batch_size": 8,
        "iterations": 3000,
        "augment": False,
        "photometric": {
            "contrast": [0.75, 1.25],
            "saturation": [0.7, 1.3],
            "hue": [-0.3, 0.3],
            "brightness": [-0.15, 0.15],
            "noise_sigma": 0.03,
        },
        "affine": {
            "scale": [0.85, 1.15],
            "crop": [0.85, 1.0],
            "mirror_prob": 0.5,
        },
    },
    "eval": {
        "tau": 2.0,
        "score_threshold": 0.05,
        "iou_threshold": 0.5,
        "top_k": 20,
        "percentile": 5.0,
    },
}

# dict-valued leaves whose keys are data, not schema (validated separately)
_OPEN_DICTS = {"data.artifact_probs"}


def _merge(base: dict, user: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in user.items():
        dotted = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key: {dotted}")
        if isinstance(base[key], dict) and dotted not in _OPEN_DICTS:
            if not isinstance(value, dict):
                raise ConfigError(f"{dotted} must be a mapping")
            out[key] = _merge(base[key], value, f"{dotted}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override must look like section.key=value, got {assignment!r}")
    dotted, raw = assignment.split("=", 1)
    keys = dotted.strip().split(".")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}")
    node = cfg
    open_prefix = False
    for i, key in enumerate(keys[:-1]):
        prefix = ".".join(keys[: i + 1])
        if prefix in _OPEN_DICTS:
            open_prefix = True
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError(f"unknown config key: {dotted}")
        node = node[key]
    leaf = keys[-1]
    if leaf not in node and not open_prefix:
        raise ConfigError(f"unknown config key: {dotted}")
    node[leaf] = value


class RunConfig:
    """Resolved configuration with typed accessors per module."""

    def __init__(self, resolved: dict):
        self.resolved = resolved
        self.validate()

    @property
    def seed(self) -> int:
        return int(self.resolved["seed"])

    @property
    def out_dir(self) -> Path:
        return Path(self.resolved["out"])

    def validate(self) -> None:
        for kind in self.resolved["data"]["artifact_probs"]:
            if kind not in ARTIFACT_KINDS:
                raise ConfigError(f"unknown artifact kind in data.artifact_probs: {kind}")
        self.network_config().validate()
        self.train_config().validate()
        self.scene_config().validate()
        ev = self.resolved["eval"]
        if not 0 <= ev["percentile"] <= 100:
            raise ConfigError(f"eval.percentile must be in [0, 100], got {ev['percentile']}")

    def scene_config(self) -> SceneConfig:
        d = self.resolved["data"]
        return SceneConfig(
            size=tuple(d["image_size"]),
            n_range=(int(d["n_min"]), int(d["n_max"])),
            empty_prob=float(d["empty_prob"]),
            artifact_probs=dict(d["artifact_probs"]),
            length_range=tuple(d["length_range"]),
            width_range=tuple(d["width_range"]),
            alpha_range=tuple(d["alpha_range"]),
            forked_prob=float(d["forked_prob"]),
            background_noise=float(d["background_noise"]),
        )

    def augment_config(self) -> AugmentConfig | None:
        t = self.resolved["train"]
        if not t["augment"]:
            return None
        p, a = t["photometric"], t["affine"]
        return AugmentConfig(
            contrast=tuple(p["contrast"]),
            saturation=tuple(p["saturation"]),
            hue=tuple(p["hue"]),
            brightness=tuple(p["brightness"]),
            noise_sigma=float(p["noise_sigma"]),
            scale=tuple(a["scale"]),
            crop=tuple(a["crop"]),
            mirror_prob=float(a["mirror_prob"]),
        )

    def network_config(self) -> NetworkConfig:
        m = self.resolved["model"]
        at = self.resolved["attention"]
        return NetworkConfig(
            image_size=tuple(self.resolved["data"]["image_size"]),
            widths=tuple(m["widths"]),
            blocks_per_stage=int(m["blocks_per_stage"]),
            fpn_width=int(m["fpn_width"]),
            head_levels=int(m["head_levels"]),
            num_prototypes=int(m["num_prototypes"]),
            attention_kind=str(at["kind"]),
            attention_placement=str(at["placement"]),
            cbam_r=int(at["cbam_r"]),
            ccam_recurrence=int(at["ccam_R"]),
            msff_enabled=bool(self.resolved["msff"]["enabled"]),
            scales=tuple(self.resolved["anchors"]["scales"]),
            ratios=tuple(self.resolved["anchors"]["ratios"]),
        )

    def train_config(self) -> TrainConfig:
        t = self.resolved["train"]
        return TrainConfig(
            lr=float(t["lr"]),
            momentum=float(t["momentum"]),
            weight_decay=float(t["weight_decay"]),
            batch_size=int(t["batch_size"]),
            iterations=int(t["iterations"]),
            seed=self.seed,
        )

    def freeze(self, path) -> None:
        """Write the resolved config so the run can be reproduced from it."""
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(yaml.safe_dump(self.resolved, sort_keys=False))


def load_config(
    path=None,
    overrides=(),
    seed: int | None = None,
    out=None,
) -> RunConfig:
    user: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        try:
            user = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}")
        if not isinstance(user, dict):
            raise ConfigError(f"config root must be a mapping, got {type(user).__name__}")
    resolved = _merge(DEFAULTS, user)
    for assignment in overrides:
        _apply_override(resolved, assignment)
    if seed is not None:
        resolved["seed"] = int(seed)
    if out is not None:
        resolved["out"] = str(out)
    return RunConfig(resolved)
