"""Synthetic endoscopic scenes with exact instance ground truth.

Instruments are capsules (oriented rectangles with rounded tips, optionally
forked) rendered over a low-frequency reddish background. Difficulty comes
from configurable artifacts: lens flare, smoke, underexposure, motion blur,
blood or organ occluders painted over the tools, semi-transparent shafts,
and deliberate instrument crossings. Occlusion is resolved by draw order,
so every rendered pixel belongs to at most one instance and ground-truth
masks stay pairwise disjoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import ConfigError
from ..seeding import rng_for
from ..data.types import FrameRecord, InstanceAnnotation, mask_to_bbox

ARTIFACT_KINDS = (
    "flare",
    "blood_occlusion",
    "smoke",
    "underexposure",
    "motion_blur",
    "organ_occlusion",
    "crossing",
)

MIN_INSTANCE_AREA = 16


@dataclass(frozen=True)
class InstrumentSpec:
    """Geometry and appearance of one rendered instrument."""

    length: float
    width: float
    orientation: float
    tip: str = "straight"
    albedo: float = 0.7
    alpha: float = 1.0

    def validate(self) -> None:
        if self.length < 2.0 * self.width:
            raise ValueError(
                f"instrument length {self.length} must be >= twice width {self.width}"
            )
        if self.tip not in ("straight", "forked"):
            raise ValueError(f"unknown tip style {self.tip!r}")
        if not 0.5 <= self.albedo <= 0.9:
            raise ValueError(f"albedo {self.albedo} outside [0.5, 0.9]")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha {self.alpha} outside (0, 1]")


@dataclass(frozen=True)
class ArtifactSpec:
    kind: str
    intensity: float

    def validate(self) -> None:
        if self.kind not in ARTIFACT_KINDS:
            raise ValueError(f"unknown artifact kind {self.kind!r}")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError(f"intensity {self.intensity} outside [0, 1]")


@dataclass(frozen=True)
class SceneConfig:
    """Knobs for one generated frame."""

    size: tuple[int, int] = (96, 96)
    n_range: tuple[int, int] = (1, 3)
    empty_prob: float = 0.0
    artifact_probs: dict = field(default_factory=dict)
    length_range: tuple[float, float] = (40.0, 72.0)
    width_range: tuple[float, float] = (6.0, 12.0)
    alpha_range: tuple[float, float] = (1.0, 1.0)
    forked_prob: float = 0.3
    background_noise: float = 0.06

    def validate(self) -> None:
        n_min, n_max = self.n_range
        if not 0 <= n_min <= n_max <= 4:
            raise ConfigError(f"instrument count range must satisfy 0 <= min <= max <= 4, got {self.n_range}")
        if not 0.0 <= self.empty_prob <= 1.0:
            raise ConfigError(f"empty_prob {self.empty_prob} outside [0, 1]")
        h, w = self.size
        diag = math.hypot(h, w)
        if self.length_range[0] > diag:
            raise ConfigError(
                f"instruments (length >= {self.length_range[0]}) cannot fit a {h}x{w} frame"
            )
        for kind in self.artifact_probs:
            if kind not in ARTIFACT_KINDS:
                raise ConfigError(f"unknown artifact kind {kind!r}")


def _segment_distance(h: int, w: int, p0, p1) -> np.ndarray:
    """Distance from each pixel center to the segment p0-p1 (x, y coords)."""
    ys, xs = np.mgrid[0:h, 0:w]
    px = xs + 0.5
    py = ys + 0.5
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return np.hypot(px - p0[0], py - p0[1])
    t = ((px - p0[0]) * dx + (py - p0[1]) * dy) / denom
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(px - (p0[0] + t * dx), py - (p0[1] + t * dy))


def _capsule_mask(h, w, center, length, width, angle) -> np.ndarray:
    half = length / 2.0 - width / 2.0
    ux, uy = math.cos(angle), math.sin(angle)
    p0 = (center[0] - half * ux, center[1] - half * uy)
    p1 = (center[0] + half * ux, center[1] + half * uy)
    return _segment_distance(h, w, p0, p1) <= width / 2.0


def render_instrument(spec: InstrumentSpec, size: tuple[int, int], center) -> np.ndarray:
    """Boolean mask of the instrument placed at ``center`` (x, y)."""
    spec.validate()
    h, w = size
    ux, uy = math.cos(spec.orientation), math.sin(spec.orientation)
    if spec.tip == "straight":
        return _capsule_mask(h, w, center, spec.length, spec.width, spec.orientation)
    # forked: a shorter shaft plus two prongs diverging from the tip
    shaft_len = spec.length * 0.68
    shaft_center = (
        center[0] - (spec.length - shaft_len) / 2.0 * ux,
        center[1] - (spec.length - shaft_len) / 2.0 * uy,
    )
    mask = _capsule_mask(h, w, shaft_center, shaft_len, spec.width, spec.orientation)
    tip = (
        center[0] + (shaft_len / 2.0 - (spec.length - shaft_len) / 2.0 - spec.width / 2.0) * ux,
        center[1] + (shaft_len / 2.0 - (spec.length - shaft_len) / 2.0 - spec.width / 2.0) * uy,
    )
    prong_len = spec.length - shaft_len + spec.width
    for dangle in (-0.28, 0.28):
        a = spec.orientation + dangle
        pc = (
            tip[0] + prong_len / 2.0 * math.cos(a),
            tip[1] + prong_len / 2.0 * math.sin(a),
        )
        mask |= _capsule_mask(h, w, pc, prong_len, max(spec.width * 0.5, 2.0), a)
    return mask


def _background(h: int, w: int, noise: float, rng) -> np.ndarray:
    base = np.array([0.55, 0.26, 0.24])
    coarse = rng.normal(0.0, 1.0, size=(h // 8 + 2, w // 8 + 2, 3))
    smooth = ndimage.zoom(coarse, (h / coarse.shape[0], w / coarse.shape[1], 1.0), order=1)
    smooth = smooth[:h, :w]
    img = base[None, None, :] + noise * smooth * np.array([1.0, 0.7, 0.7])
    # mild vignetting so plain backgrounds are not constant
    ys, xs = np.mgrid[0:h, 0:w]
    r2 = ((ys - h / 2) / h) ** 2 + ((xs - w / 2) / w) ** 2
    img *= (1.0 - 0.25 * r2)[:, :, None]
    return np.clip(img, 0.0, 1.0)


def _blob_mask(h, w, center, radius, rng) -> np.ndarray:
    """Irregular roundish blob for blood / organ occluders."""
    ys, xs = np.mgrid[0:h, 0:w]
    ang = np.arctan2(ys - center[1], xs - center[0])
    wobble = np.zeros_like(ang)
    for k in range(2, 5):
        wobble += rng.uniform(-0.25, 0.25) * np.cos(k * ang + rng.uniform(0, 2 * math.pi))
    r = np.hypot(xs - center[0], ys - center[1])
    return r <= radius * (1.0 + wobble)


def _apply_overlays(image, id_mask, artifacts, rng):
    """Paint artifact overlays; occluders also erase covered instance pixels."""
    h, w = id_mask.shape
    for art in artifacts:
        if art.kind == "flare":
            cx, cy = rng.uniform(0, w), rng.uniform(0, h)
            sigma = (0.08 + 0.10 * art.intensity) * min(h, w)
            ys, xs = np.mgrid[0:h, 0:w]
            bump = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma**2))
            image += (0.5 + 0.5 * art.intensity) * bump[:, :, None]
        elif art.kind == "smoke":
            coarse = rng.normal(0.0, 1.0, size=(h // 12 + 2, w // 12 + 2))
            fog = ndimage.zoom(coarse, (h / coarse.shape[0], w / coarse.shape[1]), order=1)[:h, :w]
            fog = (fog - fog.min()) / max(np.ptp(fog), 1e-9)
            image += (0.35 * art.intensity) * fog[:, :, None] * np.array([0.9, 0.9, 0.95])
        elif art.kind == "underexposure":
            ys, xs = np.mgrid[0:h, 0:w]
            r2 = ((ys - h / 2) / (h / 2)) ** 2 + ((xs - w / 2) / (w / 2)) ** 2
            factor = 1.0 - art.intensity * (0.35 + 0.45 * np.clip(r2, 0, 1))
            image *= factor[:, :, None]
        elif art.kind == "motion_blur":
            klen = 2 * int(round(1 + 3 * art.intensity)) + 1
            angle = rng.uniform(0, math.pi)
            kernel = np.zeros((klen, klen))
            c = klen // 2
            for t in np.linspace(-c, c, 4 * klen):
                yy = int(round(c + t * math.sin(angle)))
                xx = int(round(c + t * math.cos(angle)))
                kernel[yy, xx] = 1.0
            kernel /= kernel.sum()
            for ch in range(3):
                image[:, :, ch] = ndimage.convolve(image[:, :, ch], kernel, mode="nearest")
        elif art.kind in ("blood_occlusion", "organ_occlusion"):
            cx, cy = rng.uniform(0.2 * w, 0.8 * w), rng.uniform(0.2 * h, 0.8 * h)
            radius = (0.10 + 0.15 * art.intensity) * min(h, w)
            blob = _blob_mask(h, w, (cx, cy), radius, rng)
            color = (
                np.array([0.45, 0.05, 0.05])
                if art.kind == "blood_occlusion"
                else np.array([0.72, 0.45, 0.40])
            )
            shade = 1.0 - 0.3 * rng.random()
            image[blob] = color * shade
            id_mask[blob] = 0  # occluders hide instrument pixels
        # "crossing" affects placement, handled in generate_scene
    return image, id_mask


def generate_scene(config: SceneConfig, seed: int, frame_id: str | None = None) -> FrameRecord:
    """Render one frame; identical (config, seed) gives identical bytes."""
    config.validate()
    rng = rng_for(seed, "scene")
    h, w = config.size
    image = _background(h, w, config.background_noise, rng)

    artifacts = []
    for kind in ARTIFACT_KINDS:
        prob = config.artifact_probs.get(kind, 0.0)
        if rng.random() < prob:
            artifacts.append(ArtifactSpec(kind=kind, intensity=float(rng.uniform(0.4, 1.0))))

    n_min, n_max = config.n_range
    if config.empty_prob > 0.0 and rng.random() < config.empty_prob:
        count = 0
    else:
        lo = max(n_min, 1) if config.empty_prob > 0.0 else n_min
        count = int(rng.integers(lo, n_max + 1)) if n_max >= lo else 0
    crossing = any(a.kind == "crossing" for a in artifacts)
    if crossing and count == 1 and n_max >= 2:
        count = 2

    id_mask = np.zeros((h, w), dtype=np.int64)
    specs: list[InstrumentSpec] = []
    centers: list[tuple[float, float]] = []
    for i in range(count):
        length = float(rng.uniform(*config.length_range))
        width = float(rng.uniform(*config.width_range))
        width = min(width, length / 2.0)
        spec = InstrumentSpec(
            length=length,
            width=width,
            orientation=float(rng.uniform(0.0, math.pi)),
            tip="forked" if rng.random() < config.forked_prob else "straight",
            albedo=float(rng.uniform(0.5, 0.9)),
            alpha=float(rng.uniform(*config.alpha_range)),
        )
        if crossing and i == 1 and centers:
            base = centers[0]
            center = (
                base[0] + rng.uniform(-0.1, 0.1) * w,
                base[1] + rng.uniform(-0.1, 0.1) * h,
            )
            spec = InstrumentSpec(
                length=spec.length,
                width=spec.width,
                orientation=specs[0].orientation + rng.uniform(0.6, math.pi - 0.6),
                tip=spec.tip,
                albedo=spec.albedo,
                alpha=spec.alpha,
            )
        else:
            center = (rng.uniform(0.2 * w, 0.8 * w), rng.uniform(0.2 * h, 0.8 * h))
        mask = render_instrument(spec, (h, w), center)
        if mask.sum() < MIN_INSTANCE_AREA:
            continue
        specs.append(spec)
        centers.append(center)
        instance_id = len(specs)
        id_mask[mask] = instance_id  # later instruments occlude earlier ones

        shade = spec.albedo * np.array([1.0, 0.97, 0.95])
        body = id_mask == instance_id
        image[body] = spec.alpha * shade + (1.0 - spec.alpha) * image[body]
        core = _segment_distance(
            h,
            w,
            (center[0] - spec.length / 3 * math.cos(spec.orientation),
             center[1] - spec.length / 3 * math.sin(spec.orientation)),
            (center[0] + spec.length / 3 * math.cos(spec.orientation),
             center[1] + spec.length / 3 * math.sin(spec.orientation)),
        ) <= spec.width / 5.0
        image[body & core] = np.clip(image[body & core] + 0.10 * spec.alpha, 0.0, 1.0)

    image, id_mask = _apply_overlays(image, id_mask, artifacts, rng)
    image = np.clip(image, 0.0, 1.0)

    instances = []
    for instance_id in range(1, len(specs) + 1):
        mask = id_mask == instance_id
        if not mask.any():
            continue
        instances.append(
            InstanceAnnotation(
                instance_id=instance_id,
                mask=mask,
                bbox=mask_to_bbox(mask),
                area=int(mask.sum()),
            )
        )

    return FrameRecord(
        frame_id=frame_id if frame_id is not None else f"scene-{seed}",
        image=image,
        instances=tuple(instances),
        tags=frozenset(a.kind for a in artifacts),
    )
