"""Prototype-based instance segmentation of surgical instruments at desk scale.

Subpackages
-----------
data      dataset representation, COCO-style import/export, splits
synth     synthetic surgical-scene generator and augmentation pipeline
model     backbone, FPN, attention modules, multi-scale fusion, heads
train     anchor matching, losses, SGD, training loop
metrics   multi-instance dice / surface dice, percentile aggregation,
          bootstrap ranking, FPS protocol
kernels   compiled per-pixel kernels with a numpy fallback
"""

__version__ = "0.1.0"
