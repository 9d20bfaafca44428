from .matching import IGNORED, NEGATIVE, MatchResult, match_anchors
from .losses import LossWeights, loss_box, loss_cls, loss_mask, loss_seg, total_loss
from .sgd import SGD, sgd_step
from .checkpoint import load_checkpoint, load_into, save_checkpoint
from .loop import TrainConfig, train

__all__ = [
    "MatchResult",
    "match_anchors",
    "NEGATIVE",
    "IGNORED",
    "LossWeights",
    "loss_cls",
    "loss_box",
    "loss_mask",
    "loss_seg",
    "total_loss",
    "sgd_step",
    "SGD",
    "save_checkpoint",
    "load_checkpoint",
    "load_into",
    "TrainConfig",
    "train",
]
