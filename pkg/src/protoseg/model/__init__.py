from .types import FeatureMap
from .backbone import Backbone, BackboneConfig
from .fpn import FPN
from .attention import CBAM, CCAM, AttentionStack, build_attention
from .msff import MSFF
from .anchors import AnchorSet, generate_anchors
from .boxes import (
    boxes_to_centers,
    centers_to_boxes,
    decode_boxes,
    encode_boxes,
)
from .heads import PredictionHead, ProtoNet, assemble_masks, detect
from .network import NetworkConfig, ProtoSegNet

__all__ = [
    "FeatureMap",
    "Backbone",
    "BackboneConfig",
    "FPN",
    "CBAM",
    "CCAM",
    "AttentionStack",
    "build_attention",
    "MSFF",
    "AnchorSet",
    "generate_anchors",
    "encode_boxes",
    "decode_boxes",
    "centers_to_boxes",
    "boxes_to_centers",
    "ProtoNet",
    "PredictionHead",
    "assemble_masks",
    "detect",
    "NetworkConfig",
    "ProtoSegNet",
]
