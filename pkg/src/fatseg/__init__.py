"""Unsupervised separation of subcutaneous and visceral fat in abdominal CT."""

from .pipeline import PipelineConfig, segment_slice, segment_volume
from .volume_io import Label, MaskGrid, VolumeGrid, VoxelSpacing

__version__ = "0.1.0"

__all__ = [
    "Label",
    "MaskGrid",
    "PipelineConfig",
    "VolumeGrid",
    "VoxelSpacing",
    "segment_slice",
    "segment_volume",
]
