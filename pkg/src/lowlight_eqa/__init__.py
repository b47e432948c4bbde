"""Low-light degradation, rule-based QA generation and multiple-choice evaluation for indoor scenes."""

from .color_space import decode_srgb_to_linear, encode_linear_to_srgb, evdrop_srgb
from .degradation import LEVEL_EV, LEVELS, process_dataset, synthesize_pair
from .isp_renderer import render
from .raw_noise import inject_noise, load_profile
from .unprocessor import CameraParams, SamplingConfig, sample_camera_params, unprocess

__version__ = "0.1.0"

__all__ = [
    "CameraParams",
    "LEVELS",
    "LEVEL_EV",
    "SamplingConfig",
    "decode_srgb_to_linear",
    "encode_linear_to_srgb",
    "evdrop_srgb",
    "inject_noise",
    "load_profile",
    "process_dataset",
    "render",
    "sample_camera_params",
    "synthesize_pair",
    "unprocess",
]
