# Copyright Contributors to the dofsplat project
# SPDX-License-Identifier: Apache-2.0
#
"""Depth-anchored Gaussian splatting with bounded per-pixel offsets.

Images are float64 NumPy arrays: (H, W) for depth and alpha, (H, W, 3) for color.
"""

from ._core import (
    Camera,
    Dataset,
    FormatError,
    Scene,
    SyntheticSpec,
    UnsupportedVersionError,
    align,
    bounded_offset,
    decode_checkpoint,
    default_train_config,
    encode_checkpoint,
    evaluate,
    frustum_contains,
    gradcheck,
    initial_scene,
    load_checkpoint,
    load_dataset,
    pdc,
    project,
    psnr,
    read_camera,
    read_pfm,
    read_ppm,
    render,
    render_resolution_at,
    save_checkpoint,
    sh_degree_at,
    ssim,
    synthesize,
    train,
    training_targets,
    unproject,
    vis_weight,
    write_camera,
    write_dataset,
    write_pfm,
    write_ppm,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
