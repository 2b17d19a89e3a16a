"""Python bindings for the voxsr super-resolution toolkit.

Volumes are float32 arrays indexed ``[z, y, x]``; series add a leading time
axis. Errors from the core surface as the exception classes below.
"""

from ._core import (
    AnalysisError,
    ArgumentError,
    ConfigError,
    DivergenceError,
    FormatError,
    IoError,
    SizeError,
    acc_fdr,
    automask,
    degrade,
    infer,
    jaccard,
    phantom,
    psnr,
    read_series,
    seed_correlation,
    ssim3d,
    tv_value,
    upsample,
    write_series,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "ArgumentError",
    "ConfigError",
    "DivergenceError",
    "FormatError",
    "IoError",
    "SizeError",
    "acc_fdr",
    "automask",
    "degrade",
    "infer",
    "jaccard",
    "phantom",
    "psnr",
    "read_series",
    "seed_correlation",
    "ssim3d",
    "tv_value",
    "upsample",
    "write_series",
]
