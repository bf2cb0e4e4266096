"""Hyperspectral denoising: low-rank factorisation with PAN-weighted TV on the spatial factor."""

from .cubeio import read_cube, read_pan, write_cube
from .metrics import MetricsReport, ergas, evaluate, psnr, sam, ssim
from .noise import NoiseSpec, corrupt
from .solver import (DenoiseResult, IterationTrace, NumericalError, SolverConfig, SolverState,
                     WeightsMode, denoise, rctv_denoise, recommended_config)
from .synthetic import lowrank_scene
from .tensor import GradientPair, HyperCube, PanImage, divergence, fold3, gradient, pan_resample, unfold3

__version__ = "0.1.0"

__all__ = [
    "DenoiseResult", "GradientPair", "HyperCube", "IterationTrace", "MetricsReport", "NoiseSpec",
    "NumericalError", "PanImage", "SolverConfig", "SolverState", "WeightsMode", "corrupt",
    "denoise", "divergence", "ergas", "evaluate", "fold3", "gradient", "pan_resample", "psnr",
    "lowrank_scene", "rctv_denoise", "read_cube", "read_pan", "recommended_config", "sam", "ssim",
    "unfold3", "write_cube",
]
