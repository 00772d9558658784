"""Frequency-domain scene motion: spectral volumes extracted from video,
single-image animation via motion-weighted splatting, seamless-loop
projection with guided diffusion sampling, and interactive modal dynamics.
"""

from .errors import DataError, DimensionMismatchError
from .flow import FlowParams, estimate_flow, extract_trajectories, filter_sample
from .modal import (
    ForceEvent,
    ModalState,
    OscillatorParams,
    SessionLoop,
    displacement_field,
    project_force,
    simulate,
    step,
)
from .normalize import (
    NormalizationStats,
    compute_stats,
    denormalize,
    naive_scale,
    normalize,
)
from .render import RenderConfig, animate, compute_weights, softmax_splat, synthesize_frame
from .sampling import (
    GaussianOracleDenoiser,
    GuidanceConfig,
    LatentBatch,
    NoiseSchedule,
    ddim_step,
    guided_epsilon,
    loop_loss,
    sample_looping,
)
from .spectral import (
    MotionTexture,
    SpectralVolume,
    SpectrumStats,
    average_power_spectrum,
    fft_forward,
    ifft_inverse,
    truncate,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DimensionMismatchError",
    "FlowParams",
    "ForceEvent",
    "GaussianOracleDenoiser",
    "GuidanceConfig",
    "LatentBatch",
    "ModalState",
    "MotionTexture",
    "NoiseSchedule",
    "NormalizationStats",
    "OscillatorParams",
    "RenderConfig",
    "SessionLoop",
    "SpectralVolume",
    "SpectrumStats",
    "animate",
    "average_power_spectrum",
    "compute_stats",
    "compute_weights",
    "ddim_step",
    "denormalize",
    "displacement_field",
    "estimate_flow",
    "extract_trajectories",
    "fft_forward",
    "filter_sample",
    "guided_epsilon",
    "ifft_inverse",
    "loop_loss",
    "naive_scale",
    "normalize",
    "project_force",
    "sample_looping",
    "simulate",
    "softmax_splat",
    "step",
    "synthesize_frame",
    "truncate",
]
