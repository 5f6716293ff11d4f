"""Flash/no-flash illuminant source separation.

From an aligned linear flash/no-flash pair: recover per-illuminant
spectral coefficients and per-pixel relative shading, split the no-flash
image into per-light layers, and drive relighting, white balance, and
photometric stereo.
"""

from . import apps, hullfit, imaging, pfm, separate, spectral, synth
from .kernels import active_backend
from .pipeline import PipelineArtifacts, PipelineConfig, run_separation

__version__ = "0.1.0"

__all__ = [
    "apps",
    "hullfit",
    "imaging",
    "pfm",
    "separate",
    "spectral",
    "synth",
    "active_backend",
    "PipelineArtifacts",
    "PipelineConfig",
    "run_separation",
    "__version__",
]
