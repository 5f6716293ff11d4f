"""End-to-end separation pipeline shared by the CLI and the test suite."""

from dataclasses import dataclass, field

import numpy as np

from . import hullfit, imaging, kernels, separate, spectral
from .defaults import default_bases, default_response
from .errors import InputError
from .hullfit import LightEstimate, RansacConfig
from .imaging import ImagePair


@dataclass(frozen=True)
class PipelineConfig:
    n: int = 2
    bins: int = hullfit.DEFAULT_BINS
    min_bin_count: int = hullfit.DEFAULT_MIN_COUNT
    dark_threshold: float = imaging.DEFAULT_DARK_THRESHOLD
    cond_limit: float = imaging.DEFAULT_COND_LIMIT
    ransac: RansacConfig = field(default_factory=RansacConfig)
    seed: int = 0

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise InputError(f"light count {self.n} not in {{1, 2, 3}}")
        for name in ("bins", "min_bin_count", "dark_threshold", "cond_limit"):
            if getattr(self, name) <= 0:
                raise InputError(f"{name} must be positive")


@dataclass(frozen=True)
class PipelineArtifacts:
    pureflash: np.ndarray
    alpha: imaging.AlphaField
    gamma: imaging.GammaField
    histogram: hullfit.SphereHistogram
    pruned: hullfit.PrunedSet
    lights: LightEstimate
    shading: separate.ShadingField
    result: separate.SeparationResult
    coupling: spectral.CouplingTensor
    flash_coeffs: spectral.FlashCoefficients


def run_separation(
    noflash,
    flash=None,
    cfg: PipelineConfig = PipelineConfig(),
    refl_basis=None,
    illum_basis=None,
    response=None,
    pure_flash_image=None,
    lights: LightEstimate | None = None,
) -> PipelineArtifacts:
    """Pure-flash -> alpha -> gamma -> histogram -> corners -> shading -> layers.

    Either `flash` or a precomputed `pure_flash_image` (sun/sky mode) must be
    supplied.  Pass `lights` to skip estimation and separate with known
    coefficients.
    """
    if refl_basis is None or illum_basis is None:
        d_refl, d_illum = default_bases()
        refl_basis = refl_basis or d_refl
        illum_basis = illum_basis or d_illum
    response = response or default_response()

    coupling = spectral.compute_coupling(refl_basis, illum_basis, response)
    flash_coeffs = spectral.flash_coefficients(illum_basis)

    if pure_flash_image is not None:
        pureflash = imaging.validate_linear_image(pure_flash_image, "pure flash")
        imaging.validate_linear_image(noflash, "noflash")
        if pureflash.shape != np.asarray(noflash).shape:
            raise InputError("pure-flash image dimensions differ from noflash")
    elif flash is not None:
        pureflash = imaging.pure_flash(ImagePair(flash=flash, noflash=noflash))
    else:
        raise InputError("need a flash image or a pure-flash image")

    alpha = imaging.solve_alpha(pureflash, coupling, flash_coeffs, cfg.dark_threshold)
    gamma = imaging.solve_beta_gamma(noflash, alpha, coupling, cfg.cond_limit)

    hist = hullfit.build_histogram(gamma, cfg.bins)
    pruned = hullfit.prune(hist, cfg.min_bin_count)
    if lights is None:
        lights = hullfit.estimate_lights(pruned, cfg.n, cfg.ransac)

    shading = separate.relative_shading(gamma, lights)
    result = separate.separate_images(
        noflash, alpha, gamma, shading, lights, coupling
    )
    return PipelineArtifacts(
        pureflash=pureflash,
        alpha=alpha,
        gamma=gamma,
        histogram=hist,
        pruned=pruned,
        lights=lights,
        shading=shading,
        result=result,
        coupling=coupling,
        flash_coeffs=flash_coeffs,
    )


def separation_manifest(artifacts: PipelineArtifacts, cfg: PipelineConfig, layer_names, shading_names):
    """JSON-serializable manifest describing one pipeline run."""
    shading = artifacts.result.shading
    total = int(shading.mask.size)
    valid = int(np.count_nonzero(shading.mask))
    flagged = int(np.count_nonzero(shading.flagged))
    res = artifacts.shading.residual[shading.mask]
    return {
        "format": "lumisep-separation-1",
        "n": artifacts.lights.count,
        "lights": artifacts.lights.to_json_dict(),
        "layers": list(layer_names),
        "shading": list(shading_names),
        "pixels": {"total": total, "valid": valid, "flagged": flagged},
        "residual": {
            "mean": float(res.mean()) if valid else 0.0,
            "max": float(res.max()) if valid else 0.0,
            "p99": float(np.percentile(res, 99)) if valid else 0.0,
        },
        "config": {
            "n": cfg.n,
            "bins": cfg.bins,
            "min_bin_count": cfg.min_bin_count,
            "dark_threshold": cfg.dark_threshold,
            "cond_limit": cfg.cond_limit,
            "ransac": {
                "inlier_angle_deg": cfg.ransac.inlier_angle_deg,
                "iterations": cfg.ransac.iterations,
                "seed": cfg.ransac.seed,
            },
            "seed": cfg.seed,
        },
        "backend": kernels.active_backend(),
    }


def default_presets(illum_basis=None):
    """Named coefficient presets for the editor, derived from the basis."""
    from .defaults import data_path

    if illum_basis is None:
        _, illum_basis = default_bases()
    names = {
        "warm": "blackbody_2700k",
        "neutral": "blackbody_5600k",
        "cool": "skylight_blue",
        "flat": "flat",
    }
    presets = []
    for label, stem in names.items():
        curve = spectral.read_spectrum_csv(data_path("illuminants", stem + ".csv"))
        c = spectral.project_spectrum(curve, illum_basis)
        norm = np.linalg.norm(c)
        if norm <= 0:
            continue
        presets.append({"name": label, "coefficients": [float(v) for v in c / norm]})
    return presets
