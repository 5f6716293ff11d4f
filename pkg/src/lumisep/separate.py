"""Per-pixel relative shading under non-negativity, and per-light layers.

The shading solve is a tiny non-negative least squares over at most three
variables, done by exhaustive active-set enumeration (at most seven sign
patterns), so it is exact and deterministic.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import kernels
from .errors import DimensionMismatch
from .hullfit import LightEstimate
from .imaging import AlphaField, GammaField, validate_linear_image
from .spectral import CouplingTensor

RESIDUAL_FLAG_THRESHOLD = 0.05


@dataclass(frozen=True)
class ShadingField:
    """Relative shading per light, with the cone-fit residual per pixel."""

    z: np.ndarray  # (H, W, N), >= 0
    residual: np.ndarray  # (H, W)
    mask: np.ndarray  # (H, W) bool

    @property
    def flagged(self):
        """Model-mismatch pixels (kept, but reported)."""
        return self.mask & (self.residual > RESIDUAL_FLAG_THRESHOLD)


@dataclass(frozen=True)
class SeparationResult:
    layers: np.ndarray  # (N, H, W, 3)
    shading: ShadingField
    lights: LightEstimate


def _nnls_tables(basis):
    """Sign-pattern enumeration tables: subset masks and padded pseudo-inverses."""
    n = basis.shape[1]
    masks, pinvs = [], []
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            mask = np.zeros(n, dtype=np.bool_)
            mask[list(subset)] = True
            pinv = np.zeros((n, 3))
            pinv[list(subset)] = np.linalg.pinv(basis[:, list(subset)])
            masks.append(mask)
            pinvs.append(pinv)
    return np.stack(masks), np.stack(pinvs)


def relative_shading(gamma: GammaField, lights: LightEstimate) -> ShadingField:
    """Solve gamma = sum_i z_i b_i in least squares with z >= 0 per pixel."""
    h, w, _ = gamma.gamma.shape
    basis = np.ascontiguousarray(lights.coefficients.T)  # (3, N)
    masks, pinvs = _nnls_tables(basis)
    z, resid = kernels.nnls_cone(
        np.ascontiguousarray(gamma.gamma.reshape(-1, 3)),
        np.ascontiguousarray(gamma.mask.reshape(-1)),
        basis,
        masks,
        pinvs,
    )
    return ShadingField(
        z=z.reshape(h, w, lights.count),
        residual=resid.reshape(h, w),
        mask=gamma.mask.copy(),
    )


def separate_images(
    noflash,
    alpha: AlphaField,
    gamma: GammaField,
    shading: ShadingField,
    lights: LightEstimate,
    coupling: CouplingTensor,
    normalize_alpha: bool = True,
) -> SeparationResult:
    """Per-light images: layer_j^k = |beta| (alphahat . E^k b_j) z_j, clamped.

    With `normalize_alpha` (the default) the layers sum to the no-flash
    image on zero-residual pixels; the raw-alpha variant is exposed for
    debugging only and scales the sum by |alpha|.
    """
    img = validate_linear_image(noflash, "noflash")
    h, w, _ = img.shape
    if alpha.mask.shape != (h, w) or gamma.mask.shape != (h, w) or shading.mask.shape != (h, w):
        raise DimensionMismatch("field dimensions disagree with the image")
    if shading.z.shape[2] != lights.count:
        raise DimensionMismatch("shading field light count disagrees with estimate")

    avec = alpha.normalized if normalize_alpha else alpha.alpha
    valid = alpha.mask & gamma.mask & shading.mask
    ekb = np.einsum("kmj,nj->nkm", coupling.tensor, lights.coefficients)
    layers = kernels.render_layers(
        np.ascontiguousarray(avec.reshape(-1, 3)),
        np.ascontiguousarray(gamma.beta_norm.reshape(-1)),
        np.ascontiguousarray(shading.z.reshape(-1, lights.count)),
        np.ascontiguousarray(valid.reshape(-1)),
        np.ascontiguousarray(ekb),
    )
    return SeparationResult(
        layers=layers.reshape(lights.count, h, w, 3),
        shading=ShadingField(
            z=shading.z, residual=shading.residual, mask=valid
        ),
        lights=lights,
    )
