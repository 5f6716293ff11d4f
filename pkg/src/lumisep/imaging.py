"""Per-pixel image algebra: pure-flash, scaled reflectance coefficients,
and the reflectance-invariant unit field with its norm.

Linear images are (H, W, 3) float arrays in linear radiometric units,
non-negative and finite.  Fields carry an (H, W) validity mask; invalid
pixels hold zeros.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, InputError, SingularCoupling
from .spectral import CouplingTensor, FlashCoefficients

DEFAULT_DARK_THRESHOLD = 1e-3
DEFAULT_COND_LIMIT = 1e6


def validate_linear_image(image, name="image"):
    """(H, W, 3), finite, non-negative."""
    arr = np.asarray(image, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionMismatch(f"{name} must be (H, W, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite values")
    if arr.min() < 0:
        raise InputError(f"{name} has negative values")
    return arr


@dataclass(frozen=True)
class ImagePair:
    """Aligned flash / no-flash exposure pair."""

    flash: np.ndarray
    noflash: np.ndarray

    def __post_init__(self):
        f = validate_linear_image(self.flash, "flash")
        n = validate_linear_image(self.noflash, "noflash")
        if f.shape != n.shape:
            raise DimensionMismatch(
                f"flash {f.shape} and noflash {n.shape} dimensions differ"
            )
        object.__setattr__(self, "flash", f)
        object.__setattr__(self, "noflash", n)


@dataclass(frozen=True)
class AlphaField:
    """Reflectance coefficients scaled by the per-pixel flash shading."""

    alpha: np.ndarray  # (H, W, 3)
    mask: np.ndarray  # (H, W) bool

    @property
    def normalized(self):
        """alpha / |alpha| on valid pixels, zeros elsewhere."""
        norm = np.linalg.norm(self.alpha, axis=2)
        out = np.zeros_like(self.alpha)
        m = self.mask & (norm > 0)
        out[m] = self.alpha[m] / norm[m, None]
        return out


@dataclass(frozen=True)
class GammaField:
    """Unit reflectance-invariant per pixel, plus the pre-normalization norm."""

    gamma: np.ndarray  # (H, W, 3), unit on valid pixels
    beta_norm: np.ndarray  # (H, W)
    mask: np.ndarray  # (H, W) bool


def pure_flash(pair: ImagePair) -> np.ndarray:
    """Flash minus no-flash, negative residues clamped to zero."""
    return np.maximum(pair.flash - pair.noflash, 0.0)


def solve_alpha(
    pure_flash_image,
    coupling: CouplingTensor,
    flash: FlashCoefficients,
    dark_threshold: float = DEFAULT_DARK_THRESHOLD,
) -> AlphaField:
    """Invert the pure-flash model I_pf^k = alpha . (E^k f) per pixel.

    Pixels whose pure-flash intensity falls below dark_threshold times the
    image maximum are masked out.
    """
    img = validate_linear_image(pure_flash_image, "pure flash")
    m = np.stack([coupling[k] @ flash.f for k in range(3)])  # rows (E^k f)^T
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > 1e6:
        raise SingularCoupling(f"flash coupling matrix condition {cond:.3g}")

    h, w, _ = img.shape
    alpha = img.reshape(-1, 3) @ np.linalg.inv(m).T

    peak = img.max()
    bright = np.max(np.abs(img), axis=2) >= dark_threshold * peak
    mask = bright & (np.linalg.norm(alpha.reshape(h, w, 3), axis=2) > 0)
    out = alpha.reshape(h, w, 3).copy()
    out[~mask] = 0.0
    return AlphaField(alpha=out, mask=mask)


def solve_beta_gamma(
    noflash,
    alpha: AlphaField,
    coupling: CouplingTensor,
    cond_limit: float = DEFAULT_COND_LIMIT,
) -> GammaField:
    """Per-pixel solve of rows (alphahat^T E^k) beta = I_nf; normalize beta.

    Pixels with an ill-conditioned system or vanishing beta are masked out;
    there are no hard per-pixel failures.
    """
    img = validate_linear_image(noflash, "noflash")
    if img.shape[:2] != alpha.mask.shape:
        raise DimensionMismatch("noflash and alpha field dimensions differ")
    h, w, _ = img.shape
    alphahat = alpha.normalized.reshape(-1, 3)
    gamma, beta_norm, ok = kernels.solve_beta_gamma(
        np.ascontiguousarray(img.reshape(-1, 3)),
        np.ascontiguousarray(alphahat),
        np.ascontiguousarray(alpha.mask.reshape(-1)),
        coupling.tensor,
        float(cond_limit),
    )
    return GammaField(
        gamma=gamma.reshape(h, w, 3),
        beta_norm=beta_norm.reshape(h, w),
        mask=ok.reshape(h, w),
    )
