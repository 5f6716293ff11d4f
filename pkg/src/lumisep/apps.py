"""Downstream applications: relighting, white balance, photometric stereo,
and the on-disk relight bundle consumed by the browser editor.

Bundle layout (format "lsrb-1"): a directory with manifest.json plus one
raw blob per light (little-endian float32, row-major, 9 values per pixel
in row order M[0,0..2], M[1,0..2], M[2,0..2]).
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    CountMismatch,
    DegenerateDirections,
    DimensionMismatch,
    InputError,
    MalformedHeader,
    TruncatedData,
)
from .hullfit import LightEstimate
from .imaging import AlphaField, GammaField
from .separate import ShadingField
from .spectral import CouplingTensor, FlashCoefficients

BUNDLE_FORMAT = "lsrb-1"


@dataclass(frozen=True)
class RelightEdit:
    """Per-light brightness and target coefficients."""

    brightness: np.ndarray  # (N,) >= 0
    coefficients: np.ndarray  # (N, 3) unit

    def __post_init__(self):
        mu = np.asarray(self.brightness, dtype=float).reshape(-1)
        b = np.asarray(self.coefficients, dtype=float).reshape(-1, 3)
        if mu.shape[0] != b.shape[0]:
            raise CountMismatch("brightness and coefficients differ in length")
        if np.any(mu < 0):
            raise InputError("brightness must be non-negative")
        if np.any(np.abs(np.linalg.norm(b, axis=1) - 1.0) > 1e-9):
            raise InputError("edit coefficients must be unit norm")
        object.__setattr__(self, "brightness", mu)
        object.__setattr__(self, "coefficients", b)


@dataclass(frozen=True)
class RelightBundle:
    """Per-pixel per-light 3x3 mixing matrices: render = sum mu_j M_j(p) btilde_j."""

    width: int
    height: int
    count: int
    lights: np.ndarray  # (N, 3) estimated coefficients
    matrices: np.ndarray  # (N, H, W, 3, 3)


@dataclass(frozen=True)
class NormalMap:
    normals: np.ndarray  # (H, W, 3) unit, z >= 0 where valid
    albedo: np.ndarray  # (H, W)
    mask: np.ndarray  # (H, W) bool
    residual: np.ndarray  # (H, W) per-pixel least-squares residual


def build_relight_bundle(
    alpha: AlphaField,
    gamma: GammaField,
    shading: ShadingField,
    lights: LightEstimate,
    coupling: CouplingTensor,
) -> RelightBundle:
    h, w = alpha.mask.shape
    if gamma.mask.shape != (h, w) or shading.mask.shape != (h, w):
        raise DimensionMismatch("field dimensions disagree")
    valid = alpha.mask & gamma.mask & shading.mask
    m = kernels.build_bundle_matrices(
        np.ascontiguousarray(alpha.normalized.reshape(-1, 3)),
        np.ascontiguousarray(gamma.beta_norm.reshape(-1)),
        np.ascontiguousarray(shading.z.reshape(-1, lights.count)),
        np.ascontiguousarray(valid.reshape(-1)),
        coupling.tensor,
    )
    return RelightBundle(
        width=w,
        height=h,
        count=lights.count,
        lights=lights.coefficients.copy(),
        matrices=m.reshape(lights.count, h, w, 3, 3),
    )


def relight(bundle: RelightBundle, edit: RelightEdit) -> np.ndarray:
    """Evaluate the edit through the bundle; clamped linear image."""
    if edit.brightness.shape[0] != bundle.count:
        raise CountMismatch(
            f"edit has {edit.brightness.shape[0]} entries for {bundle.count} lights"
        )
    out = kernels.composite_bundle(
        np.ascontiguousarray(bundle.matrices.reshape(bundle.count, -1, 3, 3)),
        np.ascontiguousarray(edit.brightness),
        np.ascontiguousarray(edit.coefficients),
    )
    return out.reshape(bundle.height, bundle.width, 3)


def identity_edit(bundle: RelightBundle) -> RelightEdit:
    return RelightEdit(
        brightness=np.ones(bundle.count), coefficients=bundle.lights.copy()
    )


def white_balance(bundle: RelightBundle, flash: FlashCoefficients) -> np.ndarray:
    """Re-render every light with the flat (flash) spectrum, keeping shading."""
    edit = RelightEdit(
        brightness=np.ones(bundle.count),
        coefficients=np.tile(flash.f, (bundle.count, 1)),
    )
    return relight(bundle, edit)


def photometric_stereo(
    shading_images,
    directions,
    min_valid: int = 3,
    shadow_fraction: float = 0.01,
    cond_limit: float = 1e12,
) -> NormalMap:
    """Calibrated Lambertian normals from per-light shading images.

    Each image holds the albedo-scaled shading of one light; values below
    shadow_fraction of that image's maximum are treated as shadowed and
    dropped from the per-pixel solve.
    """
    imgs = [np.asarray(s, dtype=float) for s in shading_images]
    dirs = np.asarray(directions, dtype=float).reshape(-1, 3)
    if len(imgs) != dirs.shape[0]:
        raise DimensionMismatch("one direction per shading image required")
    if len(imgs) < 3:
        raise DegenerateDirections("need at least 3 lights")
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    if np.linalg.svd(dirs, compute_uv=False)[-1] <= 1e-3:
        raise DegenerateDirections("light directions are linearly dependent")
    shape = imgs[0].shape
    for s in imgs:
        if s.shape != shape:
            raise DimensionMismatch("shading images differ in shape")

    meas = np.stack([s.reshape(-1) for s in imgs], axis=1)
    thresh = shadow_fraction * np.array([max(float(s.max()), 0.0) for s in imgs])
    normals, albedo, ok, resid = kernels.photometric_stereo_solve(
        np.ascontiguousarray(meas),
        np.ascontiguousarray(dirs),
        np.ascontiguousarray(thresh),
        int(min_valid),
        float(cond_limit),
    )
    h, w = shape
    return NormalMap(
        normals=normals.reshape(h, w, 3),
        albedo=albedo.reshape(h, w),
        mask=ok.reshape(h, w),
        residual=resid.reshape(h, w),
    )


# --- bundle persistence ----------------------------------------------------


def save_bundle(bundle: RelightBundle, directory, presets=None):
    """Write manifest.json plus one float32 blob per light."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": BUNDLE_FORMAT,
        "width": bundle.width,
        "height": bundle.height,
        "n": bundle.count,
        "lights": [[float(v) for v in row] for row in bundle.lights],
        "blobs": [f"light_{j}.bin" for j in range(bundle.count)],
    }
    if presets:
        manifest["presets"] = presets
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    for j in range(bundle.count):
        blob = bundle.matrices[j].reshape(-1).astype("<f4")
        (directory / f"light_{j}.bin").write_bytes(blob.tobytes())


def load_bundle(directory) -> RelightBundle:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise MalformedHeader(f"missing {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != BUNDLE_FORMAT:
        raise MalformedHeader(
            f"unsupported bundle format {manifest.get('format')!r}"
        )
    w, h, n = int(manifest["width"]), int(manifest["height"]), int(manifest["n"])
    blobs = manifest.get("blobs", [])
    if len(blobs) != n:
        raise TruncatedData(f"manifest lists {len(blobs)} blobs for n={n}")
    expected = w * h * 9 * 4
    mats = np.empty((n, h, w, 3, 3))
    for j, name in enumerate(blobs):
        raw = (directory / name).read_bytes()
        if len(raw) != expected:
            raise TruncatedData(
                f"{name}: {len(raw)} bytes, expected {expected}"
            )
        mats[j] = np.frombuffer(raw, dtype="<f4").astype(float).reshape(h, w, 3, 3)
    lights = np.asarray(manifest["lights"], dtype=float)
    return RelightBundle(width=w, height=h, count=n, lights=lights, matrices=mats)
