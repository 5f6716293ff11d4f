"""Synthetic forward model: render flash/no-flash pairs with full ground truth.

Scenes are fully specified (normals, reflectance coefficients, lights,
occlusion masks, flash) and rendered by integrating the reconstructed
spectra against the camera response.  Generators keep every spectrum
inside the fitted subspaces and non-negative, so the rendered pair
satisfies the pipeline's model exactly; this is what makes the noiseless
round-trip tests meaningful.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import spectral
from .errors import (
    DegenerateDirections,
    DimensionMismatch,
    GridMismatch,
    InputError,
    InvalidCount,
    ZeroTruth,
)
from .imaging import GammaField
from .spectral import CameraResponse, SpectralBasis, grid_measure

FLASH_COLLOCATED = "collocated-directional"
FLASH_UNIFORM = "uniform"


@dataclass(frozen=True)
class Light:
    direction: np.ndarray  # unit 3-vector
    coeffs: np.ndarray  # unit 3-vector in the illumination basis
    intensity: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        c = np.asarray(self.coeffs, dtype=float)
        if d.shape != (3,) or c.shape != (3,):
            raise InputError("light direction and coeffs must be 3-vectors")
        if abs(np.linalg.norm(c) - 1.0) > 1e-9:
            raise InputError("light coefficients must be unit norm")
        if self.intensity < 0:
            raise InputError("light intensity must be non-negative")
        object.__setattr__(self, "direction", d / np.linalg.norm(d))
        object.__setattr__(self, "coeffs", c)


@dataclass(frozen=True)
class FlashSpec:
    mode: str = FLASH_COLLOCATED
    intensity: float = 1.0

    def __post_init__(self):
        if self.mode not in (FLASH_COLLOCATED, FLASH_UNIFORM):
            raise InputError(f"unknown flash mode {self.mode!r}")
        if self.intensity < 0:
            raise InputError("flash intensity must be non-negative")


@dataclass(frozen=True)
class SceneSpec:
    normals: np.ndarray  # (H, W, 3) unit
    refl_coeffs: np.ndarray  # (H, W, 3)
    lights: tuple  # of Light
    occlusion: np.ndarray  # (H, W, N) in [0, 1]; 1 = fully lit
    flash: FlashSpec

    def __post_init__(self):
        n = np.asarray(self.normals, dtype=float)
        a = np.asarray(self.refl_coeffs, dtype=float)
        occ = np.asarray(self.occlusion, dtype=float)
        if n.ndim != 3 or n.shape[2] != 3:
            raise DimensionMismatch("normals must be (H, W, 3)")
        if a.shape != n.shape:
            raise DimensionMismatch("refl_coeffs must match normals")
        if occ.shape != (n.shape[0], n.shape[1], len(self.lights)):
            raise DimensionMismatch("occlusion must be (H, W, n_lights)")
        if occ.min() < 0 or occ.max() > 1:
            raise InputError("occlusion values must lie in [0, 1]")
        object.__setattr__(self, "normals", n)
        object.__setattr__(self, "refl_coeffs", a)
        object.__setattr__(self, "occlusion", occ)
        object.__setattr__(self, "lights", tuple(self.lights))


@dataclass(frozen=True)
class GroundTruth:
    noflash: np.ndarray
    flash: np.ndarray
    pureflash: np.ndarray
    layers: np.ndarray  # (N, H, W, 3); sums to noflash bit-for-bit
    gamma_true: GammaField
    shading_true: np.ndarray  # (H, W, N) eta values


def render(
    scene: SceneSpec,
    refl_basis: SpectralBasis,
    illum_basis: SpectralBasis,
    response: CameraResponse,
) -> GroundTruth:
    """Forward-render the scene and every intermediate the pipeline estimates."""
    wl = response.wavelengths
    if not (
        np.array_equal(wl, refl_basis.wavelengths)
        and np.array_equal(wl, illum_basis.wavelengths)
    ):
        raise GridMismatch("bases and response must share one grid")

    h, w, _ = scene.normals.shape
    nl = len(scene.lights)
    tau = grid_measure(wl)
    s = response.stacked()  # (3, L)

    # reflectance curves, clamped at zero before integration
    a = scene.refl_coeffs.reshape(-1, 3)
    refl = np.maximum(a @ refl_basis.vectors, 0.0)  # (P, L)

    cos = np.einsum("hwc,nc->hwn", scene.normals, np.stack([l.direction for l in scene.lights])) if nl else np.zeros((h, w, 0))
    eta = scene.occlusion * np.maximum(cos, 0.0)
    eta = eta * np.array([l.intensity for l in scene.lights]).reshape(1, 1, -1) if nl else eta

    layers = np.zeros((nl, h, w, 3))
    for i, light in enumerate(scene.lights):
        spd = light.coeffs @ illum_basis.vectors  # in-span SPD, (L,)
        chan = refl @ (tau * s * spd).T  # (P, 3)
        layers[i] = eta[:, :, i : i + 1] * chan.reshape(h, w, 3)

    noflash = layers.sum(axis=0) if nl else np.zeros((h, w, 3))

    flash_coeff = spectral.flash_coefficients(illum_basis)
    flash_spd = flash_coeff.f @ illum_basis.vectors
    flash_chan = (refl @ (tau * s * flash_spd).T).reshape(h, w, 3)
    if scene.flash.mode == FLASH_COLLOCATED:
        eta_f = scene.flash.intensity * np.maximum(scene.normals[:, :, 2], 0.0)
    else:
        eta_f = np.full((h, w), scene.flash.intensity)
    flash = noflash + eta_f[:, :, None] * flash_chan
    pureflash = flash - noflash

    b = np.stack([l.coeffs for l in scene.lights]) if nl else np.zeros((0, 3))
    mix = np.einsum("hwn,nc->hwc", eta, b)
    mix_norm = np.linalg.norm(mix, axis=2)
    a_norm = np.linalg.norm(scene.refl_coeffs, axis=2)
    mask = (mix_norm > 0) & (a_norm > 0)
    gamma = np.zeros((h, w, 3))
    gamma[mask] = mix[mask] / mix_norm[mask, None]
    gamma_true = GammaField(
        gamma=gamma, beta_norm=np.where(mask, a_norm * mix_norm, 0.0), mask=mask
    )
    return GroundTruth(
        noflash=noflash,
        flash=flash,
        pureflash=pureflash,
        layers=layers,
        gamma_true=gamma_true,
        shading_true=eta,
    )


def nmse(estimate, truth) -> float:
    """Sum of squared error over sum of squared truth, all channels pooled."""
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise DimensionMismatch(f"shapes differ: {est.shape} vs {tru.shape}")
    denom = float(np.sum(tru * tru))
    if denom == 0.0:
        raise ZeroTruth("reference image is identically zero")
    return float(np.sum((est - tru) ** 2) / denom)


def add_noise(image, sigma, seed=0):
    """Additive Gaussian noise in linear units, clipped at zero."""
    rng = np.random.default_rng(seed)
    return np.maximum(image + rng.normal(0.0, sigma, image.shape), 0.0)


# --- generators ----------------------------------------------------------


def _rotate_towards(center, axis_u, axis_v, angle_rad, azimuth_rad):
    """Point at `angle_rad` from center along the given tangent azimuth."""
    t = math.cos(azimuth_rad) * axis_u + math.sin(azimuth_rad) * axis_v
    return math.cos(angle_rad) * center + math.sin(angle_rad) * t


def _tangent_frame(center):
    helper = np.array([0.0, 0.0, 1.0])
    if abs(center @ helper) > 0.9:
        helper = np.array([1.0, 0.0, 0.0])
    u = np.cross(helper, center)
    u /= np.linalg.norm(u)
    v = np.cross(center, u)
    return u, v


def _physical_light_coeffs(n, separation_deg, illum_basis, rng):
    """n unit coefficient vectors with the requested pairwise separation,
    all reconstructing to non-negative SPDs."""
    flat = spectral.flash_coefficients(illum_basis).f
    sep = math.radians(separation_deg)

    for attempt in range(64):
        azim = rng.uniform(0.0, 2.0 * math.pi)
        u, v = _tangent_frame(flat)
        if n == 1:
            cand = [_rotate_towards(flat, u, v, rng.uniform(0.0, 0.1), azim)]
        elif n == 2:
            cand = [
                _rotate_towards(flat, u, v, sep / 2.0, azim),
                _rotate_towards(flat, u, v, sep / 2.0, azim + math.pi),
            ]
        elif n == 3:
            # cone half-angle psi giving pairwise separation sep at 120deg azimuths
            cos_sep = math.cos(sep)
            cos2 = (cos_sep + 0.5) / 1.5  # cos^2(psi) from cos_sep = cos^2 - 0.5 sin^2
            psi = math.acos(math.sqrt(cos2))
            cand = [
                _rotate_towards(flat, u, v, psi, azim + k * 2.0 * math.pi / 3.0)
                for k in range(3)
            ]
        else:
            raise InvalidCount(f"light count {n} not in {{1, 2, 3}}")
        cand = [c / np.linalg.norm(c) for c in cand]
        spds = np.stack(cand) @ illum_basis.vectors
        if spds.min() >= 0.0:
            return cand
    raise InputError(
        f"could not place {n} physical lights {separation_deg} deg apart"
    )


def _physical_refl_coeffs(refl_basis, rng, count):
    """Coefficient vectors whose reconstructed reflectances stay in (0, 1)."""
    from .defaults import default_reflectance_database

    db = default_reflectance_database()
    gray = spectral.project_spectrum(db[np.argmin([c.values.std() for c in db])], refl_basis)
    out = []
    for _ in range(count):
        curve = db[rng.integers(0, len(db))]
        a = spectral.project_spectrum(curve, refl_basis) * rng.uniform(0.5, 1.0)
        for _ in range(8):
            rec = a @ refl_basis.vectors
            if rec.min() >= 0.01 and rec.max() <= 0.99:
                break
            a = 0.7 * a + 0.3 * gray * (np.linalg.norm(a) / np.linalg.norm(gray))
        out.append(a)
    return np.stack(out)


def make_pure_pixel_scene(
    n: int, separation_deg: float, size: int = 256, seed: int = 0
) -> SceneSpec:
    """Piecewise scene guaranteeing pure pixels for each of the n lights.

    Horizontal strips occlude all other lights so each light owns at least
    2% of the pixels outright; the remaining area mixes the lights through
    blocky occlusion levels (concentrated histogram bins).  Deterministic
    for a given seed.
    """
    if n not in (1, 2, 3):
        raise InvalidCount(f"light count {n} not in {{1, 2, 3}}")
    from .defaults import default_bases

    refl_basis, illum_basis = default_bases()
    rng = np.random.default_rng(seed)

    coeffs = _physical_light_coeffs(n, separation_deg, illum_basis, rng)
    # equal zenith angles keep per-pixel shading ratios moderate, so
    # mixture directions stay several degrees away from the hull corners
    # and cannot bias the corner histogram bins
    zen = math.radians(20.0)
    az0 = rng.uniform(0.0, 2.0 * math.pi)
    dirs = [
        np.array(
            [
                math.sin(zen) * math.cos(az0 + i * 2.0 * math.pi / max(n, 2)),
                math.sin(zen) * math.sin(az0 + i * 2.0 * math.pi / max(n, 2)),
                math.cos(zen),
            ]
        )
        for i in range(n)
    ]
    lights = tuple(
        Light(direction=dirs[i], coeffs=coeffs[i], intensity=rng.uniform(0.9, 1.1))
        for i in range(n)
    )

    yy, xx = np.mgrid[0:size, 0:size]
    k1, k2 = rng.integers(1, 4, size=2)
    p1, p2 = rng.uniform(0, 2 * math.pi, size=2)
    normals = np.stack(
        [
            0.12 * np.sin(2 * math.pi * k1 * xx / size + p1),
            0.12 * np.sin(2 * math.pi * k2 * yy / size + p2),
            np.ones((size, size)),
        ],
        axis=2,
    )
    normals /= np.linalg.norm(normals, axis=2, keepdims=True)

    block = max(size // 16, 4)
    nb = (size + block - 1) // block
    palette = _physical_refl_coeffs(refl_basis, rng, nb * nb)
    bidx = (yy // block) * nb + (xx // block)
    refl_coeffs = palette[bidx]

    # binary blocky occlusion: pixels are either pure (one light) or an
    # honest mixture well inside the hull; no near-pure pixels exist that
    # could leak into the corner bins and bias their means
    occ_block = max(size // 8, 8)
    nob = (size + occ_block - 1) // occ_block
    occ = (rng.random((nob, nob, n)) < 0.72).astype(float)
    keep = occ.max(axis=2) < 0.5
    occ[keep, rng.integers(0, n)] = 1.0  # never a fully dark block
    occlusion = occ[yy // occ_block, xx // occ_block]

    # pure strips: light i alone in strip i
    strip = max(int(0.12 * size), 1)
    for i in range(n):
        rows = slice(i * strip, (i + 1) * strip)
        occlusion[rows, :, :] = 0.0
        occlusion[rows, :, i] = 1.0

    scene = SceneSpec(
        normals=normals,
        refl_coeffs=refl_coeffs,
        lights=lights,
        occlusion=occlusion,
        flash=FlashSpec(mode=FLASH_COLLOCATED, intensity=1.0),
    )

    pure = pure_pixel_fraction(scene)
    if pure.min() < 0.02:
        raise InputError(f"pure-pixel fraction too low: {pure}")
    return scene


def pure_pixel_fraction(scene: SceneSpec):
    """Per-light fraction of pixels lit by that light alone."""
    nl = len(scene.lights)
    cos = np.einsum(
        "hwc,nc->hwn", scene.normals, np.stack([l.direction for l in scene.lights])
    )
    eta = scene.occlusion * np.maximum(cos, 0.0)
    lit = eta > 0
    out = np.empty(nl)
    total = scene.normals.shape[0] * scene.normals.shape[1]
    for i in range(nl):
        others = lit[:, :, [j for j in range(nl) if j != i]].any(axis=2) if nl > 1 else np.zeros(lit.shape[:2], bool)
        out[i] = np.count_nonzero(lit[:, :, i] & ~others) / total
    return out


def make_sphere_scene(lights, radius_frac: float = 0.8, size: int = 128) -> SceneSpec:
    """Analytic sphere on a flat backdrop for photometric-stereo tests."""
    lights = tuple(lights)
    dirs = np.stack([l.direction for l in lights])
    if len(lights) < 3 or np.linalg.svd(dirs, compute_uv=False)[-1] <= 1e-3:
        raise DegenerateDirections("need 3 linearly independent light directions")

    from .defaults import default_bases, default_reflectance_database

    refl_basis, _ = default_bases()

    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    cx = cy = (size - 1) / 2.0
    radius = radius_frac * size / 2.0
    dx = (xx - cx) / radius
    dy = (yy - cy) / radius
    rho2 = dx * dx + dy * dy
    inside = rho2 <= 1.0

    normals = np.zeros((size, size, 3))
    normals[:, :, 2] = 1.0
    nz = np.sqrt(np.maximum(1.0 - rho2, 0.0))
    normals[inside, 0] = dx[inside]
    normals[inside, 1] = dy[inside]
    normals[inside, 2] = nz[inside]

    rng = np.random.default_rng(7)
    sphere_a, back_a = _physical_refl_coeffs(refl_basis, rng, 2)
    # backdrop dimmer than the sphere but bright enough to stay above noise
    back_a = back_a * (
        0.55 * np.linalg.norm(sphere_a) / max(np.linalg.norm(back_a), 1e-12)
    )
    refl_coeffs = np.where(inside[:, :, None], sphere_a, back_a)

    occlusion = np.ones((size, size, len(lights)))
    return SceneSpec(
        normals=normals,
        refl_coeffs=refl_coeffs,
        lights=lights,
        occlusion=occlusion,
        flash=FlashSpec(mode=FLASH_COLLOCATED, intensity=1.0),
    )


# --- persistence -----------------------------------------------------------


def save_scene(scene: SceneSpec, directory):
    """scene.json plus PFM sidecars for the per-pixel maps (float32)."""
    from . import pfm

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "lights": [
            {
                "direction": [float(v) for v in l.direction],
                "coeffs": [float(v) for v in l.coeffs],
                "intensity": float(l.intensity),
            }
            for l in scene.lights
        ],
        "flash": {"mode": scene.flash.mode, "intensity": scene.flash.intensity},
        "occlusion_channels": int(scene.occlusion.shape[2]),
    }
    with open(directory / "scene.json", "w") as fh:
        json.dump(meta, fh, indent=2)
    pfm.write_pfm(scene.normals, directory / "normals.pfm")
    pfm.write_pfm(scene.refl_coeffs, directory / "refl_coeffs.pfm")
    occ3 = np.zeros(scene.occlusion.shape[:2] + (3,))
    occ3[:, :, : scene.occlusion.shape[2]] = scene.occlusion
    pfm.write_pfm(occ3, directory / "occlusion.pfm")


def load_scene(directory) -> SceneSpec:
    from . import pfm

    directory = Path(directory)
    with open(directory / "scene.json") as fh:
        meta = json.load(fh)
    normals = pfm.read_pfm(directory / "normals.pfm")
    normals /= np.linalg.norm(normals, axis=2, keepdims=True)  # float32 rounding
    refl = pfm.read_pfm(directory / "refl_coeffs.pfm")
    occ3 = pfm.read_pfm(directory / "occlusion.pfm")
    nl = meta["occlusion_channels"]
    lights = tuple(
        Light(
            direction=np.array(l["direction"]),
            coeffs=_renorm(np.array(l["coeffs"])),
            intensity=l["intensity"],
        )
        for l in meta["lights"]
    )
    return SceneSpec(
        normals=normals,
        refl_coeffs=refl,
        lights=lights,
        occlusion=np.clip(occ3[:, :, :nl], 0.0, 1.0),
        flash=FlashSpec(mode=meta["flash"]["mode"], intensity=meta["flash"]["intensity"]),
    )


def _renorm(v):
    return v / np.linalg.norm(v)
