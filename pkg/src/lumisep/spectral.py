"""Spectral curves, camera response, weighted-PCA subspaces and coupling matrices.

All curves live on a shared wavelength grid (default 400-700 nm in 10 nm
steps).  Integrals use the trapezoidal rule; the subspace inner product is
<u, v>_w = sum_l tau(l) w(l) u(l) v(l) with tau the trapezoid measure and
w the camera-response weight.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateDatabase,
    GridMismatch,
    InputError,
    ZeroProjection,
)

DEFAULT_WAVELENGTHS = np.arange(400.0, 701.0, 10.0)

REFLECTANCE = "reflectance"
ILLUMINATION = "illumination"


def grid_measure(wavelengths):
    """Trapezoid quadrature weights for a strictly increasing grid."""
    wl = np.asarray(wavelengths, dtype=float)
    tau = np.empty_like(wl)
    tau[0] = (wl[1] - wl[0]) / 2.0
    tau[-1] = (wl[-1] - wl[-2]) / 2.0
    tau[1:-1] = (wl[2:] - wl[:-2]) / 2.0
    return tau


def _check_same_grid(a, b):
    if a.shape != b.shape or not np.array_equal(a, b):
        raise GridMismatch("spectral curves are sampled on different grids")


@dataclass(frozen=True)
class SpectralCurve:
    """A sampled spectrum: strictly increasing wavelengths, finite values."""

    wavelengths: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if wl.ndim != 1 or wl.size < 2:
            raise GridMismatch("wavelength grid needs at least two samples")
        if vals.shape != wl.shape:
            raise GridMismatch("values and wavelengths differ in length")
        if np.any(np.diff(wl) <= 0):
            raise GridMismatch("wavelengths must be strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise InputError("spectral values must be finite")
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "values", vals)


def validate_role(curve: SpectralCurve, role: str, tol=1e-9):
    """Range check: reflectance in [0,1], illumination/response >= 0."""
    lo = curve.values.min()
    hi = curve.values.max()
    if role == REFLECTANCE:
        if lo < -tol or hi > 1.0 + tol:
            raise InputError(f"reflectance curve outside [0,1]: [{lo}, {hi}]")
    else:
        if lo < -tol:
            raise InputError(f"{role} curve has negative samples: min {lo}")


@dataclass(frozen=True)
class CameraResponse:
    """Trichromatic sensor response; three non-negative curves on one grid."""

    red: SpectralCurve
    green: SpectralCurve
    blue: SpectralCurve

    def __post_init__(self):
        _check_same_grid(self.red.wavelengths, self.green.wavelengths)
        _check_same_grid(self.red.wavelengths, self.blue.wavelengths)
        for ch in self.channels():
            validate_role(ch, "response")
            if ch.values.max() <= 0:
                raise InputError("each response channel needs a positive sample")

    def channels(self):
        return (self.red, self.green, self.blue)

    @property
    def wavelengths(self):
        return self.red.wavelengths

    def stacked(self):
        """(3, L) array of channel values in r, g, b order."""
        return np.stack([c.values for c in self.channels()])

    def weight(self):
        """PCA weight w(l) = sum of the three channel responses."""
        return self.stacked().sum(axis=0)


@dataclass(frozen=True)
class SpectralBasis:
    """Three basis curves, orthonormal under the weighted inner product."""

    role: str
    wavelengths: np.ndarray
    vectors: np.ndarray  # (3, L)
    weight: np.ndarray  # w(l) used during PCA, (L,)

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float)
        vecs = np.asarray(self.vectors, dtype=float)
        w = np.asarray(self.weight, dtype=float)
        if vecs.shape != (3, wl.size) or w.shape != wl.shape:
            raise GridMismatch("basis arrays do not match the grid")
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "weight", w)

    def gram(self):
        """(3,3) weighted Gram matrix; identity for a valid basis."""
        omega = grid_measure(self.wavelengths) * self.weight
        return (self.vectors * omega) @ self.vectors.T


@dataclass(frozen=True)
class CouplingTensor:
    """E[k] couples reflectance coefficients to illumination coefficients
    through channel k: E[k][i, j] = integral of rho_i * S^k * ell_j."""

    tensor: np.ndarray  # (3, 3, 3) indexed [channel, refl, illum]

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=float)
        if t.shape != (3, 3, 3):
            raise InputError("coupling tensor must be 3x3x3")
        if not np.all(np.isfinite(t)):
            raise InputError("coupling tensor entries must be finite")
        object.__setattr__(self, "tensor", t)

    def __getitem__(self, k):
        return self.tensor[k]


@dataclass(frozen=True)
class FlashCoefficients:
    """Unit-norm illumination coefficients of the (flat) flash spectrum."""

    f: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.shape != (3,):
            raise InputError("flash coefficients must be a 3-vector")
        if abs(np.linalg.norm(f) - 1.0) > 1e-12:
            raise InputError("flash coefficients must be unit norm")
        object.__setattr__(self, "f", f)


# --- operations ---------------------------------------------------------


def weighted_pca(database, response: CameraResponse, role: str) -> SpectralBasis:
    """Top-3 principal directions of the database under the response weight.

    No mean subtraction: the subspace model is linear, not affine.  The
    returned vectors are orthonormal under <u,v>_w with w = sum of the
    response channels.
    """
    if len(database) < 3:
        raise DegenerateDatabase("need at least 3 database curves")
    wl = response.wavelengths
    for c in database:
        _check_same_grid(wl, c.wavelengths)
        validate_role(c, role)

    w = response.weight()
    omega = grid_measure(wl) * w
    sq = np.sqrt(omega)
    x = np.stack([c.values for c in database])  # (n, L)
    _, s, vt = np.linalg.svd(x * sq, full_matrices=False)
    if s[0] <= 0 or s[2] <= 1e-10 * s[0]:
        raise DegenerateDatabase("database has effective rank < 3")

    support = sq > 0
    vectors = np.zeros((3, wl.size))
    vectors[:, support] = vt[:3, support] / sq[support]
    # stable sign convention: positive weighted integral, else positive peak
    for i in range(3):
        sgn = np.sum(omega * vectors[i])
        if abs(sgn) < 1e-12:
            sgn = vectors[i][np.argmax(np.abs(vectors[i]))]
        if sgn < 0:
            vectors[i] = -vectors[i]
    return SpectralBasis(role=role, wavelengths=wl, vectors=vectors, weight=w)


def compute_coupling(
    refl_basis: SpectralBasis, illum_basis: SpectralBasis, response: CameraResponse
) -> CouplingTensor:
    """E[k][i, j] by trapezoidal quadrature on the shared grid."""
    wl = response.wavelengths
    _check_same_grid(wl, refl_basis.wavelengths)
    _check_same_grid(wl, illum_basis.wavelengths)
    tau = grid_measure(wl)
    s = response.stacked()  # (3, L)
    tensor = np.einsum("l,kl,il,jl->kij", tau, s, refl_basis.vectors, illum_basis.vectors)
    return CouplingTensor(tensor=tensor)


def project_spectrum(curve: SpectralCurve, basis: SpectralBasis) -> np.ndarray:
    """Coefficients of the weighted-orthogonal projection onto the basis."""
    _check_same_grid(curve.wavelengths, basis.wavelengths)
    omega = grid_measure(basis.wavelengths) * basis.weight
    return basis.vectors @ (omega * curve.values)


def reconstruct_spectrum(coeff, basis: SpectralBasis) -> SpectralCurve:
    """Linear combination of the basis curves."""
    coeff = np.asarray(coeff, dtype=float)
    return SpectralCurve(basis.wavelengths, coeff @ basis.vectors)


def flash_coefficients(illum_basis: SpectralBasis) -> FlashCoefficients:
    """Unit-norm projection of the flat spectrum onto the illumination basis."""
    flat = SpectralCurve(illum_basis.wavelengths, np.ones(illum_basis.wavelengths.size))
    c = project_spectrum(flat, illum_basis)
    norm = np.linalg.norm(c)
    if norm < 1e-12:
        raise ZeroProjection("flat spectrum is orthogonal to the illumination basis")
    return FlashCoefficients(f=c / norm)


def coeff_to_display_rgb(coeff, basis: SpectralBasis, response: CameraResponse):
    """Integrate the reconstructed spectrum against the response; clamp at 0."""
    curve = reconstruct_spectrum(coeff, basis)
    _check_same_grid(curve.wavelengths, response.wavelengths)
    tau = grid_measure(response.wavelengths)
    rgb = response.stacked() @ (tau * curve.values)
    return np.maximum(rgb, 0.0)


# --- CSV / JSON persistence ---------------------------------------------


def read_spectrum_csv(path) -> SpectralCurve:
    """One curve per file, header `wavelength_nm,value`."""
    wl, vals = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["wavelength_nm", "value"]:
            raise InputError(f"{path}: expected header 'wavelength_nm,value', got {header}")
        for row in reader:
            if not row:
                continue
            wl.append(float(row[0]))
            vals.append(float(row[1]))
    return SpectralCurve(np.array(wl), np.array(vals))


def write_spectrum_csv(curve: SpectralCurve, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["wavelength_nm", "value"])
        for wl, v in zip(curve.wavelengths, curve.values):
            writer.writerow([f"{wl:g}", repr(float(v))])


def read_database(directory):
    """All *.csv curves in a directory, sorted by filename."""
    paths = sorted(Path(directory).glob("*.csv"))
    if not paths:
        raise InputError(f"no spectra CSV files in {directory}")
    return [read_spectrum_csv(p) for p in paths]


def read_response_csv(path) -> CameraResponse:
    """Header `wavelength_nm,r,g,b`; one grid row per line."""
    wl, r, g, b = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:4]] != ["wavelength_nm", "r", "g", "b"]:
            raise InputError(f"{path}: expected header 'wavelength_nm,r,g,b'")
        for row in reader:
            if not row:
                continue
            wl.append(float(row[0]))
            r.append(float(row[1]))
            g.append(float(row[2]))
            b.append(float(row[3]))
    wl = np.array(wl)
    return CameraResponse(
        red=SpectralCurve(wl, np.array(r)),
        green=SpectralCurve(wl, np.array(g)),
        blue=SpectralCurve(wl, np.array(b)),
    )


def write_response_csv(response: CameraResponse, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["wavelength_nm", "r", "g", "b"])
        for i, wl in enumerate(response.wavelengths):
            writer.writerow(
                [f"{wl:g}"]
                + [repr(float(c.values[i])) for c in response.channels()]
            )


def write_basis_csv(basis: SpectralBasis, path):
    """4-column CSV plus a `<path>.json` sidecar with role and weight."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["wavelength_nm", "b1", "b2", "b3"])
        for i, wl in enumerate(basis.wavelengths):
            writer.writerow([f"{wl:g}"] + [repr(float(basis.vectors[j, i])) for j in range(3)])
    sidecar = {
        "role": basis.role,
        "weight_provenance": "sum of camera response channels",
        "wavelength_nm": [float(v) for v in basis.wavelengths],
        "weight": [float(v) for v in basis.weight],
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)


def read_basis_csv(path) -> SpectralBasis:
    path = Path(path)
    wl, b1, b2, b3 = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:4]] != ["wavelength_nm", "b1", "b2", "b3"]:
            raise InputError(f"{path}: expected header 'wavelength_nm,b1,b2,b3'")
        for row in reader:
            if not row:
                continue
            wl.append(float(row[0]))
            b1.append(float(row[1]))
            b2.append(float(row[2]))
            b3.append(float(row[3]))
    sidecar_path = Path(str(path) + ".json")
    if not sidecar_path.exists():
        raise InputError(f"missing basis sidecar {sidecar_path}")
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    return SpectralBasis(
        role=meta["role"],
        wavelengths=np.array(wl),
        vectors=np.array([b1, b2, b3]),
        weight=np.array(meta["weight"]),
    )
