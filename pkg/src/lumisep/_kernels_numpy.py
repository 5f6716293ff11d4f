"""Pure-numpy implementations of the per-pixel hot loops.

Every function here has a numba twin in `_kernels_numba`; `kernels`
picks one pair at import time based on the LUMISEP_BACKEND env flag.
All kernels take flattened pixel arrays (P pixels) and are deterministic.
"""

import numpy as np


def _cond_frobenius(a, inv):
    # Frobenius condition estimate; cheap and identical across backends.
    return np.sqrt(np.sum(a * a, axis=(-2, -1)) * np.sum(inv * inv, axis=(-2, -1)))


def solve_beta_gamma(noflash, alphahat, valid, coupling, cond_limit):
    """Per-pixel solve of rows (alphahat^T E^k) beta = noflash.

    Returns (gamma (P,3), beta_norm (P,), ok (P,) bool).
    """
    p = noflash.shape[0]
    gamma = np.zeros((p, 3))
    beta_norm = np.zeros(p)
    ok = np.zeros(p, dtype=np.bool_)

    # A[p, k, :] = alphahat[p] @ E[k]
    a = np.einsum("pm,kmj->pkj", alphahat, coupling)

    det = np.linalg.det(a)
    solvable = valid & np.isfinite(det) & (np.abs(det) > 0.0)

    adj = np.empty_like(a)
    adj[:, 0, 0] = a[:, 1, 1] * a[:, 2, 2] - a[:, 1, 2] * a[:, 2, 1]
    adj[:, 0, 1] = a[:, 0, 2] * a[:, 2, 1] - a[:, 0, 1] * a[:, 2, 2]
    adj[:, 0, 2] = a[:, 0, 1] * a[:, 1, 2] - a[:, 0, 2] * a[:, 1, 1]
    adj[:, 1, 0] = a[:, 1, 2] * a[:, 2, 0] - a[:, 1, 0] * a[:, 2, 2]
    adj[:, 1, 1] = a[:, 0, 0] * a[:, 2, 2] - a[:, 0, 2] * a[:, 2, 0]
    adj[:, 1, 2] = a[:, 0, 2] * a[:, 1, 0] - a[:, 0, 0] * a[:, 1, 2]
    adj[:, 2, 0] = a[:, 1, 0] * a[:, 2, 1] - a[:, 1, 1] * a[:, 2, 0]
    adj[:, 2, 1] = a[:, 0, 1] * a[:, 2, 0] - a[:, 0, 0] * a[:, 2, 1]
    adj[:, 2, 2] = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = adj / det[:, None, None]
    cond = np.where(solvable, _cond_frobenius(a, inv), np.inf)
    solvable &= cond <= cond_limit

    a_safe = np.where(solvable[:, None, None], a, np.eye(3))
    beta = np.linalg.solve(a_safe, noflash[:, :, None])[:, :, 0]
    norm = np.linalg.norm(beta, axis=1)
    good = solvable & np.isfinite(norm) & (norm > 1e-300)

    gamma[good] = beta[good] / norm[good, None]
    beta_norm[good] = norm[good]
    ok[:] = good
    return gamma, beta_norm, ok


def nnls_cone(gamma, valid, basis, subset_masks, subset_pinvs):
    """Non-negative least squares Gamma ~ basis @ z by active-set enumeration.

    `subset_masks` is (S, N) bool, `subset_pinvs` is (S, N, 3) with zero rows
    outside each subset.  Returns (z (P,N), resid (P,)).
    """
    p = gamma.shape[0]
    n = basis.shape[1]
    best_z = np.zeros((p, n))
    best_res = np.where(valid, np.linalg.norm(gamma, axis=1), 0.0)

    for s in range(subset_masks.shape[0]):
        mask = subset_masks[s]
        if not mask.any():
            continue
        z = gamma @ subset_pinvs[s].T
        feas = np.all(z[:, mask] >= -1e-12, axis=1)
        z = np.maximum(z, 0.0)
        res = np.linalg.norm(gamma - z @ basis.T, axis=1)
        take = valid & feas & (res < best_res)
        best_z[take] = z[take]
        best_res[take] = res[take]

    best_res[~valid] = 0.0
    return best_z, best_res


def render_layers(alphahat, beta_norm, z, valid, ekb):
    """Layer images: layers[j,p,k] = beta_norm * z_j * (alphahat . E^k b_j).

    `ekb` is (N, 3, 3) with ekb[j,k,:] = E^k @ b_j.  Clamped at zero;
    invalid pixels render black.
    """
    proj = np.einsum("pm,jkm->pjk", alphahat, ekb)
    layers = proj * (beta_norm[:, None] * z)[:, :, None]
    layers = np.maximum(layers, 0.0)
    layers[~valid] = 0.0
    return np.ascontiguousarray(np.transpose(layers, (1, 0, 2)))


def build_bundle_matrices(alphahat, beta_norm, z, valid, coupling):
    """Per-pixel per-light mixing matrices M[j,p,k,:] = bn*z_j*(alphahat^T E^k)."""
    rows = np.einsum("pm,kmj->pkj", alphahat, coupling)
    scale = beta_norm[:, None] * z
    scale[~valid] = 0.0
    m = scale.T[:, :, None, None] * rows[None, :, :, :]
    return np.ascontiguousarray(m)


def composite_bundle(matrices, mu, btilde):
    """Render sum_j mu_j * (M_j(p) btilde_j), clamped at zero. Returns (P,3)."""
    out = np.einsum("jpkm,jm->pk", matrices, mu[:, None] * btilde)
    return np.maximum(out, 0.0)


def photometric_stereo_solve(meas, dirs, thresh, min_valid, cond_limit):
    """Per-pixel Lambertian normal solve over unshadowed lights.

    Returns (normals (P,3), albedo (P,), ok (P,), resid (P,)).
    """
    p, j = meas.shape
    lit = meas > thresh[None, :]
    count = lit.sum(axis=1)

    w = lit.astype(np.float64)
    # normal equations restricted to lit rows
    ata = np.einsum("pj,jm,jn->pmn", w, dirs, dirs)
    atb = np.einsum("pj,pj,jm->pm", w, meas, dirs)

    det = np.linalg.det(ata)
    solvable = (count >= min_valid) & np.isfinite(det) & (np.abs(det) > 1e-300)
    safe = np.where(solvable[:, None, None], ata, np.eye(3))
    inv = np.linalg.inv(safe)
    cond = np.where(solvable, _cond_frobenius(safe, inv), np.inf)
    solvable &= cond <= cond_limit

    g = np.einsum("pmn,pn->pm", inv, atb)
    rho = np.linalg.norm(g, axis=1)
    ok = solvable & (rho > 1e-300) & (g[:, 2] >= 0.0)

    normals = np.zeros((p, 3))
    albedo = np.zeros(p)
    normals[ok] = g[ok] / rho[ok, None]
    albedo[ok] = rho[ok]

    pred = g @ dirs.T
    err = (pred - meas) * w
    resid = np.sqrt(np.sum(err * err, axis=1))
    resid[~ok] = 0.0
    return normals, albedo, ok, resid


def sphere_histogram(gamma, valid, bins):
    """Counts and vector sums over an equirectangular (theta, phi) grid."""
    counts = np.zeros((bins, bins), dtype=np.int64)
    vecsum = np.zeros((bins, bins, 3))
    g = gamma[valid]
    if g.shape[0] == 0:
        return counts, vecsum
    theta = np.arccos(np.clip(g[:, 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(g[:, 1], g[:, 0]), 2.0 * np.pi)
    it = np.minimum((theta * (bins / np.pi)).astype(np.int64), bins - 1)
    ip = np.minimum((phi * (bins / (2.0 * np.pi))).astype(np.int64), bins - 1)
    flat = it * bins + ip
    counts[:] = np.bincount(flat, minlength=bins * bins).reshape(bins, bins)
    for c in range(3):
        vecsum[:, :, c] = np.bincount(
            flat, weights=g[:, c], minlength=bins * bins
        ).reshape(bins, bins)
    return counts, vecsum
