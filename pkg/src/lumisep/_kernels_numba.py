"""Numba implementations of the per-pixel hot loops.

Signatures mirror `_kernels_numpy` exactly.  Loops write disjoint output
slots only, so `prange` keeps results deterministic.  Reductions that
would race (the sphere histogram) stay serial.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, inline="always")
def _solve3(a, b, x):
    """3x3 solve with partial pivoting. Returns False if pivoting breaks down."""
    m = np.empty((3, 4))
    for r in range(3):
        for c in range(3):
            m[r, c] = a[r, c]
        m[r, 3] = b[r]
    for col in range(3):
        piv = col
        big = abs(m[col, col])
        for r in range(col + 1, 3):
            if abs(m[r, col]) > big:
                big = abs(m[r, col])
                piv = r
        if big == 0.0:
            return False
        if piv != col:
            for c in range(4):
                tmp = m[col, c]
                m[col, c] = m[piv, c]
                m[piv, c] = tmp
        for r in range(col + 1, 3):
            f = m[r, col] / m[col, col]
            for c in range(col, 4):
                m[r, c] -= f * m[col, c]
    for r in range(2, -1, -1):
        s = m[r, 3]
        for c in range(r + 1, 3):
            s -= m[r, c] * x[c]
        x[r] = s / m[r, r]
    return True


@njit(cache=True, inline="always")
def _cond_frobenius3(a):
    """Frobenius condition estimate of a 3x3 matrix; inf when singular."""
    det = (
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )
    if det == 0.0 or not np.isfinite(det):
        return np.inf
    na = 0.0
    for r in range(3):
        for c in range(3):
            na += a[r, c] * a[r, c]
    # adjugate entries squared, summed
    ni = 0.0
    ni += (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]) ** 2
    ni += (a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]) ** 2
    ni += (a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]) ** 2
    ni += (a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]) ** 2
    ni += (a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]) ** 2
    ni += (a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]) ** 2
    ni += (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]) ** 2
    ni += (a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]) ** 2
    ni += (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]) ** 2
    return np.sqrt(na * ni) / abs(det)


@njit(cache=True, parallel=True)
def solve_beta_gamma(noflash, alphahat, valid, coupling, cond_limit):
    p = noflash.shape[0]
    gamma = np.zeros((p, 3))
    beta_norm = np.zeros(p)
    ok = np.zeros(p, dtype=np.bool_)
    for i in prange(p):
        if not valid[i]:
            continue
        a = np.empty((3, 3))
        for k in range(3):
            for j in range(3):
                s = 0.0
                for m in range(3):
                    s += alphahat[i, m] * coupling[k, m, j]
                a[k, j] = s
        if _cond_frobenius3(a) > cond_limit:
            continue
        beta = np.empty(3)
        if not _solve3(a, noflash[i], beta):
            continue
        norm = np.sqrt(beta[0] ** 2 + beta[1] ** 2 + beta[2] ** 2)
        if not np.isfinite(norm) or norm <= 1e-300:
            continue
        for c in range(3):
            gamma[i, c] = beta[c] / norm
        beta_norm[i] = norm
        ok[i] = True
    return gamma, beta_norm, ok


@njit(cache=True, parallel=True)
def nnls_cone(gamma, valid, basis, subset_masks, subset_pinvs):
    p = gamma.shape[0]
    n = basis.shape[1]
    nsub = subset_masks.shape[0]
    best_z = np.zeros((p, n))
    best_res = np.zeros(p)
    for i in prange(p):
        if not valid[i]:
            continue
        g0 = gamma[i, 0]
        g1 = gamma[i, 1]
        g2 = gamma[i, 2]
        best = np.sqrt(g0 * g0 + g1 * g1 + g2 * g2)
        zbest = np.zeros(n)
        z = np.empty(n)
        for s in range(nsub):
            feas = True
            for q in range(n):
                zq = (
                    subset_pinvs[s, q, 0] * g0
                    + subset_pinvs[s, q, 1] * g1
                    + subset_pinvs[s, q, 2] * g2
                )
                if subset_masks[s, q]:
                    if zq < -1e-12:
                        feas = False
                        break
                    z[q] = zq if zq > 0.0 else 0.0
                else:
                    z[q] = 0.0
            if not feas:
                continue
            r0 = g0
            r1 = g1
            r2 = g2
            for q in range(n):
                r0 -= basis[0, q] * z[q]
                r1 -= basis[1, q] * z[q]
                r2 -= basis[2, q] * z[q]
            res = np.sqrt(r0 * r0 + r1 * r1 + r2 * r2)
            if res < best:
                best = res
                for q in range(n):
                    zbest[q] = z[q]
        for q in range(n):
            best_z[i, q] = zbest[q]
        best_res[i] = best
    return best_z, best_res


@njit(cache=True, parallel=True)
def render_layers(alphahat, beta_norm, z, valid, ekb):
    p = alphahat.shape[0]
    n = ekb.shape[0]
    layers = np.zeros((n, p, 3))
    for i in prange(p):
        if not valid[i]:
            continue
        for j in range(n):
            scale = beta_norm[i] * z[i, j]
            for k in range(3):
                s = 0.0
                for m in range(3):
                    s += alphahat[i, m] * ekb[j, k, m]
                v = scale * s
                layers[j, i, k] = v if v > 0.0 else 0.0
    return layers


@njit(cache=True, parallel=True)
def build_bundle_matrices(alphahat, beta_norm, z, valid, coupling):
    p = alphahat.shape[0]
    n = z.shape[1]
    out = np.zeros((n, p, 3, 3))
    for i in prange(p):
        if not valid[i]:
            continue
        rows = np.empty((3, 3))
        for k in range(3):
            for j in range(3):
                s = 0.0
                for m in range(3):
                    s += alphahat[i, m] * coupling[k, m, j]
                rows[k, j] = s
        for q in range(n):
            scale = beta_norm[i] * z[i, q]
            for k in range(3):
                for j in range(3):
                    out[q, i, k, j] = scale * rows[k, j]
    return out


@njit(cache=True, parallel=True)
def composite_bundle(matrices, mu, btilde):
    n = matrices.shape[0]
    p = matrices.shape[1]
    out = np.zeros((p, 3))
    for i in prange(p):
        for k in range(3):
            s = 0.0
            for j in range(n):
                for m in range(3):
                    s += mu[j] * matrices[j, i, k, m] * btilde[j, m]
            out[i, k] = s if s > 0.0 else 0.0
    return out


@njit(cache=True, parallel=True)
def photometric_stereo_solve(meas, dirs, thresh, min_valid, cond_limit):
    p, nl = meas.shape
    normals = np.zeros((p, 3))
    albedo = np.zeros(p)
    ok = np.zeros(p, dtype=np.bool_)
    resid = np.zeros(p)
    for i in prange(p):
        ata = np.zeros((3, 3))
        atb = np.zeros(3)
        count = 0
        for j in range(nl):
            if meas[i, j] > thresh[j]:
                count += 1
                for r in range(3):
                    atb[r] += meas[i, j] * dirs[j, r]
                    for c in range(3):
                        ata[r, c] += dirs[j, r] * dirs[j, c]
        if count < min_valid:
            continue
        if _cond_frobenius3(ata) > cond_limit:
            continue
        g = np.empty(3)
        if not _solve3(ata, atb, g):
            continue
        rho = np.sqrt(g[0] ** 2 + g[1] ** 2 + g[2] ** 2)
        if rho <= 1e-300 or g[2] < 0.0:
            continue
        for c in range(3):
            normals[i, c] = g[c] / rho
        albedo[i] = rho
        r2 = 0.0
        for j in range(nl):
            if meas[i, j] > thresh[j]:
                pred = g[0] * dirs[j, 0] + g[1] * dirs[j, 1] + g[2] * dirs[j, 2]
                r2 += (pred - meas[i, j]) ** 2
        resid[i] = np.sqrt(r2)
        ok[i] = True
    return normals, albedo, ok, resid


@njit(cache=True)
def sphere_histogram(gamma, valid, bins):
    counts = np.zeros((bins, bins), dtype=np.int64)
    vecsum = np.zeros((bins, bins, 3))
    two_pi = 2.0 * np.pi
    for i in range(gamma.shape[0]):
        if not valid[i]:
            continue
        zc = gamma[i, 2]
        if zc > 1.0:
            zc = 1.0
        elif zc < -1.0:
            zc = -1.0
        theta = np.arccos(zc)
        phi = np.arctan2(gamma[i, 1], gamma[i, 0])
        if phi < 0.0:
            phi += two_pi
        it = int(theta * (bins / np.pi))
        if it > bins - 1:
            it = bins - 1
        ip = int(phi * (bins / two_pi))
        if ip > bins - 1:
            ip = bins - 1
        counts[it, ip] += 1
        for c in range(3):
            vecsum[it, ip, c] += gamma[i, c]
    return counts, vecsum
