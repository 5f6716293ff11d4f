"""The numba kernels and their numpy fallbacks must agree."""

import numpy as np
import pytest

from lumisep import _kernels_numpy as knp

knb = pytest.importorskip("lumisep._kernels_numba")


@pytest.fixture(scope="module")
def pixel_data():
    rng = np.random.default_rng(77)
    p = 4096
    noflash = rng.random((p, 3)) + 0.02
    alphahat = rng.normal(size=(p, 3))
    alphahat /= np.linalg.norm(alphahat, axis=1, keepdims=True)
    valid = rng.random(p) > 0.05
    coupling = rng.normal(size=(3, 3, 3)) + np.eye(3)[None] * 2.0
    return noflash, alphahat, valid, coupling


def test_solve_beta_gamma_parity(pixel_data):
    noflash, alphahat, valid, coupling = pixel_data
    a = knp.solve_beta_gamma(noflash, alphahat, valid, coupling, 1e6)
    b = knb.solve_beta_gamma(noflash, alphahat, valid, coupling, 1e6)
    assert np.array_equal(a[2], b[2])
    m = a[2]
    assert np.allclose(a[0][m], b[0][m], atol=1e-9)
    assert np.allclose(a[1][m], b[1][m], rtol=1e-9)


def test_nnls_parity():
    rng = np.random.default_rng(78)
    p = 2000
    gamma = rng.normal(size=(p, 3))
    gamma /= np.linalg.norm(gamma, axis=1, keepdims=True)
    valid = np.ones(p, dtype=np.bool_)
    basis = np.array([[0.0, 0.3], [0.1, -0.1], [1.0, 0.94]])
    basis /= np.linalg.norm(basis, axis=0, keepdims=True)

    from lumisep.separate import _nnls_tables

    masks, pinvs = _nnls_tables(basis)
    za, ra = knp.nnls_cone(gamma, valid, basis, masks, pinvs)
    zb, rb = knb.nnls_cone(gamma, valid, basis, masks, pinvs)
    assert np.allclose(za, zb, atol=1e-12)
    assert np.allclose(ra, rb, atol=1e-12)


def test_render_and_bundle_parity(pixel_data):
    noflash, alphahat, valid, coupling = pixel_data
    rng = np.random.default_rng(79)
    p = alphahat.shape[0]
    bn = rng.random(p)
    z = rng.random((p, 2))
    b = rng.normal(size=(2, 3))
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    ekb = np.einsum("kmj,nj->nkm", coupling, b)

    la = knp.render_layers(alphahat, bn, z, valid, ekb)
    lb = knb.render_layers(alphahat, bn, z, valid, ekb)
    assert np.allclose(la, lb, atol=1e-12)

    ma = knp.build_bundle_matrices(alphahat, bn, z, valid, coupling)
    mb = knb.build_bundle_matrices(alphahat, bn, z, valid, coupling)
    assert np.allclose(ma, mb, atol=1e-12)

    mu = rng.random(2)
    ca = knp.composite_bundle(ma, mu, b)
    cb = knb.composite_bundle(mb, mu, b)
    assert np.allclose(ca, cb, atol=1e-12)


def test_photometric_stereo_parity():
    rng = np.random.default_rng(80)
    p, j = 3000, 4
    dirs = rng.normal(size=(j, 3))
    dirs[:, 2] = np.abs(dirs[:, 2]) + 1.0
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    n = rng.normal(size=(p, 3))
    n[:, 2] = np.abs(n[:, 2]) + 0.5
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    meas = np.maximum(n @ dirs.T, 0.0) * rng.uniform(0.2, 1.0, size=(p, 1))
    thresh = 0.01 * meas.max(axis=0)

    a = knp.photometric_stereo_solve(meas, dirs, thresh, 3, 1e12)
    b = knb.photometric_stereo_solve(meas, dirs, thresh, 3, 1e12)
    assert np.array_equal(a[2], b[2])
    m = a[2]
    assert np.allclose(a[0][m], b[0][m], atol=1e-8)
    assert np.allclose(a[1][m], b[1][m], rtol=1e-8)


def test_histogram_parity():
    rng = np.random.default_rng(81)
    gamma = rng.normal(size=(20000, 3))
    gamma /= np.linalg.norm(gamma, axis=1, keepdims=True)
    valid = rng.random(20000) > 0.1
    ca, va = knp.sphere_histogram(gamma, valid, 100)
    cb, vb = knb.sphere_histogram(gamma, valid, 100)
    assert np.array_equal(ca, cb)
    assert np.allclose(va, vb, atol=1e-12)
