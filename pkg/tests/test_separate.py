import numpy as np
import pytest

import oracles
from lumisep import spectral, synth
from lumisep.hullfit import LightEstimate
from lumisep.imaging import solve_alpha, solve_beta_gamma
from lumisep.pipeline import PipelineConfig, run_separation
from lumisep.separate import relative_shading, separate_images
from lumisep.imaging import GammaField


def gamma_field(directions):
    d = np.asarray(directions, dtype=float)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    p = d.shape[0]
    return GammaField(
        gamma=d.reshape(p, 1, 3),
        beta_norm=np.ones((p, 1)),
        mask=np.ones((p, 1), dtype=bool),
    )


def two_lights(sep_deg=40.0):
    import math

    a = np.array([0.0, 0.0, 1.0])
    b = np.array([math.sin(math.radians(sep_deg)), 0.0, math.cos(math.radians(sep_deg))])
    return LightEstimate(count=2, coefficients=np.stack([a, b]), method="fixed")


class TestRelativeShading:
    def test_corner_gives_unit_weight(self):
        lights = two_lights()
        sh = relative_shading(gamma_field([lights.coefficients[0]]), lights)
        assert np.allclose(sh.z[0, 0], [1.0, 0.0], atol=1e-12)
        assert sh.residual[0, 0] < 1e-12

    def test_symmetric_midpoint(self):
        lights = two_lights()
        b1, b2 = lights.coefficients
        mid = b1 + b2
        sh = relative_shading(gamma_field([mid]), lights)
        expected = 1.0 / np.linalg.norm(mid)
        assert np.allclose(sh.z[0, 0], [expected, expected], rtol=1e-10)
        assert sh.residual[0, 0] < 1e-12

    def test_outside_cone_matches_grid_oracle(self):
        rng = np.random.default_rng(3)
        lights = two_lights(30.0)
        basis = lights.coefficients.T
        dirs = rng.normal(size=(200, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        sh = relative_shading(gamma_field(dirs), lights)
        assert np.all(sh.z >= 0.0)
        ref = oracles.nnls_residual_oracle(dirs, basis)
        assert np.abs(sh.residual[:, 0] - ref).max() < 1e-4

    def test_three_light_cone_interior_residual_zero(self):
        import math

        c = np.array([0.0, 0.0, 1.0])
        vecs = []
        for az in (0.0, 2.0, 4.0):
            v = np.array(
                [0.3 * math.cos(az), 0.3 * math.sin(az), 1.0]
            )
            vecs.append(v / np.linalg.norm(v))
        lights = LightEstimate(count=3, coefficients=np.stack(vecs), method="fixed")
        rng = np.random.default_rng(5)
        w = rng.dirichlet(np.ones(3), size=500)
        g = w @ lights.coefficients
        sh = relative_shading(gamma_field(g), lights)
        assert sh.residual.max() < 1e-8
        assert np.all(sh.z >= 0.0)

    def test_flagging_threshold(self):
        lights = two_lights(20.0)
        # a direction far off the cone plane leaves a visible residual
        off = np.array([0.0, 0.96, 0.28])
        sh = relative_shading(gamma_field([off]), lights)
        assert sh.flagged[0, 0]
        assert sh.mask[0, 0]


class TestSeparateImages:
    @pytest.fixture()
    def one_light_artifacts(self, bases, response):
        scene = synth.make_pure_pixel_scene(1, 10.0, size=48, seed=21)
        gt = synth.render(scene, bases[0], bases[1], response)
        coupling = spectral.compute_coupling(bases[0], bases[1], response)
        f = spectral.flash_coefficients(bases[1])
        alpha = solve_alpha(gt.pureflash, coupling, f)
        gamma = solve_beta_gamma(gt.noflash, alpha, coupling)
        lights = LightEstimate(
            count=1, coefficients=scene.lights[0].coeffs[None, :], method="truth"
        )
        shading = relative_shading(gamma, lights)
        return scene, gt, coupling, alpha, gamma, lights, shading

    def test_single_light_layer_equals_noflash(self, one_light_artifacts):
        scene, gt, coupling, alpha, gamma, lights, shading = one_light_artifacts
        result = separate_images(gt.noflash, alpha, gamma, shading, lights, coupling)
        m = result.shading.mask
        rel = np.abs(result.layers[0][m] - gt.noflash[m]) / np.maximum(
            gt.noflash[m], 1e-30
        )
        assert rel.max() < 1e-9

    def test_pure_pixels_stay_in_their_layer(self, bases, response, rendered_two_light):
        scene, gt = rendered_two_light
        coupling = spectral.compute_coupling(bases[0], bases[1], response)
        f = spectral.flash_coefficients(bases[1])
        alpha = solve_alpha(gt.pureflash, coupling, f)
        gamma = solve_beta_gamma(gt.noflash, alpha, coupling)
        lights = LightEstimate(
            count=2,
            coefficients=np.stack([l.coeffs for l in scene.lights]),
            method="truth",
        )
        shading = relative_shading(gamma, lights)
        result = separate_images(gt.noflash, alpha, gamma, shading, lights, coupling)
        pure0 = (gt.shading_true[:, :, 0] > 0) & (gt.shading_true[:, :, 1] == 0)
        pure0 &= result.shading.mask
        assert pure0.sum() > 100
        rel = np.abs(result.layers[0][pure0] - gt.noflash[pure0]) / np.maximum(
            gt.noflash[pure0], 1e-30
        )
        assert rel.max() < 1e-9
        assert np.abs(result.layers[1][pure0]).max() < 1e-12 * gt.noflash.max()

    def test_reconstruction_identity(self, bases, response, rendered_two_light):
        scene, gt = rendered_two_light
        art = run_separation(
            gt.noflash,
            flash=gt.flash,
            cfg=PipelineConfig(n=2, min_bin_count=20),
            refl_basis=bases[0],
            illum_basis=bases[1],
            response=response,
        )
        total = art.result.layers.sum(axis=0)
        m = art.result.shading.mask & (art.shading.residual < 1e-9)
        rel = np.abs(total[m] - gt.noflash[m]) / np.maximum(gt.noflash[m], 1e-30)
        assert rel.max() < 1e-6

    def test_scale_covariance(self, bases, response, rendered_two_light):
        scene, gt = rendered_two_light
        lights = LightEstimate(
            count=2,
            coefficients=np.stack([l.coeffs for l in scene.lights]),
            method="truth",
        )
        cfg = PipelineConfig(n=2, min_bin_count=20)
        kw = dict(
            cfg=cfg, refl_basis=bases[0], illum_basis=bases[1], response=response,
            lights=lights,
        )
        art1 = run_separation(gt.noflash, flash=gt.flash, **kw)
        art2 = run_separation(3.0 * gt.noflash, flash=3.0 * gt.flash, **kw)
        m = art1.result.shading.mask & art2.result.shading.mask
        assert np.allclose(
            art2.result.layers[:, m], 3.0 * art1.result.layers[:, m], rtol=1e-9
        )

    def test_permutation_equivariance(self, bases, response, rendered_two_light):
        scene, gt = rendered_two_light
        coupling = spectral.compute_coupling(bases[0], bases[1], response)
        f = spectral.flash_coefficients(bases[1])
        alpha = solve_alpha(gt.pureflash, coupling, f)
        gamma = solve_beta_gamma(gt.noflash, alpha, coupling)
        b = np.stack([l.coeffs for l in scene.lights])
        l12 = LightEstimate(count=2, coefficients=b, method="t")
        l21 = LightEstimate(count=2, coefficients=b[::-1], method="t")
        s12 = relative_shading(gamma, l12)
        s21 = relative_shading(gamma, l21)
        assert np.allclose(s12.z, s21.z[:, :, ::-1], atol=1e-12)
        r12 = separate_images(gt.noflash, alpha, gamma, s12, l12, coupling)
        r21 = separate_images(gt.noflash, alpha, gamma, s21, l21, coupling)
        assert np.allclose(r12.layers, r21.layers[::-1], atol=1e-12)

    def test_unnormalized_alpha_debug_path(self, one_light_artifacts):
        scene, gt, coupling, alpha, gamma, lights, shading = one_light_artifacts
        result = separate_images(
            gt.noflash, alpha, gamma, shading, lights, coupling, normalize_alpha=False
        )
        m = result.shading.mask
        norm = np.linalg.norm(alpha.alpha, axis=2)
        expected = norm[m, None] * gt.noflash[m]
        rel = np.abs(result.layers[0][m] - expected) / np.maximum(expected, 1e-30)
        assert rel.max() < 1e-9
