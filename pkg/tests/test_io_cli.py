import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import oracles
from lumisep import pfm
from lumisep.cli import main
from lumisep.errors import MalformedHeader, TruncatedData


class TestPfm:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.random((7, 5, 3)).astype(np.float32).astype(np.float64)
        path = tmp_path / "img.pfm"
        pfm.write_pfm(img, path)
        back = pfm.read_pfm(path)
        assert np.array_equal(back, img)

    @settings(
        max_examples=25,
        deadline=None,
        suppress_health_check=[HealthCheck.function_scoped_fixture],
    )
    @given(
        h=st.integers(1, 6),
        w=st.integers(1, 6),
        seed=st.integers(0, 2**31),
    )
    def test_round_trip_property(self, tmp_path, h, w, seed):
        rng = np.random.default_rng(seed)
        img = (rng.random((h, w, 3)) * 10).astype(np.float32).astype(np.float64)
        path = tmp_path / f"p_{h}_{w}_{seed}.pfm"
        pfm.write_pfm(img, path)
        assert np.array_equal(pfm.read_pfm(path), img)

    def test_minimal_header_layout(self, tmp_path):
        payload = np.arange(12, dtype="<f4").tobytes()
        path = tmp_path / "tiny.pfm"
        path.write_bytes(b"PF\n2 2\n-1.0\n" + payload)
        img = pfm.read_pfm(path)
        assert img.shape == (2, 2, 3)
        # bottom row of the file is the top-up flip
        assert img[1, 0, 0] == 0.0 and img[0, 0, 0] == 6.0

    def test_big_endian_matches_reference_decoder(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.random((3, 4, 3)).astype(">f4")
        path = tmp_path / "be.pfm"
        path.write_bytes(b"PF\n4 3\n1.0\n" + img[::-1].tobytes())
        mine = pfm.read_pfm(path)
        ref = oracles.reference_pfm_read(path)
        assert np.array_equal(mine, ref)
        assert np.allclose(mine, img.astype(np.float64))

    def test_grayscale_broadcast(self, tmp_path):
        vals = np.arange(4, dtype="<f4")
        path = tmp_path / "g.pfm"
        path.write_bytes(b"Pf\n2 2\n-1.0\n" + vals.tobytes())
        img = pfm.read_pfm(path)
        assert img.shape == (2, 2, 3)
        assert np.all(img[:, :, 0] == img[:, :, 1])

    def test_malformed_magic(self, tmp_path):
        path = tmp_path / "bad.pfm"
        path.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
        with pytest.raises(MalformedHeader):
            pfm.read_pfm(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.pfm"
        path.write_bytes(b"PF\n2 2\n-1.0\n" + bytes(10))
        with pytest.raises(TruncatedData):
            pfm.read_pfm(path)


class TestPreview:
    def test_zero_maps_to_zero(self):
        assert pfm.tonemap_bytes(np.zeros((1, 1, 3)))[0, 0, 0] == 0

    def test_saturation_maps_to_255(self):
        assert pfm.tonemap_bytes(np.full((1, 1, 3), 0.5), exposure=2.0)[0, 0, 0] == 255

    def test_half_maps_to_188(self):
        # frozen from the exact sRGB transfer at 0.5
        assert pfm.tonemap_bytes(np.full((1, 1, 3), 0.5))[0, 0, 0] == 188

    @settings(max_examples=50, deadline=None)
    @given(v=st.floats(0.0, 1.0))
    def test_matches_reference_srgb(self, v):
        got = int(pfm.tonemap_bytes(np.full((1, 1, 3), v))[0, 0, 0])
        assert got == round(oracles.reference_srgb(v) * 255.0)

    def test_png_written(self, tmp_path):
        img = np.random.default_rng(2).random((4, 4, 3))
        pfm.write_preview_png(img, tmp_path / "p.png", 1.0)
        assert (tmp_path / "p.png").stat().st_size > 0


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture")
    rc = main(
        [
            "synth", "--n", "2", "--separation", "25", "--size", "128",
            "--seed", "5", "-o", str(out),
        ]
    )
    assert rc == 0
    return out


class TestCli:
    def _separate(self, fixture_dir, out, seed="9"):
        return main(
            [
                "separate",
                "--flash", str(fixture_dir / "flash.pfm"),
                "--noflash", str(fixture_dir / "noflash.pfm"),
                "--n", "2", "--min-bin-count", "30", "--seed", seed,
                "-o", str(out),
            ]
        )

    def test_separate_writes_layers_and_manifest(self, fixture_dir, tmp_path):
        out = tmp_path / "sep"
        assert self._separate(fixture_dir, out) == 0
        manifest = json.loads((out / "separation.json").read_text())
        assert manifest["n"] == 2
        assert (out / "sep_0.pfm").exists() and (out / "sep_1.pfm").exists()
        assert (out / "sep_0.png").exists()
        assert (out / "shading_1.pfm").exists()

    def test_manifest_validates_against_schema(self, fixture_dir, tmp_path):
        jsonschema = pytest.importorskip("jsonschema")
        out = tmp_path / "sep"
        assert self._separate(fixture_dir, out) == 0
        manifest = json.loads((out / "separation.json").read_text())
        from lumisep.defaults import data_path

        schema = json.loads(Path(str(data_path("separation.schema.json"))).read_text())
        jsonschema.validate(manifest, schema)

    def test_separation_quality_against_ground_truth(self, fixture_dir, tmp_path):
        from lumisep import synth

        out = tmp_path / "sep"
        assert self._separate(fixture_dir, out) == 0
        est = [pfm.read_pfm(out / f"sep_{j}.pfm") for j in range(2)]
        gt = [pfm.read_pfm(fixture_dir / f"gt_sep_{j}.pfm") for j in range(2)]
        pairs = [(0, 1), (1, 0)]
        best = min(
            max(synth.nmse(est[a], gt[0]), synth.nmse(est[b], gt[1]))
            for a, b in pairs
        )
        assert best < 1e-3

    def test_determinism_bit_identical(self, fixture_dir, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert self._separate(fixture_dir, out1) == 0
        assert self._separate(fixture_dir, out2) == 0
        for name in ("sep_0.pfm", "sep_1.pfm", "separation.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_missing_flash_exits_2(self, fixture_dir, tmp_path, capsys):
        rc = main(
            [
                "separate",
                "--flash", str(fixture_dir / "missing.pfm"),
                "--noflash", str(fixture_dir / "noflash.pfm"),
                "--n", "2", "-o", str(tmp_path / "x"),
            ]
        )
        assert rc == 2
        assert "separate" in capsys.readouterr().err

    def test_single_light_n3_exits_3(self, tmp_path, capsys):
        fix = tmp_path / "single"
        assert main(
            ["synth", "--n", "1", "--size", "96", "--seed", "2", "-o", str(fix)]
        ) == 0
        rc = main(
            [
                "estimate-lights",
                "--flash", str(fix / "flash.pfm"),
                "--noflash", str(fix / "noflash.pfm"),
                "--n", "3", "--min-bin-count", "30",
                "-o", str(tmp_path / "l.json"),
            ]
        )
        assert rc == 3
        err = capsys.readouterr().err
        assert "CollinearSet" in err

    def test_estimate_lights_output(self, fixture_dir, tmp_path):
        path = tmp_path / "lights.json"
        rc = main(
            [
                "estimate-lights",
                "--flash", str(fixture_dir / "flash.pfm"),
                "--noflash", str(fixture_dir / "noflash.pfm"),
                "--n", "2", "--min-bin-count", "30", "--seed", "4",
                "-o", str(path),
            ]
        )
        assert rc == 0
        payload = json.loads(path.read_text())
        assert payload["n"] == 2 and payload["method"] == "ransac-arc"
        truth = json.loads((fixture_dir / "lights_true.json").read_text())
        errs = oracles.match_lights(
            np.array(payload["coefficients"]), np.array(truth["coefficients"])
        )
        assert max(errs) < 1.0

    def test_pure_flash_image_mode(self, fixture_dir, tmp_path):
        # sun/sky wiring: supply the pure-flash image directly
        flash = pfm.read_pfm(fixture_dir / "flash.pfm")
        noflash = pfm.read_pfm(fixture_dir / "noflash.pfm")
        pure = np.maximum(flash - noflash, 0.0)
        pfm.write_pfm(pure, tmp_path / "pure.pfm")
        out = tmp_path / "sep"
        rc = main(
            [
                "separate",
                "--pure-flash-image", str(tmp_path / "pure.pfm"),
                "--noflash", str(fixture_dir / "noflash.pfm"),
                "--n", "2", "--min-bin-count", "30", "--seed", "9",
                "-o", str(out),
            ]
        )
        assert rc == 0
        ref = tmp_path / "ref"
        assert self._separate(fixture_dir, ref) == 0
        from lumisep import synth

        for j in range(2):
            a = pfm.read_pfm(out / f"sep_{j}.pfm")
            b = pfm.read_pfm(ref / f"sep_{j}.pfm")
            # pure-flash input went through float32 PFM quantization
            assert synth.nmse(a, b) < 1e-9

    def test_bundle_relight_wb_ps_flow(self, fixture_dir, tmp_path):
        sep = tmp_path / "sep"
        bundle = tmp_path / "bundle"
        rc = main(
            [
                "separate",
                "--flash", str(fixture_dir / "flash.pfm"),
                "--noflash", str(fixture_dir / "noflash.pfm"),
                "--n", "2", "--min-bin-count", "30", "--seed", "9",
                "-o", str(sep), "--bundle", str(bundle),
            ]
        )
        assert rc == 0
        assert (bundle / "manifest.json").exists()
        manifest = json.loads((bundle / "manifest.json").read_text())
        assert manifest["format"] == "lsrb-1"
        assert len(manifest["presets"]) >= 3

        out_pfm = tmp_path / "relight.pfm"
        assert main(
            ["relight", "--bundle", str(bundle), "-o", str(out_pfm)]
        ) == 0
        relit = pfm.read_pfm(out_pfm)
        total = sum(pfm.read_pfm(sep / f"sep_{j}.pfm") for j in range(2))
        assert np.abs(relit - total).max() < 1e-5 * max(float(total.max()), 1.0)

        edit = {"mu": [0.0, 1.0], "coefficients": json.loads((sep / "separation.json").read_text())["lights"]["coefficients"]}
        (tmp_path / "edit.json").write_text(json.dumps(edit))
        assert main(
            [
                "relight", "--bundle", str(bundle),
                "--edit", str(tmp_path / "edit.json"),
                "-o", str(tmp_path / "edited.png"),
            ]
        ) == 0

        assert main(
            ["wb", "--bundle", str(bundle), "-o", str(tmp_path / "wb.pfm")]
        ) == 0

        dirs = [[0.4, 0.1, 0.91], [-0.35, 0.25, 0.9]]
        (tmp_path / "dirs.json").write_text(json.dumps(dirs))
        rc = main(
            [
                "ps", "--separation", str(sep),
                "--directions", str(tmp_path / "dirs.json"),
                "--use-flash",
                "-o", str(tmp_path / "ps"),
            ]
        )
        assert rc == 0
        assert (tmp_path / "ps" / "normals.pfm").exists()

    def test_basis_subcommand(self, tmp_path):
        from lumisep.defaults import data_path

        out = tmp_path / "basis.csv"
        rc = main(
            [
                "basis",
                "--database", str(data_path("illuminants")),
                "--role", "illumination",
                "-o", str(out),
            ]
        )
        assert rc == 0
        from lumisep import spectral

        basis = spectral.read_basis_csv(out)
        assert np.abs(basis.gram() - np.eye(3)).max() < 1e-9
