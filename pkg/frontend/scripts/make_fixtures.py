#!/usr/bin/env python3
"""Regenerate the editor test fixtures with the lumisep CLI.

Writes a small relight bundle, ten scripted edit states, the CLI
renders for each state, and the display exposure the tests encode
with.  Run from anywhere; output lands in frontend/test/fixtures/.
"""

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

FIXTURES = Path(__file__).resolve().parents[1] / "test" / "fixtures"


def cli(*args):
    subprocess.run([sys.executable, "-m", "lumisep.cli", *args], check=True)


def main():
    shutil.rmtree(FIXTURES, ignore_errors=True)
    FIXTURES.mkdir(parents=True)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cli("synth", "--n", "2", "--separation", "28", "--size", "64",
            "--seed", "21", "-o", str(tmp / "scene"))
        cli("separate",
            "--flash", str(tmp / "scene" / "flash.pfm"),
            "--noflash", str(tmp / "scene" / "noflash.pfm"),
            "--n", "2", "--min-bin-count", "20", "--seed", "5",
            "-o", str(tmp / "sep"),
            "--bundle", str(FIXTURES / "bundle"))
        shutil.copy(tmp / "sep" / "sep_0.pfm", FIXTURES / "sep_0.pfm")
        shutil.copy(tmp / "sep" / "sep_1.pfm", FIXTURES / "sep_1.pfm")

        manifest = json.loads((FIXTURES / "bundle" / "manifest.json").read_text())
        est = np.asarray(manifest["lights"], dtype=float)

        rng = np.random.default_rng(2024)
        edits = [{"mu": [1.0, 1.0], "coefficients": est.tolist()}]  # identity first
        edits.append({"mu": [0.0, 1.0], "coefficients": est.tolist()})
        edits.append({"mu": [2.0, 0.5], "coefficients": est.tolist()})
        while len(edits) < 10:
            mu = np.round(rng.uniform(0.0, 3.0, size=2), 3)
            b = est + rng.normal(0, 0.25, size=est.shape)
            b /= np.linalg.norm(b, axis=1, keepdims=True)
            edits.append({"mu": mu.tolist(), "coefficients": b.tolist()})
        (FIXTURES / "edits.json").write_text(json.dumps(edits, indent=2))

        for i, edit in enumerate(edits):
            (tmp / "edit.json").write_text(json.dumps(edit))
            cli("relight", "--bundle", str(FIXTURES / "bundle"),
                "--edit", str(tmp / "edit.json"),
                "-o", str(FIXTURES / f"render_{i:03d}.pfm"))

        # display exposure: map the identity render's 99th percentile to 1.0
        sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))
        from lumisep import pfm

        identity = pfm.read_pfm(FIXTURES / "render_000.pfm")
        exposure = round(float(pfm.auto_exposure(identity)), 6)
        (FIXTURES / "exposure.json").write_text(json.dumps({"exposure": exposure}))

        cli("relight", "--bundle", str(FIXTURES / "bundle"),
            "--edit", str(tmp / "edit.json"),
            "--exposure", str(exposure),
            "-o", str(FIXTURES / "render_009.png"))
        (tmp / "edit.json").write_text(json.dumps(edits[0]))
        cli("relight", "--bundle", str(FIXTURES / "bundle"),
            "--edit", str(tmp / "edit.json"),
            "--exposure", str(exposure),
            "-o", str(FIXTURES / "identity_preview.png"))

    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
