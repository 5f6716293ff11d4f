#!/usr/bin/env python3
"""Regenerate the CSV data bundled with the package.

Writes a smooth trichromatic camera response plus small reflectance and
illuminant sample databases (blackbody-shaped warm/neutral/cool curves,
near-flat daylight, and spiky fluorescent-like SPDs) under
src/lumisep/data/.  Deterministic; safe to re-run.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from lumisep.spectral import (  # noqa: E402
    DEFAULT_WAVELENGTHS,
    CameraResponse,
    SpectralCurve,
    write_response_csv,
    write_spectrum_csv,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "lumisep" / "data"
WL = DEFAULT_WAVELENGTHS


def gauss(center, width, amp=1.0):
    return amp * np.exp(-0.5 * ((WL - center) / width) ** 2)


def blackbody(temp_k):
    # Planck shape over the visible band, peak-normalized
    c2 = 1.4388e7  # nm * K
    x = (WL / 1000.0) ** -5 / (np.exp(c2 / (WL * temp_k)) - 1.0)
    return x / x.max()


def make_response():
    from lumisep.spectral import grid_measure

    r = gauss(600, 42, 0.92) + gauss(660, 30, 0.18)
    g = gauss(545, 48, 1.0)
    b = gauss(450, 34, 0.88) + gauss(500, 40, 0.12)
    # equal channel areas: a flat spectrum off a gray patch reads neutral
    tau = grid_measure(WL)
    r, g, b = (c * (100.0 / (tau @ c)) for c in (r, g, b))
    resp = CameraResponse(
        red=SpectralCurve(WL, r),
        green=SpectralCurve(WL, g),
        blue=SpectralCurve(WL, b),
    )
    write_response_csv(resp, DATA / "camera_response.csv")


def make_reflectances():
    out = DATA / "reflectance"
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240907)
    t = (WL - 400.0) / 300.0
    curves = {
        "gray_flat": np.full(WL.size, 0.42),
        "gray_light": np.full(WL.size, 0.78),
        "gray_dark": np.full(WL.size, 0.12),
        "warm_ramp": 0.15 + 0.65 * t,
        "cool_ramp": 0.75 - 0.55 * t,
        "green_bump": 0.18 + 0.55 * np.exp(-0.5 * ((WL - 540) / 45) ** 2),
    }
    for i in range(20):
        base = 0.15 + 0.5 * rng.random()
        c = np.full(WL.size, base)
        for _ in range(rng.integers(1, 4)):
            c = c + rng.uniform(-0.35, 0.35) * np.exp(
                -0.5 * ((WL - rng.uniform(420, 680)) / rng.uniform(35, 90)) ** 2
            )
        c = c + rng.uniform(-0.25, 0.25) * t
        curves[f"sample_{i:02d}"] = np.clip(c, 0.02, 0.95)
    for name, vals in curves.items():
        write_spectrum_csv(SpectralCurve(WL, vals), out / f"{name}.csv")


def make_illuminants():
    out = DATA / "illuminants"
    out.mkdir(parents=True, exist_ok=True)
    curves = {
        "blackbody_2700k": blackbody(2700),
        "blackbody_3400k": blackbody(3400),
        "blackbody_4500k": blackbody(4500),
        "blackbody_5600k": blackbody(5600),
        "blackbody_6500k": blackbody(6500),
        "blackbody_9000k": blackbody(9000),
        "flat": np.ones(WL.size),
        "flat_warm": np.clip(1.0 + 0.1 * (WL - 550.0) / 150.0, 0.0, None),
        "flat_cool": np.clip(1.0 - 0.1 * (WL - 550.0) / 150.0, 0.0, None),
        "flat_bright": np.full(WL.size, 0.995),
        "flat_dim": np.full(WL.size, 0.4),
        "daylight_tilt": np.clip(0.9 + 0.25 * (WL - 550.0) / 150.0, 0.0, None),
        "skylight_blue": np.clip(blackbody(10000) * (1.1 - 0.3 * (WL - 400) / 300), 0.0, None),
        "fluorescent_cool": np.clip(
            0.14 * blackbody(6500)
            + gauss(436, 9, 0.85)
            + gauss(546, 8, 1.0)
            + gauss(611, 10, 0.8),
            0.0,
            None,
        ),
        "fluorescent_warm": np.clip(
            0.18 * blackbody(3400)
            + gauss(436, 9, 0.45)
            + gauss(546, 9, 0.75)
            + gauss(611, 11, 1.0),
            0.0,
            None,
        ),
        "led_warm": np.clip(gauss(455, 14, 0.5) + gauss(600, 65, 1.0), 0.0, None),
    }
    for name, vals in curves.items():
        write_spectrum_csv(SpectralCurve(WL, vals / vals.max()), out / f"{name}.csv")


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    make_response()
    make_reflectances()
    make_illuminants()
    print(f"wrote bundled data under {DATA}")
