"""Command-line pipeline.

Exit codes: 0 success, 2 on input errors (missing or malformed files, bad
configuration), 3 on estimation failures (pruning emptied the set,
degenerate geometry).  Diagnostics on stderr are tagged with the failing
stage.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import apps, hullfit, pfm, spectral, synth
from .defaults import default_bases, default_response
from .errors import EstimationError, InputError, LumisepError
from .hullfit import RansacConfig
from .pipeline import (
    PipelineConfig,
    default_presets,
    run_separation,
    separation_manifest,
)


def _add_pair_args(p):
    p.add_argument("--flash", help="flash image (PFM)")
    p.add_argument("--noflash", required=True, help="no-flash image (PFM)")
    p.add_argument(
        "--pure-flash-image",
        help="use this image as the pure-flash input instead of flash minus "
        "no-flash (sun/sky time-lapse mode)",
    )


def _add_pipeline_args(p):
    p.add_argument("--n", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--bins", type=int, default=hullfit.DEFAULT_BINS)
    p.add_argument(
        "--min-bin-count",
        type=int,
        default=hullfit.DEFAULT_MIN_COUNT,
        help="histogram pruning threshold; lower it for small images",
    )
    p.add_argument("--dark-threshold", type=float, default=1e-3)
    p.add_argument("--cond-limit", type=float, default=1e6)
    p.add_argument("--ransac-angle", type=float, default=1.0)
    p.add_argument("--ransac-iterations", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--basis-refl", help="reflectance basis CSV (default: bundled)")
    p.add_argument("--basis-illum", help="illumination basis CSV (default: bundled)")
    p.add_argument("--response", help="camera response CSV (default: bundled)")


def _load_bases(args):
    refl = spectral.read_basis_csv(args.basis_refl) if args.basis_refl else None
    illum = spectral.read_basis_csv(args.basis_illum) if args.basis_illum else None
    if refl is None or illum is None:
        d_refl, d_illum = default_bases()
        refl = refl or d_refl
        illum = illum or d_illum
    response = (
        spectral.read_response_csv(args.response) if args.response else default_response()
    )
    return refl, illum, response


def _config(args):
    return PipelineConfig(
        n=args.n,
        bins=args.bins,
        min_bin_count=args.min_bin_count,
        dark_threshold=args.dark_threshold,
        cond_limit=args.cond_limit,
        ransac=RansacConfig(
            inlier_angle_deg=args.ransac_angle,
            iterations=args.ransac_iterations,
            seed=args.seed,
        ),
        seed=args.seed,
    )


def _read_inputs(args):
    noflash = pfm.read_pfm(args.noflash)
    flash = pure = None
    if args.pure_flash_image:
        pure = pfm.read_pfm(args.pure_flash_image)
    elif args.flash:
        flash = pfm.read_pfm(args.flash)
    else:
        raise InputError("provide --flash or --pure-flash-image")
    return noflash, flash, pure


def _run(args):
    refl, illum, response = _load_bases(args)
    noflash, flash, pure = _read_inputs(args)
    return run_separation(
        noflash,
        flash=flash,
        cfg=_config(args),
        refl_basis=refl,
        illum_basis=illum,
        response=response,
        pure_flash_image=pure,
    )


def cmd_separate(args):
    art = _run(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)

    exposure = pfm.auto_exposure(np.asarray(art.result.layers).sum(axis=0))
    layer_names, shading_names = [], []
    for j in range(art.lights.count):
        name = f"sep_{j}.pfm"
        pfm.write_pfm(art.result.layers[j], out / name)
        pfm.write_preview_png(art.result.layers[j], out / f"sep_{j}.png", exposure)
        layer_names.append(name)
        sh = art.gamma.beta_norm * art.shading.z[:, :, j]
        sh_name = f"shading_{j}.pfm"
        pfm.write_pfm(np.repeat(sh[:, :, None], 3, axis=2), out / sh_name)
        shading_names.append(sh_name)
    pfm.write_pfm(np.repeat(np.linalg.norm(art.alpha.alpha, axis=2)[:, :, None], 3, axis=2), out / "alpha_norm.pfm")

    manifest = separation_manifest(art, _config(args), layer_names, shading_names)
    with open(out / "separation.json", "w") as fh:
        json.dump(manifest, fh, indent=2)

    if args.bundle:
        bundle = apps.build_relight_bundle(
            art.alpha, art.gamma, art.shading, art.lights, art.coupling
        )
        apps.save_bundle(bundle, args.bundle, presets=default_presets())
    print(f"wrote {art.lights.count} layers to {out}")
    return 0


def cmd_estimate_lights(args):
    art = _run(args)
    payload = art.lights.to_json_dict()
    if args.output:
        with open(args.output, "w") as fh:
            json.dump(payload, fh, indent=2)
    else:
        json.dump(payload, sys.stdout, indent=2)
        print()
    return 0


def cmd_bundle(args):
    art = _run(args)
    bundle = apps.build_relight_bundle(
        art.alpha, art.gamma, art.shading, art.lights, art.coupling
    )
    apps.save_bundle(bundle, args.output, presets=default_presets())
    print(f"wrote bundle to {args.output}")
    return 0


def cmd_relight(args):
    bundle = apps.load_bundle(args.bundle)
    if args.edit:
        with open(args.edit) as fh:
            spec = json.load(fh)
        edit = apps.RelightEdit(
            brightness=np.asarray(spec["mu"], dtype=float),
            coefficients=np.asarray(spec["coefficients"], dtype=float),
        )
    else:
        edit = apps.identity_edit(bundle)
    image = apps.relight(bundle, edit)
    _write_image_outputs(image, args.output, args.exposure)
    return 0


def cmd_wb(args):
    bundle = apps.load_bundle(args.bundle)
    if args.basis_illum:
        illum = spectral.read_basis_csv(args.basis_illum)
    else:
        _, illum = default_bases()
    image = apps.white_balance(bundle, spectral.flash_coefficients(illum))
    _write_image_outputs(image, args.output, args.exposure)
    return 0


def _write_image_outputs(image, output, exposure):
    output = Path(output)
    if output.suffix.lower() == ".png":
        pfm.write_preview_png(image, output, exposure or pfm.auto_exposure(image))
    else:
        pfm.write_pfm(image, output)


def cmd_ps(args):
    sep_dir = Path(args.separation)
    with open(sep_dir / "separation.json") as fh:
        manifest = json.load(fh)
    shading = [pfm.read_pfm(sep_dir / name)[:, :, 0] for name in manifest["shading"]]
    with open(args.directions) as fh:
        directions = [np.asarray(d, dtype=float) for d in json.load(fh)]
    if len(directions) != len(shading):
        raise InputError(
            f"{len(directions)} directions for {len(shading)} shading images"
        )
    if args.use_flash:
        alpha_norm = pfm.read_pfm(sep_dir / "alpha_norm.pfm")[:, :, 0]
        shading.append(alpha_norm)
        directions.append(np.array([0.0, 0.0, 1.0]))
    normal_map = apps.photometric_stereo(
        shading, np.stack(directions), min_valid=args.min_valid,
        shadow_fraction=args.shadow_fraction,
    )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    pfm.write_pfm(normal_map.normals, out / "normals.pfm")
    pfm.write_pfm(np.repeat(normal_map.albedo[:, :, None], 3, axis=2), out / "albedo.pfm")
    preview = (normal_map.normals + 1.0) / 2.0
    preview[~normal_map.mask] = 0.0
    pfm.write_preview_png(preview, out / "normals.png", 1.0)
    print(f"wrote normals to {out} ({int(normal_map.mask.sum())} valid pixels)")
    return 0


def cmd_synth(args):
    scene = synth.make_pure_pixel_scene(
        n=args.n, separation_deg=args.separation, size=args.size, seed=args.seed
    )
    refl, illum = default_bases()
    gt = synth.render(scene, refl, illum, default_response())
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    flash, noflash = gt.flash, gt.noflash
    if args.noise > 0:
        flash = synth.add_noise(flash, args.noise, seed=args.seed)
        noflash = synth.add_noise(noflash, args.noise, seed=args.seed + 1)
    pfm.write_pfm(flash, out / "flash.pfm")
    pfm.write_pfm(noflash, out / "noflash.pfm")
    for j in range(len(scene.lights)):
        pfm.write_pfm(gt.layers[j], out / f"gt_sep_{j}.pfm")
    truth = {
        "n": len(scene.lights),
        "coefficients": [[float(v) for v in l.coeffs] for l in scene.lights],
        "directions": [[float(v) for v in l.direction] for l in scene.lights],
        "intensities": [float(l.intensity) for l in scene.lights],
        "seed": args.seed,
    }
    with open(out / "lights_true.json", "w") as fh:
        json.dump(truth, fh, indent=2)
    print(f"wrote synthetic fixture to {out}")
    return 0


def cmd_basis(args):
    response = (
        spectral.read_response_csv(args.response) if args.response else default_response()
    )
    database = spectral.read_database(args.database)
    basis = spectral.weighted_pca(database, response, args.role)
    spectral.write_basis_csv(basis, args.output)
    print(f"wrote {args.role} basis to {args.output}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lumisep",
        description="Flash/no-flash illuminant source separation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("separate", help="run the full separation pipeline")
    _add_pair_args(p)
    _add_pipeline_args(p)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--bundle", help="also write a relight bundle to this directory")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("estimate-lights", help="estimate illuminant coefficients only")
    _add_pair_args(p)
    _add_pipeline_args(p)
    p.add_argument("-o", "--output", help="lights JSON path (default: stdout)")
    p.set_defaults(func=cmd_estimate_lights)

    p = sub.add_parser("bundle", help="run the pipeline and write a relight bundle")
    _add_pair_args(p)
    _add_pipeline_args(p)
    p.add_argument("-o", "--output", required=True, help="bundle directory")
    p.set_defaults(func=cmd_bundle)

    p = sub.add_parser("relight", help="evaluate an edit through a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--edit", help='JSON {"mu": [...], "coefficients": [[...], ...]}')
    p.add_argument("--exposure", type=float, default=None)
    p.add_argument("-o", "--output", required=True, help=".pfm or .png path")
    p.set_defaults(func=cmd_relight)

    p = sub.add_parser("wb", help="white balance: re-render all lights flat")
    p.add_argument("--bundle", required=True)
    p.add_argument("--basis-illum")
    p.add_argument("--exposure", type=float, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_wb)

    p = sub.add_parser("ps", help="photometric stereo from separated shadings")
    p.add_argument("--separation", required=True, help="separate output directory")
    p.add_argument("--directions", required=True, help="JSON list of unit 3-vectors")
    p.add_argument("--use-flash", action="store_true",
                   help="append the pure-flash channel as a light along +z")
    p.add_argument("--min-valid", type=int, default=3)
    p.add_argument("--shadow-fraction", type=float, default=0.01)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_ps)

    p = sub.add_parser("synth", help="render a synthetic flash/no-flash fixture")
    p.add_argument("--n", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--separation", type=float, default=20.0)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("basis", help="fit a 3-vector basis to a spectra database")
    p.add_argument("--database", required=True, help="directory of spectrum CSVs")
    p.add_argument("--response")
    p.add_argument("--role", choices=(spectral.REFLECTANCE, spectral.ILLUMINATION),
                   required=True)
    p.add_argument("-o", "--output", required=True, help="basis CSV path")
    p.set_defaults(func=cmd_basis)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EstimationError as exc:
        print(f"lumisep: {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (InputError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"lumisep: {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except LumisepError as exc:
        print(f"lumisep: {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
