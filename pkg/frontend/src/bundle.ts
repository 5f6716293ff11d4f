/**
 * Relight bundle loading (format "lsrb-1").
 *
 * A bundle is a manifest plus one raw blob per light: little-endian
 * float32, row-major, 9 values per pixel (the per-pixel 3x3 mixing
 * matrix, row order M[0,0..2], M[1,0..2], M[2,0..2]).  Rendering an
 * edit is sum_j mu_j * (M_j(p) @ btilde_j), clamped at zero.
 */

export interface Preset {
  name: string;
  coefficients: number[];
}

export interface BundleManifest {
  format: string;
  width: number;
  height: number;
  n: number;
  lights: number[][];
  blobs: string[];
  presets?: Preset[];
}

export interface Bundle {
  width: number;
  height: number;
  n: number;
  /** estimated unit coefficient vectors, one per light */
  lights: Float64Array[];
  /** per light: width*height*9 float32 mixing matrices */
  matrices: Float32Array[];
  presets: Preset[];
}

export class VersionMismatch extends Error {}
export class SizeMismatch extends Error {}

export function parseManifest(text: string): BundleManifest {
  const manifest = JSON.parse(text) as BundleManifest;
  if (manifest.format !== 'lsrb-1') {
    throw new VersionMismatch(`unsupported bundle format ${manifest.format}`);
  }
  if (!Number.isInteger(manifest.n) || manifest.n < 1) {
    throw new SizeMismatch(`bad light count ${manifest.n}`);
  }
  if (!Array.isArray(manifest.blobs) || manifest.blobs.length !== manifest.n) {
    throw new SizeMismatch(
      `manifest lists ${manifest.blobs?.length ?? 0} blobs for n=${manifest.n}`
    );
  }
  return manifest;
}

export function assembleBundle(
  manifest: BundleManifest,
  blobs: ArrayBuffer[]
): Bundle {
  if (blobs.length !== manifest.n) {
    throw new SizeMismatch(`got ${blobs.length} blobs for n=${manifest.n}`);
  }
  const expected = manifest.width * manifest.height * 9 * 4;
  const matrices: Float32Array[] = [];
  for (let j = 0; j < manifest.n; j++) {
    if (blobs[j].byteLength !== expected) {
      throw new SizeMismatch(
        `${manifest.blobs[j]}: ${blobs[j].byteLength} bytes, expected ${expected}`
      );
    }
    matrices.push(new Float32Array(blobs[j]));
  }
  const lights = manifest.lights.map((row) => {
    const v = Float64Array.from(row);
    const norm = Math.hypot(v[0], v[1], v[2]);
    return Float64Array.from([v[0] / norm, v[1] / norm, v[2] / norm]);
  });
  return {
    width: manifest.width,
    height: manifest.height,
    n: manifest.n,
    lights,
    matrices,
    presets: manifest.presets ?? [],
  };
}

export async function fetchBundle(baseUrl: string): Promise<Bundle> {
  const res = await fetch(`${baseUrl}/manifest.json`);
  if (!res.ok) throw new Error(`cannot fetch ${baseUrl}/manifest.json`);
  const manifest = parseManifest(await res.text());
  const blobs = await Promise.all(
    manifest.blobs.map(async (name) => {
      const r = await fetch(`${baseUrl}/${name}`);
      if (!r.ok) throw new Error(`cannot fetch ${baseUrl}/${name}`);
      return r.arrayBuffer();
    })
  );
  return assembleBundle(manifest, blobs);
}
