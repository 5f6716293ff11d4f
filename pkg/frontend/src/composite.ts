/**
 * Compositing: linear float render of the current edit, then the exact
 * sRGB transfer.  The math mirrors the CLI renderer so the editor and
 * `lumisep relight` agree to the last display byte.
 */

import { Bundle } from './bundle.js';
import { EditorState, targetCoefficients } from './state.js';

/** Linear composite: sum_j mu_j * (M_j(p) @ btilde_j), clamped at 0. */
export function compositeLinear(state: EditorState): Float32Array {
  const bundle = state.bundle;
  const pixels = bundle.width * bundle.height;
  const out = new Float32Array(pixels * 3);
  for (let j = 0; j < bundle.n; j++) {
    const mu = state.lights[j].mu;
    if (mu === 0) continue;
    const bt = targetCoefficients(bundle, state.lights[j], j);
    const b0 = bt[0];
    const b1 = bt[1];
    const b2 = bt[2];
    const m = bundle.matrices[j];
    for (let p = 0; p < pixels; p++) {
      const o = p * 9;
      out[p * 3] += mu * (m[o] * b0 + m[o + 1] * b1 + m[o + 2] * b2);
      out[p * 3 + 1] += mu * (m[o + 3] * b0 + m[o + 4] * b1 + m[o + 5] * b2);
      out[p * 3 + 2] += mu * (m[o + 6] * b0 + m[o + 7] * b1 + m[o + 8] * b2);
    }
  }
  for (let i = 0; i < out.length; i++) {
    if (out[i] < 0) out[i] = 0;
  }
  return out;
}

export function srgbEncode(linear: number): number {
  if (linear <= 0.0031308) return 12.92 * linear;
  return 1.055 * Math.pow(linear, 1 / 2.4) - 0.055;
}

/** Exposure, clamp, sRGB, 8-bit RGBA (alpha 255). */
export function toneMapRgba(linear: Float32Array, exposure: number): Uint8ClampedArray {
  const pixels = linear.length / 3;
  const out = new Uint8ClampedArray(pixels * 4);
  for (let p = 0; p < pixels; p++) {
    for (let c = 0; c < 3; c++) {
      let v = linear[p * 3 + c] * exposure;
      if (v < 0) v = 0;
      else if (v > 1) v = 1;
      out[p * 4 + c] = Math.round(srgbEncode(v) * 255);
    }
    out[p * 4 + 3] = 255;
  }
  return out;
}

/** The exported image is exactly the displayed composite. */
export function renderDisplayBytes(state: EditorState): Uint8ClampedArray {
  return toneMapRgba(compositeLinear(state), state.exposure);
}
