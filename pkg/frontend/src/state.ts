/**
 * Editor state: per-light brightness plus target coefficients kept
 * unit-norm under every interaction.  The spectrum control is two
 * angles around the estimated coefficients (polar offset and azimuth
 * in the tangent plane), so any slider position stays on the sphere.
 */

import { Bundle } from './bundle.js';

export interface LightState {
  mu: number;
  /** offset from the estimated coefficients, degrees [0, 60] */
  thetaDeg: number;
  /** azimuth in the tangent plane, degrees [0, 360) */
  phiDeg: number;
  /** when a preset is active it overrides the angle parameterization */
  preset: number[] | null;
}

export interface EditorState {
  bundle: Bundle;
  lights: LightState[];
  exposure: number;
}

export const MU_MAX = 4.0;

export function initialState(bundle: Bundle): EditorState {
  return {
    bundle,
    lights: bundle.lights.map(() => ({
      mu: 1.0,
      thetaDeg: 0.0,
      phiDeg: 0.0,
      preset: null,
    })),
    exposure: 1.0,
  };
}

function tangentFrame(c: Float64Array): [Float64Array, Float64Array] {
  // matches the deterministic frame used by the pipeline
  let h = [0, 0, 1];
  if (Math.abs(c[2]) > 0.9) h = [1, 0, 0];
  const u = [
    h[1] * c[2] - h[2] * c[1],
    h[2] * c[0] - h[0] * c[2],
    h[0] * c[1] - h[1] * c[0],
  ];
  const un = Math.hypot(u[0], u[1], u[2]);
  const uu = Float64Array.from([u[0] / un, u[1] / un, u[2] / un]);
  const v = Float64Array.from([
    c[1] * uu[2] - c[2] * uu[1],
    c[2] * uu[0] - c[0] * uu[2],
    c[0] * uu[1] - c[1] * uu[0],
  ]);
  return [uu, v];
}

/** Unit-norm target coefficients for one light under the current state. */
export function targetCoefficients(
  bundle: Bundle,
  state: LightState,
  lightIndex: number
): Float64Array {
  if (state.preset) {
    const p = Float64Array.from(state.preset);
    const norm = Math.hypot(p[0], p[1], p[2]);
    return Float64Array.from([p[0] / norm, p[1] / norm, p[2] / norm]);
  }
  const base = bundle.lights[lightIndex];
  const theta = (state.thetaDeg * Math.PI) / 180.0;
  const phi = (state.phiDeg * Math.PI) / 180.0;
  const [u, v] = tangentFrame(base);
  const out = new Float64Array(3);
  const ct = Math.cos(theta);
  const st = Math.sin(theta);
  for (let k = 0; k < 3; k++) {
    out[k] = ct * base[k] + st * (Math.cos(phi) * u[k] + Math.sin(phi) * v[k]);
  }
  // renormalize against accumulated floating error
  const norm = Math.hypot(out[0], out[1], out[2]);
  return Float64Array.from([out[0] / norm, out[1] / norm, out[2] / norm]);
}

export function clampMu(mu: number): number {
  return Math.min(Math.max(mu, 0), MU_MAX);
}
