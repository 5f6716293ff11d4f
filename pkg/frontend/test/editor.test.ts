/**
 * Editor parity against the CLI on the shared fixture bundle: scripted
 * edit states must composite to within 1/255 per channel of `lumisep
 * relight`, and the identity state must match the separated-layer sum.
 */

import { readFileSync } from 'node:fs';
import { join } from 'node:path';
import { PNG } from 'pngjs';
import { describe, expect, it } from 'vitest';

import { assembleBundle, Bundle, parseManifest, SizeMismatch, VersionMismatch } from '../src/bundle.js';
import { compositeLinear, renderDisplayBytes, srgbEncode, toneMapRgba } from '../src/composite.js';
import { EditorState, initialState, targetCoefficients } from '../src/state.js';

const FIXTURES = join(__dirname, 'fixtures');

interface Edit {
  mu: number[];
  coefficients: number[][];
}

function readPfm(path: string): { width: number; height: number; data: Float32Array } {
  const buf = readFileSync(path);
  const headerEnd = indexOfNth(buf, 0x0a, 3) + 1;
  const header = buf.subarray(0, headerEnd).toString('ascii').split('\n');
  if (header[0] !== 'PF') throw new Error(`not a color PFM: ${path}`);
  const [width, height] = header[1].split(' ').map(Number);
  const scale = parseFloat(header[2]);
  if (scale >= 0) throw new Error('expected little-endian PFM');
  // copy: node buffer pools are not 4-byte aligned
  const payload = Uint8Array.prototype.slice.call(buf, headerEnd);
  const flipped = new Float32Array(payload.buffer, 0, width * height * 3);
  const data = new Float32Array(width * height * 3);
  for (let row = 0; row < height; row++) {
    const src = (height - 1 - row) * width * 3;
    data.set(flipped.subarray(src, src + width * 3), row * width * 3);
  }
  return { width, height, data };
}

function indexOfNth(buf: Buffer, byte: number, n: number): number {
  let at = -1;
  for (let k = 0; k < n; k++) {
    at = buf.indexOf(byte, at + 1);
    if (at < 0) throw new Error('truncated header');
  }
  return at;
}

function loadBundle(): Bundle {
  const dir = join(FIXTURES, 'bundle');
  const manifest = parseManifest(readFileSync(join(dir, 'manifest.json'), 'utf8'));
  const blobs = manifest.blobs.map((name) => {
    const b = readFileSync(join(dir, name));
    return b.buffer.slice(b.byteOffset, b.byteOffset + b.byteLength);
  });
  return assembleBundle(manifest, blobs);
}

function loadEdits(): Edit[] {
  return JSON.parse(readFileSync(join(FIXTURES, 'edits.json'), 'utf8'));
}

function fixtureExposure(): number {
  return JSON.parse(readFileSync(join(FIXTURES, 'exposure.json'), 'utf8')).exposure;
}

function stateForEdit(bundle: Bundle, edit: Edit, exposure: number): EditorState {
  const state = initialState(bundle);
  state.exposure = exposure;
  for (let j = 0; j < bundle.n; j++) {
    state.lights[j].mu = edit.mu[j];
    state.lights[j].preset = edit.coefficients[j];
  }
  return state;
}

function encodeReference(linear: Float32Array, exposure: number): Uint8ClampedArray {
  return toneMapRgba(linear, exposure);
}

function maxChannelDiff(a: Uint8ClampedArray, b: Uint8ClampedArray): number {
  let worst = 0;
  for (let p = 0; p < a.length; p += 4) {
    for (let c = 0; c < 3; c++) {
      worst = Math.max(worst, Math.abs(a[p + c] - b[p + c]));
    }
  }
  return worst;
}

describe('bundle loading', () => {
  it('accepts the fixture bundle and seeds the identity state', () => {
    const bundle = loadBundle();
    expect(bundle.n).toBe(2);
    const state = initialState(bundle);
    for (let j = 0; j < bundle.n; j++) {
      expect(state.lights[j].mu).toBe(1);
      const bt = targetCoefficients(bundle, state.lights[j], j);
      for (let c = 0; c < 3; c++) {
        expect(bt[c]).toBeCloseTo(bundle.lights[j][c], 12);
      }
    }
    expect(bundle.presets.length).toBeGreaterThanOrEqual(3);
  });

  it('rejects a wrong format version', () => {
    const text = readFileSync(join(FIXTURES, 'bundle', 'manifest.json'), 'utf8');
    expect(() => parseManifest(text.replace('lsrb-1', 'lsrb-2'))).toThrow(VersionMismatch);
  });

  it('rejects truncated blobs', () => {
    const dir = join(FIXTURES, 'bundle');
    const manifest = parseManifest(readFileSync(join(dir, 'manifest.json'), 'utf8'));
    const blobs = manifest.blobs.map((name) => {
      const b = readFileSync(join(dir, name));
      return b.buffer.slice(b.byteOffset, b.byteOffset + b.byteLength);
    });
    blobs[0] = blobs[0].slice(0, blobs[0].byteLength - 4);
    expect(() => assembleBundle(manifest, blobs)).toThrow(SizeMismatch);
  });

  it('rejects a manifest whose blob list disagrees with n', () => {
    const text = readFileSync(join(FIXTURES, 'bundle', 'manifest.json'), 'utf8');
    const broken = JSON.parse(text);
    broken.n = 3;
    expect(() => parseManifest(JSON.stringify(broken))).toThrow(SizeMismatch);
  });
});

describe('cli parity', () => {
  const bundle = loadBundle();
  const edits = loadEdits();
  const exposure = fixtureExposure();

  it('composites all scripted edit states within 1/255 of the CLI render', () => {
    expect(edits.length).toBe(10);
    for (let i = 0; i < edits.length; i++) {
      const state = stateForEdit(bundle, edits[i], exposure);
      const mine = renderDisplayBytes(state);
      const ref = readPfm(join(FIXTURES, `render_${String(i).padStart(3, '0')}.pfm`));
      const refBytes = encodeReference(ref.data, exposure);
      expect(maxChannelDiff(mine, refBytes), `edit ${i}`).toBeLessThanOrEqual(1);
    }
  });

  it('identity edit matches the sum of the separated layers', () => {
    const state = stateForEdit(bundle, edits[0], exposure);
    const mine = renderDisplayBytes(state);
    const a = readPfm(join(FIXTURES, 'sep_0.pfm'));
    const b = readPfm(join(FIXTURES, 'sep_1.pfm'));
    const sum = new Float32Array(a.data.length);
    for (let i = 0; i < sum.length; i++) sum[i] = a.data[i] + b.data[i];
    const refBytes = encodeReference(sum, exposure);
    expect(maxChannelDiff(mine, refBytes)).toBeLessThanOrEqual(1);
  });

  it('identity export matches the CLI preview PNG within 1/255', () => {
    const state = stateForEdit(bundle, edits[0], exposure);
    const mine = renderDisplayBytes(state);
    const png = PNG.sync.read(readFileSync(join(FIXTURES, 'identity_preview.png')));
    expect(png.width).toBe(bundle.width);
    expect(png.height).toBe(bundle.height);
    expect(maxChannelDiff(mine, new Uint8ClampedArray(png.data))).toBeLessThanOrEqual(1);
  });

  it('last scripted edit also matches its CLI preview PNG', () => {
    const state = stateForEdit(bundle, edits[9], exposure);
    const mine = renderDisplayBytes(state);
    const png = PNG.sync.read(readFileSync(join(FIXTURES, 'render_009.png')));
    expect(maxChannelDiff(mine, new Uint8ClampedArray(png.data))).toBeLessThanOrEqual(1);
  });
});

describe('compositing behaviour', () => {
  const bundle = loadBundle();

  it('zero brightness renders black', () => {
    const state = initialState(bundle);
    for (const ls of state.lights) ls.mu = 0;
    const linear = compositeLinear(state);
    expect(Math.max(...linear)).toBe(0);
  });

  it('doubling one light doubles its pre-clamp contribution', () => {
    const state = initialState(bundle);
    state.lights[1].mu = 0;
    const single = compositeLinear(state);
    state.lights[0].mu = 2;
    const doubled = compositeLinear(state);
    for (let i = 0; i < single.length; i += 917) {
      expect(doubled[i]).toBeCloseTo(2 * single[i], 5);
    }
  });

  it('export bytes are identical run to run', () => {
    const state = initialState(bundle);
    state.lights[0].mu = 1.7;
    state.lights[0].thetaDeg = 25;
    state.lights[0].phiDeg = 140;
    const a = renderDisplayBytes(state);
    const b = renderDisplayBytes(state);
    expect(Buffer.from(a.buffer).equals(Buffer.from(b.buffer))).toBe(true);
  });

  it('slider parameterization keeps coefficients unit-norm', () => {
    const state = initialState(bundle);
    for (let t = 0; t <= 60; t += 7) {
      for (let p = 0; p < 360; p += 35) {
        state.lights[0].thetaDeg = t;
        state.lights[0].phiDeg = p;
        const bt = targetCoefficients(bundle, state.lights[0], 0);
        expect(Math.hypot(bt[0], bt[1], bt[2])).toBeCloseTo(1, 9);
      }
    }
  });

  it('srgb transfer matches the reference values', () => {
    expect(srgbEncode(0)).toBe(0);
    expect(Math.round(srgbEncode(0.5) * 255)).toBe(188);
    expect(Math.round(srgbEncode(1) * 255)).toBe(255);
  });
});
