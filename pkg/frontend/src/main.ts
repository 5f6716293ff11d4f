/**
 * DOM wiring: bundle loading, per-light sliders, live canvas
 * compositing, PNG export.  All pixel math lives in composite.ts;
 * the canvas holds exactly those bytes, so exports match the display.
 */

import { assembleBundle, Bundle, fetchBundle, parseManifest } from './bundle.js';
import { renderDisplayBytes } from './composite.js';
import { clampMu, EditorState, initialState, MU_MAX } from './state.js';

let state: EditorState | null = null;
let renderQueued = false;

const canvas = document.getElementById('view') as HTMLCanvasElement;
const panels = document.getElementById('panels') as HTMLDivElement;
const status = document.getElementById('status') as HTMLDivElement;

function setStatus(text: string, isError = false) {
  status.textContent = text;
  status.className = isError ? 'error' : '';
}

function scheduleRender() {
  if (renderQueued || !state) return;
  renderQueued = true;
  requestAnimationFrame(() => {
    renderQueued = false;
    if (!state) return;
    const t0 = performance.now();
    const bytes = renderDisplayBytes(state);
    const ctx = canvas.getContext('2d')!;
    canvas.width = state.bundle.width;
    canvas.height = state.bundle.height;
    ctx.putImageData(
      new ImageData(
        new Uint8ClampedArray(bytes),
        state.bundle.width,
        state.bundle.height
      ),
      0,
      0
    );
    setStatus(
      `${state.bundle.width}x${state.bundle.height}, ${state.bundle.n} lights, ` +
        `composite ${(performance.now() - t0).toFixed(1)} ms`
    );
  });
}

function slider(
  label: string,
  min: number,
  max: number,
  step: number,
  value: number,
  onInput: (v: number) => void
): HTMLLabelElement {
  const wrap = document.createElement('label');
  const span = document.createElement('span');
  const input = document.createElement('input');
  const readout = document.createElement('output');
  span.textContent = label;
  input.type = 'range';
  input.min = String(min);
  input.max = String(max);
  input.step = String(step);
  input.value = String(value);
  readout.value = input.value;
  input.addEventListener('input', () => {
    readout.value = input.value;
    onInput(parseFloat(input.value));
    scheduleRender();
  });
  wrap.append(span, input, readout);
  return wrap;
}

function buildPanels() {
  if (!state) return;
  panels.textContent = '';
  const bundle = state.bundle;

  panels.appendChild(
    slider('exposure', 0.01, 4, 0.01, state.exposure, (v) => {
      state!.exposure = v;
    })
  );

  for (let j = 0; j < bundle.n; j++) {
    const box = document.createElement('fieldset');
    const legend = document.createElement('legend');
    legend.textContent = `light ${j + 1}`;
    box.appendChild(legend);
    const ls = state.lights[j];

    box.appendChild(
      slider('brightness', 0, MU_MAX, 0.01, ls.mu, (v) => {
        ls.mu = clampMu(v);
      })
    );
    box.appendChild(
      slider('spectrum shift', 0, 60, 0.5, ls.thetaDeg, (v) => {
        ls.preset = null;
        ls.thetaDeg = v;
      })
    );
    box.appendChild(
      slider('spectrum hue', 0, 360, 1, ls.phiDeg, (v) => {
        ls.preset = null;
        ls.phiDeg = v;
      })
    );

    if (bundle.presets.length) {
      const row = document.createElement('div');
      row.className = 'presets';
      const reset = document.createElement('button');
      reset.textContent = 'estimated';
      reset.addEventListener('click', () => {
        ls.preset = null;
        ls.thetaDeg = 0;
        ls.phiDeg = 0;
        buildPanels();
        scheduleRender();
      });
      row.appendChild(reset);
      for (const preset of bundle.presets) {
        const btn = document.createElement('button');
        btn.textContent = preset.name;
        btn.addEventListener('click', () => {
          ls.preset = preset.coefficients.slice();
          scheduleRender();
        });
        row.appendChild(btn);
      }
      box.appendChild(row);
    }
    panels.appendChild(box);
  }

  const exportBtn = document.createElement('button');
  exportBtn.id = 'export';
  exportBtn.textContent = 'export PNG';
  exportBtn.addEventListener('click', () => {
    canvas.toBlob((blob) => {
      if (!blob) return;
      const a = document.createElement('a');
      a.href = URL.createObjectURL(blob);
      a.download = 'relight.png';
      a.click();
      URL.revokeObjectURL(a.href);
    }, 'image/png');
  });
  panels.appendChild(exportBtn);
}

function useBundle(bundle: Bundle) {
  state = initialState(bundle);
  buildPanels();
  scheduleRender();
}

async function loadFromFiles(files: FileList) {
  const byName = new Map<string, File>();
  for (const f of Array.from(files)) byName.set(f.name, f);
  const manifestFile = byName.get('manifest.json');
  if (!manifestFile) {
    setStatus('pick a bundle directory containing manifest.json', true);
    return;
  }
  try {
    const manifest = parseManifest(await manifestFile.text());
    const blobs = await Promise.all(
      manifest.blobs.map(async (name) => {
        const f = byName.get(name);
        if (!f) throw new Error(`missing blob ${name}`);
        return f.arrayBuffer();
      })
    );
    useBundle(assembleBundle(manifest, blobs));
  } catch (err) {
    setStatus(String(err), true);
  }
}

const picker = document.getElementById('picker') as HTMLInputElement;
picker.addEventListener('change', () => {
  if (picker.files && picker.files.length) loadFromFiles(picker.files);
});

const params = new URLSearchParams(window.location.search);
const bundleUrl = params.get('bundle');
if (bundleUrl) {
  fetchBundle(bundleUrl)
    .then(useBundle)
    .catch((err) => setStatus(String(err), true));
} else {
  setStatus('load a bundle directory (or add ?bundle=<url>)');
}
