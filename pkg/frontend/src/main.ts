// Browser wiring: canvases, brush handling, and the submit/rate loop.
// All decision logic lives in the tested modules; this file only adapts the
// DOM to them.

import { ServiceClient } from './api.js';
import { RasterImage, makeRaster } from './raster.js';
import { CanvasSession } from './session.js';
import { StrokeLayer } from './sketch.js';

const SCALE_DIMS: Record<string, [number, number]> = {
  desk: [64, 64],
  full: [128, 128],
};
const LAYER_FACTOR = 4; // drawing grid oversampling vs model resolution
const DISPLAY_ZOOM = 3;

async function browserInflate(zlibStream: Uint8Array): Promise<Uint8Array> {
  const ds = new DecompressionStream('deflate');
  const stream = new Blob([zlibStream as BlobPart]).stream().pipeThrough(ds);
  return new Uint8Array(await new Response(stream).arrayBuffer());
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function drawRaster(canvas: HTMLCanvasElement, img: RasterImage, zoom: number): void {
  canvas.width = img.width;
  canvas.height = img.height;
  canvas.style.width = `${img.width * zoom}px`;
  canvas.style.height = `${img.height * zoom}px`;
  const ctx = canvas.getContext('2d')!;
  const rgba = new Uint8ClampedArray(img.width * img.height * 4);
  for (let i = 0, j = 0; j < rgba.length; i += img.channels, j += 4) {
    rgba[j] = img.data[i];
    rgba[j + 1] = img.data[img.channels === 1 ? i : i + 1];
    rgba[j + 2] = img.data[img.channels === 1 ? i : i + 2];
    rgba[j + 3] = 255;
  }
  ctx.putImageData(new ImageData(rgba, img.width, img.height), 0, 0);
}

async function fileToRaster(file: File, height: number, width: number): Promise<RasterImage> {
  const bitmap = await createImageBitmap(file);
  const canvas = document.createElement('canvas');
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext('2d')!;
  ctx.drawImage(bitmap, 0, 0, width, height);
  const rgba = ctx.getImageData(0, 0, width, height).data;
  const out = makeRaster(width, height, 3);
  for (let i = 0, j = 0; i < rgba.length; i += 4, j += 3) {
    out.data[j] = rgba[i];
    out.data[j + 1] = rgba[i + 1];
    out.data[j + 2] = rgba[i + 2];
  }
  return out;
}

function main(): void {
  const status = el<HTMLElement>('status');
  const panoramaCanvas = el<HTMLCanvasElement>('panorama');
  const drawCanvas = el<HTMLCanvasElement>('draw');
  const historyList = el<HTMLElement>('history');
  const submitButton = el<HTMLButtonElement>('submit');
  const rateButtons = [0, 1, 2].map((r) => el<HTMLButtonElement>(`rate-${r}`));

  let client: ServiceClient | null = null;
  let session: CanvasSession | null = null;
  let layer: StrokeLayer | null = null;
  let modelHeight = 64;
  let modelWidth = 64;
  let brushRadius = 6;
  let erasing = false;

  function say(text: string): void {
    status.textContent = text;
  }

  function renderLayer(): void {
    if (!layer) return;
    const img: RasterImage = {
      width: layer.width,
      height: layer.height,
      channels: 1,
      data: Uint8Array.from(layer.grid, (v) => (v ? 20 : 235)),
    };
    drawRaster(drawCanvas, img, DISPLAY_ZOOM / LAYER_FACTOR);
  }

  function renderSession(): void {
    if (!session) return;
    drawRaster(panoramaCanvas, session.panorama(), DISPLAY_ZOOM);
    historyList.textContent = '';
    const base = document.createElement('button');
    base.textContent = 'base';
    base.disabled = session.selected === -1;
    base.onclick = () => {
      session!.select(-1);
      renderSession();
    };
    historyList.appendChild(base);
    session.history.forEach((step, i) => {
      const b = document.createElement('button');
      b.textContent = `step ${i + 1}`;
      b.disabled = session!.selected === i;
      b.onclick = () => {
        session!.select(i);
        renderSession();
      };
      historyList.appendChild(b);
    });
    const ready = !session.pending;
    submitButton.disabled = !ready;
    for (const b of rateButtons) b.disabled = !ready || !session.canRate;
  }

  el<HTMLButtonElement>('connect').onclick = async () => {
    const baseUrl = el<HTMLInputElement>('service-url').value.replace(/\/$/, '');
    client = new ServiceClient(baseUrl, (url, init) => fetch(url, init), browserInflate);
    try {
      const health = await client.health();
      [modelHeight, modelWidth] = SCALE_DIMS[health.scale] ?? [64, 64];
      layer = new StrokeLayer(modelHeight * LAYER_FACTOR, modelWidth * LAYER_FACTOR);
      renderLayer();
      say(`connected: ${health.scale} model ${health.model_fingerprint}`);
    } catch (err) {
      say(`connection failed: ${err}`);
    }
  };

  el<HTMLInputElement>('file').onchange = async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file || !client) return;
    const base = await fileToRaster(file, modelHeight, modelWidth);
    session = new CanvasSession(client, base);
    renderSession();
    say('base image loaded, draw the next half and submit');
  };

  el<HTMLInputElement>('brush').oninput = (ev) => {
    brushRadius = Number((ev.target as HTMLInputElement).value);
  };
  el<HTMLInputElement>('eraser').onchange = (ev) => {
    erasing = (ev.target as HTMLInputElement).checked;
  };
  el<HTMLButtonElement>('undo').onclick = () => {
    layer?.undo();
    renderLayer();
  };
  el<HTMLButtonElement>('clear').onclick = () => {
    layer?.clear();
    renderLayer();
  };

  let drawing = false;
  let last: [number, number] | null = null;

  function canvasPoint(ev: PointerEvent): [number, number] {
    const rect = drawCanvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * (layer?.width ?? 1);
    const y = ((ev.clientY - rect.top) / rect.height) * (layer?.height ?? 1);
    return [x, y];
  }

  drawCanvas.onpointerdown = (ev) => {
    if (!layer) return;
    drawing = true;
    layer.beginStroke();
    last = canvasPoint(ev);
    layer.stampDisc(last[0], last[1], brushRadius, erasing ? 0 : 1);
    renderLayer();
  };
  drawCanvas.onpointermove = (ev) => {
    if (!drawing || !layer || !last) return;
    const next = canvasPoint(ev);
    layer.drawLine(last[0], last[1], next[0], next[1], brushRadius, erasing ? 0 : 1);
    last = next;
    renderLayer();
  };
  const endStroke = () => {
    drawing = false;
    last = null;
  };
  drawCanvas.onpointerup = endStroke;
  drawCanvas.onpointerleave = endStroke;

  submitButton.onclick = async () => {
    if (!session || !layer) return;
    submitButton.disabled = true;
    say('outpainting...');
    try {
      const step = await session.submit(layer.exportSketch(modelHeight, modelWidth));
      say(`step ${session.history.length} done (${step.exampleId})`);
      layer.clear();
      renderLayer();
    } catch (err) {
      say(`request failed: ${err}`);
    }
    renderSession();
  };

  rateButtons.forEach((button, rating) => {
    button.onclick = async () => {
      if (!session) return;
      try {
        await session.rateSelected(rating);
        say(`rated ${rating}`);
      } catch (err) {
        say(`rating failed: ${err}`);
      }
    };
  });

  say('set the service URL and connect');
}

main();
