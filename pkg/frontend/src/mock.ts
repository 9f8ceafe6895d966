// In-memory stand-in for the outpainting service, speaking the same three
// endpoints with the same status codes and field names. Lets every UI test
// run without a trained model or a network. The fake generator mirrors the
// input window and inks the sketch pixels, which makes chaining visually and
// numerically checkable.

import { b64decode, b64encode } from './base64.js';
import { InflateFn, decodePng, encodePng } from './png.js';
import { RasterImage, concatColumns, cropColumns, mirrorColumns } from './raster.js';

export interface MockService {
  fetchFn: (url: string, init?: RequestInit) => Promise<Response>;
  ratingLines: string[]; // example_id,rating,rater_id,timestamp rows
  outpaintCalls: { image: RasterImage; sketches: RasterImage[] }[];
}

const FINGERPRINT = 'mock000000000000';

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

function fakeRightHalf(window: RasterImage, sketch: RasterImage): RasterImage {
  const out = mirrorColumns(window);
  for (let i = 0; i < sketch.data.length; i++) {
    if (sketch.data[i] !== 0) {
      out.data[i * 3] = 0;
      out.data[i * 3 + 1] = 0;
      out.data[i * 3 + 2] = 0;
    }
  }
  return out;
}

export function createMockService(halfHeight: number, halfWidth: number, inflate: InflateFn): MockService {
  const ratingLines: string[] = [];
  const outpaintCalls: MockService['outpaintCalls'] = [];
  const started = Date.now();

  async function handleOutpaint(body: any): Promise<Response> {
    let image: RasterImage;
    const sketches: RasterImage[] = [];
    try {
      image = await decodePng(b64decode(body.image), inflate);
      for (const payload of body.sketches) {
        sketches.push(await decodePng(b64decode(payload), inflate));
      }
    } catch (err) {
      return json(400, { detail: `undecodable raster payload: ${err}` });
    }
    if (image.height !== halfHeight || image.width !== halfWidth) {
      return json(422, {
        detail: `image is ${image.height}x${image.width}, expected ${halfHeight}x${halfWidth}`,
      });
    }
    for (let i = 0; i < sketches.length; i++) {
      const sk = sketches[i];
      if (sk.height !== halfHeight || sk.width !== halfWidth) {
        return json(422, {
          detail: `sketch ${i} is ${sk.height}x${sk.width}, expected ${halfHeight}x${halfWidth}`,
        });
      }
      if (!body.binarize_server_side && !sk.data.every((v) => v === 0 || v === 255)) {
        return json(422, { detail: `sketch ${i} is not binary and binarize_server_side is off` });
      }
    }
    outpaintCalls.push({ image, sketches });

    const blocks = [image];
    let window = image;
    for (const sk of sketches) {
      window = fakeRightHalf(window, sk);
      blocks.push(window);
    }
    const panorama = concatColumns(blocks);
    // paste-through holds by construction, but mirror the service anyway
    const left = cropColumns(panorama, 0, halfWidth);
    if (!left.data.every((v, i) => v === image.data[i])) {
      return json(500, { detail: 'paste-through violated' });
    }
    return json(200, {
      image: b64encode(encodePng(panorama)),
      model_fingerprint: FINGERPRINT,
      elapsed_ms: 1.0,
    });
  }

  function handleRate(body: any): Response {
    if (![0, 1, 2].includes(body.rating)) {
      return json(422, { detail: `rating must be 0, 1 or 2, got ${body.rating}` });
    }
    const exampleId = String(body.example_id).replace(/,/g, '_').replace(/\n/g, ' ');
    const raterId = String(body.rater_id ?? 'anonymous').replace(/,/g, '_').replace(/\n/g, ' ');
    ratingLines.push(`${exampleId},${body.rating},${raterId},${new Date().toISOString()}`);
    return json(200, { status: 'recorded', example_id: exampleId, rating: body.rating });
  }

  async function fetchFn(url: string, init?: RequestInit): Promise<Response> {
    const path = new URL(url, 'http://mock').pathname;
    if (path === '/health') {
      return json(200, {
        status: 'ok',
        model_fingerprint: FINGERPRINT,
        scale: 'desk',
        uptime_s: (Date.now() - started) / 1000,
      });
    }
    if (path === '/outpaint' && init?.method === 'POST') {
      return handleOutpaint(JSON.parse(String(init.body)));
    }
    if (path === '/rate' && init?.method === 'POST') {
      return handleRate(JSON.parse(String(init.body)));
    }
    return json(404, { detail: `no route for ${path}` });
  }

  return { fetchFn, ratingLines, outpaintCalls };
}
