// Typed client for the outpainting service. Rasters travel as base64 PNG;
// fetch and zlib-inflate are injected so the same client runs in the browser
// and under the node test runner against the mock service.

import { b64decode, b64encode } from './base64.js';
import { InflateFn, decodePng, encodePng } from './png.js';
import { RasterImage } from './raster.js';

export type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(`service returned ${status}: ${detail}`);
    this.status = status;
  }
}

export interface HealthReport {
  status: string;
  model_fingerprint: string;
  scale: string;
  uptime_s: number;
}

export interface OutpaintResult {
  image: RasterImage;
  modelFingerprint: string;
  elapsedMs: number;
  pngBytes: Uint8Array;
}

async function errorDetail(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    return typeof body.detail === 'string' ? body.detail : JSON.stringify(body);
  } catch {
    return resp.statusText || 'no detail';
  }
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchFn,
    private readonly inflate: InflateFn,
  ) {}

  async health(): Promise<HealthReport> {
    const resp = await this.fetchFn(`${this.baseUrl}/health`);
    if (!resp.ok) throw new ServiceError(resp.status, await errorDetail(resp));
    return (await resp.json()) as HealthReport;
  }

  /**
   * One or more chained extension steps in a single request. Sketches must
   * already be strict binary; the request keeps server-side binarization off
   * so the service re-checks that invariant.
   */
  async outpaint(image: RasterImage, sketches: RasterImage[]): Promise<OutpaintResult> {
    const payload = {
      image: b64encode(encodePng(image)),
      sketches: sketches.map((s) => b64encode(encodePng(s))),
      binarize_server_side: false,
    };
    const resp = await this.fetchFn(`${this.baseUrl}/outpaint`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
    if (!resp.ok) throw new ServiceError(resp.status, await errorDetail(resp));
    const body = await resp.json();
    const pngBytes = b64decode(body.image);
    return {
      image: await decodePng(pngBytes, this.inflate),
      modelFingerprint: body.model_fingerprint,
      elapsedMs: body.elapsed_ms,
      pngBytes,
    };
  }

  async rate(exampleId: string, rating: number, raterId: string): Promise<void> {
    if (![0, 1, 2].includes(rating)) {
      throw new Error(`rating must be 0, 1 or 2, got ${rating}`);
    }
    const resp = await this.fetchFn(`${this.baseUrl}/rate`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ example_id: exampleId, rating, rater_id: raterId }),
    });
    if (!resp.ok) throw new ServiceError(resp.status, await errorDetail(resp));
  }
}
