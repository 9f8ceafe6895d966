import { inflateSync } from 'node:zlib';
import { beforeEach, describe, expect, it } from 'vitest';

import { FetchFn, ServiceClient, ServiceError } from '../src/api.js';
import { MockService, createMockService } from '../src/mock.js';
import { RasterImage, makeRaster, mirrorColumns, rastersEqual } from '../src/raster.js';
import { CanvasSession } from '../src/session.js';

const nodeInflate = (z: Uint8Array) => new Uint8Array(inflateSync(z));
const H = 64;
const W = 64;

function baseImage(width = W, height = H): RasterImage {
  const img = makeRaster(width, height, 3);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const o = (y * width + x) * 3;
      img.data[o] = (x * 3) & 255;
      img.data[o + 1] = (y * 2 + 7) & 255;
      img.data[o + 2] = (x ^ y) & 255;
    }
  }
  return img;
}

function sketchWithBar(row: number): Uint8Array {
  const bits = new Uint8Array(H * W);
  for (let x = 10; x < 50; x++) bits[row * W + x] = 1;
  return bits;
}

let mock: MockService;
let client: ServiceClient;
let session: CanvasSession;

beforeEach(() => {
  mock = createMockService(H, W, nodeInflate);
  client = new ServiceClient('http://mock', mock.fetchFn, nodeInflate);
  session = new CanvasSession(client, baseImage());
});

describe('service client against the mock', () => {
  it('reports health', async () => {
    const health = await client.health();
    expect(health.status).toBe('ok');
    expect(health.model_fingerprint).toHaveLength(16);
    expect(health.scale).toBe('desk');
  });

  it('maps error statuses to ServiceError', async () => {
    const err = await client
      .outpaint(baseImage(32, 32), [{ width: 32, height: 32, channels: 1, data: new Uint8Array(32 * 32) }])
      .then(() => null, (e: unknown) => e as ServiceError);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err!.status).toBe(422);
    expect(err!.message).toContain('expected 64x64');
  });

  it('rejects bad ratings before touching the network', async () => {
    await expect(client.rate('x', 3, 'r')).rejects.toThrow('must be 0, 1 or 2');
    expect(mock.ratingLines).toHaveLength(0);
  });
});

describe('session chaining', () => {
  it('each submit widens the panorama by one half window', async () => {
    expect(session.panorama().width).toBe(W);

    await session.submit(new Uint8Array(H * W));
    expect(session.history).toHaveLength(1);
    expect(session.panorama().width).toBe(2 * W);

    await session.submit(sketchWithBar(20));
    expect(session.history).toHaveLength(2);
    expect(session.panorama().width).toBe(3 * W);
    expect(session.panorama().height).toBe(H);
  });

  it('feeds the previous right half back in as the next input', async () => {
    await session.submit(new Uint8Array(H * W));
    await session.submit(sketchWithBar(31));
    expect(mock.outpaintCalls).toHaveLength(2);
    expect(rastersEqual(mock.outpaintCalls[0].image, session.baseImage)).toBe(true);
    expect(rastersEqual(mock.outpaintCalls[1].image, session.history[0].rightHalf)).toBe(true);
  });

  it('round-trips pixels exactly through the png transport', async () => {
    // empty sketch, so the mock's answer is a pure mirror of the input
    const step = await session.submit(new Uint8Array(H * W));
    expect(rastersEqual(step.rightHalf, mirrorColumns(session.baseImage))).toBe(true);
    const pano = session.panorama();
    for (let i = 0; i < session.baseImage.data.length; i++) {
      const y = Math.floor(i / (W * 3));
      const rest = i % (W * 3);
      expect(pano.data[y * 2 * W * 3 + rest]).toBe(session.baseImage.data[i]);
    }
  });

  it('marks sketched pixels in the generated half', async () => {
    const step = await session.submit(sketchWithBar(12));
    const o = (12 * W + 20) * 3;
    expect(step.rightHalf.data[o]).toBe(0);
    expect(step.rightHalf.data[o + 1]).toBe(0);
    expect(step.rightHalf.data[o + 2]).toBe(0);
  });
});

describe('session branching and history', () => {
  it('submitting from an older selection grows a branch, never rewrites', async () => {
    await session.submit(new Uint8Array(H * W));
    await session.submit(sketchWithBar(10));
    const firstTwo = [session.history[0], session.history[1]];

    session.select(-1);
    expect(session.panorama().width).toBe(W);
    await session.submit(sketchWithBar(40));

    expect(session.history).toHaveLength(3);
    expect(session.history[0]).toBe(firstTwo[0]);
    expect(session.history[1]).toBe(firstTwo[1]);
    expect(session.history[2].parent).toBe(-1);
    expect(session.selected).toBe(2);
    expect(session.panorama().width).toBe(2 * W);

    // the old branch is still reachable
    session.select(1);
    expect(session.panorama().width).toBe(3 * W);
  });

  it('bounds-checks selection', async () => {
    expect(() => session.select(0)).toThrow('no step 0');
    expect(() => session.select(-2)).toThrow('no step -2');
    await session.submit(new Uint8Array(H * W));
    session.select(0);
    session.select(-1);
  });

  it('gives each step a distinct example id', async () => {
    await session.submit(new Uint8Array(H * W));
    await session.submit(sketchWithBar(5));
    expect(session.history[0].exampleId).not.toBe(session.history[1].exampleId);
    expect(session.history[1].modelFingerprint).toBe('mock000000000000');
  });
});

describe('session validation and failure handling', () => {
  it('rejects sketches that are the wrong size or not binary', async () => {
    await expect(session.submit(new Uint8Array(10))).rejects.toThrow('expected 64x64');
    await expect(session.submit(new Uint8Array(H * W).fill(2))).rejects.toThrow('strict binary');
    expect(session.history).toHaveLength(0);
    expect(mock.outpaintCalls).toHaveLength(0);
  });

  it('a failed request leaves the session untouched', async () => {
    const small = new CanvasSession(client, baseImage(32, 32));
    const err = await small.submit(new Uint8Array(32 * 32)).then(() => null, (e: unknown) => e as ServiceError);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err!.status).toBe(422);
    expect(small.history).toHaveLength(0);
    expect(small.selected).toBe(-1);
    expect(small.pending).toBe(false);
  });

  it('allows only one request in flight', async () => {
    let release!: () => void;
    const gate = new Promise<void>((res) => {
      release = res;
    });
    const slowFetch: FetchFn = async (url, init) => {
      if (url.endsWith('/outpaint')) await gate;
      return mock.fetchFn(url, init);
    };
    const slowSession = new CanvasSession(new ServiceClient('http://mock', slowFetch, nodeInflate), baseImage());

    const first = slowSession.submit(new Uint8Array(H * W));
    expect(slowSession.pending).toBe(true);
    await expect(slowSession.submit(new Uint8Array(H * W))).rejects.toThrow('already in flight');

    release();
    await first;
    expect(slowSession.pending).toBe(false);
    expect(slowSession.history).toHaveLength(1);
  });
});

describe('satisfaction ratings', () => {
  it('cannot rate before the first result', async () => {
    expect(session.canRate).toBe(false);
    await expect(session.rateSelected(1)).rejects.toThrow('nothing to rate');
  });

  it('round-trips each allowed value into the log', async () => {
    for (const rating of [0, 1, 2]) {
      await session.submit(sketchWithBar(3 * rating + 2));
      expect(session.canRate).toBe(true);
      await session.rateSelected(rating);
    }
    expect(mock.ratingLines).toHaveLength(3);
    for (const [i, rating] of [0, 1, 2].entries()) {
      const [exampleId, value, rater, stamp] = mock.ratingLines[i].split(',');
      expect(exampleId).toBe(session.history[i].exampleId);
      expect(Number(value)).toBe(rating);
      expect(rater).toBe('studio');
      expect(stamp).toMatch(/^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}/);
    }
  });

  it('rates the selected step, not just the newest', async () => {
    await session.submit(new Uint8Array(H * W));
    await session.submit(sketchWithBar(8));
    session.select(0);
    await session.rateSelected(2, 'branch-tester');
    const [exampleId, value, rater] = mock.ratingLines[0].split(',');
    expect(exampleId).toBe(session.history[0].exampleId);
    expect(value).toBe('2');
    expect(rater).toBe('branch-tester');
  });

  it('the mock enforces the allowed range like the service does', async () => {
    const resp = await mock.fetchFn('http://mock/rate', {
      method: 'POST',
      body: JSON.stringify({ example_id: 'x', rating: 7, rater_id: 'r' }),
    });
    expect(resp.status).toBe(422);
    expect(mock.ratingLines).toHaveLength(0);
  });

  it('the mock rejects undecodable and non-binary payloads', async () => {
    const garbage = await mock.fetchFn('http://mock/outpaint', {
      method: 'POST',
      body: JSON.stringify({ image: '!!!', sketches: [], binarize_server_side: false }),
    });
    expect(garbage.status).toBe(400);

    const gray = makeRaster(W, H, 1, 128);
    const err = await client.outpaint(baseImage(), [gray]).then(() => null, (e: unknown) => e as ServiceError);
    expect(err!.status).toBe(422);
    expect(err!.message).toContain('not binary');
  });
});
