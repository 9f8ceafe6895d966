// Minimal PNG codec for lossless raster transport.
//
// The encoder always writes 8-bit gray or RGB scanlines with filter 0 inside
// uncompressed (stored) deflate blocks, which keeps the output deterministic
// byte for byte with no compression dependency. The decoder understands any
// standards-conforming 8-bit gray/RGB/RGBA file, so responses compressed by
// the service decode fine; the actual zlib inflate step is injected because
// browsers and node provide it under different APIs.

import { RasterImage, assertShape, makeRaster } from './raster.js';

export type InflateFn = (zlibStream: Uint8Array) => Uint8Array | Promise<Uint8Array>;

const SIGNATURE = [137, 80, 78, 71, 13, 10, 26, 10];

const CRC_TABLE = new Uint32Array(256);
for (let n = 0; n < 256; n++) {
  let c = n;
  for (let k = 0; k < 8; k++) {
    c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
  }
  CRC_TABLE[n] = c >>> 0;
}

export function crc32(bytes: Uint8Array, seed = 0xffffffff): number {
  let c = seed >>> 0;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 255] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export function adler32(bytes: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < bytes.length; i++) {
    a = (a + bytes[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

class ByteWriter {
  private chunks: Uint8Array[] = [];

  push(bytes: Uint8Array | number[]): void {
    this.chunks.push(bytes instanceof Uint8Array ? bytes : new Uint8Array(bytes));
  }

  u32be(value: number): void {
    this.push([(value >>> 24) & 255, (value >>> 16) & 255, (value >>> 8) & 255, value & 255]);
  }

  finish(): Uint8Array {
    let total = 0;
    for (const c of this.chunks) total += c.length;
    const out = new Uint8Array(total);
    let off = 0;
    for (const c of this.chunks) {
      out.set(c, off);
      off += c.length;
    }
    return out;
  }
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const w = new ByteWriter();
  w.u32be(data.length);
  const typed = new Uint8Array(4 + data.length);
  for (let i = 0; i < 4; i++) typed[i] = type.charCodeAt(i);
  typed.set(data, 4);
  w.push(typed);
  w.u32be(crc32(typed));
  return w.finish();
}

/** zlib wrapper around stored (uncompressed) deflate blocks. */
function storedZlib(raw: Uint8Array): Uint8Array {
  const w = new ByteWriter();
  w.push([0x78, 0x01]);
  const max = 65535;
  let off = 0;
  do {
    const len = Math.min(max, raw.length - off);
    const final = off + len >= raw.length ? 1 : 0;
    w.push([final, len & 255, (len >> 8) & 255, ~len & 255, (~len >> 8) & 255]);
    w.push(raw.subarray(off, off + len));
    off += len;
  } while (off < raw.length);
  w.u32be(adler32(raw));
  return w.finish();
}

export function encodePng(img: RasterImage): Uint8Array {
  assertShape(img);
  if (img.channels !== 1 && img.channels !== 3) {
    throw new Error(`encoder supports 1 or 3 channels, got ${img.channels}`);
  }
  const colorType = img.channels === 1 ? 0 : 2;
  const ihdr = new Uint8Array(13);
  const dv = new DataView(ihdr.buffer);
  dv.setUint32(0, img.width);
  dv.setUint32(4, img.height);
  ihdr[8] = 8;
  ihdr[9] = colorType;

  const rowBytes = img.width * img.channels;
  const raw = new Uint8Array((rowBytes + 1) * img.height);
  for (let y = 0; y < img.height; y++) {
    raw[y * (rowBytes + 1)] = 0; // filter: none
    raw.set(img.data.subarray(y * rowBytes, (y + 1) * rowBytes), y * (rowBytes + 1) + 1);
  }

  const w = new ByteWriter();
  w.push(SIGNATURE);
  w.push(chunk('IHDR', ihdr));
  w.push(chunk('IDAT', storedZlib(raw)));
  w.push(chunk('IEND', new Uint8Array(0)));
  return w.finish();
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function unfilter(raw: Uint8Array, width: number, height: number, bpp: number): Uint8Array {
  const rowBytes = width * bpp;
  if (raw.length !== (rowBytes + 1) * height) {
    throw new Error(`decompressed size ${raw.length} does not match ${width}x${height}x${bpp}`);
  }
  const out = new Uint8Array(rowBytes * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (rowBytes + 1)];
    const src = y * (rowBytes + 1) + 1;
    const dst = y * rowBytes;
    for (let x = 0; x < rowBytes; x++) {
      const a = x >= bpp ? out[dst + x - bpp] : 0;
      const b = y > 0 ? out[dst + x - rowBytes] : 0;
      const c = y > 0 && x >= bpp ? out[dst + x - rowBytes - bpp] : 0;
      const v = raw[src + x];
      let recon: number;
      switch (filter) {
        case 0: recon = v; break;
        case 1: recon = v + a; break;
        case 2: recon = v + b; break;
        case 3: recon = v + ((a + b) >> 1); break;
        case 4: recon = v + paeth(a, b, c); break;
        default: throw new Error(`unknown scanline filter ${filter}`);
      }
      out[dst + x] = recon & 255;
    }
  }
  return out;
}

export async function decodePng(bytes: Uint8Array, inflate: InflateFn): Promise<RasterImage> {
  for (let i = 0; i < SIGNATURE.length; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new Error('not a PNG file');
  }
  let off = 8;
  let width = 0;
  let height = 0;
  let channels = 0;
  const idatParts: Uint8Array[] = [];
  let sawEnd = false;
  while (off < bytes.length) {
    if (off + 8 > bytes.length) throw new Error('truncated PNG chunk header');
    const dv = new DataView(bytes.buffer, bytes.byteOffset + off);
    const len = dv.getUint32(0);
    const type = String.fromCharCode(bytes[off + 4], bytes[off + 5], bytes[off + 6], bytes[off + 7]);
    if (off + 12 + len > bytes.length) throw new Error(`truncated ${type} chunk`);
    const typed = bytes.subarray(off + 4, off + 8 + len);
    const stored = dv.getUint32(8 + len);
    if (crc32(typed) !== stored) throw new Error(`crc mismatch in ${type} chunk`);
    const data = bytes.subarray(off + 8, off + 8 + len);
    if (type === 'IHDR') {
      const h = new DataView(data.buffer, data.byteOffset);
      width = h.getUint32(0);
      height = h.getUint32(4);
      const depth = data[8];
      const colorType = data[9];
      if (depth !== 8) throw new Error(`unsupported bit depth ${depth}`);
      if (colorType === 0) channels = 1;
      else if (colorType === 2) channels = 3;
      else if (colorType === 6) channels = 4;
      else throw new Error(`unsupported color type ${colorType}`);
      if (data[12] !== 0) throw new Error('interlaced PNGs are not supported');
    } else if (type === 'IDAT') {
      idatParts.push(data);
    } else if (type === 'IEND') {
      sawEnd = true;
      break;
    }
    off += 12 + len;
  }
  if (!width || !height || !channels) throw new Error('missing IHDR');
  if (!sawEnd) throw new Error('missing IEND');
  if (idatParts.length === 0) throw new Error('missing IDAT');

  let total = 0;
  for (const p of idatParts) total += p.length;
  const zstream = new Uint8Array(total);
  let zo = 0;
  for (const p of idatParts) {
    zstream.set(p, zo);
    zo += p.length;
  }
  if (((zstream[0] << 8) | zstream[1]) % 31 !== 0) throw new Error('bad zlib header');
  const raw = await inflate(zstream);
  const pixels = unfilter(raw, width, height, channels);

  if (channels === 4) {
    // drop alpha so callers always see gray or RGB
    const rgb = makeRaster(width, height, 3);
    for (let i = 0, j = 0; i < pixels.length; i += 4, j += 3) {
      rgb.data[j] = pixels[i];
      rgb.data[j + 1] = pixels[i + 1];
      rgb.data[j + 2] = pixels[i + 2];
    }
    return rgb;
  }
  return { width, height, channels, data: pixels };
}
