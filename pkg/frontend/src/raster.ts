// In-memory raster images, row-major uint8, 1 (gray) or 3 (RGB) channels.

export interface RasterImage {
  width: number;
  height: number;
  channels: number;
  data: Uint8Array;
}

export function makeRaster(width: number, height: number, channels: number, fill = 0): RasterImage {
  const data = new Uint8Array(width * height * channels);
  if (fill !== 0) data.fill(fill);
  return { width, height, channels, data };
}

export function assertShape(img: RasterImage): void {
  if (img.data.length !== img.width * img.height * img.channels) {
    throw new Error(`raster buffer length ${img.data.length} does not match ${img.width}x${img.height}x${img.channels}`);
  }
}

/** Columns [x0, x1) as a new image. */
export function cropColumns(img: RasterImage, x0: number, x1: number): RasterImage {
  if (x0 < 0 || x1 > img.width || x0 >= x1) {
    throw new Error(`bad column range [${x0}, ${x1}) for width ${img.width}`);
  }
  const w = x1 - x0;
  const out = makeRaster(w, img.height, img.channels);
  const c = img.channels;
  for (let y = 0; y < img.height; y++) {
    const src = (y * img.width + x0) * c;
    out.data.set(img.data.subarray(src, src + w * c), y * w * c);
  }
  return out;
}

/** Side-by-side concatenation; all images must share height and channels. */
export function concatColumns(images: RasterImage[]): RasterImage {
  if (images.length === 0) throw new Error('nothing to concatenate');
  const { height, channels } = images[0];
  let width = 0;
  for (const img of images) {
    if (img.height !== height || img.channels !== channels) {
      throw new Error('concatColumns needs matching heights and channel counts');
    }
    width += img.width;
  }
  const out = makeRaster(width, height, channels);
  let xOff = 0;
  for (const img of images) {
    for (let y = 0; y < height; y++) {
      out.data.set(
        img.data.subarray(y * img.width * channels, (y + 1) * img.width * channels),
        (y * width + xOff) * channels,
      );
    }
    xOff += img.width;
  }
  return out;
}

export function mirrorColumns(img: RasterImage): RasterImage {
  const out = makeRaster(img.width, img.height, img.channels);
  const c = img.channels;
  for (let y = 0; y < img.height; y++) {
    for (let x = 0; x < img.width; x++) {
      const src = (y * img.width + x) * c;
      const dst = (y * img.width + (img.width - 1 - x)) * c;
      for (let k = 0; k < c; k++) out.data[dst + k] = img.data[src + k];
    }
  }
  return out;
}

export function rastersEqual(a: RasterImage, b: RasterImage): boolean {
  if (a.width !== b.width || a.height !== b.height || a.channels !== b.channels) return false;
  for (let i = 0; i < a.data.length; i++) {
    if (a.data[i] !== b.data[i]) return false;
  }
  return true;
}
