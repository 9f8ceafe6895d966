// One drawing session: the uploaded base image, an append-only history of
// extension steps, and the selection pointer used for what-if branching.
//
// Each step remembers which step it extended (its parent), so selecting an
// older step and submitting again grows a new branch instead of rewriting
// history. The panorama shown to the user is the parent chain of the selected
// step. At most one request is in flight at a time; submits while pending are
// rejected without touching any state.

import { ServiceClient } from './api.js';
import { crc32 } from './png.js';
import { RasterImage, concatColumns, cropColumns } from './raster.js';
import { isBinarySketch } from './sketch.js';

export interface SessionStep {
  parent: number; // index into history, -1 extends the base image
  sketch: Uint8Array; // the {0,1} bits this step was guided by
  rightHalf: RasterImage;
  exampleId: string;
  modelFingerprint: string;
}

export class CanvasSession {
  readonly history: SessionStep[] = [];
  selected = -1; // -1 means the bare base image
  pending = false;

  constructor(
    private readonly client: ServiceClient,
    readonly baseImage: RasterImage,
  ) {
    if (baseImage.channels !== 3) throw new Error('base image must be RGB');
  }

  get halfWidth(): number {
    return this.baseImage.width;
  }

  get halfHeight(): number {
    return this.baseImage.height;
  }

  /** Parent chain of the selected step, oldest first. */
  private chain(from = this.selected): SessionStep[] {
    const steps: SessionStep[] = [];
    for (let i = from; i >= 0; i = this.history[i].parent) {
      steps.push(this.history[i]);
    }
    return steps.reverse();
  }

  /** The image window the next submission will extend. */
  currentWindow(): RasterImage {
    return this.selected < 0 ? this.baseImage : this.history[this.selected].rightHalf;
  }

  panorama(): RasterImage {
    return concatColumns([this.baseImage, ...this.chain().map((s) => s.rightHalf)]);
  }

  select(index: number): void {
    if (index < -1 || index >= this.history.length) {
      throw new Error(`no step ${index} to select`);
    }
    this.selected = index;
  }

  get canRate(): boolean {
    return this.selected >= 0;
  }

  async submit(sketchBits: Uint8Array): Promise<SessionStep> {
    if (this.pending) throw new Error('a request is already in flight');
    const { halfWidth: w, halfHeight: h } = this;
    if (sketchBits.length !== w * h) {
      throw new Error(`sketch has ${sketchBits.length} pixels, expected ${h}x${w}`);
    }
    if (!isBinarySketch(sketchBits)) throw new Error('sketch must be strict binary');

    const sketchImage: RasterImage = {
      width: w,
      height: h,
      channels: 1,
      data: Uint8Array.from(sketchBits, (v) => v * 255),
    };
    this.pending = true;
    try {
      const result = await this.client.outpaint(this.currentWindow(), [sketchImage]);
      if (result.image.width !== 2 * w || result.image.height !== h) {
        throw new Error(`service returned ${result.image.height}x${result.image.width}, expected ${h}x${2 * w}`);
      }
      const step: SessionStep = {
        parent: this.selected,
        sketch: sketchBits.slice(),
        rightHalf: cropColumns(result.image, w, 2 * w),
        exampleId: `step${this.history.length}-${crc32(result.pngBytes).toString(16)}`,
        modelFingerprint: result.modelFingerprint,
      };
      this.history.push(step);
      this.selected = this.history.length - 1;
      return step;
    } finally {
      this.pending = false;
    }
  }

  async rateSelected(rating: number, raterId = 'studio'): Promise<void> {
    if (!this.canRate) throw new Error('nothing to rate yet');
    await this.client.rate(this.history[this.selected].exampleId, rating, raterId);
  }
}
