// Monochrome stroke layer backing the drawing canvas.
//
// Strokes are stamped hard-edged (no anti-aliasing) onto a grid that is an
// integer multiple of the model's half resolution, so the downsampling in
// exportSketch has a stable, well-defined binarization: a model pixel becomes
// ink when more than 60% of its cell is covered, mirroring the service-side
// edge threshold.

export const INK_COVERAGE_THRESHOLD = 0.6;

export class StrokeLayer {
  readonly width: number;
  readonly height: number;
  readonly grid: Uint8Array; // values 0 or 1 at layer resolution
  private undoStack: Uint8Array[] = [];

  constructor(height: number, width: number) {
    if (height < 1 || width < 1) throw new Error('layer dimensions must be positive');
    this.width = width;
    this.height = height;
    this.grid = new Uint8Array(width * height);
  }

  /** Snapshot for undo; call at the start of every pointer gesture. */
  beginStroke(): void {
    this.undoStack.push(this.grid.slice());
    if (this.undoStack.length > 32) this.undoStack.shift();
  }

  undo(): void {
    const prev = this.undoStack.pop();
    if (prev) this.grid.set(prev);
  }

  clear(): void {
    this.beginStroke();
    this.grid.fill(0);
  }

  stampDisc(cx: number, cy: number, radius: number, value: 0 | 1 = 1): void {
    const r2 = radius * radius;
    const x0 = Math.max(0, Math.floor(cx - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + radius));
    const y0 = Math.max(0, Math.floor(cy - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r2) this.grid[y * this.width + x] = value;
      }
    }
  }

  /** Hard-edged stroke segment: discs stamped densely along the line. */
  drawLine(x0: number, y0: number, x1: number, y1: number, radius: number, value: 0 | 1 = 1): void {
    const steps = Math.max(1, Math.ceil(2 * Math.max(Math.abs(x1 - x0), Math.abs(y1 - y0))));
    for (let i = 0; i <= steps; i++) {
      const t = i / steps;
      this.stampDisc(x0 + t * (x1 - x0), y0 + t * (y1 - y0), radius, value);
    }
  }

  /**
   * Binary sketch at model resolution, values strictly 0 or 1.
   * The layer dimensions must be integer multiples of the target.
   */
  exportSketch(targetHeight: number, targetWidth: number): Uint8Array {
    if (this.height % targetHeight !== 0 || this.width % targetWidth !== 0) {
      throw new Error(
        `layer ${this.height}x${this.width} is not an integer multiple of ${targetHeight}x${targetWidth}`,
      );
    }
    const fy = this.height / targetHeight;
    const fx = this.width / targetWidth;
    const cell = fy * fx;
    const out = new Uint8Array(targetHeight * targetWidth);
    for (let ty = 0; ty < targetHeight; ty++) {
      for (let tx = 0; tx < targetWidth; tx++) {
        let covered = 0;
        for (let y = ty * fy; y < (ty + 1) * fy; y++) {
          for (let x = tx * fx; x < (tx + 1) * fx; x++) {
            covered += this.grid[y * this.width + x];
          }
        }
        out[ty * targetWidth + tx] = covered / cell > INK_COVERAGE_THRESHOLD ? 1 : 0;
      }
    }
    return out;
  }
}

export function isBinarySketch(bits: Uint8Array): boolean {
  for (const v of bits) {
    if (v !== 0 && v !== 1) return false;
  }
  return true;
}
