// Frame bookkeeping and canvas painting. Ticks must be displayed in order;
// out-of-order frames (impossible per the server contract, but defended)
// are dropped.

import { FrameMessage } from "./protocol.js";

export class FrameStore {
  lastTick = -1;
  latest: FrameMessage | null = null;
  dropped = 0;

  accept(frame: FrameMessage): boolean {
    if (frame.tick <= this.lastTick) {
      this.dropped += 1;
      return false;
    }
    this.lastTick = frame.tick;
    this.latest = frame;
    return true;
  }
}

export class CanvasViewer {
  private ctx: CanvasRenderingContext2D;
  private img = new Image();
  private pending: string | null = null;
  private drawing = false;
  showDepth = false;

  constructor(private canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas context unavailable");
    this.ctx = ctx;
    this.img.onload = () => {
      this.ctx.drawImage(this.img, 0, 0, this.canvas.width, this.canvas.height);
      this.drawing = false;
      if (this.pending) {
        const next = this.pending;
        this.pending = null;
        this.paint(next);
      }
    };
  }

  paint(b64png: string): void {
    if (this.drawing) {
      this.pending = b64png; // keep only the newest frame
      return;
    }
    this.drawing = true;
    this.img.src = `data:image/png;base64,${b64png}`;
  }

  show(frame: FrameMessage): void {
    const plane = this.showDepth && frame.depth ? frame.depth : frame.rgb;
    if (plane) this.paint(plane);
  }

  // canvas pixel -> frame pixel coordinates
  toFramePixel(ev: { offsetX: number; offsetY: number }, w: number, h: number) {
    return {
      u: (ev.offsetX / this.canvas.clientWidth) * w,
      v: (ev.offsetY / this.canvas.clientHeight) * h,
    };
  }
}
