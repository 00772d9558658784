// Pointer gestures -> force events, working entirely in image coordinates.
//
// A quick press-and-release is a poke: one impulse at the press point with a
// default upward direction scaled by the strength setting. A drag past the
// threshold becomes a sustained force along the drag vector (direction
// refreshed on every move); lifting the pointer releases it. Each phase
// transition emits at most one event.

import { ForceEventMsg } from "./protocol.js";

export interface GestureOptions {
  dragThresholdPx: number;
  pokeStrength: number;
  dragScale: number;
}

export const DEFAULT_GESTURES: GestureOptions = {
  dragThresholdPx: 3,
  pokeStrength: 1.0,
  dragScale: 0.05,
};

type Phase = "idle" | "pressed" | "dragging";

export class GestureTracker {
  private phase: Phase = "idle";
  private anchorX = 0;
  private anchorY = 0;
  readonly options: GestureOptions;

  constructor(options: Partial<GestureOptions> = {}) {
    this.options = { ...DEFAULT_GESTURES, ...options };
  }

  get state(): Phase {
    return this.phase;
  }

  pointerDown(x: number, y: number): ForceEventMsg | null {
    this.phase = "pressed";
    this.anchorX = x;
    this.anchorY = y;
    return null;
  }

  pointerMove(x: number, y: number): ForceEventMsg | null {
    if (this.phase === "idle") return null;
    const dx = x - this.anchorX;
    const dy = y - this.anchorY;
    if (this.phase === "pressed") {
      if (Math.hypot(dx, dy) < this.options.dragThresholdPx) return null;
      this.phase = "dragging";
    }
    return {
      kind: "sustained",
      x: this.anchorX,
      y: this.anchorY,
      fx: dx * this.options.dragScale,
      fy: dy * this.options.dragScale,
    };
  }

  pointerUp(x: number, y: number): ForceEventMsg | null {
    if (this.phase === "idle") return null;
    const wasDragging = this.phase === "dragging";
    const ax = this.anchorX;
    const ay = this.anchorY;
    this.phase = "idle";
    if (wasDragging) {
      return { kind: "release", x: ax, y: ay, fx: 0, fy: 0 };
    }
    return { kind: "impulse", x: ax, y: ay, fx: 0, fy: -this.options.pokeStrength };
  }
}

/** Canvas-space -> image-space coordinates (the protocol speaks image space). */
export function canvasToImage(
  cx: number,
  cy: number,
  canvasW: number,
  canvasH: number,
  imageW: number,
  imageH: number,
): { x: number; y: number } {
  const x = Math.min(imageW - 1, Math.max(0, (cx / canvasW) * imageW));
  const y = Math.min(imageH - 1, Math.max(0, (cy / canvasH) * imageH));
  return { x, y };
}
