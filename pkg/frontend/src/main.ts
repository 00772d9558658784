// Page wiring: session form, canvas frame display, pointer capture, sliders
// for damping / magnification / frame rate, and the per-band energy strip.

import { SessionClient } from "./client.js";
import { GestureTracker, canvasToImage } from "./gesture.js";
import { TelemetryBuffer, barHeights } from "./telemetry.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function fileBlob(input: HTMLInputElement): Promise<Blob> {
  const file = input.files?.[0];
  if (!file) throw new Error(`${input.id}: choose a file first`);
  return file;
}

function setup(): void {
  const canvas = el<HTMLCanvasElement>("frame");
  const bars = el<HTMLCanvasElement>("bars");
  const status = el<HTMLElement>("status");
  const ctx = canvas.getContext("2d")!;
  const barsCtx = bars.getContext("2d")!;
  const telemetry = new TelemetryBuffer(500);
  const gestures = new GestureTracker();
  let imageW = 0;
  let imageH = 0;
  let client: SessionClient | null = null;

  const drawBars = () => {
    const rec = telemetry.latest();
    barsCtx.clearRect(0, 0, bars.width, bars.height);
    if (!rec) return;
    const heights = barHeights(rec.energies);
    const slot = bars.width / Math.max(heights.length, 1);
    barsCtx.fillStyle = "#4a90d9";
    heights.forEach((h, i) => {
      const px = h * bars.height;
      barsCtx.fillRect(i * slot + 1, bars.height - px, slot - 2, px);
    });
  };

  const onFrame = async (png: ArrayBuffer) => {
    const bitmap = await createImageBitmap(new Blob([png], { type: "image/png" }));
    imageW = bitmap.width;
    imageH = bitmap.height;
    ctx.drawImage(bitmap, 0, 0, canvas.width, canvas.height);
    bitmap.close();
  };

  el<HTMLButtonElement>("connect").addEventListener("click", async () => {
    try {
      await client?.close();
      client = new SessionClient(
        { baseUrl: el<HTMLInputElement>("server").value },
        {
          onFrame,
          onTelemetry: (rec) => {
            telemetry.push(rec);
            drawBars();
          },
          onStatus: (text) => {
            status.textContent = text;
          },
        },
      );
      const image = await fileBlob(el<HTMLInputElement>("image"));
      const volume = await fileBlob(el<HTMLInputElement>("volume"));
      await client.connect(image, volume, {
        zeta: Number(el<HTMLInputElement>("zeta").value),
        magnify: Number(el<HTMLInputElement>("magnify").value),
        fps: Number(el<HTMLInputElement>("fps").value),
      });
      status.textContent = `session ${client.sessionId}`;
    } catch (err) {
      status.textContent = String(err);
    }
  });

  const toImage = (ev: PointerEvent) => {
    const rect = canvas.getBoundingClientRect();
    return canvasToImage(
      ev.clientX - rect.left,
      ev.clientY - rect.top,
      rect.width,
      rect.height,
      imageW || canvas.width,
      imageH || canvas.height,
    );
  };

  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    const p = toImage(ev);
    gestures.pointerDown(p.x, p.y);
  });
  canvas.addEventListener("pointermove", (ev) => {
    const p = toImage(ev);
    const force = gestures.pointerMove(p.x, p.y);
    if (force && client) client.sendForce(force);
  });
  canvas.addEventListener("pointerup", (ev) => {
    const p = toImage(ev);
    const force = gestures.pointerUp(p.x, p.y);
    if (force && client) client.sendForce(force);
  });

  for (const id of ["zeta", "magnify", "fps"] as const) {
    el<HTMLInputElement>(id).addEventListener("change", async (ev) => {
      const value = Number((ev.target as HTMLInputElement).value);
      try {
        await client?.configure({ [id]: value });
        status.textContent = `${id} = ${value}`;
      } catch (err) {
        status.textContent = String(err);
      }
    });
  }
}

window.addEventListener("load", setup);
