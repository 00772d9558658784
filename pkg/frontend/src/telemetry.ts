// Telemetry bookkeeping: a bounded history of records plus the little
// numeric helpers the UI needs (per-band energy bars, decay envelopes).

import { TelemetryRecord } from "./protocol.js";

export class TelemetryBuffer {
  private records: TelemetryRecord[] = [];

  constructor(readonly capacity: number = 500) {}

  push(rec: TelemetryRecord): void {
    this.records.push(rec);
    if (this.records.length > this.capacity) {
      this.records.splice(0, this.records.length - this.capacity);
    }
  }

  get length(): number {
    return this.records.length;
  }

  latest(): TelemetryRecord | undefined {
    return this.records[this.records.length - 1];
  }

  maxDispSeries(): number[] {
    return this.records.map((r) => r.maxDisp);
  }
}

/** Max over consecutive windows; a smoothing view of an oscillating series. */
export function windowedEnvelope(series: number[], window: number): number[] {
  const out: number[] = [];
  for (let i = 0; i + window <= series.length; i += window) {
    out.push(Math.max(...series.slice(i, i + window)));
  }
  return out;
}

export function isMonotoneDecreasing(values: number[], tol = 0): boolean {
  for (let i = 1; i < values.length; i++) {
    if (values[i] > values[i - 1] + tol) return false;
  }
  return true;
}

/** Normalized bar heights in [0, 1] for the per-band energy strip. */
export function barHeights(energies: number[]): number[] {
  const peak = Math.max(...energies, 0);
  if (peak <= 0) return energies.map(() => 0);
  return energies.map((e) => e / peak);
}
