// Wire protocol for the interactive-dynamics server.
//
// Inbound (client -> server, text):   "t_ms kind x y fx fy"
// Outbound (server -> client):        binary PNG frame, then text telemetry
//                                     "tick max_disp e_0 ... e_{K-1}"

export type EventKind = "impulse" | "sustained" | "release";

export interface ForceEventMsg {
  kind: EventKind;
  x: number;
  y: number;
  fx: number;
  fy: number;
}

export interface TelemetryRecord {
  tick: number;
  maxDisp: number;
  energies: number[];
}

export interface SessionConfig {
  fps?: number;
  zeta?: number;
  mass?: number;
  magnify?: number;
  force_scale?: number;
  realtime?: boolean;
  pyramid_levels?: number;
}

export function encodeForceEvent(tMs: number, ev: ForceEventMsg): string {
  return `${round6(tMs)} ${ev.kind} ${Math.round(ev.x)} ${Math.round(ev.y)} ${round6(ev.fx)} ${round6(ev.fy)}`;
}

function round6(v: number): string {
  return Number.isInteger(v) ? String(v) : String(Number(v.toPrecision(6)));
}

/** Parse a telemetry record; returns null for warnings or malformed lines. */
export function parseTelemetry(line: string): TelemetryRecord | null {
  const parts = line.trim().split(/\s+/);
  if (parts.length < 2) return null;
  const tick = Number(parts[0]);
  const maxDisp = Number(parts[1]);
  if (!Number.isFinite(tick) || !Number.isFinite(maxDisp)) return null;
  const energies = parts.slice(2).map(Number);
  if (energies.some((e) => !Number.isFinite(e))) return null;
  return { tick, maxDisp, energies };
}

export function streamUrl(baseUrl: string, sessionId: string): string {
  const ws = baseUrl.replace(/^http/, "ws").replace(/\/$/, "");
  return `${ws}/sessions/${sessionId}/stream`;
}

export async function createSession(
  baseUrl: string,
  image: Blob,
  volume: Blob,
  config: SessionConfig = {},
): Promise<string> {
  const form = new FormData();
  form.append("image", image, "image.png");
  form.append("volume", volume, "volume.specvol");
  form.append("config", JSON.stringify(config));
  const resp = await fetch(`${baseUrl}/sessions`, { method: "POST", body: form });
  const body = await resp.json();
  if (!resp.ok) {
    throw new Error(`session create failed: ${body.error ?? resp.status}`);
  }
  return body.session_id;
}

export async function updateConfig(
  baseUrl: string,
  sessionId: string,
  config: SessionConfig,
): Promise<void> {
  const resp = await fetch(`${baseUrl}/sessions/${sessionId}/config`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(config),
  });
  if (!resp.ok) throw new Error(`config update failed: ${resp.status}`);
}

export async function deleteSession(baseUrl: string, sessionId: string): Promise<void> {
  await fetch(`${baseUrl}/sessions/${sessionId}`, { method: "DELETE" });
}
