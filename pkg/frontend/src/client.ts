// Session client: REST session control plus the frame/telemetry stream.
//
// The WebSocket is injected through a factory so the client logic is
// testable without a browser; binary messages are PNG frames, text messages
// are telemetry records or warnings. A dropped stream is retried with
// exponential backoff while the session itself stays alive server-side.

import {
  ForceEventMsg,
  SessionConfig,
  TelemetryRecord,
  createSession,
  deleteSession,
  encodeForceEvent,
  parseTelemetry,
  streamUrl,
  updateConfig,
} from "./protocol.js";

export interface WsLike {
  binaryType?: string;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type WsFactory = (url: string) => WsLike;

export interface ClientCallbacks {
  onFrame: (png: ArrayBuffer) => void;
  onTelemetry: (rec: TelemetryRecord) => void;
  onStatus: (status: string) => void;
}

export interface ClientOptions {
  baseUrl: string;
  wsFactory?: WsFactory;
  backoffMs?: number;
  maxBackoffMs?: number;
}

const defaultFactory: WsFactory = (url) => new WebSocket(url) as unknown as WsLike;

export class SessionClient {
  readonly baseUrl: string;
  sessionId: string | null = null;
  private ws: WsLike | null = null;
  private wsOpen = false;
  private pending: string[] = [];
  private readonly wsFactory: WsFactory;
  private readonly backoffMs: number;
  private readonly maxBackoffMs: number;
  private retryDelay: number;
  private closed = false;
  private startMs = 0;

  constructor(options: ClientOptions, private readonly callbacks: ClientCallbacks) {
    this.baseUrl = options.baseUrl.replace(/\/$/, "");
    this.wsFactory = options.wsFactory ?? defaultFactory;
    this.backoffMs = options.backoffMs ?? 500;
    this.maxBackoffMs = options.maxBackoffMs ?? 8000;
    this.retryDelay = this.backoffMs;
  }

  async connect(image: Blob, volume: Blob, config: SessionConfig = {}): Promise<string> {
    this.sessionId = await createSession(this.baseUrl, image, volume, config);
    this.startMs = Date.now();
    this.openStream();
    return this.sessionId;
  }

  openStream(): void {
    if (this.sessionId === null || this.closed) return;
    const ws = this.wsFactory(streamUrl(this.baseUrl, this.sessionId));
    ws.binaryType = "arraybuffer";
    this.ws = ws;
    ws.onopen = () => {
      this.wsOpen = true;
      this.retryDelay = this.backoffMs;
      this.callbacks.onStatus("connected");
      for (const line of this.pending.splice(0)) ws.send(line);
    };
    ws.onmessage = (ev) => this.handleMessage(ev.data);
    ws.onerror = () => {
      /* close follows */
    };
    ws.onclose = () => {
      this.ws = null;
      this.wsOpen = false;
      if (this.closed) return;
      this.callbacks.onStatus(`disconnected, retrying in ${this.retryDelay}ms`);
      const delay = this.retryDelay;
      this.retryDelay = Math.min(this.retryDelay * 2, this.maxBackoffMs);
      setTimeout(() => this.openStream(), delay);
    };
  }

  private handleMessage(data: unknown): void {
    if (typeof data === "string") {
      if (data.startsWith("warning")) {
        this.callbacks.onStatus(data);
        return;
      }
      const rec = parseTelemetry(data);
      if (rec) this.callbacks.onTelemetry(rec);
      return;
    }
    if (data instanceof ArrayBuffer) {
      this.callbacks.onFrame(data);
    } else if (ArrayBuffer.isView(data as ArrayBufferView)) {
      const view = data as ArrayBufferView;
      this.callbacks.onFrame(
        view.buffer.slice(view.byteOffset, view.byteOffset + view.byteLength) as ArrayBuffer,
      );
    }
  }

  sendForce(ev: ForceEventMsg): void {
    const line = encodeForceEvent(Date.now() - this.startMs, ev);
    if (this.ws && this.wsOpen) {
      this.ws.send(line);
    } else {
      this.pending.push(line);  // flushed when the stream (re)opens
    }
  }

  async configure(config: SessionConfig): Promise<void> {
    if (this.sessionId === null) throw new Error("not connected");
    await updateConfig(this.baseUrl, this.sessionId, config);
  }

  async close(): Promise<void> {
    this.closed = true;
    this.ws?.close();
    this.ws = null;
    if (this.sessionId !== null) {
      await deleteSession(this.baseUrl, this.sessionId);
      this.sessionId = null;
    }
  }
}
