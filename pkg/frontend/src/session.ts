/**
 * Connection and pose-flow control for a viewer session.
 *
 * Keeps at most one un-acknowledged pose in flight: a new pose is sent
 * immediately when the line is idle, otherwise it replaces the locally
 * buffered candidate and goes out when the current frame arrives (frames
 * acknowledge poses). Reconnects with exponential backoff.
 */

import type { OrbitState } from "./orbit.js";
import { clampOrbit, poseFromOrbit, type OrbitLimits, DEFAULT_LIMITS } from "./orbit.js";
import { decodeFrame, encodePing, encodePose, type DecodedFrame } from "./protocol.js";

export type SessionStatus = "connecting" | "connected" | "closed" | "error";

type WebSocketLike = {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  send(data: string): void;
  close(): void;
};

export interface SessionOptions {
  fovDeg?: number;
  width?: number;
  height?: number;
  limits?: OrbitLimits;
  reconnect?: boolean;
  backoffMs?: number;
  backoffMaxMs?: number;
  webSocketFactory?: (url: string) => WebSocketLike;
  onFrame?: (frame: DecodedFrame) => void;
  onStatus?: (status: SessionStatus, detail?: string) => void;
}

export class ViewerSession {
  readonly url: string;
  status: SessionStatus = "closed";
  framesReceived = 0;
  posesSent = 0;
  private ws: WebSocketLike | null = null;
  private opts: Required<Pick<SessionOptions, "fovDeg" | "width" | "height" | "reconnect" | "backoffMs" | "backoffMaxMs">> &
    SessionOptions;
  private inFlight = false;
  private pendingState: OrbitState | null = null;
  private backoff: number;
  private closedByUser = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(url: string, options: SessionOptions = {}) {
    this.url = url;
    this.opts = {
      fovDeg: 40,
      width: 256,
      height: 256,
      reconnect: true,
      backoffMs: 250,
      backoffMaxMs: 5000,
      ...options,
    };
    this.backoff = this.opts.backoffMs;
  }

  connect(): void {
    this.closedByUser = false;
    const factory =
      this.opts.webSocketFactory ?? ((url: string) => new WebSocket(url) as unknown as WebSocketLike);
    this.setStatus("connecting");
    let ws: WebSocketLike;
    try {
      ws = factory(this.url);
    } catch (err) {
      this.setStatus("error", String(err));
      this.scheduleReconnect();
      return;
    }
    ws.binaryType = "arraybuffer";
    ws.onopen = () => {
      this.backoff = this.opts.backoffMs;
      this.inFlight = false;
      this.setStatus("connected");
      if (this.pendingState) {
        const next = this.pendingState;
        this.pendingState = null;
        this.sendPose(next);
      }
    };
    ws.onmessage = (ev) => this.handleMessage(ev.data);
    ws.onerror = () => {
      this.setStatus("error", "socket error");
    };
    ws.onclose = () => {
      this.ws = null;
      this.inFlight = false;
      if (!this.closedByUser) {
        this.setStatus("closed", "connection lost");
        this.scheduleReconnect();
      } else {
        this.setStatus("closed");
      }
    };
    this.ws = ws;
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectTimer) clearTimeout(this.reconnectTimer);
    this.ws?.close();
    this.ws = null;
    this.setStatus("closed");
  }

  /** Queue an orbit state; collapses bursts to the newest one. */
  steer(state: OrbitState): void {
    const clamped = clampOrbit(state, this.opts.limits ?? DEFAULT_LIMITS);
    if (this.status !== "connected" || this.inFlight) {
      this.pendingState = clamped;
      return;
    }
    this.sendPose(clamped);
  }

  ping(): void {
    this.ws?.send(encodePing());
  }

  get hasPoseInFlight(): boolean {
    return this.inFlight;
  }

  private sendPose(state: OrbitState): void {
    if (!this.ws) return;
    const pose = poseFromOrbit(state);
    this.ws.send(encodePose(pose, this.opts.fovDeg, this.opts.width, this.opts.height, state.frame));
    this.posesSent += 1;
    this.inFlight = true;
  }

  private handleMessage(data: unknown): void {
    if (typeof data === "string") {
      // pong / error control messages keep the session alive
      return;
    }
    const buffer =
      data instanceof ArrayBuffer
        ? data
        : (data as { buffer: ArrayBuffer; byteOffset: number; byteLength: number }).buffer.slice(
            (data as { byteOffset: number }).byteOffset,
            (data as { byteOffset: number; byteLength: number }).byteOffset +
              (data as { byteLength: number }).byteLength,
          );
    this.inFlight = false;
    let frame: DecodedFrame;
    try {
      frame = decodeFrame(buffer);
    } catch (err) {
      // log and carry on: the connection itself is healthy
      this.opts.onStatus?.(this.status, `bad frame: ${err}`);
      return;
    }
    this.framesReceived += 1;
    this.opts.onFrame?.(frame);
    if (this.pendingState) {
      const next = this.pendingState;
      this.pendingState = null;
      this.sendPose(next);
    }
  }

  private setStatus(status: SessionStatus, detail?: string): void {
    this.status = status;
    this.opts.onStatus?.(status, detail);
  }

  private scheduleReconnect(): void {
    if (!this.opts.reconnect || this.closedByUser) return;
    const delay = this.backoff;
    this.backoff = Math.min(this.backoff * 2, this.opts.backoffMaxMs);
    this.reconnectTimer = setTimeout(() => this.connect(), delay);
  }
}
