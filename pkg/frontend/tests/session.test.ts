import { describe, expect, it, vi } from "vitest";

import { ViewerSession } from "../src/session.js";
import type { OrbitState } from "../src/orbit.js";

class MockSocket {
  static instances: MockSocket[] = [];
  binaryType = "";
  sent: string[] = [];
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;

  constructor(public url: string) {
    MockSocket.instances.push(this);
  }

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.onclose?.();
  }

  open(): void {
    this.onopen?.();
  }

  deliverFrame(header: object = {}, payload = new Uint8Array([1])): void {
    const head = new TextEncoder().encode(
      JSON.stringify({ type: "frame", frame: 0, t_src_ms: 1, t_render_ms: 1, encoding: "jpeg", ...header }),
    );
    const buf = new Uint8Array(4 + head.length + payload.length);
    new DataView(buf.buffer).setUint32(0, head.length, false);
    buf.set(head, 4);
    buf.set(payload, 4 + head.length);
    this.onmessage?.({ data: buf.buffer });
  }
}

function orbit(az = 0): OrbitState {
  return { azimuthDeg: az, elevationDeg: 0, radius: 2.5, lookAt: [0, 0, 2.5], frame: 0 };
}

function makeSession(overrides = {}) {
  MockSocket.instances = [];
  const frames: unknown[] = [];
  const statuses: string[] = [];
  const session = new ViewerSession("ws://mock", {
    webSocketFactory: (url) => new MockSocket(url),
    onFrame: (f) => frames.push(f),
    onStatus: (s) => statuses.push(s),
    reconnect: true,
    backoffMs: 1,
    ...overrides,
  });
  return { session, frames, statuses };
}

describe("ViewerSession", () => {
  it("reports connected after the socket opens", () => {
    const { session, statuses } = makeSession();
    session.connect();
    expect(statuses.at(-1)).toBe("connecting");
    MockSocket.instances[0].open();
    expect(session.status).toBe("connected");
  });

  it("keeps at most one pose in flight and coalesces bursts", () => {
    const { session } = makeSession();
    session.connect();
    const ws = MockSocket.instances[0];
    ws.open();
    for (let k = 0; k < 50; k++) session.steer(orbit(k));
    expect(ws.sent.length).toBe(1); // the rest buffered client-side
    expect(session.hasPoseInFlight).toBe(true);
    ws.deliverFrame();
    expect(ws.sent.length).toBe(2); // newest buffered pose follows the ack
    const last = JSON.parse(ws.sent[1]);
    expect(last.type).toBe("pose");
    ws.deliverFrame();
    expect(session.hasPoseInFlight).toBe(false);
    expect(ws.sent.length).toBe(2);
  });

  it("clamps steering to the configured envelope", () => {
    const { session } = makeSession();
    session.connect();
    const ws = MockSocket.instances[0];
    ws.open();
    session.steer({ ...orbit(), elevationDeg: 80 });
    const msg = JSON.parse(ws.sent[0]);
    // elevation pinned at +20: the camera sits above the look-at point by
    // sin(20 deg) * radius along +y
    const R = msg.R as number[];
    const t = msg.t as number[];
    const c = [
      -(R[0] * t[0] + R[3] * t[1] + R[6] * t[2]),
      -(R[1] * t[0] + R[4] * t[1] + R[7] * t[2]),
      -(R[2] * t[0] + R[5] * t[1] + R[8] * t[2]),
    ];
    expect(c[1]).toBeCloseTo(2.5 * Math.sin((20 * Math.PI) / 180), 6);
  });

  it("reconnects with backoff after a drop", async () => {
    vi.useFakeTimers();
    const { session } = makeSession();
    session.connect();
    MockSocket.instances[0].open();
    MockSocket.instances[0].onclose?.();
    expect(session.status).toBe("closed");
    await vi.advanceTimersByTimeAsync(5);
    expect(MockSocket.instances.length).toBe(2);
    MockSocket.instances[1].open();
    expect(session.status).toBe("connected");
    vi.useRealTimers();
  });

  it("no input means no messages", () => {
    const { session } = makeSession();
    session.connect();
    MockSocket.instances[0].open();
    expect(MockSocket.instances[0].sent.length).toBe(0);
    expect(session.posesSent).toBe(0);
  });

  it("survives malformed binary frames", () => {
    const { session } = makeSession();
    session.connect();
    const ws = MockSocket.instances[0];
    ws.open();
    ws.onmessage?.({ data: new Uint8Array([0, 0]).buffer });
    expect(session.status).toBe("connected");
    session.steer(orbit());
    expect(ws.sent.length).toBe(1);
  });
});
