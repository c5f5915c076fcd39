/**
 * Browser entry point: orbit controls on a canvas, frame display and the
 * stats overlay. Configuration via query parameters: ?server=ws://...,
 * ?frame=N, ?fov=deg, ?size=px.
 */

import { DEFAULT_LIMITS, type OrbitState } from "./orbit.js";
import type { DecodedFrame } from "./protocol.js";
import { ViewerSession } from "./session.js";

const params = new URLSearchParams(window.location.search);
const server = params.get("server") ?? `ws://${window.location.host}/ws`;
const size = Number(params.get("size") ?? 256);
const fov = Number(params.get("fov") ?? 40);

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const overlay = document.getElementById("overlay") as HTMLDivElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const retryBtn = document.getElementById("retry") as HTMLButtonElement;
canvas.width = size;
canvas.height = size;

const state: OrbitState = {
  azimuthDeg: 0,
  elevationDeg: 0,
  radius: 2.5,
  lookAt: [0, 0, 2.5],
  frame: Number(params.get("frame") ?? 0),
};

let overlayVisible = true;
let lastFrameAt = performance.now();
let fps = 0;
let lastHeader: DecodedFrame["header"] | null = null;

function paint(frame: DecodedFrame): void {
  const bytes = new Uint8Array(frame.image); // concrete ArrayBuffer for Blob
  const blob = new Blob([bytes], {
    type: frame.header.encoding === "png" ? "image/png" : "image/jpeg",
  });
  const url = URL.createObjectURL(blob);
  const img = new Image();
  img.onload = () => {
    ctx.drawImage(img, 0, 0, canvas.width, canvas.height);
    URL.revokeObjectURL(url);
  };
  img.src = url;
  const now = performance.now();
  fps = 0.8 * fps + 0.2 * (1000 / Math.max(now - lastFrameAt, 1));
  lastFrameAt = now;
  lastHeader = frame.header;
  renderOverlay();
}

function renderOverlay(): void {
  if (!overlayVisible || !lastHeader) {
    overlay.textContent = "";
    return;
  }
  const h = lastHeader;
  overlay.textContent =
    `source ${h.t_src_ms.toFixed(1)} ms | render ${h.t_render_ms.toFixed(1)} ms | ` +
    `${fps.toFixed(1)} fps | pair ${h.pair ? h.pair.join("+") : "?"} | frame ${h.frame}`;
}

const session = new ViewerSession(server, {
  fovDeg: fov,
  width: size,
  height: size,
  limits: DEFAULT_LIMITS,
  onFrame: paint,
  onStatus: (status, detail) => {
    banner.textContent = status === "connected" ? "" : `${status}${detail ? `: ${detail}` : ""}`;
    banner.style.display = status === "connected" ? "none" : "block";
  },
});

retryBtn.addEventListener("click", () => session.connect());

let dragging = false;
let lastX = 0;
let lastY = 0;
canvas.addEventListener("pointerdown", (ev) => {
  dragging = true;
  lastX = ev.clientX;
  lastY = ev.clientY;
});
window.addEventListener("pointerup", () => {
  dragging = false;
});
window.addEventListener("pointermove", (ev) => {
  if (!dragging) return;
  state.azimuthDeg += (ev.clientX - lastX) * 0.3;
  state.elevationDeg += (ev.clientY - lastY) * 0.3;
  lastX = ev.clientX;
  lastY = ev.clientY;
  requestSteer();
});
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  state.radius *= Math.exp(ev.deltaY * 0.001);
  requestSteer();
});
window.addEventListener("keydown", (ev) => {
  if (ev.key === "h") {
    overlayVisible = !overlayVisible;
    renderOverlay();
  } else if (ev.key === "[") {
    state.frame = Math.max(0, state.frame - 1);
    requestSteer();
  } else if (ev.key === "]") {
    state.frame += 1;
    requestSteer();
  }
});

let steerQueued = false;
function requestSteer(): void {
  if (steerQueued) return;
  steerQueued = true;
  requestAnimationFrame(() => {
    steerQueued = false;
    session.steer({ ...state });
  });
}

session.connect();
// first frame without user input
setTimeout(() => session.steer({ ...state }), 100);
