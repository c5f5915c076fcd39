/**
 * Wire protocol shared with the render service.
 *
 * Outbound (JSON text): {"type":"pose","R":[9],"t":[3],"fov_deg":...,
 * "width":...,"height":...,"frame":...} and {"type":"ping"}.
 * Inbound frames are binary: 4-byte big-endian JSON header length, the
 * JSON header, then the encoded image bytes.
 */

import type { Pose } from "./orbit.js";

export interface PoseMessage {
  type: "pose";
  R: number[];
  t: [number, number, number];
  fov_deg: number;
  width: number;
  height: number;
  frame: number;
}

export interface FrameHeader {
  type: "frame";
  frame: number;
  t_src_ms: number;
  t_render_ms: number;
  encoding: string;
  width?: number;
  height?: number;
  pair?: [string, string];
  gaussians?: number;
  seq?: number;
  coalesced?: number;
  pending?: number;
}

export interface DecodedFrame {
  header: FrameHeader;
  image: Uint8Array;
}

export function encodePose(
  pose: Pose,
  fovDeg: number,
  width: number,
  height: number,
  frame: number,
): string {
  const msg: PoseMessage = {
    type: "pose",
    R: pose.R,
    t: pose.t,
    fov_deg: fovDeg,
    width,
    height,
    frame,
  };
  return JSON.stringify(msg);
}

export function encodePing(): string {
  return JSON.stringify({ type: "ping" });
}

export function decodeFrame(buffer: ArrayBuffer): DecodedFrame {
  if (buffer.byteLength < 4) {
    throw new Error(`frame message too short: ${buffer.byteLength} bytes`);
  }
  const view = new DataView(buffer);
  const headerLength = view.getUint32(0, false); // big-endian
  if (4 + headerLength > buffer.byteLength) {
    throw new Error(`header length ${headerLength} exceeds message size ${buffer.byteLength}`);
  }
  const headerBytes = new Uint8Array(buffer, 4, headerLength);
  const header = JSON.parse(new TextDecoder().decode(headerBytes)) as FrameHeader;
  if (header.type !== "frame") {
    throw new Error(`unexpected header type ${header.type}`);
  }
  const image = new Uint8Array(buffer, 4 + headerLength);
  return { header, image };
}
