/**
 * Orbit camera state and its conversion to world->camera poses.
 *
 * The camera circles a look-at point at a fixed radius; azimuth spins
 * around the world y axis and elevation pitches above/below the horizon.
 * Elevation is hard-limited to (-89, 89) degrees and soft-clamped to the
 * service's validated envelope (default +-20 degrees).
 */

export interface OrbitState {
  azimuthDeg: number;
  elevationDeg: number;
  radius: number;
  lookAt: [number, number, number];
  frame: number;
}

export interface OrbitLimits {
  elevationMinDeg: number;
  elevationMaxDeg: number;
  radiusMin: number;
  radiusMax: number;
}

export const DEFAULT_LIMITS: OrbitLimits = {
  elevationMinDeg: -20,
  elevationMaxDeg: 20,
  radiusMin: 0.3,
  radiusMax: 20,
};

const HARD_ELEVATION = 89;

export function clampOrbit(state: OrbitState, limits: OrbitLimits = DEFAULT_LIMITS): OrbitState {
  const lo = Math.max(limits.elevationMinDeg, -HARD_ELEVATION + 1e-6);
  const hi = Math.min(limits.elevationMaxDeg, HARD_ELEVATION - 1e-6);
  return {
    ...state,
    elevationDeg: Math.min(hi, Math.max(lo, state.elevationDeg)),
    radius: Math.min(limits.radiusMax, Math.max(limits.radiusMin, state.radius)),
  };
}

export interface Pose {
  /** row-major 3x3 world->camera rotation */
  R: number[];
  t: [number, number, number];
}

function cross(a: number[], b: number[]): [number, number, number] {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

function normalize(v: number[]): [number, number, number] {
  const n = Math.hypot(v[0], v[1], v[2]);
  return [v[0] / n, v[1] / n, v[2] / n];
}

/** Camera center in world coordinates for an orbit state. */
export function cameraCenter(state: OrbitState): [number, number, number] {
  const az = (state.azimuthDeg * Math.PI) / 180;
  const el = (state.elevationDeg * Math.PI) / 180;
  const dir = [Math.sin(az) * Math.cos(el), Math.sin(el), -Math.cos(az) * Math.cos(el)];
  return [
    state.lookAt[0] + state.radius * dir[0],
    state.lookAt[1] + state.radius * dir[1],
    state.lookAt[2] + state.radius * dir[2],
  ];
}

/**
 * World->camera pose looking from the orbit position at the look-at
 * point (x right, y down, z forward; rows of R are the camera axes).
 */
export function poseFromOrbit(state: OrbitState): Pose {
  const c = cameraCenter(state);
  const forward = normalize([state.lookAt[0] - c[0], state.lookAt[1] - c[1], state.lookAt[2] - c[2]]);
  let hint: [number, number, number] = [0, 1, 0];
  if (Math.abs(forward[0] * hint[0] + forward[1] * hint[1] + forward[2] * hint[2]) > 0.999) {
    hint = [1, 0, 0];
  }
  const right = normalize(cross(hint, forward));
  const down = cross(forward, right);
  const R = [...right, ...down, ...forward];
  const t: [number, number, number] = [
    -(R[0] * c[0] + R[1] * c[1] + R[2] * c[2]),
    -(R[3] * c[0] + R[4] * c[1] + R[5] * c[2]),
    -(R[6] * c[0] + R[7] * c[1] + R[8] * c[2]),
  ];
  return { R, t };
}

/** Max deviation of R R^T from identity (orthonormality residual). */
export function orthonormalityError(R: number[]): number {
  let worst = 0;
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) {
      let dot = 0;
      for (let k = 0; k < 3; k++) dot += R[3 * i + k] * R[3 * j + k];
      worst = Math.max(worst, Math.abs(dot - (i === j ? 1 : 0)));
    }
  }
  return worst;
}

export function rotationDeterminant(R: number[]): number {
  return (
    R[0] * (R[4] * R[8] - R[5] * R[7]) -
    R[1] * (R[3] * R[8] - R[5] * R[6]) +
    R[2] * (R[3] * R[7] - R[4] * R[6])
  );
}
