// Client-side forward kinematics, kept in lockstep with the server's
// convention: 6D rotations store the first two matrix columns, the third is
// their cross product after Gram-Schmidt; joint positions chain
// position(child) = position(parent) + R_global(parent) @ offset(child);
// world positions apply the root orientation and translation on top of the
// root-local pose. Shared fixtures pin both sides to <= 1e-4 cm.

import type { Mat3, MotionData, SkeletonData, Vec3 } from "./types.js";

function norm3(v: Vec3): number {
  return Math.hypot(v[0], v[1], v[2]);
}

function scale3(v: Vec3, s: number): Vec3 {
  return [v[0] * s, v[1] * s, v[2] * s];
}

function sub3(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function add3(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

function dot3(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function cross3(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

/** Build a rotation matrix (row-major) from the 6D representation. */
export function rot6dToMatrix(r6: number[]): Mat3 {
  const a1: Vec3 = [r6[0], r6[1], r6[2]];
  const a2: Vec3 = [r6[3], r6[4], r6[5]];
  const b1 = scale3(a1, 1 / Math.sqrt(dot3(a1, a1) + 1e-12));
  const proj = dot3(a2, b1);
  const r = sub3(a2, scale3(b1, proj));
  const b2 = scale3(r, 1 / Math.sqrt(dot3(r, r) + 1e-12));
  const b3 = cross3(b1, b2);
  // columns are b1, b2, b3
  return [b1[0], b2[0], b3[0], b1[1], b2[1], b3[1], b1[2], b2[2], b3[2]];
}

export function matVec(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
    m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
    m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
  ];
}

export function matMul(a: Mat3, b: Mat3): Mat3 {
  const out = new Array(9).fill(0);
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) {
      let s = 0;
      for (let k = 0; k < 3; k++) s += a[3 * i + k] * b[3 * k + j];
      out[3 * i + j] = s;
    }
  }
  return out;
}

/** Root-local joint positions for one frame of 6D joint rotations. */
export function localPositions(skeleton: SkeletonData, xr: number[][]): Vec3[] {
  const j = skeleton.names.length;
  const globals: Mat3[] = new Array(j);
  const positions: Vec3[] = new Array(j);
  globals[0] = rot6dToMatrix(xr[0]);
  positions[0] = [0, 0, 0];
  for (let i = 1; i < j; i++) {
    const p = skeleton.parents[i];
    const offset = skeleton.offsets[i] as Vec3;
    positions[i] = add3(positions[p], matVec(globals[p], offset));
    globals[i] = matMul(globals[p], rot6dToMatrix(xr[i]));
  }
  return positions;
}

/** World-space joint positions for one frame of a motion. */
export function worldPositions(motion: MotionData, frame: number): Vec3[] {
  const local = localPositions(motion.skeleton, motion.frames.xr[frame]);
  const ro = rot6dToMatrix(motion.frames.ro[frame]);
  const root = motion.frames.root_pos[frame] as Vec3;
  return local.map((p) => add3(root, matVec(ro, p)));
}

/** Bone list as pairs of joint indices (parent, child), skipping the root. */
export function bones(skeleton: SkeletonData): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  for (let i = 1; i < skeleton.names.length; i++) {
    out.push([skeleton.parents[i], i]);
  }
  return out;
}
