// Rendering as pure functions: a frame becomes a list of 2D draw commands
// (lines and dots), which the canvas adapter in main.ts strokes verbatim.
// Two views: a perspective playback viewport and an orthographic top-down
// board used for trajectory drawing.

import { bones, worldPositions } from "./fk.js";
import type { MotionData, Vec3 } from "./types.js";
import type { Point2 } from "./trajectory.js";

export interface DrawLine {
  kind: "line";
  from: Point2;
  to: Point2;
  style: string;
}

export interface DrawDot {
  kind: "dot";
  at: Point2;
  radius: number;
  style: string;
}

export type DrawCommand = DrawLine | DrawDot;

export interface PerspectiveCamera {
  eye: Vec3;
  target: Vec3;
  fovScale: number; // pixels per unit tan
  width: number;
  height: number;
}

export function defaultCamera(width: number, height: number): PerspectiveCamera {
  return { eye: [260, -300, 180], target: [0, 60, 80], fovScale: 700, width, height };
}

/** Project a world point through a simple look-at perspective camera. */
export function project(camera: PerspectiveCamera, p: Vec3): Point2 | null {
  const f: Vec3 = [
    camera.target[0] - camera.eye[0],
    camera.target[1] - camera.eye[1],
    camera.target[2] - camera.eye[2],
  ];
  const fn = Math.hypot(f[0], f[1], f[2]);
  const fwd: Vec3 = [f[0] / fn, f[1] / fn, f[2] / fn];
  const upWorld: Vec3 = [0, 0, 1];
  let right: Vec3 = [
    fwd[1] * upWorld[2] - fwd[2] * upWorld[1],
    fwd[2] * upWorld[0] - fwd[0] * upWorld[2],
    fwd[0] * upWorld[1] - fwd[1] * upWorld[0],
  ];
  const rn = Math.hypot(right[0], right[1], right[2]);
  right = [right[0] / rn, right[1] / rn, right[2] / rn];
  const up: Vec3 = [
    right[1] * fwd[2] - right[2] * fwd[1],
    right[2] * fwd[0] - right[0] * fwd[2],
    right[0] * fwd[1] - right[1] * fwd[0],
  ];
  const d: Vec3 = [p[0] - camera.eye[0], p[1] - camera.eye[1], p[2] - camera.eye[2]];
  const depth = d[0] * fwd[0] + d[1] * fwd[1] + d[2] * fwd[2];
  if (depth <= 1e-6) return null; // behind the camera
  const x = (d[0] * right[0] + d[1] * right[1] + d[2] * right[2]) / depth;
  const y = (d[0] * up[0] + d[1] * up[1] + d[2] * up[2]) / depth;
  return [camera.width / 2 + x * camera.fovScale, camera.height / 2 - y * camera.fovScale];
}

export function renderSkeleton(
  motion: MotionData,
  frame: number,
  camera: PerspectiveCamera,
  style = "#222",
): DrawCommand[] {
  const joints = worldPositions(motion, frame);
  const commands: DrawCommand[] = [];
  for (const [a, b] of bones(motion.skeleton)) {
    const pa = project(camera, joints[a]);
    const pb = project(camera, joints[b]);
    if (pa && pb) commands.push({ kind: "line", from: pa, to: pb, style });
  }
  for (const j of joints) {
    const pj = project(camera, j);
    if (pj) commands.push({ kind: "dot", at: pj, radius: 3, style });
  }
  return commands;
}

export interface TopDownView {
  scale: number; // pixels per cm
  centerX: number;
  centerY: number;
}

export function groundToScreen(view: TopDownView, p: Point2): Point2 {
  return [view.centerX + p[0] * view.scale, view.centerY - p[1] * view.scale];
}

export function screenToGround(view: TopDownView, p: Point2): Point2 {
  return [(p[0] - view.centerX) / view.scale, (view.centerY - p[1]) / view.scale];
}

export function renderTrajectory(
  view: TopDownView,
  points: Point2[],
  style = "#07c",
): DrawCommand[] {
  const commands: DrawCommand[] = [];
  for (let i = 1; i < points.length; i++) {
    commands.push({
      kind: "line",
      from: groundToScreen(view, points[i - 1]),
      to: groundToScreen(view, points[i]),
      style,
    });
  }
  if (points.length > 0) {
    commands.push({ kind: "dot", at: groundToScreen(view, points[0]), radius: 4, style });
  }
  return commands;
}

export function renderRootPath(view: TopDownView, motion: MotionData, style = "#999"): DrawCommand[] {
  const pts: Point2[] = motion.frames.root_pos.map((p) => [p[0], p[1]]);
  return renderTrajectory(view, pts, style);
}
