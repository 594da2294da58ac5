// Wire types mirroring the service's published JSON schemas.

export interface SkeletonData {
  names: string[];
  parents: number[];
  offsets: number[][]; // (J, 3) parent-local, cm
  foot_joints?: string[];
}

export interface MotionData {
  version: number;
  skeleton: SkeletonData;
  fps: number;
  frames: {
    xr: number[][][]; // (T, J, 6)
    ro: number[][]; // (T, 6)
    root_pos: number[][]; // (T, 3)
  };
}

export type Vec3 = [number, number, number];
export type Mat3 = number[]; // row-major, length 9

export interface Keyframe {
  frame: number;
  xr: number[][];
  ro: number[];
  root_pos: number[];
}

export interface JobRequest {
  kind: "inbetween" | "renavigate" | "sample";
  frames?: number;
  budget?: number;
  seed?: number;
  gamma?: number;
  lr?: number;
  weights?: Record<string, number>;
  observed?: Keyframe[];
  motion_id?: string;
  keyframes?: number[];
  reference_id?: string;
  trajectory?: number[][];
}

export interface TracePoint {
  iteration: number;
  energy: number;
  best_energy: number;
}

export interface JobInfo {
  id: string;
  kind: string;
  state: "queued" | "running" | "done" | "failed";
  progress: number;
  result_motion_id: string | null;
  error: string | null;
  trace: TracePoint[];
  energy: Record<string, unknown>;
}
