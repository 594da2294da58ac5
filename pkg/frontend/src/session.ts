// Editor session state: one loaded motion, pinned keyframes, a drawn
// trajectory, playback, and the job payloads built from them. Pure state +
// methods so tests can drive the whole editing flow headlessly.

import type { JobRequest, Keyframe, MotionData } from "./types.js";
import { resamplePolyline, type Point2 } from "./trajectory.js";

export interface PlaybackState {
  frame: number;
  speed: number;
  playing: boolean;
  loop: boolean;
}

export class EditorSession {
  motionId: string | null = null;
  motion: MotionData | null = null;
  keyframes = new Map<number, Keyframe>();
  trajectory: Point2[] = [];
  activeJobId: string | null = null;
  playback: PlaybackState = { frame: 0, speed: 1, playing: false, loop: true };

  get frameCount(): number {
    return this.motion ? this.motion.frames.xr.length : 0;
  }

  loadMotion(id: string, motion: MotionData): void {
    this.motionId = id;
    this.motion = motion;
    this.keyframes.clear();
    this.trajectory = [];
    this.playback.frame = 0;
  }

  /** Pin the pose currently at `frame` as a keyframe. */
  pinKeyframe(frame: number): void {
    if (!this.motion) throw new Error("no motion loaded");
    if (frame < 0 || frame >= this.frameCount) {
      throw new Error(`frame ${frame} outside [0, ${this.frameCount})`);
    }
    this.keyframes.set(frame, {
      frame,
      xr: this.motion.frames.xr[frame],
      ro: this.motion.frames.ro[frame],
      root_pos: this.motion.frames.root_pos[frame],
    });
  }

  deleteKeyframe(frame: number): void {
    this.keyframes.delete(frame);
  }

  setTrajectory(points: Point2[]): void {
    this.trajectory = points.slice();
  }

  appendTrajectoryPoint(point: Point2): void {
    this.trajectory.push(point);
  }

  clearTrajectory(): void {
    this.trajectory = [];
  }

  /** Validation message for in-betweening submission, or null when ready. */
  inbetweenIssue(): string | null {
    if (!this.motion) return "no motion loaded";
    if (this.keyframes.size < 2) return "pin at least 2 keyframes";
    return null;
  }

  renavigateIssue(): string | null {
    if (!this.motion) return "no motion loaded";
    if (this.trajectory.length < 2) return "draw a trajectory first";
    return null;
  }

  /** Job payload for in-betweening; matches the service's job-request schema. */
  inbetweenRequest(budget = 500, seed = 0): JobRequest {
    const issue = this.inbetweenIssue();
    if (issue) throw new Error(issue);
    const observed = [...this.keyframes.values()].sort((a, b) => a.frame - b.frame);
    return {
      kind: "inbetween",
      frames: this.frameCount,
      observed,
      budget,
      seed,
    };
  }

  /** Job payload for re-navigating: the drawn polyline resampled to the
   * target frame count, with the loaded motion as the style reference. */
  renavigateRequest(budget = 500, seed = 0): JobRequest {
    const issue = this.renavigateIssue();
    if (issue) throw new Error(issue);
    return {
      kind: "renavigate",
      frames: this.frameCount,
      reference_id: this.motionId ?? undefined,
      trajectory: resamplePolyline(this.trajectory, this.frameCount),
      budget,
      seed,
    };
  }

  /** Advance playback by one tick; returns the frame to display. */
  tick(): number {
    if (!this.motion || !this.playback.playing) return this.playback.frame;
    let next = this.playback.frame + this.playback.speed;
    if (next >= this.frameCount) {
      next = this.playback.loop ? next % this.frameCount : this.frameCount - 1;
    }
    this.playback.frame = Math.floor(next);
    return this.playback.frame;
  }
}
