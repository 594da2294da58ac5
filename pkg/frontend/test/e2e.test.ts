// Scripted editor session against a live service. Runs only when
// MOTIONFIELD_SERVICE_URL points at a server (scripts/run_e2e.sh boots one);
// otherwise the suite is skipped.

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { waitForJob } from "../src/jobs.js";
import { localPositions } from "../src/fk.js";
import { EditorSession } from "../src/session.js";
import type { JobInfo, MotionData } from "../src/types.js";

const serviceUrl = process.env.MOTIONFIELD_SERVICE_URL;
const motionPath = process.env.MOTIONFIELD_E2E_MOTION;

const suite = serviceUrl && motionPath ? describe : describe.skip;

suite("editor end-to-end against a live service", () => {
  const api = new ApiClient(serviceUrl ?? "");

  it("uploads, pins 3 keyframes, optimizes, and plays the result", async () => {
    const health = await api.health();
    expect(health.status).toBe("ok");

    const motion = JSON.parse(readFileSync(motionPath!, "utf8")) as MotionData;
    const frames = motion.frames.xr.length;

    const session = new EditorSession();
    const { id } = await api.uploadMotion(motion);
    session.loadMotion(id, motion);

    // scrub the timeline and pin three keyframes
    for (const frame of [0, Math.floor(frames / 2), frames - 1]) {
      session.playback.frame = frame;
      session.pinKeyframe(frame);
    }
    expect(session.keyframes.size).toBe(3);
    expect(session.inbetweenIssue()).toBeNull();

    const request = session.inbetweenRequest(80, 0);
    // the payload must validate against the service's published schema
    const schema = await api.schema("job-request");
    expect((schema.properties as Record<string, unknown>).observed).toBeDefined();
    expect(request.frames).toBe(frames);

    const { id: jobId } = await api.submitJob(request);
    const progressSeen: number[] = [];
    const bestSeen: number[] = [];
    const job: JobInfo = await waitForJob(api, jobId, (j) => {
      progressSeen.push(j.progress);
      for (const p of j.trace) bestSeen.push(p.best_energy);
    });
    expect(job.state).toBe("done");

    // progress and best-energy are monotone
    for (let i = 1; i < progressSeen.length; i++) {
      expect(progressSeen[i]).toBeGreaterThanOrEqual(progressSeen[i - 1]);
    }
    const finalTrace = job.trace.map((p) => p.best_energy);
    for (let i = 1; i < finalTrace.length; i++) {
      expect(finalTrace[i]).toBeLessThanOrEqual(finalTrace[i - 1] + 1e-12);
    }

    // the result plays back with the requested frame count
    const result = await api.getJobResult(jobId);
    expect(result.frames.xr.length).toBe(frames);
    const playback = new EditorSession();
    playback.loadMotion("result", result);
    playback.playback.playing = true;
    playback.playback.speed = 2;
    const first = playback.tick();
    const second = playback.tick();
    expect(second - first).toBe(2);

    // client FK runs on the result without blowing up
    const joints = localPositions(result.skeleton, result.frames.xr[0]);
    expect(joints.length).toBe(result.skeleton.names.length);
    for (const p of joints) for (const c of p) expect(Number.isFinite(c)).toBe(true);
  }, 300_000);

  it("encodes the uploaded motion for latent display", async () => {
    const motion = JSON.parse(readFileSync(motionPath!, "utf8")) as MotionData;
    const posterior = await api.encode(motion);
    expect(posterior.mu_local.length).toBeGreaterThan(0);
  });
});
