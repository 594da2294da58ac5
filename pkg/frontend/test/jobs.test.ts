import { describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { JobMonitor } from "../src/jobs.js";
import type { JobInfo } from "../src/types.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function scriptedClient(states: JobInfo[], resultBody: unknown) {
  let polls = 0;
  let resultFetches = 0;
  const fetchImpl = async (url: string): Promise<Response> => {
    if (url.endsWith("/result")) {
      resultFetches += 1;
      return jsonResponse(resultBody);
    }
    const job = states[Math.min(polls, states.length - 1)];
    polls += 1;
    return jsonResponse(job);
  };
  const api = new ApiClient("http://test", fetchImpl);
  return { api, counts: () => ({ polls, resultFetches }) };
}

function jobState(state: JobInfo["state"], progress: number, best: number): JobInfo {
  return {
    id: "job-000001",
    kind: "inbetween",
    state,
    progress,
    result_motion_id: state === "done" ? "motion-000002" : null,
    error: state === "failed" ? "boom" : null,
    trace: [{ iteration: 0, energy: best, best_energy: best }],
    energy: {},
  };
}

describe("JobMonitor", () => {
  it("polls until done, reports monotone progress, fetches result once", async () => {
    const states = [
      jobState("queued", 0, 5),
      jobState("running", 0.3, 4),
      jobState("running", 0.8, 3),
      jobState("done", 1.0, 2),
    ];
    const { api, counts } = scriptedClient(states, { frames: { xr: [[1]] } });
    const progress: number[] = [];
    let doneJob: JobInfo | null = null;
    const monitor = new JobMonitor(api, "job-000001", {
      onProgress: (job) => progress.push(job.progress),
      onDone: (job) => {
        doneJob = job;
      },
    }, 1);
    for (let i = 0; i < states.length; i++) {
      const job = await monitor.poll();
      monitor.stop();
      if (job.state === "done") break;
    }
    expect(doneJob).not.toBeNull();
    expect(progress).toEqual([0, 0.3, 0.8, 1.0]);
    for (let i = 1; i < progress.length; i++) {
      expect(progress[i]).toBeGreaterThanOrEqual(progress[i - 1]);
    }
    expect(counts().resultFetches).toBe(1);
    // polling again after done must not re-fetch the result
    await monitor.poll();
    expect(counts().resultFetches).toBe(1);
  });

  it("surfaces failures and never fetches a result", async () => {
    const states = [jobState("running", 0.5, 9), jobState("failed", 0.5, 9)];
    const { api, counts } = scriptedClient(states, {});
    let failed: JobInfo | null = null;
    const monitor = new JobMonitor(api, "job-000001", {
      onFailed: (job) => {
        failed = job;
      },
    }, 1);
    await monitor.poll();
    monitor.stop();
    const job = await monitor.poll();
    expect(job.state).toBe("failed");
    expect(failed!.error).toBe("boom");
    expect(counts().resultFetches).toBe(0);
  });

  it("passes trace values through untouched and truncates to the display cap", async () => {
    const long = Array.from({ length: 1500 }, (_, i) => ({
      iteration: i,
      energy: 100 - i * 0.01,
      best_energy: 100 - i * 0.01,
    }));
    const job: JobInfo = { ...jobState("running", 0.1, 1), trace: long };
    const { api } = scriptedClient([job], {});
    const monitor = new JobMonitor(api, "job-000001", {}, 1);
    await monitor.poll();
    monitor.stop();
    const shown = monitor.displayTrace();
    expect(shown.length).toBe(1000);
    expect(shown[shown.length - 1].energy).toBe(long[long.length - 1].energy);
  });
});
