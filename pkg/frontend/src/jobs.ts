// Job polling: watch a submitted job until it terminates, surfacing
// progress and the best-energy trace, and fetching the result exactly once.

import type { ApiClient } from "./api.js";
import type { JobInfo, MotionData, TracePoint } from "./types.js";

export interface MonitorCallbacks {
  onProgress?: (job: JobInfo) => void;
  onDone?: (job: JobInfo, result: MotionData) => void;
  onFailed?: (job: JobInfo) => void;
}

export const DEFAULT_POLL_MS = 500;
export const TRACE_DISPLAY_LIMIT = 1000;

export class JobMonitor {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private resultFetched = false;
  lastJob: JobInfo | null = null;

  constructor(
    private api: ApiClient,
    private jobId: string,
    private callbacks: MonitorCallbacks,
    private pollMs: number = DEFAULT_POLL_MS,
  ) {}

  /** Trace points to plot, truncated to the display budget. */
  displayTrace(): TracePoint[] {
    const trace = this.lastJob?.trace ?? [];
    return trace.slice(-TRACE_DISPLAY_LIMIT);
  }

  start(): void {
    void this.poll();
  }

  stop(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  /** One poll step; exposed for tests to drive without timers. */
  async poll(): Promise<JobInfo> {
    const job = await this.api.getJob(this.jobId);
    this.lastJob = job;
    this.callbacks.onProgress?.(job);
    if (job.state === "done") {
      if (!this.resultFetched) {
        this.resultFetched = true;
        const result = await this.api.getJobResult(this.jobId);
        this.callbacks.onDone?.(job, result);
      }
      return job;
    }
    if (job.state === "failed") {
      this.callbacks.onFailed?.(job);
      return job;
    }
    this.timer = setTimeout(() => void this.poll(), this.pollMs);
    return job;
  }
}

/** Await a job's terminal state by repeated polling (used by the e2e flow). */
export async function waitForJob(
  api: ApiClient,
  jobId: string,
  onProgress?: (job: JobInfo) => void,
  pollMs = 100,
  timeoutMs = 300_000,
): Promise<JobInfo> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const job = await api.getJob(jobId);
    onProgress?.(job);
    if (job.state === "done" || job.state === "failed") return job;
    if (Date.now() > deadline) throw new Error(`job ${jobId} timed out`);
    await new Promise((resolve) => setTimeout(resolve, pollMs));
  }
}
