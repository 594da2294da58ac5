// Thin typed client over the service's HTTP API. Every interaction the
// editor makes goes through these calls; there are no other endpoints.

import type { JobInfo, JobRequest, MotionData } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(response.status, JSON.stringify(body));
    }
    return body as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("/api/health");
  }

  schema(name: string): Promise<Record<string, unknown>> {
    return this.request(`/api/schema/${name}`);
  }

  uploadMotion(motion: MotionData): Promise<{ id: string }> {
    return this.request("/api/motions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(motion),
    });
  }

  listMotions(): Promise<{ motions: string[] }> {
    return this.request("/api/motions");
  }

  getMotion(id: string): Promise<MotionData> {
    return this.request(`/api/motions/${id}`);
  }

  submitJob(request: JobRequest): Promise<{ id: string }> {
    return this.request("/api/jobs", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
  }

  getJob(id: string): Promise<JobInfo> {
    return this.request(`/api/jobs/${id}`);
  }

  getJobResult(id: string): Promise<MotionData> {
    return this.request(`/api/jobs/${id}/result`);
  }

  encode(motion: MotionData): Promise<{ mu_local: number[]; mu_global: number[] }> {
    return this.request("/api/encode", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(motion),
    });
  }
}
