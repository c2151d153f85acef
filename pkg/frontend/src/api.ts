/** Thin typed client for the session service; the UI's only data source. */

import type {
  CreatedSession,
  NextPayload,
  ReportPayload,
  ResponseBody,
  SubmitAck,
  WeightsPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<{ data: T; raw: string }> {
  const res = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const raw = await res.text();
  if (!res.ok) {
    let detail = raw;
    try {
      detail = JSON.parse(raw).detail ?? raw;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(res.status, detail);
  }
  return { data: JSON.parse(raw) as T, raw };
}

export class ApiClient {
  constructor(public baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async createSession(participant = "", seed?: number): Promise<CreatedSession> {
    const body: Record<string, unknown> = { participant };
    if (seed !== undefined) body.seed = seed;
    const { data } = await request<CreatedSession>(this.url("/sessions"), {
      method: "POST",
      body: JSON.stringify(body),
    });
    return data;
  }

  async next(sid: string): Promise<NextPayload> {
    const { data } = await request<NextPayload>(this.url(`/sessions/${sid}/next`));
    return data;
  }

  async submit(sid: string, body: ResponseBody): Promise<SubmitAck> {
    const { data } = await request<SubmitAck>(this.url(`/sessions/${sid}/responses`), {
      method: "POST",
      body: JSON.stringify(body),
    });
    return data;
  }

  async fit(sid: string): Promise<unknown> {
    const { data } = await request<unknown>(this.url(`/sessions/${sid}/fit`), {
      method: "POST",
    });
    return data;
  }

  /** Raw body is kept alongside the parse so views can prove provenance. */
  async weights(sid: string): Promise<{ data: WeightsPayload; raw: string }> {
    return request<WeightsPayload>(this.url(`/sessions/${sid}/weights`));
  }

  async report(sid: string): Promise<{ data: ReportPayload; raw: string }> {
    return request<ReportPayload>(this.url(`/sessions/${sid}/report`));
  }
}
