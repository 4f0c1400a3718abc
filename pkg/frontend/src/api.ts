// Thin typed client for the practice service. Every number shown in the UI
// comes through here; the client never computes errors or utilities itself.

import type {
  ErrorEnvelope,
  JobStatus,
  ModelList,
  PerformanceResult,
  Recommendation,
  SessionSummary,
  SessionView,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail = "",
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let envelope: Partial<ErrorEnvelope> = {};
  try {
    envelope = (await response.json()) as ErrorEnvelope;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(
    response.status,
    envelope.code ?? "unknown",
    envelope.message ?? response.statusText,
    envelope.detail ?? "",
  );
}

export class ApiClient {
  constructor(
    public baseUrl = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<{ status: string; gp_backend: string }> {
    return this.request("/api/health");
  }

  createSession(learnerId: string, pieceId: string, bpm: number): Promise<{ session_id: string }> {
    return this.post("/api/sessions", { learner_id: learnerId, piece_id: pieceId, bpm });
  }

  listSessions(): Promise<{ sessions: SessionSummary[] }> {
    return this.request("/api/sessions");
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request(`/api/sessions/${sessionId}`);
  }

  submitManualPerformance(
    sessionId: string,
    phase: "PRE" | "POST",
    pitchError: number,
    timingError: number,
  ): Promise<PerformanceResult> {
    return this.post(`/api/sessions/${sessionId}/performances`, {
      phase,
      pitch_error: pitchError,
      timing_error: timingError,
    });
  }

  submitMidiPerformance(
    sessionId: string,
    phase: "PRE" | "POST",
    midiBase64: string,
  ): Promise<PerformanceResult> {
    return this.post(`/api/sessions/${sessionId}/performances`, {
      phase,
      midi_base64: midiBase64,
    });
  }

  logPractice(sessionId: string, pm: number, bpm: number): Promise<{ ok: boolean }> {
    return this.post(`/api/sessions/${sessionId}/practice`, { pm, bpm });
  }

  getRecommendation(sessionId: string, bpms?: number[]): Promise<Recommendation> {
    const query = bpms && bpms.length ? `?bpms=${bpms.join(",")}` : "";
    return this.request(`/api/sessions/${sessionId}/recommendation${query}`);
  }

  startTraining(dataset: string, family: string, budget: number, seed: number): Promise<{ job_id: string }> {
    return this.post("/api/train", { dataset, family, budget, seed });
  }

  getJob(jobId: string): Promise<JobStatus> {
    return this.request(`/api/jobs/${jobId}`);
  }

  listModels(): Promise<ModelList> {
    return this.request("/api/models");
  }

  datasetSize(): Promise<{ n_tuples: number }> {
    return this.request("/api/dataset");
  }

  async getPolicyMapCsv(bpm: number, resolution: number): Promise<string> {
    const response = await this.fetchFn(
      `${this.baseUrl}/api/policy-map?bpm=${bpm}&resolution=${resolution}`,
    );
    if (!response.ok) {
      throw await parseError(response);
    }
    return response.text();
  }
}
