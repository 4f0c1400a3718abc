// API payload shapes, mirroring the service's JSON responses.

export type PracticeMode = 0 | 1; // 0 = pitch, 1 = timing

export const PM_LABEL: Record<PracticeMode, string> = {
  0: "pitch",
  1: "timing",
};

export interface SessionSummary {
  session_id: string;
  learner_id: string;
  piece_id: string;
  bpm: number;
}

export interface OpenUnit {
  p_pre: number | null;
  t_pre: number | null;
  pm: number | null;
  bpm: number | null;
}

export interface SessionEvent {
  seq: number;
  ts: number;
  kind: "PRE_PERF" | "PRACTICE" | "POST_PERF" | "RECOMMENDATION";
  payload: Record<string, unknown>;
}

export type SessionPhase = "AWAITING_PRE" | "AWAITING_PRACTICE" | "AWAITING_POST";

export interface SessionView extends SessionSummary {
  phase: SessionPhase;
  open_unit: OpenUnit;
  events: SessionEvent[];
}

export interface PerformanceResult {
  pitch_error: number;
  timing_error: number;
  tuple_recorded: boolean;
}

export interface RecommendationAlternative {
  pm: PracticeMode;
  bpm: number;
  mean: number;
  sd: number;
  tie: boolean;
}

export interface Recommendation extends RecommendationAlternative {
  model_id: string;
  alternatives: RecommendationAlternative[];
}

export interface JobStatus {
  job_id: string;
  state: "QUEUED" | "RUNNING" | "DONE" | "FAILED";
  progress: number;
  message: string;
  result_ref: string | null;
}

export interface ModelList {
  active: string | null;
  models: Array<{ model_id: string; [key: string]: unknown }>;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
  detail: string;
}
