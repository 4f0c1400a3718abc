// Guided practice-unit flow: PRE performance -> recommendation -> practice
// confirmation -> POST performance -> achieved-utility display. All state is
// server-authoritative; this module only sequences API calls and tracks what
// the next step is.

import { ApiClient } from "./api.js";
import type { PerformanceResult, Recommendation, SessionView } from "./types.js";

export type FlowStep =
  | "NEED_PRE"
  | "NEED_PRACTICE"
  | "NEED_POST"
  | "UNIT_COMPLETE";

export interface UnitOutcome {
  pPre: number;
  tPre: number;
  pm: number;
  bpm: number;
  pPost: number;
  tPost: number;
  pitchImprovement: number;
  timingImprovement: number;
}

export function stepFromView(view: SessionView): FlowStep {
  switch (view.phase) {
    case "AWAITING_PRE":
      return "NEED_PRE";
    case "AWAITING_PRACTICE":
      return "NEED_PRACTICE";
    case "AWAITING_POST":
      return "NEED_POST";
  }
}

export function unitOutcome(
  pre: { pitch: number; timing: number },
  pm: number,
  bpm: number,
  post: PerformanceResult,
): UnitOutcome {
  return {
    pPre: pre.pitch,
    tPre: pre.timing,
    pm,
    bpm,
    pPost: post.pitch_error,
    tPost: post.timing_error,
    pitchImprovement: pre.pitch - post.pitch_error,
    timingImprovement: pre.timing - post.timing_error,
  };
}

export class SessionFlow {
  recommendation: Recommendation | null = null;
  lastPre: { pitch: number; timing: number } | null = null;
  lastOutcome: UnitOutcome | null = null;

  constructor(
    private client: ApiClient,
    public sessionId: string,
  ) {}

  async refresh(): Promise<SessionView> {
    return this.client.getSession(this.sessionId);
  }

  async submitPre(pitchError: number, timingError: number): Promise<PerformanceResult> {
    const result = await this.client.submitManualPerformance(
      this.sessionId,
      "PRE",
      pitchError,
      timingError,
    );
    this.lastPre = { pitch: result.pitch_error, timing: result.timing_error };
    this.lastOutcome = null;
    return result;
  }

  async fetchRecommendation(bpms?: number[]): Promise<Recommendation> {
    this.recommendation = await this.client.getRecommendation(this.sessionId, bpms);
    return this.recommendation;
  }

  async confirmPractice(pm: number, bpm: number): Promise<void> {
    await this.client.logPractice(this.sessionId, pm, bpm);
  }

  async submitPost(pitchError: number, timingError: number): Promise<UnitOutcome> {
    const view = await this.refresh();
    const unit = view.open_unit;
    if (unit.pm === null || unit.p_pre === null) {
      throw new Error("no open practice unit; submit PRE and confirm a practice first");
    }
    const result = await this.client.submitManualPerformance(
      this.sessionId,
      "POST",
      pitchError,
      timingError,
    );
    this.lastOutcome = unitOutcome(
      { pitch: unit.p_pre!, timing: unit.t_pre! },
      unit.pm!,
      unit.bpm!,
      result,
    );
    this.recommendation = null;
    this.lastPre = null;
    return this.lastOutcome;
  }
}
