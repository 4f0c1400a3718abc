// Training jobs: start, poll until terminal, and plot the best-so-far curve
// from the stored BO trace CSV.

import { ApiClient } from "./api.js";
import type { JobStatus } from "./types.js";

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
  onUpdate?: (status: JobStatus) => void;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export async function pollJob(
  client: ApiClient,
  jobId: string,
  options: PollOptions = {},
): Promise<JobStatus> {
  const interval = options.intervalMs ?? 1000;
  const timeout = options.timeoutMs ?? 15 * 60 * 1000;
  const sleep = options.sleep ?? defaultSleep;
  const started = Date.now();
  for (;;) {
    const status = await client.getJob(jobId);
    options.onUpdate?.(status);
    if (status.state === "DONE" || status.state === "FAILED") {
      return status;
    }
    if (Date.now() - started > timeout) {
      throw new Error(`job ${jobId} still ${status.state} after ${timeout} ms`);
    }
    await sleep(interval);
  }
}

export function parseTraceCsv(text: string): Array<{ iter: number; objective: number; best: number }> {
  const lines = text.trim().split("\n");
  if (lines[0] !== "iter,a,u_mu,objective,best") {
    throw new Error(`unexpected trace header: ${lines[0]}`);
  }
  return lines.slice(1).map((line) => {
    const [iter, , , objective, best] = line.split(",").map(Number);
    return { iter, objective, best };
  });
}

// Polyline path for an SVG of the given size; x spans the iterations, y the
// [min, max] of the values with a small margin.
export function sparklinePath(values: number[], width: number, height: number): string {
  if (values.length === 0) {
    return "";
  }
  if (values.length === 1) {
    return `M0,${(height / 2).toFixed(1)} L${width},${(height / 2).toFixed(1)}`;
  }
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const margin = 0.08;
  return values
    .map((v, i) => {
      const x = (i / (values.length - 1)) * width;
      const y = height * (1 - margin - (1 - 2 * margin) * ((v - lo) / span));
      return `${i === 0 ? "M" : "L"}${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}
