// Practice console: wires the session flow, policy explorer, and training
// dashboard to the DOM. Served by the practice service (or any static host
// pointed at the same origin).

import { ApiClient, ApiError } from "./api.js";
import { buildHeatmapModel, parsePolicyCsv, renderHeatmap } from "./heatmap.js";
import { SessionFlow, stepFromView } from "./session.js";
import { pollJob, sparklinePath } from "./training.js";
import { PM_LABEL, type PracticeMode, type Recommendation } from "./types.js";

const client = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function showBanner(message: string, kind: "error" | "info" = "error") {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message;
  banner.className = `banner ${kind}`;
  banner.hidden = false;
}

function clearBanner() {
  el<HTMLDivElement>("banner").hidden = true;
}

async function guard<T>(work: () => Promise<T>): Promise<T | undefined> {
  try {
    clearBanner();
    return await work();
  } catch (error) {
    if (error instanceof ApiError) {
      showBanner(`${error.code}: ${error.message}`);
    } else {
      showBanner(`service unreachable: ${String(error)}`);
    }
    return undefined;
  }
}

// -- session flow ------------------------------------------------------------

let flow: SessionFlow | null = null;

function fmt(x: number): string {
  return x.toFixed(3);
}

async function refreshSessionPanel() {
  if (!flow) return;
  const view = await guard(() => flow!.refresh());
  if (!view) return;
  el("session-id").textContent = view.session_id.slice(0, 8);
  el("session-phase").textContent = stepFromView(view);
  const unit = view.open_unit;
  el("session-state").textContent =
    unit.p_pre === null
      ? "no open unit"
      : `pre errors: pitch ${fmt(unit.p_pre)}, timing ${fmt(unit.t_pre!)}` +
        (unit.pm !== null ? `; practicing ${PM_LABEL[unit.pm as PracticeMode]} at ${unit.bpm} BPM` : "");
  el<HTMLButtonElement>("btn-pre").disabled = view.phase !== "AWAITING_PRE";
  el<HTMLButtonElement>("btn-recommend").disabled = view.phase === "AWAITING_PRE";
  el<HTMLButtonElement>("btn-practice").disabled = view.phase !== "AWAITING_PRACTICE";
  el<HTMLButtonElement>("btn-post").disabled = view.phase !== "AWAITING_POST";
  const tuples = await guard(() => client.datasetSize());
  if (tuples) el("dataset-size").textContent = String(tuples.n_tuples);
}

function renderRecommendation(rec: Recommendation) {
  const card = el("recommendation");
  card.hidden = false;
  el("rec-choice").textContent =
    `${PM_LABEL[rec.pm]} practice at ${rec.bpm} BPM` + (rec.tie ? " (tie, pitch preferred)" : "");
  const list = el("rec-alternatives");
  list.textContent = "";
  for (const alt of rec.alternatives) {
    const li = document.createElement("li");
    li.textContent = `${PM_LABEL[alt.pm]} @ ${alt.bpm} BPM: utility ${fmt(alt.mean)} +- ${fmt(alt.sd)}`;
    list.appendChild(li);
  }
  el<HTMLInputElement>("practice-pm").value = String(rec.pm);
  el<HTMLInputElement>("practice-bpm").value = String(rec.bpm);
}

function wireSessionPanel() {
  el("btn-create-session").addEventListener("click", async () => {
    const learner = el<HTMLInputElement>("learner-id").value || "learner";
    const piece = el<HTMLInputElement>("piece-id").value || "piece";
    const bpm = Number(el<HTMLInputElement>("session-bpm").value) || 80;
    const created = await guard(() => client.createSession(learner, piece, bpm));
    if (!created) return;
    flow = new SessionFlow(client, created.session_id);
    el("session-panel").hidden = false;
    await refreshSessionPanel();
  });

  el("btn-pre").addEventListener("click", async () => {
    if (!flow) return;
    const pitch = Number(el<HTMLInputElement>("pre-pitch").value);
    const timing = Number(el<HTMLInputElement>("pre-timing").value);
    await guard(() => flow!.submitPre(pitch, timing));
    await refreshSessionPanel();
    await refreshPolicyPanel();
  });

  el("btn-recommend").addEventListener("click", async () => {
    if (!flow) return;
    const rec = await guard(() => flow!.fetchRecommendation());
    if (rec) renderRecommendation(rec);
  });

  el("btn-practice").addEventListener("click", async () => {
    if (!flow) return;
    const pm = Number(el<HTMLInputElement>("practice-pm").value);
    const bpm = Number(el<HTMLInputElement>("practice-bpm").value);
    await guard(() => flow!.confirmPractice(pm, bpm));
    el("practice-instructions").textContent =
      pm === 1
        ? "Timing practice: play every note on a single pitch, following the rhythm with the metronome."
        : "Pitch practice: play the written notes in order; ignore the rhythm.";
    await refreshSessionPanel();
  });

  el("btn-post").addEventListener("click", async () => {
    if (!flow) return;
    const pitch = Number(el<HTMLInputElement>("post-pitch").value);
    const timing = Number(el<HTMLInputElement>("post-timing").value);
    const outcome = await guard(() => flow!.submitPost(pitch, timing));
    if (outcome) {
      el("unit-outcome").hidden = false;
      el("unit-outcome").textContent =
        `Unit complete (${PM_LABEL[outcome.pm as PracticeMode]} @ ${outcome.bpm} BPM): ` +
        `pitch ${fmt(outcome.pPre)} -> ${fmt(outcome.pPost)} ` +
        `(improvement ${fmt(outcome.pitchImprovement)}), ` +
        `timing ${fmt(outcome.tPre)} -> ${fmt(outcome.tPost)} ` +
        `(improvement ${fmt(outcome.timingImprovement)})`;
    }
    await refreshSessionPanel();
  });
}

// -- policy explorer -----------------------------------------------------------

async function refreshPolicyPanel() {
  const bpm = Number(el<HTMLInputElement>("map-bpm").value);
  el("map-bpm-label").textContent = `${bpm} BPM`;
  const csv = await guard(() => client.getPolicyMapCsv(bpm, 41));
  if (!csv) return;
  const model = buildHeatmapModel(parsePolicyCsv(csv));
  const view = flow ? await guard(() => flow!.refresh()) : undefined;
  const unit = view?.open_unit;
  renderHeatmap(model, el("heatmap-container"), {
    currentPoint:
      unit && unit.p_pre !== null ? { tPre: unit.t_pre!, pPre: unit.p_pre } : null,
    onHover: (cell) => {
      el("map-readout").textContent = cell
        ? `t=${fmt(cell.tPre)} p=${fmt(cell.pPre)}: utilities pitch ${fmt(cell.uPitch)} / timing ${fmt(cell.uTiming)}`
        : "";
    },
  });
}

function wirePolicyPanel() {
  el("map-bpm").addEventListener("change", refreshPolicyPanel);
  el("btn-refresh-map").addEventListener("click", refreshPolicyPanel);
}

// -- training dashboard ---------------------------------------------------------

function wireTrainingPanel() {
  el("btn-train").addEventListener("click", async () => {
    const dataset = el<HTMLInputElement>("train-dataset").value || "recorded";
    const family = el<HTMLSelectElement>("train-family").value;
    const budget = Number(el<HTMLInputElement>("train-budget").value) || 50;
    const seed = Number(el<HTMLInputElement>("train-seed").value) || 0;
    const started = await guard(() => client.startTraining(dataset, family, budget, seed));
    if (!started) return;
    el("job-status").textContent = `job ${started.job_id.slice(0, 8)} queued`;
    const bestSoFar: number[] = [];
    const status = await guard(() =>
      pollJob(client, started.job_id, {
        intervalMs: 1500,
        onUpdate: (s) => {
          el("job-status").textContent = `job ${s.job_id.slice(0, 8)}: ${s.state} ${(s.progress * 100).toFixed(0)}%`;
          el<HTMLProgressElement>("job-progress").value = s.progress;
          bestSoFar.push(s.progress);
        },
      }),
    );
    if (!status) return;
    if (status.state === "FAILED") {
      showBanner(`training failed: ${status.message}`);
      return;
    }
    el("job-status").textContent = `job done; model ${status.result_ref?.slice(0, 8)} active`;
    const models = await guard(() => client.listModels());
    if (models) {
      el("active-model").textContent = models.active ? models.active.slice(0, 8) : "none";
      const meta = models.models.find((m) => m.model_id === models.active) as
        | { trace_csv?: string }
        | undefined;
      if (meta?.trace_csv) {
        const { parseTraceCsv } = await import("./training.js");
        const curve = parseTraceCsv(meta.trace_csv).map((row) => row.best);
        el<SVGPathElement & HTMLElement>("trace-path").setAttribute(
          "d",
          sparklinePath(curve, 360, 80),
        );
      }
    }
    await refreshPolicyPanel();
  });
}

async function start() {
  wireSessionPanel();
  wirePolicyPanel();
  wireTrainingPanel();
  const health = await guard(() => client.health());
  if (health) {
    el("backend-label").textContent = `service ok (${health.gp_backend} kernels)`;
    const models = await guard(() => client.listModels());
    if (models?.active) {
      el("active-model").textContent = models.active.slice(0, 8);
      await refreshPolicyPanel();
    }
  }
}

if (typeof document !== "undefined" && document.getElementById("banner")) {
  start();
}
