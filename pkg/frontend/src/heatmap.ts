// Policy-map heatmap: parses the service's CSV and renders a two-color grid
// over (timing error, pitch error), optionally overlaying the session's
// current error point. Cell colors map one-to-one to chosen_pm in the CSV.

export interface PolicyCell {
  tPre: number;
  pPre: number;
  chosenPm: number;
  uPitch: number;
  uTiming: number;
  sdPitch: number;
  sdTiming: number;
}

export interface HeatmapModel {
  resolution: number;
  tGrid: number[];
  pGrid: number[];
  // cells[pIndex][tIndex], matching the CSV's row order
  cells: PolicyCell[][];
}

export const PM_COLORS: Record<number, string> = {
  0: "#7b4fae", // pitch practice
  1: "#e8b820", // timing practice
};

const HEADER = "t_pre,p_pre,chosen_pm,u_pitch,u_timing,sd_pitch,sd_timing";

export function parsePolicyCsv(text: string): PolicyCell[] {
  const lines = text.trim().split("\n");
  if (lines[0] !== HEADER) {
    throw new Error(`unexpected policy CSV header: ${lines[0]}`);
  }
  return lines.slice(1).map((line, index) => {
    const parts = line.split(",");
    if (parts.length !== 7) {
      throw new Error(`row ${index + 2}: expected 7 cells, got ${parts.length}`);
    }
    const numbers = parts.map(Number);
    if (numbers.some(Number.isNaN)) {
      throw new Error(`row ${index + 2}: unparsable number in ${line}`);
    }
    return {
      tPre: numbers[0],
      pPre: numbers[1],
      chosenPm: numbers[2],
      uPitch: numbers[3],
      uTiming: numbers[4],
      sdPitch: numbers[5],
      sdTiming: numbers[6],
    };
  });
}

export function buildHeatmapModel(cells: PolicyCell[]): HeatmapModel {
  const resolution = Math.round(Math.sqrt(cells.length));
  if (resolution * resolution !== cells.length) {
    throw new Error(`cell count ${cells.length} is not a square grid`);
  }
  const rows: PolicyCell[][] = [];
  for (let p = 0; p < resolution; p++) {
    rows.push(cells.slice(p * resolution, (p + 1) * resolution));
  }
  const tGrid = rows[0].map((c) => c.tPre);
  const pGrid = rows.map((r) => r[0].pPre);
  // sanity: constant p within a row, t grid shared across rows
  for (const row of rows) {
    if (row.some((c) => c.pPre !== row[0].pPre)) {
      throw new Error("policy CSV rows are not grouped by p_pre");
    }
  }
  return { resolution, tGrid, pGrid, cells: rows };
}

export interface HeatmapOptions {
  currentPoint?: { tPre: number; pPre: number } | null;
  onHover?: (cell: PolicyCell | null) => void;
}

export function renderHeatmap(
  model: HeatmapModel,
  container: HTMLElement,
  options: HeatmapOptions = {},
): void {
  container.textContent = "";
  container.classList.add("heatmap");
  const grid = container.ownerDocument.createElement("div");
  grid.className = "heatmap-grid";
  grid.style.display = "grid";
  grid.style.gridTemplateColumns = `repeat(${model.resolution}, 1fr)`;
  // y axis: pitch error grows upward, so render rows in reverse p order
  for (let p = model.resolution - 1; p >= 0; p--) {
    for (let t = 0; t < model.resolution; t++) {
      const cell = model.cells[p][t];
      const el = container.ownerDocument.createElement("div");
      el.className = "heatmap-cell";
      el.dataset.pm = String(cell.chosenPm);
      el.dataset.t = String(cell.tPre);
      el.dataset.p = String(cell.pPre);
      el.style.backgroundColor = PM_COLORS[cell.chosenPm];
      el.title =
        `t=${cell.tPre.toFixed(2)} p=${cell.pPre.toFixed(2)}: ` +
        `${cell.chosenPm === 1 ? "timing" : "pitch"} ` +
        `(u_pitch=${cell.uPitch.toFixed(3)}, u_timing=${cell.uTiming.toFixed(3)})`;
      if (options.onHover) {
        el.addEventListener("mouseenter", () => options.onHover!(cell));
        el.addEventListener("mouseleave", () => options.onHover!(null));
      }
      grid.appendChild(el);
    }
  }
  container.appendChild(grid);

  if (options.currentPoint) {
    const marker = container.ownerDocument.createElement("div");
    marker.className = "heatmap-marker";
    marker.style.left = `${options.currentPoint.tPre * 100}%`;
    marker.style.bottom = `${options.currentPoint.pPre * 100}%`;
    marker.title = "current session errors";
    container.appendChild(marker);
  }
}
