/** The grid: documents x variables, the navigation hub. Cells shade
 * darker with confidence, show "?" for unknown and "*" once visited, and
 * carry bold+underline markers for cells changed by the last retrain. */

import type { GridPayload } from "./api.js";
import { classColor } from "./palette.js";

export interface GridHandlers {
  onCell(docId: string, variable: string): void;
  onSort(variable: string): void;
}

const GLYPHS = { true: "T", false: "F", unknown: "?" } as const;

export function renderGrid(
  container: HTMLElement,
  payload: GridPayload,
  active: { doc: string; variable: string },
  handlers: GridHandlers,
): void {
  container.textContent = "";
  const table = document.createElement("table");
  table.className = "grid";

  const head = table.createTHead().insertRow();
  head.appendChild(document.createElement("th")); // doc-id corner
  for (const variable of payload.variables) {
    const th = document.createElement("th");
    th.className = "grid-var";
    if (payload.sort.variable === variable && payload.sort.order !== "corpus") {
      th.classList.add("sorted");
    }
    const label = document.createElement("div");
    label.className = "grid-var-name";
    label.textContent = variable;
    const skew = payload.skew[variable];
    const total = skew.true + skew.false + skew.unknown || 1;
    const pct = (n: number) => ((100 * n) / total).toFixed(1);
    th.title = `true ${pct(skew.true)}% / false ${pct(skew.false)}% / unknown ${pct(skew.unknown)}%`;
    const bar = document.createElement("div");
    bar.className = "skew-bar";
    for (const [key, color] of [
      ["true", classColor("true", 0.99)],
      ["false", classColor("false", 0.01)],
      ["unknown", classColor("unknown", null)],
    ] as const) {
      const part = document.createElement("div");
      part.style.width = `${(100 * skew[key]) / total}%`;
      part.style.background = color;
      bar.appendChild(part);
    }
    th.append(label, bar);
    th.addEventListener("click", () => handlers.onSort(variable));
    head.appendChild(th);
  }

  const body = table.createTBody();
  for (const row of payload.rows) {
    const tr = body.insertRow();
    const th = document.createElement("th");
    th.className = "grid-doc";
    th.textContent = row.doc_id;
    tr.appendChild(th);
    for (const cell of row.cells) {
      const td = tr.insertCell();
      td.className = "cell";
      td.dataset.doc = row.doc_id;
      td.dataset.variable = cell.variable;
      td.style.background = classColor(cell.class, cell.probability);
      td.textContent = GLYPHS[cell.class] + (cell.visited ? "*" : "");
      if (cell.probability !== null) {
        td.title = `${Math.round(cell.probability * 100)}%`;
      }
      if (cell.changed_last_retrain) td.classList.add("changed");
      if (row.doc_id === active.doc && cell.variable === active.variable) {
        td.classList.add("active");
      }
      td.addEventListener("click", () => handlers.onCell(row.doc_id, cell.variable));
    }
  }
  container.appendChild(table);
}
