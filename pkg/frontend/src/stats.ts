/** Statistics pane below the grid: histogram of true/false/unknown over
 * the active (possibly filtered) documents, plus the top indicator terms
 * for each class. */

import type { StatsPayload } from "./api.js";
import { polarityColor, unknownColor } from "./palette.js";

export interface StatsHandlers {
  onTermClick(term: string, element: HTMLElement): void;
}

export function renderStats(
  container: HTMLElement,
  payload: StatsPayload,
  handlers: StatsHandlers,
): void {
  container.textContent = "";

  const heading = document.createElement("h3");
  heading.textContent = `${payload.variable} — ${payload.n_documents} documents`;
  container.appendChild(heading);

  const histogram = document.createElement("div");
  histogram.className = "histogram";
  const total = payload.n_documents || 1;
  const entries: Array<[string, number, string]> = [
    ["true", payload.histogram.true, polarityColor(true)],
    ["false", payload.histogram.false, polarityColor(false)],
    ["unknown", payload.histogram.unknown, unknownColor()],
  ];
  for (const [label, count, color] of entries) {
    const row = document.createElement("div");
    row.className = "histogram-row";
    row.title = `${label}: ${count} documents`;
    const name = document.createElement("span");
    name.className = "histogram-label";
    name.textContent = label;
    const bar = document.createElement("div");
    bar.className = "histogram-bar";
    bar.dataset.class = label;
    bar.style.width = `${(100 * count) / total}%`;
    bar.style.background = color;
    const value = document.createElement("span");
    value.textContent = String(count);
    row.append(name, bar, value);
    histogram.appendChild(row);
  }
  container.appendChild(histogram);

  const lists = document.createElement("div");
  lists.className = "top-terms";
  for (const [title, terms, polarity] of [
    ["top true terms", payload.top_true, true],
    ["top false terms", payload.top_false, false],
  ] as const) {
    const column = document.createElement("div");
    const h4 = document.createElement("h4");
    h4.textContent = title;
    const ul = document.createElement("ul");
    for (const term of terms) {
      const li = document.createElement("li");
      li.textContent = term.term;
      li.className = "term";
      li.style.color = polarityColor(polarity);
      li.title = `weight ${term.weight.toFixed(3)}`;
      li.addEventListener("click", () => handlers.onTermClick(term.term, li));
      ul.appendChild(li);
    }
    column.append(h4, ul);
    lists.appendChild(column);
  }
  container.appendChild(lists);
}
