/** Document pane: full report texts with boilerplate dimmed and indicator
 * terms highlighted by polarity. Clicking a keyword scrolls to its first
 * occurrence; keywords absent from the open document jitter instead. */

import type { DocumentPayload, SpanRef } from "./api.js";
import { polarityColor } from "./palette.js";

interface Segment {
  start: number;
  end: number;
  kind: "plain" | "boilerplate" | "indicator";
  term?: string;
  polarity?: boolean;
}

function segmentReport(
  text: string,
  boilerplate: { start: number; end: number }[],
  indicators: { term: string; polarity: boolean; spans: SpanRef[] }[],
  reportId: string,
): Segment[] {
  const marks: Segment[] = [];
  for (const span of boilerplate) {
    marks.push({ start: span.start, end: span.end, kind: "boilerplate" });
  }
  for (const indicator of indicators) {
    for (const span of indicator.spans) {
      if (span.report_id === reportId) {
        marks.push({
          start: span.start,
          end: span.end,
          kind: "indicator",
          term: indicator.term,
          polarity: indicator.polarity,
        });
      }
    }
  }
  marks.sort((a, b) => a.start - b.start || a.end - b.end);
  const segments: Segment[] = [];
  let cursor = 0;
  for (const mark of marks) {
    if (mark.start < cursor) continue; // overlaps resolve first-wins
    if (mark.start > cursor) segments.push({ start: cursor, end: mark.start, kind: "plain" });
    segments.push(mark);
    cursor = mark.end;
  }
  if (cursor < text.length) segments.push({ start: cursor, end: text.length, kind: "plain" });
  return segments;
}

export function renderDocument(container: HTMLElement, payload: DocumentPayload): void {
  container.textContent = "";

  const shortcuts = document.createElement("nav");
  shortcuts.className = "report-shortcuts";
  for (const report of payload.reports) {
    const link = document.createElement("a");
    link.href = `#report-${report.report_id}`;
    link.textContent = report.kind;
    link.className = "report-shortcut";
    link.addEventListener("click", (event) => {
      event.preventDefault();
      container
        .querySelector(`[data-report-section="${report.report_id}"]`)
        ?.scrollIntoView({ block: "start" });
    });
    shortcuts.appendChild(link);
  }
  container.appendChild(shortcuts);

  for (const report of payload.reports) {
    const section = document.createElement("section");
    section.dataset.reportSection = report.report_id;
    const heading = document.createElement("h3");
    heading.textContent = report.kind;
    const pre = document.createElement("pre");
    pre.className = "report-text";
    pre.dataset.reportId = report.report_id;
    const segments = segmentReport(report.text, report.boilerplate, payload.indicators, report.report_id);
    for (const segment of segments) {
      const span = document.createElement("span");
      span.dataset.start = String(segment.start);
      span.textContent = report.text.slice(segment.start, segment.end);
      if (segment.kind === "boilerplate") {
        span.className = "boilerplate";
      } else if (segment.kind === "indicator") {
        span.className = "indicator";
        span.dataset.term = segment.term ?? "";
        span.style.background = polarityColor(segment.polarity ?? true);
      }
      pre.appendChild(span);
    }
    section.append(heading, pre);
    container.appendChild(section);
  }
}

/** Scroll to the first occurrence of a term, or jitter the clicked
 * element when the term is absent from the open document. */
export function scrollToTerm(container: HTMLElement, term: string, clicked: HTMLElement): boolean {
  const target = [...container.querySelectorAll<HTMLElement>(".indicator")].find(
    (el) => el.dataset.term === term,
  );
  if (target) {
    target.scrollIntoView({ block: "center" });
    target.classList.remove("flash");
    void target.offsetWidth; // restart the animation
    target.classList.add("flash");
    return true;
  }
  clicked.classList.remove("jitter");
  void clicked.offsetWidth;
  clicked.classList.add("jitter");
  return false;
}

/** Map the current DOM selection to (report_id, start, end) text offsets.
 * Returns null when the selection is empty or outside a report. */
export function selectionSpan(doc: Document = document): SpanRef | null {
  const selection = doc.getSelection();
  if (!selection || selection.isCollapsed || selection.rangeCount === 0) return null;
  const range = selection.getRangeAt(0);

  const resolve = (node: Node, offset: number): { reportId: string; position: number } | null => {
    let element: HTMLElement | null =
      node.nodeType === Node.TEXT_NODE ? (node.parentElement as HTMLElement) : (node as HTMLElement);
    while (element && element.dataset?.start === undefined) element = element.parentElement;
    if (!element) return null;
    const pre = element.closest<HTMLElement>("[data-report-id]");
    if (!pre) return null;
    return {
      reportId: pre.dataset.reportId as string,
      position: Number(element.dataset.start) + offset,
    };
  };

  const from = resolve(range.startContainer, range.startOffset);
  const to = resolve(range.endContainer, range.endOffset);
  if (!from || !to || from.reportId !== to.reportId) return null;
  const start = Math.min(from.position, to.position);
  const end = Math.max(from.position, to.position);
  if (start === end) return null;
  return { report_id: from.reportId, start, end };
}
