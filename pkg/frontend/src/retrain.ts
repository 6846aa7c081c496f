/** Re-Train tab: the feedback ledger with conflict highlighting, the
 * retrain button (disabled while contradictions stand or a retrain is in
 * flight), and the diff summary after a successful round. */

import type { ConflictPayload, FeedbackItemPayload, RetrainViewPayload } from "./api.js";

export interface RetrainHandlers {
  onDelete(id: number): void;
  onEdit(id: number, value: boolean): void;
  onConfirmOverride(id: number): void;
  onRetrain(): void;
}

function describe(item: FeedbackItemPayload): string {
  const target =
    item.target_class === null ? "neither" : item.target_class ? "true" : "false";
  switch (item.kind) {
    case "document_label":
      return `${item.doc_id} / ${item.variable} -> ${target}`;
    case "span_highlight":
      return `"${(item.phrase ?? []).join(" ")}" in ${item.doc_id} / ${item.variable} -> ${target}`;
    case "phrase_label":
      return `"${(item.phrase ?? []).join(" ")}" (${item.doc_ids?.length ?? 0} docs) / ${item.variable} -> ${target}`;
    default:
      return `"${(item.phrase ?? []).join(" ")}" / ${item.variable} -> neither class`;
  }
}

export function renderRetrain(
  container: HTMLElement,
  payload: RetrainViewPayload,
  inFlight: boolean,
  handlers: RetrainHandlers,
): void {
  container.textContent = "";

  const contradictions = payload.conflicts.filter((c) => c.kind === "contradiction");
  const overrides = payload.conflicts.filter((c) => c.kind === "override");
  const contradictionIds = new Set(contradictions.flatMap((c) => c.item_ids));
  const overrideIds = new Set(overrides.flatMap((c) => c.item_ids));

  const header = document.createElement("div");
  header.className = "retrain-header";
  const counter = document.createElement("span");
  counter.className = "pending-count";
  counter.textContent = `${payload.pending} feedback item(s) pending`;
  const retrainButton = document.createElement("button");
  retrainButton.className = "retrain-button";
  retrainButton.textContent = inFlight ? "retraining…" : "re-train";
  retrainButton.disabled = contradictions.length > 0 || inFlight;
  retrainButton.addEventListener("click", () => handlers.onRetrain());
  header.append(counter, retrainButton);
  container.appendChild(header);

  for (const conflict of payload.conflicts) {
    const note = document.createElement("p");
    note.className =
      conflict.kind === "contradiction" ? "conflict-note red" : "conflict-note yellow";
    note.textContent = conflict.explanation;
    container.appendChild(note);
  }

  const list = document.createElement("ul");
  list.className = "feedback-list";
  for (const item of payload.items) {
    const li = document.createElement("li");
    li.dataset.id = String(item.id);
    li.className = `feedback-item status-${item.status}`;
    if (item.status === "pending" && contradictionIds.has(item.id)) {
      li.classList.add("conflict-red");
    } else if (item.status === "pending" && overrideIds.has(item.id)) {
      li.classList.add("conflict-yellow");
    }
    const text = document.createElement("span");
    text.textContent = `#${item.id} [${item.status}] ${describe(item)}`;
    li.appendChild(text);
    if (item.status === "pending") {
      const del = document.createElement("button");
      del.textContent = "delete";
      del.className = "fb-delete";
      del.addEventListener("click", () => handlers.onDelete(item.id));
      li.appendChild(del);
      if (item.target_class !== null) {
        const flip = document.createElement("button");
        flip.textContent = `edit to ${item.target_class ? "false" : "true"}`;
        flip.className = "fb-edit";
        flip.addEventListener("click", () => handlers.onEdit(item.id, !item.target_class));
        li.appendChild(flip);
      }
      if (overrideIds.has(item.id)) {
        const confirm = document.createElement("button");
        confirm.textContent = "override earlier feedback";
        confirm.className = "fb-confirm-override";
        confirm.addEventListener("click", () => handlers.onConfirmOverride(item.id));
        li.appendChild(confirm);
      }
    }
    list.appendChild(li);
  }
  container.appendChild(list);

  if (payload.last_diff) {
    const diff = document.createElement("div");
    diff.className = "diff-summary";
    const changed = payload.last_diff.changes.length;
    diff.textContent =
      changed === 0
        ? "last retrain changed no predictions"
        : `last retrain changed ${changed} prediction(s)`;
    const detail = document.createElement("ul");
    for (const change of payload.last_diff.changes.slice(0, 20)) {
      const li = document.createElement("li");
      li.textContent = `${change.doc_id} / ${change.variable}: ${change.old_class} -> ${change.new_class}`;
      detail.appendChild(li);
    }
    diff.appendChild(detail);
    container.appendChild(diff);
  }
}
