/** Typed client for the /api endpoints. The UI never computes classes,
 * probabilities, conflicts, or tree structure itself; everything renders
 * from these payloads. */

import type { CellClass } from "./palette.js";

export interface GridCell {
  variable: string;
  class: CellClass;
  probability: number | null;
  visited: boolean;
  changed_last_retrain: boolean;
}

export interface GridRow {
  doc_id: string;
  cells: GridCell[];
}

export interface Skew {
  true: number;
  false: number;
  unknown: number;
}

export interface GridPayload {
  variables: string[];
  skew: Record<string, Skew>;
  rows: GridRow[];
  sort: { variable: string | null; order: string };
  filter: { applied: boolean };
}

export interface SpanRef {
  report_id: string;
  start: number;
  end: number;
}

export interface ReportPayload {
  report_id: string;
  kind: string;
  text: string;
  boilerplate: { start: number; end: number }[];
}

export interface IndicatorPayload {
  term: string;
  weight: number;
  polarity: boolean;
  spans: SpanRef[];
  first: SpanRef;
}

export interface TopTermPayload {
  term: string;
  weight: number;
  polarity: boolean;
  present: boolean;
}

export interface DocumentPayload {
  doc_id: string;
  variable: string;
  reports: ReportPayload[];
  indicators: IndicatorPayload[];
  top_terms: TopTermPayload[];
}

export interface StatsPayload {
  variable: string;
  histogram: Skew;
  n_documents: number;
  top_true: { term: string; weight: number }[];
  top_false: { term: string; weight: number }[];
}

export interface TreeNodePayload {
  token: string;
  weight: number;
  docs: number;
  gradient: { t: number; f: number; u: number; nt: number; nf: number; nu: number };
  children: TreeNodePayload[];
}

export interface TreePayload {
  root: string[];
  coverage: { docs: number; percent: number };
  forward: TreeNodePayload;
  backward: TreeNodePayload;
}

export interface FeedbackItemPayload {
  id: number;
  kind: string;
  variable: string;
  target_class: boolean | null;
  doc_id: string | null;
  span: SpanRef | null;
  phrase: string[] | null;
  doc_ids: string[] | null;
  status: string;
  confirmed_override: boolean;
}

export interface ConflictPayload {
  kind: "contradiction" | "override";
  variable: string;
  doc_id: string;
  item_ids: number[];
  explanation: string;
}

export interface FeedbackResponse {
  item: FeedbackItemPayload;
  conflicts: ConflictPayload[];
}

export interface RetrainViewPayload {
  items: FeedbackItemPayload[];
  pending: number;
  conflicts: ConflictPayload[];
  last_diff: DiffPayload | null;
}

export interface DiffCellPayload {
  doc_id: string;
  variable: string;
  old_class: CellClass;
  new_class: CellClass;
}

export interface DiffPayload {
  changes: DiffCellPayload[];
  retrained_at: number;
  feedback_count: number;
}

export interface StatePayload {
  variables: string[];
  n_documents: number;
  active: { doc_id: string; variable: string };
  filter: { query: string | null; root: string[]; doc_ids: string[] } | null;
  pending_feedback: number;
  conflicts: ConflictPayload[];
}

export type FeedbackBody =
  | { kind: "document_label"; doc_id: string; variable: string; target_class: boolean }
  | { kind: "span_highlight"; doc_id: string; variable: string; target_class: boolean; span: SpanRef }
  | { kind: "phrase_label"; variable: string; target_class: boolean }
  | { kind: "neither_term"; variable: string; phrase: string };

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(private fetchImpl: FetchLike = (i, init) => fetch(i, init)) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(path, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body.code ?? "error", body.message ?? "request failed");
    }
    return body as T;
  }

  state(): Promise<StatePayload> {
    return this.request("/api/state");
  }

  grid(sort?: { variable: string; order: string }): Promise<GridPayload> {
    const params = new URLSearchParams();
    if (sort) params.set("variable_sort", `${sort.variable}:${sort.order}`);
    const qs = params.toString();
    return this.request(`/api/grid${qs ? "?" + qs : ""}`);
  }

  document(docId: string, variable: string): Promise<DocumentPayload> {
    return this.request(`/api/document/${encodeURIComponent(docId)}?variable=${encodeURIComponent(variable)}`);
  }

  stats(variable: string): Promise<StatsPayload> {
    return this.request(`/api/stats?variable=${encodeURIComponent(variable)}`);
  }

  wordtree(query: string, drill: string[], variable: string): Promise<TreePayload> {
    const params = new URLSearchParams({ q: query, variable });
    for (const step of drill) params.append("drill", step);
    return this.request(`/api/wordtree?${params.toString()}`);
  }

  clearFilter(): Promise<unknown> {
    return this.request("/api/filter", { method: "DELETE" });
  }

  sendFeedback(body: FeedbackBody): Promise<FeedbackResponse> {
    return this.request("/api/feedback", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  resolveFeedback(
    id: number,
    action: "delete" | "confirm_override" | "edit",
    targetClass?: boolean,
  ): Promise<FeedbackResponse> {
    return this.request(`/api/feedback/${id}/resolve`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ action, target_class: targetClass }),
    });
  }

  retrainView(): Promise<RetrainViewPayload> {
    return this.request("/api/retrain");
  }

  retrain(): Promise<DiffPayload> {
    return this.request("/api/retrain", { method: "POST" });
  }

  visit(docId: string, variable: string): Promise<unknown> {
    return this.request("/api/visit", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ doc_id: docId, variable }),
    });
  }

  next(): Promise<{ doc_id: string; variable: string }> {
    return this.request("/api/next");
  }
}
