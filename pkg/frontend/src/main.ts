/** Application wiring: coordinated grid / stats / document / word tree /
 * retrain views around a single server session. Activating a cell updates
 * the document pane, statistics, and feedback bar together; drilling the
 * word tree narrows the grid to the server's filter. */

import { ApiClient, ApiError, type SpanRef } from "./api.js";
import { renderDocument, scrollToTerm, selectionSpan } from "./document.js";
import { renderFeedbackBar, showContextMenu } from "./feedback.js";
import { renderGrid } from "./grid.js";
import { renderRetrain } from "./retrain.js";
import { renderStats } from "./stats.js";
import { Store, type Tab } from "./state.js";
import { renderWordTree } from "./wordtree.js";

const SORT_CYCLE = ["corpus", "prob_asc", "prob_desc"] as const;

export class App {
  store!: Store;
  private variables: string[] = [];
  private sortOrder: Record<string, string> = {};
  private currentSelection: SpanRef | null = null;
  private panes!: Record<string, HTMLElement>;

  constructor(
    private root: HTMLElement,
    private client: ApiClient,
  ) {}

  async boot(): Promise<void> {
    this.root.innerHTML = `
      <div id="feedback-bar"></div>
      <div id="error-banner" hidden></div>
      <div id="filter-chip" hidden></div>
      <main class="layout">
        <section class="left">
          <div id="grid"></div>
          <div id="stats"></div>
        </section>
        <section class="right">
          <nav id="tabs"></nav>
          <div id="wordtree-controls" hidden>
            <input id="wt-query" placeholder="search a word or phrase" />
            <button id="wt-search">search</button>
            <button id="wt-fullscreen">full screen</button>
          </div>
          <div class="panes">
            <div id="wordtree-pane" hidden></div>
            <div id="document-pane"></div>
            <div id="retrain-pane" hidden></div>
          </div>
        </section>
      </main>`;
    this.panes = Object.fromEntries(
      ["feedback-bar", "error-banner", "filter-chip", "grid", "stats", "tabs",
        "wordtree-controls", "wordtree-pane", "document-pane", "retrain-pane"].map(
        (id) => [id, this.root.querySelector<HTMLElement>(`#${id}`)!],
      ),
    );

    const state = await this.client.state();
    this.variables = state.variables;
    this.store = new Store({
      activeDoc: state.active.doc_id,
      activeVariable: state.active.variable,
      tab: "document",
      pendingCount: state.pending_feedback,
      filterQuery: state.filter?.query ?? null,
      drill: [],
      retrainInFlight: false,
      hasContradiction: state.conflicts.some((c) => c.kind === "contradiction"),
    });

    this.renderTabs();
    this.wireWordTreeControls();
    this.wireSelectionTracking();
    await this.refreshAll();
  }

  private async guard<T>(work: () => Promise<T>): Promise<T | undefined> {
    try {
      this.panes["error-banner"].hidden = true;
      return await work();
    } catch (error) {
      const banner = this.panes["error-banner"];
      banner.hidden = false;
      banner.textContent =
        error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
      return undefined;
    }
  }

  private renderTabs(): void {
    const tabs = this.panes["tabs"];
    tabs.textContent = "";
    const entries: Array<[Tab, string]> = [
      ["document", "Document"],
      ["wordtree", "WordTree"],
      ["retrain", "Re-Train"],
    ];
    for (const [tab, label] of entries) {
      const button = document.createElement("button");
      button.className = "tab";
      button.dataset.tab = tab;
      if (this.store.state.tab === tab) button.classList.add("active-tab");
      button.textContent = label;
      if (tab === "retrain" && this.store.state.pendingCount > 0) {
        const badge = document.createElement("span");
        badge.className = "badge";
        badge.textContent = String(this.store.state.pendingCount);
        button.appendChild(badge);
      }
      button.addEventListener("click", () => this.switchTab(tab));
      tabs.appendChild(button);
    }
    this.panes["document-pane"].hidden = this.store.state.tab === "retrain";
    this.panes["wordtree-pane"].hidden = this.store.state.tab !== "wordtree";
    this.panes["wordtree-controls"].hidden = this.store.state.tab !== "wordtree";
    this.panes["retrain-pane"].hidden = this.store.state.tab !== "retrain";
  }

  private async switchTab(tab: Tab): Promise<void> {
    this.store.update({ tab });
    this.renderTabs();
    if (tab === "retrain") await this.refreshRetrain();
    this.renderFeedback();
  }

  private wireWordTreeControls(): void {
    const controls = this.panes["wordtree-controls"];
    const input = controls.querySelector<HTMLInputElement>("#wt-query")!;
    controls.querySelector("#wt-search")!.addEventListener("click", () => {
      void this.searchTree(input.value);
    });
    input.addEventListener("keydown", (event) => {
      if ((event as KeyboardEvent).key === "Enter") void this.searchTree(input.value);
    });
    controls.querySelector("#wt-fullscreen")!.addEventListener("click", () => {
      this.root.classList.toggle("wordtree-fullscreen");
    });
  }

  private wireSelectionTracking(): void {
    this.panes["document-pane"].addEventListener("mouseup", () => {
      this.currentSelection = selectionSpan();
      this.renderFeedback();
    });
    this.panes["document-pane"].addEventListener("contextmenu", (event) => {
      event.preventDefault();
      const mouse = event as MouseEvent;
      this.currentSelection = selectionSpan() ?? this.currentSelection;
      showContextMenu(mouse.clientX, mouse.clientY, this.currentSelection, {
        onDocumentLabel: (value) => void this.sendDocumentLabel(value),
        onSpanLabel: (span, value) => void this.sendSpanLabel(span, value),
      });
    });
  }

  // -- data refresh ----------------------------------------------------

  async refreshAll(): Promise<void> {
    await Promise.all([this.refreshGrid(), this.refreshStats(), this.refreshDocument()]);
    this.renderFeedback();
    this.renderFilterChip();
    this.renderTabs();
  }

  async refreshGrid(): Promise<void> {
    const { activeVariable } = this.store.state;
    const order = this.sortOrder[activeVariable];
    const payload = await this.guard(() =>
      this.client.grid(order && order !== "corpus" ? { variable: activeVariable, order } : undefined),
    );
    if (!payload) return;
    renderGrid(
      this.panes["grid"],
      payload,
      { doc: this.store.state.activeDoc, variable: this.store.state.activeVariable },
      {
        onCell: (docId, variable) => void this.activateCell(docId, variable),
        onSort: (variable) => void this.cycleSort(variable),
      },
    );
  }

  async refreshStats(): Promise<void> {
    const payload = await this.guard(() => this.client.stats(this.store.state.activeVariable));
    if (!payload) return;
    renderStats(this.panes["stats"], payload, {
      onTermClick: (term, element) => {
        scrollToTerm(this.panes["document-pane"], term, element);
      },
    });
  }

  async refreshDocument(): Promise<void> {
    const { activeDoc, activeVariable } = this.store.state;
    const payload = await this.guard(() => this.client.document(activeDoc, activeVariable));
    if (!payload) return;
    renderDocument(this.panes["document-pane"], payload);
  }

  async refreshRetrain(): Promise<void> {
    const payload = await this.guard(() => this.client.retrainView());
    if (!payload) return;
    this.store.update({
      pendingCount: payload.pending,
      hasContradiction: payload.conflicts.some((c) => c.kind === "contradiction"),
    });
    renderRetrain(this.panes["retrain-pane"], payload, this.store.state.retrainInFlight, {
      onDelete: (id) => void this.resolve(id, "delete"),
      onEdit: (id, value) => void this.resolve(id, "edit", value),
      onConfirmOverride: (id) => void this.resolve(id, "confirm_override"),
      onRetrain: () => void this.runRetrain(),
    });
    this.renderTabs();
  }

  private renderFeedback(): void {
    renderFeedbackBar(
      this.panes["feedback-bar"],
      this.variables,
      this.store.state,
      this.currentSelection,
      {
        onVariableChange: (variable) =>
          void this.activateCell(this.store.state.activeDoc, variable, { visit: false }),
        onDocumentLabel: (value) => void this.sendDocumentLabel(value),
        onSpanLabel: (span, value) => void this.sendSpanLabel(span, value),
        onPhraseLabel: (value) => void this.sendPhraseLabel(value),
        onNeither: (phrase) => void this.sendNeither(phrase),
      },
    );
  }

  private renderFilterChip(): void {
    const chip = this.panes["filter-chip"];
    const { filterQuery } = this.store.state;
    if (!filterQuery) {
      chip.hidden = true;
      chip.textContent = "";
      return;
    }
    chip.hidden = false;
    chip.textContent = `filter: ${filterQuery} `;
    const dismiss = document.createElement("button");
    dismiss.className = "chip-dismiss";
    dismiss.textContent = "x";
    dismiss.addEventListener("click", () => void this.clearFilter());
    chip.appendChild(dismiss);
  }

  // -- interactions ------------------------------------------------------

  async activateCell(docId: string, variable: string, opts = { visit: true }): Promise<void> {
    if (opts.visit) await this.guard(() => this.client.visit(docId, variable));
    this.store.update({ activeDoc: docId, activeVariable: variable });
    await this.refreshAll();
  }

  async cycleSort(variable: string): Promise<void> {
    const current = this.sortOrder[variable] ?? "corpus";
    const next = SORT_CYCLE[(SORT_CYCLE.indexOf(current as never) + 1) % SORT_CYCLE.length];
    this.sortOrder[variable] = next;
    this.store.update({ activeVariable: variable });
    await this.refreshAll();
  }

  async searchTree(query: string): Promise<void> {
    if (!query.trim()) return;
    this.store.update({ filterQuery: query, drill: [] });
    await this.refreshTree();
    await Promise.all([this.refreshGrid(), this.refreshStats()]);
    this.renderFilterChip();
  }

  private async refreshTree(): Promise<void> {
    const { filterQuery, drill, activeVariable } = this.store.state;
    if (!filterQuery) return;
    const payload = await this.guard(() =>
      this.client.wordtree(filterQuery, drill, activeVariable),
    );
    if (!payload) return;
    renderWordTree(this.panes["wordtree-pane"], payload, drill.length, {
      onDrill: (direction, token) => void this.drill(direction, token),
      onRevert: () => void this.revert(),
    });
    this.renderFeedback();
  }

  async drill(direction: "forward" | "backward", token: string): Promise<void> {
    const step = `${direction === "forward" ? "f" : "b"}:${token}`;
    this.store.update({ drill: [...this.store.state.drill, step] });
    await this.refreshTree();
    await Promise.all([this.refreshGrid(), this.refreshStats()]);
  }

  async revert(): Promise<void> {
    const drill = this.store.state.drill.slice(0, -1);
    this.store.update({ drill });
    await this.refreshTree();
    await Promise.all([this.refreshGrid(), this.refreshStats()]);
  }

  async clearFilter(): Promise<void> {
    await this.guard(() => this.client.clearFilter());
    this.store.update({ filterQuery: null, drill: [] });
    this.panes["wordtree-pane"].textContent = "";
    await this.refreshAll();
  }

  // -- feedback actions ---------------------------------------------------

  private async afterFeedback(conflictCount: number): Promise<void> {
    this.store.update({
      pendingCount: this.store.state.pendingCount + 1,
      hasContradiction: conflictCount > 0,
    });
    this.renderTabs();
    if (this.store.state.tab === "retrain") await this.refreshRetrain();
  }

  async sendDocumentLabel(value: boolean): Promise<void> {
    const { activeDoc, activeVariable } = this.store.state;
    const response = await this.guard(() =>
      this.client.sendFeedback({
        kind: "document_label",
        doc_id: activeDoc,
        variable: activeVariable,
        target_class: value,
      }),
    );
    if (response) {
      await this.afterFeedback(
        response.conflicts.filter((c) => c.kind === "contradiction").length,
      );
    }
  }

  async sendSpanLabel(span: SpanRef, value: boolean): Promise<void> {
    const { activeDoc, activeVariable } = this.store.state;
    const response = await this.guard(() =>
      this.client.sendFeedback({
        kind: "span_highlight",
        doc_id: activeDoc,
        variable: activeVariable,
        target_class: value,
        span,
      }),
    );
    if (response) {
      this.currentSelection = null;
      this.renderFeedback();
      await this.afterFeedback(
        response.conflicts.filter((c) => c.kind === "contradiction").length,
      );
    }
  }

  async sendPhraseLabel(value: boolean): Promise<void> {
    const response = await this.guard(() =>
      this.client.sendFeedback({
        kind: "phrase_label",
        variable: this.store.state.activeVariable,
        target_class: value,
      }),
    );
    if (response) {
      await this.afterFeedback(
        response.conflicts.filter((c) => c.kind === "contradiction").length,
      );
    }
  }

  async sendNeither(phrase: string): Promise<void> {
    const response = await this.guard(() =>
      this.client.sendFeedback({
        kind: "neither_term",
        variable: this.store.state.activeVariable,
        phrase,
      }),
    );
    if (response) await this.afterFeedback(0);
  }

  async resolve(id: number, action: "delete" | "confirm_override" | "edit", value?: boolean): Promise<void> {
    const response = await this.guard(() => this.client.resolveFeedback(id, action, value));
    if (response) await this.refreshRetrain();
  }

  async runRetrain(): Promise<void> {
    if (this.store.state.retrainInFlight) return;
    this.store.update({ retrainInFlight: true });
    await this.refreshRetrain();
    const diff = await this.guard(() => this.client.retrain());
    this.store.update({ retrainInFlight: false });
    await this.refreshRetrain();
    if (diff) await this.refreshAll();
  }
}

export async function bootApp(root: HTMLElement, client: ApiClient): Promise<App> {
  const app = new App(root, client);
  await app.boot();
  return app;
}

// Auto-boot when served as a page; tests construct the app themselves.
if (typeof document !== "undefined") {
  const mount = document.getElementById("app");
  if (mount) void bootApp(mount, new ApiClient());
}
