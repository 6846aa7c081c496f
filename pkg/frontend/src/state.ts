/** Client-side view state: which cell is active, which tab is open, and
 * the live word-tree filter. Pure presentation bookkeeping; everything
 * model-related stays on the server. */

export type Tab = "document" | "wordtree" | "retrain";

export interface ViewState {
  activeDoc: string;
  activeVariable: string;
  tab: Tab;
  pendingCount: number;
  filterQuery: string | null;
  drill: string[]; // applied drill steps, e.g. ["b:hot"]
  retrainInFlight: boolean;
  hasContradiction: boolean;
}

export class Store {
  private listeners: Array<(state: ViewState) => void> = [];

  constructor(public state: ViewState) {}

  update(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  subscribe(listener: (state: ViewState) => void): void {
    this.listeners.push(listener);
  }
}
