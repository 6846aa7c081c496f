/** The yellow feedback bar and the right-click context menu. The bar
 * pre-selects the active variable, offers true/false document labels,
 * span labels whenever a text selection exists, phrase labels when the
 * word tree is open, and the neither-class exclusion. */

import type { SpanRef } from "./api.js";
import type { ViewState } from "./state.js";

export interface FeedbackHandlers {
  onVariableChange(variable: string): void;
  onDocumentLabel(value: boolean): void;
  onSpanLabel(span: SpanRef, value: boolean): void;
  onPhraseLabel(value: boolean): void;
  onNeither(phrase: string): void;
}

function button(label: string, className: string, onClick: () => void): HTMLButtonElement {
  const el = document.createElement("button");
  el.textContent = label;
  el.className = className;
  el.addEventListener("click", onClick);
  return el;
}

export function renderFeedbackBar(
  container: HTMLElement,
  variables: string[],
  state: ViewState,
  selection: SpanRef | null,
  handlers: FeedbackHandlers,
): void {
  container.textContent = "";
  container.className = "feedback-bar";

  const select = document.createElement("select");
  select.className = "variable-select";
  for (const variable of variables) {
    const option = document.createElement("option");
    option.value = variable;
    option.textContent = variable;
    option.selected = variable === state.activeVariable;
    select.appendChild(option);
  }
  select.addEventListener("change", () => handlers.onVariableChange(select.value));
  container.appendChild(select);

  const docGroup = document.createElement("span");
  docGroup.className = "feedback-group";
  docGroup.append(
    document.createTextNode(`${state.activeDoc}: `),
    button("true", "fb-doc-true", () => handlers.onDocumentLabel(true)),
    button("false", "fb-doc-false", () => handlers.onDocumentLabel(false)),
  );
  container.appendChild(docGroup);

  if (selection) {
    const spanGroup = document.createElement("span");
    spanGroup.className = "feedback-group feedback-span";
    spanGroup.append(
      document.createTextNode("selection: "),
      button("true", "fb-span-true", () => handlers.onSpanLabel(selection, true)),
      button("false", "fb-span-false", () => handlers.onSpanLabel(selection, false)),
    );
    container.appendChild(spanGroup);
  }

  if (state.tab === "wordtree" && state.filterQuery) {
    const phraseGroup = document.createElement("span");
    phraseGroup.className = "feedback-group feedback-phrase";
    phraseGroup.append(
      document.createTextNode("matching docs: "),
      button("true", "fb-phrase-true", () => handlers.onPhraseLabel(true)),
      button("false", "fb-phrase-false", () => handlers.onPhraseLabel(false)),
    );
    container.appendChild(phraseGroup);
  }

  const neitherGroup = document.createElement("span");
  neitherGroup.className = "feedback-group";
  const input = document.createElement("input");
  input.placeholder = "term";
  input.className = "neither-input";
  neitherGroup.append(
    input,
    button("neither class", "fb-neither", () => {
      if (input.value.trim()) handlers.onNeither(input.value.trim());
      input.value = "";
    }),
  );
  container.appendChild(neitherGroup);
}

/** Context menu offering the same actions as the bar. */
export function showContextMenu(
  x: number,
  y: number,
  selection: SpanRef | null,
  handlers: Pick<FeedbackHandlers, "onDocumentLabel" | "onSpanLabel">,
): HTMLElement {
  document.querySelector(".context-menu")?.remove();
  const menu = document.createElement("div");
  menu.className = "context-menu";
  menu.style.left = `${x}px`;
  menu.style.top = `${y}px`;
  const close = () => menu.remove();
  const add = (label: string, action: () => void) => {
    const item = document.createElement("div");
    item.className = "context-item";
    item.textContent = label;
    item.addEventListener("click", () => {
      action();
      close();
    });
    menu.appendChild(item);
  };
  add("label document true", () => handlers.onDocumentLabel(true));
  add("label document false", () => handlers.onDocumentLabel(false));
  if (selection) {
    add("label selection true", () => handlers.onSpanLabel(selection, true));
    add("label selection false", () => handlers.onSpanLabel(selection, false));
  }
  document.body.appendChild(menu);
  setTimeout(() => document.addEventListener("click", close, { once: true }), 0);
  return menu;
}
