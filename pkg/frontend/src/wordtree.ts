/** Bidirectional word tree rendered as SVG. The root phrase sits in the
 * middle; backward branches grow left, forward branches right. Node fills
 * are gradients of the class distribution; font size follows the node's
 * share of matched sentences. Clicking a branch token drills; clicking a
 * root token reverts its drill. */

import type { TreeNodePayload, TreePayload } from "./api.js";
import { polarityColor, unknownColor } from "./palette.js";

export interface WordTreeHandlers {
  onDrill(direction: "forward" | "backward", token: string): void;
  onRevert(): void;
}

const SVG_NS = "http://www.w3.org/2000/svg";
const ROW_HEIGHT = 22;
const COLUMN_WIDTH = 110;
const BASE_FONT = 16;
const MIN_SCALE = 0.15;

interface Placed {
  node: TreeNodePayload;
  depth: number;
  y: number;
}

function placeNodes(node: TreeNodePayload, depth: number, nextRow: { value: number }, out: Placed[]): number {
  if (node.children.length === 0) {
    const y = nextRow.value * ROW_HEIGHT;
    nextRow.value += 1;
    if (depth > 0) out.push({ node, depth, y });
    return y;
  }
  const ys = node.children.map((child) => placeNodes(child, depth + 1, nextRow, out));
  const y = (Math.min(...ys) + Math.max(...ys)) / 2;
  if (depth > 0) out.push({ node, depth, y });
  return y;
}

function fontScale(weight: number, rootWeight: number): number {
  if (rootWeight <= 0 || weight <= 0) return MIN_SCALE;
  return Math.min(Math.max(Math.sqrt(weight / rootWeight), MIN_SCALE), 1);
}

let gradientCounter = 0;

function gradientFill(
  defs: SVGDefsElement,
  node: TreeNodePayload,
): string {
  const id = `wt-grad-${gradientCounter++}`;
  const gradient = document.createElementNS(SVG_NS, "linearGradient");
  gradient.setAttribute("id", id);
  const stops: Array<[number, string]> = [];
  let offset = 0;
  for (const [fraction, color] of [
    [node.gradient.t, polarityColor(true)],
    [node.gradient.f, polarityColor(false)],
    [node.gradient.u, unknownColor()],
  ] as const) {
    if (fraction <= 0) continue;
    stops.push([offset, color]);
    offset += fraction;
    stops.push([offset, color]);
  }
  for (const [at, color] of stops) {
    const stop = document.createElementNS(SVG_NS, "stop");
    stop.setAttribute("offset", `${Math.round(at * 100)}%`);
    stop.setAttribute("stop-color", color);
    gradient.appendChild(stop);
  }
  defs.appendChild(gradient);
  return `url(#${id})`;
}

export function renderWordTree(
  container: HTMLElement,
  payload: TreePayload,
  drillDepth: number,
  handlers: WordTreeHandlers,
): void {
  container.textContent = "";

  const bar = document.createElement("div");
  bar.className = "coverage-bar";
  bar.textContent = `${payload.coverage.docs} documents (${payload.coverage.percent}%)`;
  container.appendChild(bar);

  const rootWeight = Math.max(payload.forward.weight, payload.backward.weight);
  const forward: Placed[] = [];
  const backward: Placed[] = [];
  const forwardRows = { value: 0 };
  const backwardRows = { value: 0 };
  placeNodes(payload.forward, 0, forwardRows, forward);
  placeNodes(payload.backward, 0, backwardRows, backward);
  const rows = Math.max(forwardRows.value, backwardRows.value, 1);
  const depthMax = Math.max(
    1,
    ...forward.map((p) => p.depth),
    ...backward.map((p) => p.depth),
  );

  const rootLabel = payload.root.join(" ");
  const rootWidth = Math.max(60, rootLabel.length * BASE_FONT * 0.62);
  const centerX = depthMax * COLUMN_WIDTH + 40;
  const width = centerX * 2 + rootWidth;
  const height = (rows + 2) * ROW_HEIGHT;
  const midY = height / 2;

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "wordtree-svg");
  const defs = document.createElementNS(SVG_NS, "defs");
  svg.appendChild(defs);

  const rootText = document.createElementNS(SVG_NS, "text");
  rootText.setAttribute("x", String(centerX + rootWidth / 2));
  rootText.setAttribute("y", String(midY));
  rootText.setAttribute("text-anchor", "middle");
  rootText.setAttribute("font-size", String(BASE_FONT));
  rootText.setAttribute("font-weight", "bold");
  rootText.setAttribute("class", "wt-root");
  rootText.textContent = rootLabel;
  if (drillDepth > 0) {
    rootText.addEventListener("click", () => handlers.onRevert());
    rootText.setAttribute("data-revertable", "true");
  }
  svg.appendChild(rootText);

  const drawSide = (placed: Placed[], direction: "forward" | "backward") => {
    const sign = direction === "forward" ? 1 : -1;
    const edge = direction === "forward" ? centerX + rootWidth : centerX;
    for (const { node, depth, y } of placed) {
      const x = edge + sign * depth * COLUMN_WIDTH;
      const nodeY = y + ROW_HEIGHT;
      const text = document.createElementNS(SVG_NS, "text");
      text.setAttribute("x", String(x));
      text.setAttribute("y", String(nodeY));
      text.setAttribute("text-anchor", direction === "forward" ? "start" : "end");
      const scale = fontScale(node.weight, rootWeight);
      text.setAttribute("font-size", (BASE_FONT * scale).toFixed(2));
      text.setAttribute("fill", gradientFill(defs, node));
      text.setAttribute("class", "wt-node");
      text.setAttribute("data-token", node.token);
      text.setAttribute("data-direction", direction);
      const grad = node.gradient;
      const title = document.createElementNS(SVG_NS, "title");
      title.textContent =
        `${node.docs} docs: ${grad.nt} true (${Math.round(grad.t * 100)}%), ` +
        `${grad.nf} false (${Math.round(grad.f * 100)}%), ` +
        `${grad.nu} unknown (${Math.round(grad.u * 100)}%)`;
      text.appendChild(title);
      const label = document.createElementNS(SVG_NS, "tspan");
      label.textContent = node.token;
      text.appendChild(label);
      const marker = node.token === "." || node.token === "^";
      if (!marker) {
        text.addEventListener("click", () => {
          if (depth === 1) handlers.onDrill(direction, node.token);
        });
        if (depth === 1) text.setAttribute("data-drillable", "true");
      }
      svg.appendChild(text);
    }
  };

  drawSide(forward, "forward");
  drawSide(backward, "backward");
  container.appendChild(svg);
}
