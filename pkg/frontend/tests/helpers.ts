import { ApiClient } from "../src/api.js";
import { App, bootApp } from "../src/main.js";
import { FakeServer } from "./fakeServer.js";

export interface TestApp {
  server: FakeServer;
  root: HTMLElement;
  app: App;
}

export async function setupApp(): Promise<TestApp> {
  document.body.innerHTML = "";
  const server = new FakeServer();
  const client = new ApiClient(server.fetch);
  const root = document.createElement("div");
  root.id = "test-root";
  document.body.appendChild(root);
  const app = await bootApp(root, client);
  return { server, root, app };
}

export function click(element: Element): void {
  element.dispatchEvent(new MouseEvent("click", { bubbles: true }));
}

const HEX = /^#([0-9a-f]{6})$/i;

/** jsdom may normalize hex colors to rgb(); accept both spellings. */
export function colorForms(hex: string): string[] {
  const match = HEX.exec(hex);
  if (!match) return [hex];
  const n = parseInt(match[1], 16);
  const r = (n >> 16) & 0xff;
  const g = (n >> 8) & 0xff;
  const b = n & 0xff;
  return [hex.toLowerCase(), `rgb(${r}, ${g}, ${b})`];
}

export function paletteForms(palette: ReadonlySet<string>): Set<string> {
  const forms = new Set<string>();
  for (const hex of palette) for (const form of colorForms(hex)) forms.add(form);
  return forms;
}
