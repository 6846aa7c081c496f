import { defineConfig } from "vitest/config";

export default defineConfig({
  resolve: {
    // sources import with .js suffixes for the browser; map back to .ts
    alias: [{ find: /^(\.{1,2}\/.*)\.js$/, replacement: "$1" }],
  },
  test: {
    environment: "jsdom",
    setupFiles: ["tests/setup.ts"],
  },
});
