import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    // the e2e spec boots two real servers, so give it headroom
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
