import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globalSetup: "./tests/global-setup.ts",
    testTimeout: 60000,
    hookTimeout: 120000,
    // the live service is one shared process; keep session tests serial
    fileParallelism: false,
  },
});
