import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 60_000,
    hookTimeout: 90_000,
    // The integration test spawns one Python stack on fixed ports.
    fileParallelism: false,
  },
});
