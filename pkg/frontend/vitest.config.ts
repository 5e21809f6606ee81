import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    testTimeout: 15_000,
    hookTimeout: 90_000,
    // The e2e file drives one live gateway process through a fixed flight
    // sequence; files and tests must not interleave.
    fileParallelism: false,
    sequence: { concurrent: false },
  },
});
