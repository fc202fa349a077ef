import { defineConfig } from "vitest/config";

export default defineConfig({
  server: {
    proxy: {
      "/v1": "http://127.0.0.1:8787",
    },
  },
  test: {
    environment: "jsdom",
    testTimeout: 60000,
    hookTimeout: 120000,
  },
});
