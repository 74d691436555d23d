import { ApiClient } from "./api.js";
import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:8000";
const root = document.getElementById("root");
if (root === null) throw new Error("missing #root element");

App.create(root, new ApiClient(baseUrl)).catch((error) => {
  root.textContent = `Failed to start: ${error instanceof Error ? error.message : error}`;
});
