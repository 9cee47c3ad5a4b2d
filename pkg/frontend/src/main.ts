/** Entry point: read the API base URL and mount the console. */

import { ApiClient } from "./api.js";
import { App } from "./app.js";

const DEFAULT_BASE = "http://127.0.0.1:8080";

function baseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return (fromQuery ?? DEFAULT_BASE).replace(/\/$/, "");
}

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
void new App(root, new ApiClient(baseUrl())).start();
