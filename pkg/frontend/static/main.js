import { TeachingApi } from "./api.js";
import { mountApp } from "./app.js";
const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "";
const userId = params.get("user") ?? "web-user";
const api = new TeachingApi(base);
const app = mountApp(document.getElementById("app"), api, userId);
void app.start(userId);
