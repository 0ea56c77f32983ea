// Entry point: connect to the twin core serving this page (or ?api=... for
// a remote one) and keep the dashboard rendering.

import { DashboardClient } from "./client.js";
import { Dashboard } from "./dashboard.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? window.location.origin;
const appKey = params.get("key") ?? undefined;

const client = new DashboardClient(base, { appKey });
const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app element");
}
new Dashboard(root, client).start();
void client.runStream();
