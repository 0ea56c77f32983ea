// The virtual push button: one POST per activation, reasons shown verbatim.

import { describe, expect, it } from "vitest";

import { DashboardClient, FetchLike } from "../src/client.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function makeFetch(log: string[], missionState: () => string): FetchLike {
  let nextId = 1;
  return async (url, init) => {
    const method = init?.method ?? "GET";
    log.push(`${method} ${new URL(url).pathname}`);
    if (method === "POST" && url.endsWith("/missions")) {
      return jsonResponse({ mission_id: nextId++, state: "Requested" }, 201);
    }
    if (url.includes("/missions/")) {
      return jsonResponse({
        mission_id: nextId - 1,
        plc_mission_id: 1,
        kind: "pass",
        station: 2,
        origin: "twin",
        state: missionState(),
        reject_reason: missionState() === "Rejected" ? "InterlockEngaged" : "",
        timestamps: {},
        replicated_at: null,
      });
    }
    return jsonResponse({});
  };
}

describe("virtual push button", () => {
  it("emits exactly one POST per activation and debounces double-clicks", async () => {
    const log: string[] = [];
    const client = new DashboardClient("http://test", {
      fetchImpl: makeFetch(log, () => "Executing"),
    });
    const [first, second] = await Promise.all([
      client.pressVirtualButton(2),
      client.pressVirtualButton(2),
    ]);
    const posts = log.filter((line) => line === "POST /missions");
    expect(posts).toHaveLength(1);
    expect(client.postCount).toBe(1);
    expect([first, second].filter((r) => r !== null)).toHaveLength(1);
    // still pending: the button stays disabled until a terminal state
    expect(client.vm.pendingButtons.has(2)).toBe(true);
  });

  it("re-enables the button on a terminal state and shows the reason", async () => {
    const log: string[] = [];
    const client = new DashboardClient("http://test", {
      fetchImpl: makeFetch(log, () => "Rejected"),
    });
    const record = await client.pressVirtualButton(3);
    expect(record?.state).toBe("Rejected");
    expect(client.vm.pendingButtons.has(3)).toBe(false);
    expect(client.vm.toasts.map((t) => t.text)).toContainEqual(
      "station 2: InterlockEngaged",
    );
  });

  it("different stations debounce independently", async () => {
    const log: string[] = [];
    const client = new DashboardClient("http://test", {
      fetchImpl: makeFetch(log, () => "Executing"),
    });
    await client.pressVirtualButton(1);
    await client.pressVirtualButton(2);
    expect(log.filter((line) => line === "POST /missions")).toHaveLength(2);
  });

  it("an HTTP error frees the button and surfaces the message", async () => {
    const client = new DashboardClient("http://test", {
      fetchImpl: async () => jsonResponse({ error: "UnknownStation" }, 404),
    });
    const record = await client.pressVirtualButton(9);
    expect(record).toBeNull();
    expect(client.vm.pendingButtons.has(9)).toBe(false);
    expect(client.vm.toasts.at(-1)?.text).toContain("UnknownStation");
  });
});
