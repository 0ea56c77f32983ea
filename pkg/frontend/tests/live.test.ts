// Loop closure against a real in-process stack: press the virtual button,
// watch the Completed badge and the marker advance; an interlocked press
// shows the rejection reason; exactly one POST per press.

import { spawn, ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { DashboardClient } from "../src/client.js";
import { PalletEstimate } from "../src/types.js";

let server: ChildProcess | null = null;
let base = "";

async function waitFor<T>(
  probe: () => Promise<T | null> | T | null,
  timeoutMs: number,
  label: string,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const result = await probe();
    if (result !== null && result !== undefined && result !== false) {
      return result as T;
    }
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
  throw new Error(`timed out waiting for ${label}`);
}

beforeAll(async () => {
  server = spawn(
    "python3",
    [
      "-m", "twinline.cli", "serve",
      "--api", "127.0.0.1:0",
      "--device-port", "0",
      "--gateway-port", "0",
      "--pace", "20",
    ],
    {
      cwd: "..",
      stdio: ["ignore", "pipe", "inherit"],
      env: { ...process.env, PYTHONUNBUFFERED: "1" },
    },
  );
  let banner = "";
  server.stdout?.on("data", (chunk: Buffer) => {
    banner += chunk.toString();
  });
  base = await waitFor<string>(
    () => banner.match(/api (http:\/\/[\d.]+:\d+)/)?.[1] ?? null,
    15000,
    "stack startup banner",
  );
}, 30_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("dashboard loop closure against a live stack", () => {
  it("press -> Completed badge and marker advance within 2 s; interlock shows reason", async () => {
    const client = new DashboardClient(base);
    const streamDone = client.runStream();

    await waitFor(() => client.vm.map !== null, 10_000, "hydration");

    // wait for a pallet to block at station 2 (its dock sensor via the stream)
    await waitFor(() => client.vm.stationBlocked(2), 10_000, "pallet at ST2");

    const markerBefore = await currentMarker(client, 2);
    const postsBefore = client.postCount;

    const pressedAt = Date.now();
    const record = await client.pressVirtualButton(2);
    expect(record).not.toBeNull();
    const missionId = record!.mission_id;

    await waitFor(
      () => client.vm.missions.get(missionId)?.state === "Completed",
      2_000,
      "Completed badge",
    );
    expect(Date.now() - pressedAt).toBeLessThan(2_000);
    expect(client.postCount - postsBefore).toBe(1);

    // the marker moved on from the dock position
    await waitFor(async () => {
      const now = await currentMarker(client, 2);
      return now !== null && markerBefore !== null && now !== markerBefore;
    }, 2_000, "marker advance");

    // interlocked press: rejection reason displayed verbatim (station 5 has
    // a pallet blocked from early on and no mission has moved it)
    await client.setInterlock(5, true);
    await waitFor(() => client.vm.interlocks.get(5) === true, 5_000, "mat engaged");
    await waitFor(() => client.vm.stationBlocked(5), 20_000, "pallet at ST5");
    const rejected = await client.pressVirtualButton(5);
    expect(rejected?.state).toBe("Rejected");
    expect(rejected?.reject_reason).toBe("InterlockEngaged");
    await waitFor(
      () => client.vm.toasts.some((t) => t.text.includes("InterlockEngaged")),
      2_000,
      "rejection toast",
    );

    client.stop();
    await Promise.race([streamDone, new Promise((r) => setTimeout(r, 500))]);
  }, 60_000);
});

async function currentMarker(client: DashboardClient, station: number): Promise<number | null> {
  const response = await fetch(`${base}/estimates`);
  const payload = (await response.json()) as { pallets: PalletEstimate[] };
  const dock = client.vm.map!.dockStopPos[station];
  let best: number | null = null;
  let bestDistance = Infinity;
  for (const pallet of payload.pallets) {
    const ring = client.vm.map!.ringLength;
    const distance = Math.min(
      (pallet.ring_pos - dock + ring) % ring,
      (dock - pallet.ring_pos + ring) % ring,
    );
    if (distance < bestDistance) {
      bestDistance = distance;
      best = pallet.ring_pos;
    }
  }
  return best;
}
