// View-model behavior against a recorded stream fixture: every rendered
// state is attributable to a received message.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { StreamEvent, ThingSnapshot, buildFactoryMap } from "../src/types.js";
import { ViewModel } from "../src/viewmodel.js";

const here = dirname(fileURLToPath(import.meta.url));

function fixtureEvents(): StreamEvent[] {
  const text = readFileSync(join(here, "fixtures", "stream.ndjson"), "utf-8");
  return text
    .split("\n")
    .filter((line) => line.trim())
    .map((line) => JSON.parse(line) as StreamEvent);
}

function fixtureThings(): ThingSnapshot[] {
  const payload = JSON.parse(
    readFileSync(join(here, "fixtures", "things.json"), "utf-8"),
  ) as { things: ThingSnapshot[] };
  return payload.things;
}

describe("factory map derivation", () => {
  it("derives ring geometry from the line thing's configuration", () => {
    const map = buildFactoryMap(6, "1200,1000,1000,1000,1000,1000,1000,1500");
    expect(map.ringLength).toBe(8700);
    expect(map.queueStopPos).toBe(1200);
    expect(map.dockStopPos[1]).toBe(2200);
    expect(map.dockStopPos[6]).toBe(7200);
  });
});

describe("recorded stream replay", () => {
  it("builds state only from received messages", () => {
    const vm = new ViewModel();
    vm.hydrateThings(fixtureThings());
    expect(vm.map).not.toBeNull();
    expect(vm.map!.stations).toBe(6);

    let wall = 1000;
    for (const event of fixtureEvents()) {
      vm.applyEvent(event, (wall += 10));
    }
    // the fixture run rejected one remote mission at an interlocked station
    // and completed another after the mat cleared
    const states = vm.missionHistory().map((m) => [m.state, m.reject_reason]);
    expect(states).toContainEqual(["Rejected", "InterlockEngaged"]);
    expect(states).toContainEqual(["Completed", ""]);
    // a rejection reason surfaces verbatim as a toast
    expect(vm.toasts.map((t) => t.text)).toContainEqual(
      "station 2: InterlockEngaged",
    );
    // pallet markers exist for every pallet the stream reported
    expect([...vm.pallets.keys()].sort()).toEqual(["P-001", "P-002", "P-003"]);
    expect(vm.connection).toBe("live");
  });

  it("interpolates linearly between two consecutive estimates only", () => {
    const vm = new ViewModel();
    vm.hydrateThings(fixtureThings());
    vm.applyEstimates(
      [{ rfid: "P-009", segment: 1, offset: 0, ring_pos: 1000, basis: "DeadReckoned", staleness_ms: 0 }],
      1000,
    );
    vm.applyEstimates(
      [{ rfid: "P-009", segment: 1, offset: 0, ring_pos: 1100, basis: "DeadReckoned", staleness_ms: 0 }],
      2000,
    );
    expect(vm.markerPosition("P-009", 1000)).toBe(1000);
    expect(vm.markerPosition("P-009", 1500)).toBe(1050);
    expect(vm.markerPosition("P-009", 2000)).toBe(1100);
    // never extrapolates beyond the latest received estimate
    expect(vm.markerPosition("P-009", 9999)).toBe(1100);
  });

  it("wraps interpolation across the ring seam", () => {
    const vm = new ViewModel();
    vm.hydrateThings(fixtureThings());
    const ring = vm.map!.ringLength;
    vm.applyEstimates(
      [{ rfid: "P-009", segment: 7, offset: 0, ring_pos: ring - 50, basis: "DeadReckoned", staleness_ms: 0 }],
      0,
    );
    vm.applyEstimates(
      [{ rfid: "P-009", segment: 0, offset: 50, ring_pos: 50, basis: "DeadReckoned", staleness_ms: 0 }],
      1000,
    );
    expect(vm.markerPosition("P-009", 500)).toBe(0);
  });
});

describe("stale banner timer", () => {
  it("turns stale after 2x the publish interval without events", () => {
    const vm = new ViewModel();
    vm.hydrateThings(fixtureThings());
    vm.applyEvent({ type: "ping" }, 10_000);
    expect(vm.connection).toBe("live");
    vm.checkStale(10_000 + vm.staleAfterMs - 1);
    expect(vm.connection).toBe("live");
    vm.checkStale(10_000 + vm.staleAfterMs + 1);
    expect(vm.connection).toBe("stale");
    // a fresh event recovers the banner
    vm.applyEvent({ type: "ping" }, 20_000);
    expect(vm.connection).toBe("live");
  });

  it("honors an explicit stale event from the twin", () => {
    const vm = new ViewModel();
    vm.applyEvent({ type: "stale", t: 5 }, 5);
    expect(vm.connection).toBe("stale");
  });
});
