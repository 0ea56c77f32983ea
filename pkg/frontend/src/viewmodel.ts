// DOM-free view model: a reducer over snapshots and stream events.
// Pallet markers interpolate linearly between the two most recent estimate
// updates and nothing more — the server already compensates latency.

import {
  FactoryMap,
  KpiData,
  MissionRecord,
  PalletEstimate,
  StreamEvent,
  SyncMetricsData,
  ThingSnapshot,
  buildFactoryMap,
} from "./types.js";

export type ConnectionState = "connecting" | "live" | "stale" | "offline" | "login";

interface PalletTrack {
  prev: { ringPos: number; t: number } | null;
  latest: { ringPos: number; t: number };
  estimate: PalletEstimate;
}

export interface ToastMessage {
  text: string;
  at: number;
}

export class ViewModel {
  connection: ConnectionState = "connecting";
  map: FactoryMap | null = null;
  things = new Map<string, ThingSnapshot>();
  missions = new Map<number, MissionRecord>();
  missionOrder: number[] = [];
  pallets = new Map<string, PalletTrack>();
  interlocks = new Map<number, boolean>();
  pendingButtons = new Set<number>();
  metrics: SyncMetricsData | null = null;
  kpi: KpiData | null = null;
  toasts: ToastMessage[] = [];
  lastEventAt = 0;
  tickMs = 50;
  staleAfterMs = 3000; // overwritten from config: 2x publish interval minimum

  // --- hydration from the snapshot endpoints -------------------------------

  hydrateThings(things: ThingSnapshot[]): void {
    for (const thing of things) {
      this.applyThing(thing);
    }
  }

  applyThing(thing: ThingSnapshot): void {
    this.things.set(thing.thing_id, thing);
    if (thing.thing_id === "LINE") {
      const stations = Number(thing.properties["STATIONS"]?.value ?? 0);
      const segments = String(thing.properties["SEGMENTS"]?.value ?? "");
      const tickMs = Number(thing.properties["TICK_MS"]?.value ?? 50);
      if (stations > 0 && segments) {
        this.map = buildFactoryMap(stations, segments);
      }
      this.tickMs = tickMs;
      this.staleAfterMs = Math.max(2 * tickMs, 3000);
    }
    const mat = thing.properties["OPERATOR_MAT"];
    const station = parseInt(thing.thing_id.replace(/^ST/, ""), 10);
    if (mat !== undefined && Number.isFinite(station)) {
      this.interlocks.set(station, Boolean(mat.value));
    }
  }

  hydrateMissions(records: MissionRecord[]): void {
    for (const record of records) {
      this.applyMission(record);
    }
  }

  applyMission(record: MissionRecord): void {
    if (!this.missions.has(record.mission_id)) {
      this.missionOrder.push(record.mission_id);
    }
    this.missions.set(record.mission_id, record);
    if (isTerminal(record.state)) {
      this.pendingButtons.delete(record.station);
      if (record.state === "Rejected" && record.reject_reason) {
        this.toast(`station ${record.station}: ${record.reject_reason}`);
      }
    }
  }

  applyEstimates(pallets: PalletEstimate[], t: number): void {
    for (const estimate of pallets) {
      const track = this.pallets.get(estimate.rfid);
      const point = { ringPos: estimate.ring_pos, t };
      if (track) {
        track.prev = track.latest;
        track.latest = point;
        track.estimate = estimate;
      } else {
        this.pallets.set(estimate.rfid, { prev: null, latest: point, estimate });
      }
    }
  }

  // --- stream reduction ------------------------------------------------------

  applyEvent(event: StreamEvent, receivedAt: number): void {
    this.lastEventAt = receivedAt;
    if (this.connection === "stale" || this.connection === "connecting") {
      this.connection = "live";
    }
    switch (event.type) {
      case "estimates":
        this.applyEstimates(
          (event as { pallets: PalletEstimate[] }).pallets,
          (event as { t: number }).t,
        );
        break;
      case "mission":
        this.applyMission(event as unknown as MissionRecord);
        break;
      case "thing_event": {
        const payload = event as { thing_id: string; property: string; value: unknown };
        const thing = this.things.get(payload.thing_id);
        if (thing && thing.properties[payload.property]) {
          thing.properties[payload.property].value = payload.value as
            | boolean
            | number
            | string;
        }
        if (payload.property === "OPERATOR_MAT") {
          const station = parseInt(payload.thing_id.replace(/^ST/, ""), 10);
          if (Number.isFinite(station)) {
            this.interlocks.set(station, Boolean(payload.value));
          }
        }
        break;
      }
      case "stale":
        this.connection = "stale";
        break;
      case "hello":
      case "ping":
      case "fresh":
      case "ready":
      default:
        break;
    }
  }

  /** Timer hook: no event for 2x the publish interval means the feed is stale. */
  checkStale(nowMs: number): void {
    if (this.connection === "live" && nowMs - this.lastEventAt > this.staleAfterMs) {
      this.connection = "stale";
    }
  }

  // --- marker interpolation -----------------------------------------------------

  markerPosition(rfid: string, nowMs: number): number | null {
    const track = this.pallets.get(rfid);
    if (!track || !this.map) {
      return null;
    }
    const { prev, latest } = track;
    if (!prev || latest.t <= prev.t || nowMs >= latest.t) {
      return latest.ringPos;
    }
    const span = latest.t - prev.t;
    const progress = Math.min(1, Math.max(0, (nowMs - prev.t) / span));
    const ring = this.map.ringLength;
    const forward = (latest.ringPos - prev.ringPos + ring) % ring;
    return (prev.ringPos + forward * progress) % ring;
  }

  // --- helpers ----------------------------------------------------------------------

  activeMissions(): MissionRecord[] {
    return this.missionHistory().filter((m) => !isTerminal(m.state));
  }

  missionHistory(): MissionRecord[] {
    return this.missionOrder
      .map((id) => this.missions.get(id))
      .filter((m): m is MissionRecord => m !== undefined)
      .reverse();
  }

  stationBlocked(station: number): boolean {
    const thing = this.things.get(`ST${station}`);
    return Boolean(thing?.properties["PALLET_A"]?.value);
  }

  toast(text: string): void {
    this.toasts.push({ text, at: this.lastEventAt });
    if (this.toasts.length > 8) {
      this.toasts.shift();
    }
  }
}

export function isTerminal(state: string): boolean {
  return state === "Completed" || state === "Rejected" || state === "TimedOut";
}
