// API client: snapshot hydration, the NDJSON stream with reconnect backoff,
// and the virtual push button (debounced: exactly one POST per activation).

import { KpiData, MissionRecord, StreamEvent, SyncMetricsData, ThingSnapshot } from "./types.js";
import { ViewModel, isTerminal } from "./viewmodel.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ConnectOptions {
  fetchImpl?: FetchLike;
  appKey?: string;
  now?: () => number;
  backoffMs?: number[];
}

export class DashboardClient {
  readonly vm = new ViewModel();
  private readonly fetchImpl: FetchLike;
  private readonly now: () => number;
  private readonly backoff: number[];
  private readonly appKey: string | undefined;
  private stopped = false;
  postCount = 0; // instrumented so tests can assert one POST per press

  constructor(readonly baseUrl: string, options: ConnectOptions = {}) {
    this.fetchImpl = options.fetchImpl ?? ((url, init) => fetch(url, init));
    this.now = options.now ?? (() => Date.now());
    this.backoff = options.backoffMs ?? [500, 1000, 2000, 5000];
    this.appKey = options.appKey;
  }

  private headers(json = false): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) {
      headers["Content-Type"] = "application/json";
    }
    if (this.appKey) {
      headers["X-App-Key"] = this.appKey;
    }
    return headers;
  }

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  // --- snapshots ---------------------------------------------------------------

  async hydrate(): Promise<void> {
    const things = await this.getJson<{ things: ThingSnapshot[] }>("/things");
    this.vm.hydrateThings(things.things);
    const missions = await this.getJson<{ missions: MissionRecord[] }>("/missions");
    this.vm.hydrateMissions(missions.missions);
    const estimates = await this.getJson<{ t: number; pallets: never[] }>("/estimates");
    this.vm.applyEstimates(estimates.pallets, estimates.t);
    this.vm.metrics = await this.getJson<SyncMetricsData>("/metrics/sync");
  }

  async refreshKpi(fromTick: number, toTick: number): Promise<KpiData> {
    const kpi = await this.getJson<KpiData>(`/kpi?from=${fromTick}&to=${toTick}`);
    this.vm.kpi = kpi;
    return kpi;
  }

  async refreshMetrics(): Promise<void> {
    this.vm.metrics = await this.getJson<SyncMetricsData>("/metrics/sync");
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(this.url(path), { headers: this.headers() });
    if (response.status === 401) {
      this.vm.connection = "login";
      throw new Error("auth required");
    }
    if (!response.ok) {
      throw new Error(`${path}: HTTP ${response.status}`);
    }
    return (await response.json()) as T;
  }

  // --- stream -------------------------------------------------------------------

  private pending: StreamEvent[] | null = null;
  private streamOpened: (() => void) | null = null;

  async runStream(): Promise<void> {
    let attempt = 0;
    while (!this.stopped) {
      try {
        // subscribe before hydrating (the server's hello proves the
        // subscription is live) and buffer events that arrive while the
        // snapshots are fetched, so one-shot edges are never lost
        this.pending = [];
        const opened = new Promise<void>((resolve) => {
          this.streamOpened = resolve;
        });
        const streaming = this.consumeStream();
        await Promise.race([opened, streaming]);
        await this.hydrate();
        const buffered = this.pending;
        this.pending = null;
        for (const event of buffered ?? []) {
          this.vm.applyEvent(event, this.now());
        }
        this.vm.connection = "live";
        attempt = 0;
        await streaming;
      } catch (err) {
        this.pending = null;
        if (this.vm.connection !== "login") {
          this.vm.connection = "offline";
        }
      }
      if (this.stopped) {
        break;
      }
      const wait = this.backoff[Math.min(attempt, this.backoff.length - 1)];
      attempt += 1;
      await sleep(wait);
    }
  }

  private dispatch(event: StreamEvent): void {
    if (this.streamOpened) {
      this.streamOpened();
      this.streamOpened = null;
    }
    if (this.pending !== null) {
      this.pending.push(event);
    } else {
      this.vm.applyEvent(event, this.now());
    }
  }

  private async consumeStream(): Promise<void> {
    const response = await this.fetchImpl(this.url("/stream"), {
      headers: this.headers(),
    });
    if (!response.ok || !response.body) {
      throw new Error(`stream: HTTP ${response.status}`);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    while (!this.stopped) {
      const { done, value } = await reader.read();
      if (done) {
        throw new Error("stream closed");
      }
      buffer += decoder.decode(value, { stream: true });
      let newline = buffer.indexOf("\n");
      while (newline >= 0) {
        const line = buffer.slice(0, newline).trim();
        buffer = buffer.slice(newline + 1);
        if (line) {
          this.dispatch(JSON.parse(line) as StreamEvent);
        }
        newline = buffer.indexOf("\n");
      }
    }
  }

  stop(): void {
    this.stopped = true;
  }

  // --- the virtual push button -----------------------------------------------------

  /** Submit a pass mission with origin "twin". Returns null when the button
   *  for that station is already pending (debounce: one POST per press). */
  async pressVirtualButton(station: number): Promise<MissionRecord | null> {
    if (this.vm.pendingButtons.has(station)) {
      return null;
    }
    this.vm.pendingButtons.add(station);
    this.postCount += 1;
    try {
      const response = await this.fetchImpl(this.url("/missions"), {
        method: "POST",
        headers: this.headers(true),
        body: JSON.stringify({
          kind: "PassDockingStation",
          station,
          origin: "twin",
        }),
      });
      const body = (await response.json()) as { mission_id?: number; error?: string };
      if (!response.ok || body.mission_id === undefined) {
        this.vm.pendingButtons.delete(station);
        this.vm.toast(`station ${station}: ${body.error ?? "request failed"}`);
        return null;
      }
      const record = await this.getJson<MissionRecord>(`/missions/${body.mission_id}`);
      this.vm.applyMission(record);
      if (isTerminal(record.state)) {
        this.vm.pendingButtons.delete(station);
      }
      return record;
    } catch (err) {
      this.vm.pendingButtons.delete(station);
      this.vm.toast(`station ${station}: ${String(err)}`);
      return null;
    }
  }

  async setInterlock(station: number, engaged: boolean): Promise<void> {
    await this.fetchImpl(this.url("/interlocks"), {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify({ station, engaged }),
    });
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
