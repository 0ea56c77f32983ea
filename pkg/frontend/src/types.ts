// Shapes of what the twin-core HTTP API sends. The dashboard renders only
// this data; it never invents state of its own.

export interface PropertySnapshot {
  value: boolean | number | string;
  type: string;
  ts: number;
  quality: string;
}

export interface ThingSnapshot {
  thing_id: string;
  template: string;
  properties: Record<string, PropertySnapshot>;
  bindings: Record<string, string>;
  events: ThingEventPayload[];
}

export interface ThingEventPayload {
  event: string;
  thing_id: string;
  property: string;
  value: boolean | number | string;
  ts: number;
}

export interface MissionRecord {
  mission_id: number;
  plc_mission_id: number | null;
  kind: string;
  station: number;
  origin: string;
  state: string;
  reject_reason: string;
  timestamps: Record<string, number>;
  replicated_at: number | null;
}

export interface PalletEstimate {
  rfid: string;
  segment: number;
  offset: number;
  ring_pos: number;
  basis: string;
  staleness_ms: number | null;
}

export interface HistogramData {
  total: number;
  sum_ms: number;
  buckets: Record<string, number>;
}

export interface SyncMetricsData {
  telemetry_latency: HistogramData;
  mission_rtt: HistogramData;
  divergence_max_mm: number;
  divergence_samples: number;
  counters: Record<string, number>;
}

export interface KpiData {
  window: { from: number; to: number };
  energy_uj: Record<string, number>;
  material_in: Record<string, number>;
  material_out: Record<string, number>;
  waste: Record<string, number>;
}

export type StreamEvent =
  | { type: "hello"; stream: string }
  | { type: "ping" }
  | { type: "ready"; t: number }
  | { type: "stale"; t: number; mission_id?: number }
  | { type: "fresh"; t: number }
  | ({ type: "thing_event"; t: number } & ThingEventPayload)
  | ({ type: "mission"; t: number } & MissionRecord)
  | {
      type: "twin_replicate";
      t: number;
      mission_id: number;
      station: number;
      validated_at: number | null;
    }
  | { type: "estimates"; t: number; tick: number; pallets: PalletEstimate[] }
  | { type: string; [key: string]: unknown };

export interface FactoryMap {
  stations: number;
  segmentLengths: number[];
  ringLength: number;
  queueStopPos: number;
  dockStopPos: Record<number, number>;
}

/** Derive the ring geometry the same way the line describes itself:
 *  infeed/queue segment, one segment per station, pass-through segment;
 *  each stop sits at the end of its segment. */
export function buildFactoryMap(stations: number, segmentsCsv: string): FactoryMap {
  const segmentLengths = segmentsCsv
    .split(",")
    .map((s) => parseInt(s.trim(), 10))
    .filter((n) => Number.isFinite(n));
  const starts: number[] = [];
  let acc = 0;
  for (const len of segmentLengths) {
    starts.push(acc);
    acc += len;
  }
  const dockStopPos: Record<number, number> = {};
  for (let k = 1; k <= stations; k++) {
    dockStopPos[k] = (starts[k] ?? 0) + (segmentLengths[k] ?? 0);
  }
  return {
    stations,
    segmentLengths,
    ringLength: acc,
    queueStopPos: (starts[0] ?? 0) + (segmentLengths[0] ?? 0),
    dockStopPos,
  };
}
