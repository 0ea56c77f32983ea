// DOM renderer: an SVG ring map with live pallet markers, per-station
// virtual push buttons and interlock switches, mission history, sync gauges
// and the KPI panel. Pure function of the view model; re-drawn per frame.

import { DashboardClient } from "./client.js";
import { MissionRecord } from "./types.js";
import { isTerminal } from "./viewmodel.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const RADIUS = 170;
const CENTER = 210;

export class Dashboard {
  private raf = 0;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: DashboardClient,
  ) {}

  start(): void {
    this.root.innerHTML = `
      <div class="banner" id="banner"></div>
      <div class="columns">
        <div class="panel">
          <h2>Line</h2>
          <svg id="map" viewBox="0 0 420 420" width="420" height="420"></svg>
        </div>
        <div class="panel">
          <h2>Stations</h2>
          <div id="stations"></div>
          <h2>Missions</h2>
          <div id="missions"></div>
        </div>
        <div class="panel">
          <h2>Sync</h2>
          <div id="sync"></div>
          <h2>KPIs</h2>
          <div id="kpi"></div>
          <div id="toasts"></div>
        </div>
      </div>`;
    const loop = () => {
      this.client.vm.checkStale(Date.now());
      this.render();
      this.raf = requestAnimationFrame(loop);
    };
    this.raf = requestAnimationFrame(loop);
    window.setInterval(() => {
      void this.client.refreshMetrics().catch(() => undefined);
      const tick = Math.max(0, latestTick(this.client));
      void this.client.refreshKpi(0, tick).catch(() => undefined);
    }, 2000);
  }

  stop(): void {
    cancelAnimationFrame(this.raf);
  }

  private render(): void {
    const vm = this.client.vm;
    const banner = this.root.querySelector<HTMLElement>("#banner")!;
    banner.dataset.state = vm.connection;
    banner.textContent = {
      connecting: "connecting…",
      live: "live",
      stale: "STALE: no telemetry from the line",
      offline: "OFFLINE: twin core unreachable",
      login: "authentication required",
    }[vm.connection];

    this.renderMap();
    this.renderStations();
    this.renderMissions();
    this.renderSync();
    this.renderKpi();
    const toasts = this.root.querySelector<HTMLElement>("#toasts")!;
    toasts.innerHTML = vm.toasts
      .slice(-4)
      .map((t) => `<div class="toast">${escapeHtml(t.text)}</div>`)
      .join("");
  }

  private ringPoint(ringPos: number): { x: number; y: number } {
    const ring = this.client.vm.map?.ringLength ?? 1;
    const angle = (ringPos / ring) * 2 * Math.PI - Math.PI / 2;
    return {
      x: CENTER + RADIUS * Math.cos(angle),
      y: CENTER + RADIUS * Math.sin(angle),
    };
  }

  private renderMap(): void {
    const vm = this.client.vm;
    const svg = this.root.querySelector<SVGSVGElement>("#map")!;
    if (!vm.map) {
      svg.innerHTML = "";
      return;
    }
    const parts: string[] = [
      `<circle cx="${CENTER}" cy="${CENTER}" r="${RADIUS}" class="belt"/>`,
    ];
    const queue = this.ringPoint(vm.map.queueStopPos);
    parts.push(
      `<rect x="${queue.x - 5}" y="${queue.y - 5}" width="10" height="10" class="queue-stop"/>`,
    );
    for (const [stationText, pos] of Object.entries(vm.map.dockStopPos)) {
      const station = Number(stationText);
      const p = this.ringPoint(pos);
      const blocked = vm.stationBlocked(station);
      const mat = vm.interlocks.get(station) ?? false;
      parts.push(
        `<g class="station ${blocked ? "blocked" : ""} ${mat ? "interlocked" : ""}">` +
          `<circle cx="${p.x}" cy="${p.y}" r="14"/>` +
          `<text x="${p.x}" y="${p.y + 4}">S${station}</text></g>`,
      );
    }
    const now = Date.now();
    for (const rfid of vm.pallets.keys()) {
      const track = vm.pallets.get(rfid)!;
      // interpolate against stream time: offset wall clock by last event skew
      const skew = vm.lastEventAt - track.latest.t;
      const pos = vm.markerPosition(rfid, now - skew);
      if (pos === null) {
        continue;
      }
      const p = this.ringPoint(pos);
      parts.push(
        `<g class="pallet" data-basis="${track.estimate.basis}">` +
          `<rect x="${p.x - 7}" y="${p.y - 5}" width="14" height="10" rx="2"/>` +
          `<text x="${p.x}" y="${p.y - 9}">${escapeHtml(rfid)}</text></g>`,
      );
    }
    svg.innerHTML = parts.join("");
  }

  private renderStations(): void {
    const vm = this.client.vm;
    const host = this.root.querySelector<HTMLElement>("#stations")!;
    if (!vm.map) {
      host.textContent = "waiting for line configuration…";
      return;
    }
    const rows: string[] = [];
    for (let station = 1; station <= vm.map.stations; station++) {
      const blocked = vm.stationBlocked(station);
      const pending = vm.pendingButtons.has(station);
      const mat = vm.interlocks.get(station) ?? false;
      rows.push(
        `<div class="station-row">
           <span class="name">ST${station}</span>
           <span class="dot ${blocked ? "on" : ""}" title="pallet present"></span>
           <button class="press" data-station="${station}" ${pending ? "disabled" : ""}>
             ${pending ? "running…" : "pass"}
           </button>
           <label class="mat">
             <input type="checkbox" data-mat="${station}" ${mat ? "checked" : ""}/> mat
           </label>
         </div>`,
      );
    }
    host.innerHTML = rows.join("");
    host.querySelectorAll<HTMLButtonElement>("button.press").forEach((button) => {
      button.addEventListener("click", () => {
        const station = Number(button.dataset.station);
        button.disabled = true;
        void this.client.pressVirtualButton(station);
      });
    });
    host.querySelectorAll<HTMLInputElement>("input[data-mat]").forEach((input) => {
      input.addEventListener("change", () => {
        void this.client.setInterlock(Number(input.dataset.mat), input.checked);
      });
    });
  }

  private renderMissions(): void {
    const vm = this.client.vm;
    const host = this.root.querySelector<HTMLElement>("#missions")!;
    const rows = vm
      .missionHistory()
      .slice(0, 10)
      .map((m: MissionRecord) => {
        const badge = isTerminal(m.state) ? m.state : `${m.state}…`;
        const reason = m.reject_reason ? ` (${m.reject_reason})` : "";
        return `<div class="mission ${m.state.toLowerCase()}">
            #${m.mission_id} ${escapeHtml(m.kind)} ST${m.station} [${m.origin}]
            <b>${badge}</b>${escapeHtml(reason)}
          </div>`;
      });
    host.innerHTML = rows.join("") || "<i>none yet</i>";
  }

  private renderSync(): void {
    const vm = this.client.vm;
    const host = this.root.querySelector<HTMLElement>("#sync")!;
    if (!vm.metrics) {
      host.textContent = "–";
      return;
    }
    const lat = vm.metrics.telemetry_latency;
    const rtt = vm.metrics.mission_rtt;
    const mean = (h: typeof lat) => (h.total ? Math.round(h.sum_ms / h.total) : 0);
    host.innerHTML = `
      <div>telemetry latency: mean ${mean(lat)} ms over ${lat.total}</div>
      <div>mission round trip: mean ${mean(rtt)} ms over ${rtt.total}</div>
      ${histogramBar(lat.buckets)}`;
  }

  private renderKpi(): void {
    const vm = this.client.vm;
    const host = this.root.querySelector<HTMLElement>("#kpi")!;
    if (!vm.kpi) {
      host.textContent = "–";
      return;
    }
    const energyJ = Object.values(vm.kpi.energy_uj).reduce((a, b) => a + b, 0) / 1e6;
    const material = Object.values(vm.kpi.material_in).reduce((a, b) => a + b, 0);
    const waste = Object.values(vm.kpi.waste).reduce((a, b) => a + b, 0);
    host.innerHTML = `
      <div>window: ticks ${vm.kpi.window.from}–${vm.kpi.window.to}</div>
      <div>energy: ${energyJ.toFixed(1)} J</div>
      <div>material in: ${material} &nbsp; waste: ${waste}</div>`;
  }
}

function latestTick(client: DashboardClient): number {
  let best = 0;
  for (const track of client.vm.pallets.values()) {
    best = Math.max(best, track.latest.t);
  }
  return Math.floor(best / Math.max(1, client.vm.tickMs));
}

function histogramBar(buckets: Record<string, number>): string {
  const entries = Object.entries(buckets);
  const max = Math.max(1, ...entries.map(([, v]) => v));
  const bars = entries
    .map(
      ([label, count]) =>
        `<div class="bar"><span style="height:${(count / max) * 28}px"></span>` +
        `<label>${label.replace("le_", "≤")}</label></div>`,
    )
    .join("");
  return `<div class="histogram">${bars}</div>`;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
