"""Operator command line: scenario harness, live service, thin API wrappers.

``run`` executes a scenario deterministically in one process (the default) or
against a spawned distributed stack (``--distributed``); ``serve`` hosts the
live stack (all-in-one or a single role); the rest are small clients of a
running stack's HTTP API or gateway.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import subprocess
import sys
import threading
import time
import urllib.error
import urllib.request

from .config import FactoryConfig, load_kv_file
from .harness.scenario import (
    ScenarioError,
    load_scenario,
    bundled_scenario_path,
    parse_scenario,
    run_scenario,
)
from .harness.trace import compare_traces

DEFAULT_API = "http://127.0.0.1:8470"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ScenarioError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ConnectionError, urllib.error.URLError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twinline", description="digital twin of a desk-scale factory line"
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("init", help="write a runtime bundle with fresh app keys")
    p.add_argument("out_dir")
    p.add_argument("--config", help="factory config file")
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(handler=cmd_init)

    p = sub.add_parser("run", help="run a scenario and evaluate its assertions")
    p.add_argument("scenario", help="path or bundled name (e.g. pass_docking)")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="factory config file")
    p.add_argument("--out", help="output directory for traces and reports")
    p.add_argument("--var", action="append", default=[], metavar="K=V")
    p.add_argument("--distributed", action="store_true",
                   help="run each domain as a separate process over sockets")
    p.add_argument("--api", default="127.0.0.1:8470",
                   help="API address for the distributed topology")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("replay", help="re-run a recorded trace and compare")
    p.add_argument("trace", help="run directory or run.trace file")
    p.set_defaults(handler=cmd_replay)

    p = sub.add_parser("serve", help="host the live stack (or one role of it)")
    p.add_argument("--role", choices=["all", "device", "gateway", "core"], default="all")
    p.add_argument("--bundle", help="runtime bundle directory (from 'init')")
    p.add_argument("--config", help="factory config file (role=all)")
    p.add_argument("--api", default="127.0.0.1:8470")
    p.add_argument("--device-port", type=int, default=47808)
    p.add_argument("--gateway-port", type=int, default=47809)
    p.add_argument("--ui", help="static dashboard directory to serve at /ui/")
    p.add_argument("--pace", type=float, default=1.0,
                   help="simulation speed multiplier (role=all)")
    p.add_argument("--out", help="trace output directory (role=device)")
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("mission", help="submit a mission to a running stack")
    p.add_argument("kind", choices=["pass", "elev_up", "elev_down"])
    p.add_argument("--station", type=int, required=True)
    p.add_argument("--origin", choices=["hmi", "platform", "twin"], default="twin")
    p.add_argument("--api", default=DEFAULT_API)
    p.add_argument("--no-wait", action="store_true")
    p.set_defaults(handler=cmd_mission)

    p = sub.add_parser("status", help="query one mission record")
    p.add_argument("--mission", type=int, required=True)
    p.add_argument("--api", default=DEFAULT_API)
    p.set_defaults(handler=cmd_status)

    p = sub.add_parser("tags", help="read tags through the gateway")
    p.add_argument("prefix", nargs="?", default="")
    p.add_argument("--gateway", default="127.0.0.1:47809")
    p.add_argument("--key", help="key_id:secret (default: operator.cfg in --bundle)")
    p.add_argument("--bundle", default=".")
    p.set_defaults(handler=cmd_tags)

    p = sub.add_parser("interlock", help="toggle a station's operator mat")
    p.add_argument("station", type=int)
    p.add_argument("state", choices=["on", "off"])
    p.add_argument("--api", default=DEFAULT_API)
    p.set_defaults(handler=cmd_interlock)

    p = sub.add_parser("gateway", help="gateway administration")
    gsub = p.add_subparsers(required=True)
    pk = gsub.add_parser("key", help="manage app keys in a gateway config")
    ksub = pk.add_subparsers(required=True)
    pka = ksub.add_parser("add")
    pka.add_argument("name")
    pka.add_argument("--scopes", default="ReadTags,Subscribe")
    pka.add_argument("--config", required=True)
    pka.set_defaults(handler=cmd_key_add)
    pkr = ksub.add_parser("revoke")
    pkr.add_argument("name")
    pkr.add_argument("--config", required=True)
    pkr.set_defaults(handler=cmd_key_revoke)
    pa = gsub.add_parser("allow", help="append a CIDR to the whitelist")
    pa.add_argument("cidr")
    pa.add_argument("--config", required=True)
    pa.set_defaults(handler=cmd_allow)

    return parser


# -- init ---------------------------------------------------------------------


def cmd_init(args) -> int:
    from .harness.distributed import write_bundle

    config = FactoryConfig.from_file(args.config) if args.config else FactoryConfig()
    secrets = write_bundle(args.out_dir, config, host=args.host)
    print(f"bundle written to {args.out_dir}")
    for name, secret in secrets.items():
        print(f"  {name} secret: {secret}")
    return 0


# -- run / replay ----------------------------------------------------------------


def _resolve_scenario(name: str) -> str:
    if os.path.exists(name):
        return name
    bundled = bundled_scenario_path(name)
    if os.path.exists(bundled):
        return bundled
    raise FileNotFoundError(f"no scenario {name!r}")


def _parse_vars(entries: list[str]) -> dict[str, str]:
    out = {}
    for entry in entries:
        if "=" not in entry:
            raise ScenarioError(0, f"--var needs K=V, got {entry!r}")
        key, value = entry.split("=", 1)
        out[key] = value
    return out


def write_run_outputs(result, out_dir: str, scenario_text: str, variables: dict,
                      seed: int):
    from .harness.scenario import metric_value

    stack = result.stack
    header = {
        "name": result.scenario.name,
        "seed": seed,
        "mode": "inprocess",
        "vars": variables,
        "scenario": scenario_text,
    }
    stack.trace.write(out_dir, header)
    metrics = {
        "core": stack.core.metrics.to_dict(),
        "gateway": dict(stack.gateway.counters),
        "rtt_max_ms": metric_value(stack, "rtt.max_ms"),
        "divergence_max_mm": metric_value(stack, "divergence.max_mm"),
    }
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
    report = stack.core.kpi_report(0, stack.state.tick_index)
    with open(os.path.join(out_dir, "kpi.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.serialize())


def cmd_run(args) -> int:
    path = _resolve_scenario(args.scenario)
    variables = _parse_vars(args.var)
    scn = load_scenario(path, variables)
    seed = args.seed if args.seed is not None else scn.seed
    out_dir = args.out or os.path.join("runs", f"{scn.name}-{seed}")
    if args.distributed:
        return _run_distributed(scn, out_dir, args.api)
    base = FactoryConfig.from_file(args.config) if args.config else None
    result = run_scenario(scn, seed=seed, base_config=base)
    write_run_outputs(result, out_dir, scn.text, variables, seed)
    for failure in result.failures:
        print(f"FAILED {failure}", file=sys.stderr)
    print(f"{scn.name}: {'ok' if result.ok else 'FAILED'} "
          f"(seed {seed}, {result.stack.state.tick_index} ticks, out {out_dir})")
    return 0 if result.ok else 1


def cmd_replay(args) -> int:
    path = args.trace
    if os.path.isdir(path):
        path = os.path.join(path, "run.trace")
    run_dir = os.path.dirname(path) or "."
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if not lines or not lines[0]:
        print("verdict: Incomplete (empty trace)")
        return 1
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        print("verdict: Incomplete (unreadable header)")
        return 1
    if header.get("mode") != "inprocess":
        print("verdict: Incomplete (only in-process traces replay)")
        return 1
    recorded_run = [line for line in lines[1:] if line]
    events_path = os.path.join(run_dir, "events.trace")
    recorded_events = []
    if os.path.exists(events_path):
        with open(events_path, "r", encoding="utf-8") as fh:
            recorded_events = [line for line in fh.read().split("\n") if line]

    scn = parse_scenario(header["scenario"], header.get("vars", {}))
    result = run_scenario(scn, seed=header["seed"])
    fresh_run = result.stack.trace.run_lines()
    fresh_events = result.stack.trace.events_lines()

    verdict = compare_traces(recorded_run, fresh_run)
    if verdict.ok and recorded_events:
        verdict = compare_traces(recorded_events, fresh_events)
    if verdict.ok:
        print("verdict: Identical")
        return 0
    where = f" (tick {verdict.tick})" if verdict.tick is not None else ""
    print(f"verdict: {verdict.status.capitalize()}: {verdict.detail}{where}")
    return 1


# -- distributed run ----------------------------------------------------------------


def _wait_http(url: str, timeout_s: float = 15.0) -> bool:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        try:
            urllib.request.urlopen(url, timeout=1)
            return True
        except (urllib.error.URLError, ConnectionError, OSError):
            time.sleep(0.2)
    return False


def _run_distributed(scn, out_dir: str, api_addr: str = "127.0.0.1:8470") -> int:
    from .harness.distributed import write_bundle

    if scn.faults:
        print("error: fault injection requires the in-process topology", file=sys.stderr)
        return 2
    os.makedirs(out_dir, exist_ok=True)
    bundle = os.path.join(out_dir, "bundle")
    config = FactoryConfig().with_overrides(scn.config_pairs)
    host, _, port = api_addr.partition(":")
    write_bundle(bundle, config, ports={"api": int(port or 8470)})
    env = dict(os.environ)
    procs = []
    module = [sys.executable, "-m", "twinline.cli", "serve", "--bundle", bundle]
    try:
        procs.append(subprocess.Popen(
            module + ["--role", "device", "--out", out_dir], env=env
        ))
        time.sleep(0.5)
        procs.append(subprocess.Popen(module + ["--role", "gateway"], env=env))
        time.sleep(0.5)
        procs.append(subprocess.Popen(module + ["--role", "core"], env=env))
        api = f"http://{host or '127.0.0.1'}:{int(port or 8470)}"
        if not _wait_http(api + "/things"):
            print("error: distributed stack did not come up", file=sys.stderr)
            return 3
        print(f"distributed stack up; running {scn.ticks} ticks of schedule")
        failures = _drive_distributed(scn, api)
        for failure in failures:
            print(f"FAILED {failure}", file=sys.stderr)
        print(f"{scn.name} (distributed): {'ok' if not failures else 'FAILED'}")
        return 0 if not failures else 1
    finally:
        for proc in procs:
            proc.send_signal(signal.SIGTERM)
        for proc in procs:
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()


def _drive_distributed(scn, api: str) -> list[str]:
    tick_s = FactoryConfig().with_overrides(scn.config_pairs).tick_duration / 1000.0
    start = time.monotonic()
    mission_ids: list[int] = []
    for cmd in scn.schedule:
        due = start + cmd.tick * tick_s
        delay = due - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        if cmd.action == "mission":
            kind_text, station, origin = cmd.args
            body = {
                "kind": "PassDockingStation" if kind_text == "pass" else "ElevatorTransfer",
                "station": station,
                "origin": origin.value,
            }
            if kind_text != "pass":
                body["direction"] = "up" if kind_text == "elev_up" else "down"
            resp = _http_json(api + "/missions", body)
            mission_ids.append(resp.get("mission_id", -1))
        elif cmd.action == "interlock":
            station, engaged = cmd.args
            _http_json(api + "/interlocks", {"station": station, "engaged": engaged})
        else:
            print(f"note: raw writes are skipped in distributed runs ({cmd.args[0]})")
    remaining = start + scn.ticks * tick_s - time.monotonic()
    if remaining > 0:
        time.sleep(remaining)
    time.sleep(1.0)  # settle

    failures = []
    records = {}
    for mid in mission_ids:
        if mid >= 0:
            records[mid] = _http_get(api + f"/missions/{mid}")
    for exp in scn.expectations:
        if exp.kind == "mission":
            n, wanted, reason = exp.args
            if n < 1 or n > len(mission_ids):
                failures.append(f"line {exp.line_no}: mission {n} never submitted")
                continue
            record = records.get(mission_ids[n - 1]) or {}
            if record.get("state") != wanted:
                failures.append(
                    f"line {exp.line_no}: mission {n} state is {record.get('state')}"
                )
            elif reason and record.get("reject_reason") != reason:
                failures.append(
                    f"line {exp.line_no}: mission {n} reason is "
                    f"{record.get('reject_reason')!r}"
                )
        else:
            print(f"note: '{exp.describe()}' is only evaluated in-process")
    return failures


def _http_json(url: str, body: dict) -> dict:
    req = urllib.request.Request(
        url,
        data=json.dumps(body).encode("utf-8"),
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req, timeout=10) as resp:
        return json.loads(resp.read().decode("utf-8"))


def _http_get(url: str) -> dict:
    with urllib.request.urlopen(url, timeout=10) as resp:
        return json.loads(resp.read().decode("utf-8"))


# -- serve -------------------------------------------------------------------------


def cmd_serve(args) -> int:
    stop = threading.Event()

    def on_signal(signum, frame):
        stop.set()

    signal.signal(signal.SIGTERM, on_signal)
    signal.signal(signal.SIGINT, on_signal)

    if args.role == "all":
        from .harness.live import LiveStack

        host, _, port = args.api.partition(":")
        config = FactoryConfig.from_file(args.config) if args.config else FactoryConfig()
        ui_dir = args.ui or _default_ui_dir()
        live = LiveStack(
            config,
            api_host=host or "127.0.0.1",
            api_port=int(port or 8470),
            device_port=args.device_port,
            gateway_port=args.gateway_port,
            ui_dir=ui_dir,
            pace=args.pace,
        ).start()
        print(f"live stack: api {live.api.address}  "
              f"device :{live.device_tcp.port}  gateway :{live.gateway_tcp.port}")
        if ui_dir:
            print(f"dashboard: {live.api.address}/ui/")
        stop.wait()
        live.stop()
        return 0

    from .harness.distributed import CoreNode, DeviceNode, GatewayNode

    if not args.bundle:
        print("error: --role device|gateway|core needs --bundle", file=sys.stderr)
        return 2
    if args.role == "device":
        out = getattr(args, "out", None)
        node = DeviceNode(args.bundle, out).start()
    elif args.role == "gateway":
        node = GatewayNode(args.bundle).start()
    else:
        node = CoreNode(args.bundle, args.ui or _default_ui_dir()).start()
    print(f"{args.role} role up (bundle {args.bundle})")
    stop.wait()
    node.stop()
    return 0


def _default_ui_dir() -> str | None:
    here = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
    candidate = os.path.join(here, "frontend", "dist")
    return candidate if os.path.isdir(candidate) else None


# -- thin API wrappers ------------------------------------------------------------------


def cmd_mission(args) -> int:
    body = {
        "kind": "PassDockingStation" if args.kind == "pass" else "ElevatorTransfer",
        "station": args.station,
        "origin": args.origin,
    }
    if args.kind != "pass":
        body["direction"] = "up" if args.kind == "elev_up" else "down"
    resp = _http_json(args.api.rstrip("/") + "/missions", body)
    mission_id = resp["mission_id"]
    print(f"mission_id {mission_id} ({resp['state']})")
    if args.no_wait:
        return 0
    terminal = {"Completed", "Rejected", "TimedOut"}
    for _ in range(600):
        record = _http_get(args.api.rstrip("/") + f"/missions/{mission_id}")
        if record["state"] in terminal:
            reason = f" ({record['reject_reason']})" if record["reject_reason"] else ""
            print(f"{record['state']}{reason}")
            return 0 if record["state"] == "Completed" else 1
        time.sleep(0.1)
    print("still running", file=sys.stderr)
    return 1


def cmd_status(args) -> int:
    try:
        record = _http_get(args.api.rstrip("/") + f"/missions/{args.mission}")
    except urllib.error.HTTPError as err:
        if err.code == 404:
            print("UnknownMission", file=sys.stderr)
            return 1
        raise
    print(json.dumps(record, indent=2, sort_keys=True))
    return 0


def cmd_tags(args) -> int:
    from .protocol.client import TagClient
    from .protocol.net import TcpTagClient
    from .protocol.payload import serialize_value

    key = args.key
    if key is None:
        operator_cfg = os.path.join(args.bundle, "operator.cfg")
        if os.path.exists(operator_cfg):
            key = dict(load_kv_file(operator_cfg)).get("key", "")
    if not key or ":" not in key:
        print("error: need --key id:secret (or operator.cfg in --bundle)", file=sys.stderr)
        return 2
    key_id, _, secret = key.partition(":")
    host, _, port = args.gateway.partition(":")
    lock = threading.RLock()
    client = TagClient(lambda d: None, name="cli-tags")
    tcp = TcpTagClient(host or "127.0.0.1", int(port or 47809), lock, client.handle_bytes)
    client.send_bytes = tcp.send_bytes
    done = threading.Event()
    outcome: dict = {}

    def on_read(response):
        outcome["response"] = response
        done.set()

    def on_auth(response):
        if not response.ok:
            outcome["error"] = f"auth failed: {response.error_code}"
            done.set()
            return
        pattern = "DT/" + args.prefix + "*" if args.prefix else "DT/*"
        client.read([pattern], on_read)

    with lock:
        client.auth(key_id, secret, on_auth)
    if not done.wait(timeout=10):
        print("error: gateway did not answer", file=sys.stderr)
        tcp.close()
        return 3
    tcp.close()
    if "error" in outcome:
        print(f"error: {outcome['error']}", file=sys.stderr)
        return 3
    response = outcome["response"]
    if not response.ok:
        print(f"error: {response.error_code}", file=sys.stderr)
        return 1
    for name, vtype, value in response.assignments:
        bare = name[len("DT/"):] if name.startswith("DT/") else name
        print(f"{bare} = {serialize_value(vtype, value)}")
    return 0


def cmd_interlock(args) -> int:
    resp = _http_json(
        args.api.rstrip("/") + "/interlocks",
        {"station": args.station, "engaged": args.state == "on"},
    )
    print(f"station {resp['station']} mat {'engaged' if resp['engaged'] else 'clear'}")
    return 0


# -- gateway admin ---------------------------------------------------------------------


def cmd_key_add(args) -> int:
    from .gateway.keys import KeyStore
    from .protocol.server import ALL_SCOPES

    scopes = [s.strip() for s in args.scopes.split(",") if s.strip()]
    unknown = set(scopes) - ALL_SCOPES
    if unknown:
        print(f"error: unknown scopes {sorted(unknown)}", file=sys.stderr)
        return 2
    store = KeyStore()
    secret = store.add(args.name, scopes)
    line = store.config_lines()[0]
    with open(args.config, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")
    print(f"added key {args.name}; secret (save it now): {secret}")
    return 0


def cmd_key_revoke(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    prefix = f"key.{args.name} "
    kept = [l for l in lines if not l.startswith(prefix)]
    if len(kept) == len(lines):
        print(f"error: no key {args.name!r} in {args.config}", file=sys.stderr)
        return 1
    with open(args.config, "w", encoding="utf-8") as fh:
        fh.write("\n".join(kept))
    print(f"revoked key {args.name}")
    return 0


def cmd_allow(args) -> int:
    import ipaddress

    ipaddress.ip_network(args.cidr, strict=False)
    with open(args.config, "a", encoding="utf-8") as fh:
        fh.write(f"allow = {args.cidr}\n")
    print(f"whitelisted {args.cidr}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
