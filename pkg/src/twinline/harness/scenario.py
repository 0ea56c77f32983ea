"""Scenario files: scripted runs with assertions.

Grammar (one directive per line, ``#`` comments):

    name <scenario-name>
    seed <int>
    ticks <int>                          # how many factory ticks to run
    var <key> <default>                  # substitution variable ($key)
    config <key> = <value>               # factory config override
    fault <link> <direction> delay <ms>
    fault <link> <direction> drop <probability>
    fault <link> <direction> sever <at-tick> <duration-ticks>
    at <tick> mission <pass|elev_up|elev_down> <station> <origin>
    at <tick> interlock <station> <on|off>
    at <tick> write <tag> B <0|1> [remote|local]
    expect mission <n> <State> [reason]  # n-th submitted mission's terminal state
    expect tag <name> <B|I|F|S> <value>  # final controller tag value
    expect metric <name> <op> <value>    # op: == != <= >= < >

Links: ``core-gateway`` | ``gateway-device``; directions ``to_south`` (toward
the controller) | ``to_north``. Metrics: ``trace.<record-type>``,
``core.<counter>``, ``gateway.<counter>``, ``plc.completed``, ``plc.failed``,
``rtt.max_ms``, ``rtt.min_ms``, ``divergence.max_mm``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from ..config import FactoryConfig
from ..core.missions import TwinMissionState
from ..plc import MissionKind, Origin, PlcMissionState
from ..plc.plc import MissionType
from ..protocol.payload import parse_value
from .stack import InProcessStack, StackOptions

LINKS = ("core-gateway", "gateway-device")
DIRECTIONS = ("to_south", "to_north")


class ScenarioError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"scenario line {line_no}: {message}")
        self.line_no = line_no


@dataclass
class Fault:
    link: str
    direction: str
    kind: str  # delay | drop | sever
    args: tuple


@dataclass
class Command:
    tick: int
    line_no: int
    action: str
    args: tuple


@dataclass
class Expectation:
    line_no: int
    kind: str  # mission | tag | metric
    args: tuple

    def describe(self) -> str:
        return f"expect {self.kind} " + " ".join(str(a) for a in self.args)


@dataclass
class Scenario:
    name: str = "unnamed"
    seed: int = 0
    ticks: int = 200
    variables: dict[str, str] = field(default_factory=dict)
    config_pairs: list[tuple[str, str]] = field(default_factory=list)
    faults: list[Fault] = field(default_factory=list)
    schedule: list[Command] = field(default_factory=list)
    expectations: list[Expectation] = field(default_factory=list)
    text: str = ""


def parse_scenario(text: str, overrides: dict[str, str] | None = None) -> Scenario:
    scn = Scenario(text=text)
    overrides = overrides or {}
    # first pass: declared variables, then apply overrides before substitution
    for line_no, raw in enumerate(text.split("\n"), start=1):
        parts = raw.split("#", 1)[0].split()
        if parts and parts[0] == "var":
            if len(parts) != 3:
                raise ScenarioError(line_no, "var needs: var <key> <default>")
            scn.variables[parts[1]] = parts[2]
    scn.variables.update(overrides)

    def substitute(token: str, line_no: int) -> str:
        if token.startswith("$"):
            key = token[1:]
            if key not in scn.variables:
                raise ScenarioError(line_no, f"undefined variable ${key}")
            return scn.variables[key]
        return token

    for line_no, raw in enumerate(text.split("\n"), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        parts = [substitute(p, line_no) for p in stripped.split()]
        head = parts[0]
        try:
            if head == "name":
                scn.name = parts[1]
            elif head == "seed":
                scn.seed = int(parts[1])
            elif head == "ticks":
                scn.ticks = int(parts[1])
            elif head == "var":
                pass
            elif head == "config":
                joined = " ".join(parts[1:])
                if "=" not in joined:
                    raise ScenarioError(line_no, "config needs: config <key> = <value>")
                key, value = joined.split("=", 1)
                scn.config_pairs.append((key.strip(), value.strip()))
            elif head == "fault":
                link, direction, kind = parts[1], parts[2], parts[3]
                if link not in LINKS:
                    raise ScenarioError(line_no, f"unknown link {link!r}")
                if direction not in DIRECTIONS:
                    raise ScenarioError(line_no, f"unknown direction {direction!r}")
                if kind == "delay":
                    args = (int(parts[4]),)
                elif kind == "drop":
                    p = float(parts[4])
                    if not 0.0 <= p <= 1.0:
                        raise ScenarioError(line_no, "drop probability must be in [0,1]")
                    args = (p,)
                elif kind == "sever":
                    args = (int(parts[4]), int(parts[5]))
                else:
                    raise ScenarioError(line_no, f"unknown fault kind {kind!r}")
                scn.faults.append(Fault(link, direction, kind, args))
            elif head == "at":
                tick = int(parts[1])
                action = parts[2]
                if action == "mission":
                    MissionType(parts[3])  # validated here, named in the error
                    args = (parts[3], int(parts[4]), Origin(parts[5]))
                elif action == "interlock":
                    args = (int(parts[3]), parts[4] == "on")
                elif action == "write":
                    _, value = parse_value(f"{parts[4]}:{parts[5]}")
                    remote = True
                    if len(parts) > 6:
                        remote = parts[6] != "local"
                    args = (parts[3], value, remote)
                else:
                    raise ScenarioError(line_no, f"unknown action {action!r}")
                scn.schedule.append(Command(tick, line_no, action, args))
            elif head == "expect":
                kind = parts[1]
                if kind == "mission":
                    args = (int(parts[2]), parts[3], parts[4] if len(parts) > 4 else "")
                elif kind == "tag":
                    _, value = parse_value(f"{parts[3]}:{parts[4]}")
                    args = (parts[2], value)
                elif kind == "metric":
                    args = (parts[2], parts[3], float(parts[4]))
                else:
                    raise ScenarioError(line_no, f"unknown expectation {kind!r}")
                scn.expectations.append(Expectation(line_no, kind, args))
            else:
                raise ScenarioError(line_no, f"unknown directive {head!r}")
        except ScenarioError:
            raise
        except (IndexError, ValueError) as err:
            raise ScenarioError(line_no, f"{stripped!r}: {err}") from None
    scn.schedule.sort(key=lambda c: (c.tick, c.line_no))
    return scn


def load_scenario(path: str, overrides: dict[str, str] | None = None) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read(), overrides)


def bundled_scenario_path(name: str) -> str:
    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    return os.path.join(here, "scenarios", name if name.endswith(".scn") else name + ".scn")


@dataclass
class RunResult:
    scenario: Scenario
    stack: InProcessStack
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def build_stack(scn: Scenario, seed: int | None = None,
                base_config: FactoryConfig | None = None) -> InProcessStack:
    config = (base_config or FactoryConfig()).with_overrides(scn.config_pairs)
    options = StackOptions(seed=scn.seed if seed is None else seed)
    return InProcessStack(config, options)


def run_scenario(
    scn: Scenario,
    seed: int | None = None,
    base_config: FactoryConfig | None = None,
) -> RunResult:
    stack = build_stack(scn, seed, base_config)
    stack.boot()
    for fault in scn.faults:
        if fault.kind == "delay":
            stack.inject_delay(fault.link, fault.direction, fault.args[0])
        elif fault.kind == "drop":
            stack.inject_drop(fault.link, fault.direction, fault.args[0])
        else:
            stack.inject_sever(fault.link, fault.direction, *fault.args)
    for cmd in scn.schedule:
        stack.at_tick(cmd.tick, _binder(stack, cmd))
    stack.run_ticks(scn.ticks)
    result = RunResult(scn, stack)
    for exp in scn.expectations:
        failure = _check(stack, exp)
        if failure:
            result.failures.append(f"line {exp.line_no}: {exp.describe()}: {failure}")
    return result


def _binder(stack: InProcessStack, cmd: Command):
    def run():
        if cmd.action == "mission":
            kind_text, station, origin = cmd.args
            kind = MissionKind(MissionType(kind_text), station)
            stack.submit_mission(origin, kind)
        elif cmd.action == "interlock":
            stack.set_operator_mat(*cmd.args)
        else:
            point, value, remote = cmd.args
            stack.remote_device_write(point, value, remote=remote)

    return run


def _mission_final_state(stack: InProcessStack, n: int) -> tuple[str, str]:
    subs = stack.submissions
    if n < 1 or n > len(subs):
        return "Missing", ""
    sub = subs[n - 1]
    if sub.twin_mission_id is not None:
        record = stack.core.missions.get(sub.twin_mission_id)
        state = record.state.value
        return state, record.reject_reason
    if sub.accepted is False:
        return "Rejected", sub.reason
    if sub.plc_mission_id is not None:
        record = stack.plc.mission_record(sub.plc_mission_id)
        state = record.state.value
        return state, record.fail_reason
    return "Unknown", ""


def metric_value(stack: InProcessStack, name: str) -> float:
    if name.startswith("trace."):
        wanted = name[len("trace."):]
        return sum(1 for r in stack.trace.records if r.get("type") == wanted)
    if name.startswith("core."):
        return stack.core.metrics.counters.get(name[len("core."):], 0)
    if name.startswith("gateway."):
        return stack.gateway.counters.get(name[len("gateway."):], 0)
    if name == "plc.completed":
        return sum(
            1
            for m in stack.plc.logic.missions.values()
            if m.state is PlcMissionState.COMPLETED
        )
    if name == "plc.failed":
        return sum(
            1
            for m in stack.plc.logic.missions.values()
            if m.state is PlcMissionState.FAILED
        )
    if name in ("rtt.max_ms", "rtt.min_ms"):
        samples = [
            r.replicated_at - r.timestamps[TwinMissionState.REQUESTED.value]
            for r in stack.core.missions.records.values()
            if r.replicated_at is not None
            and TwinMissionState.REQUESTED.value in r.timestamps
        ]
        if not samples:
            return -1
        return max(samples) if name == "rtt.max_ms" else min(samples)
    if name == "divergence.max_mm":
        return stack.core.metrics.divergence_max_mm
    raise KeyError(f"unknown metric {name!r}")


def _check(stack: InProcessStack, exp: Expectation) -> str | None:
    if exp.kind == "mission":
        n, wanted_state, wanted_reason = exp.args
        state, reason = _mission_final_state(stack, n)
        if state != wanted_state:
            return f"state is {state}({reason})"
        if wanted_reason and reason != wanted_reason:
            return f"reason is {reason!r}"
        return None
    if exp.kind == "tag":
        name, wanted = exp.args
        try:
            value = stack.plc.table.value(name)
        except KeyError:
            return "unknown tag"
        if value != wanted:
            return f"value is {value!r}"
        return None
    name, op, wanted = exp.args
    try:
        value = metric_value(stack, name)
    except KeyError as err:
        return str(err)
    ok = {
        "==": value == wanted,
        "!=": value != wanted,
        "<=": value <= wanted,
        ">=": value >= wanted,
        "<": value < wanted,
        ">": value > wanted,
    }.get(op)
    if ok is None:
        return f"unknown operator {op!r}"
    return None if ok else f"value is {value}"
