"""CLI surface: scenario runs, replay verdicts, live wrappers, admin."""

import json
import time

import pytest

from twinline import cli, tagnames
from twinline.config import FactoryConfig
from twinline.harness.live import LiveStack
from twinline.harness.scenario import ScenarioError, parse_scenario
from twinline.protocol.server import ALL_SCOPES


def test_run_and_replay_identical(tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["run", "pass_docking", "--out", str(out)]) == 0
    assert (out / "events.trace").exists()
    assert (out / "run.trace").exists()
    assert (out / "metrics.json").exists()
    assert (out / "kpi.txt").exists()
    assert cli.main(["replay", str(out)]) == 0
    assert "Identical" in capsys.readouterr().out


def test_replay_detects_mutation(tmp_path, capsys):
    out = tmp_path / "run"
    cli.main(["run", "pass_docking", "--out", str(out)])
    trace = out / "events.trace"
    lines = trace.read_text().split("\n")
    lines[3] = lines[3].replace("1", "0", 1) if "1" in lines[3] else lines[3] + "x"
    trace.write_text("\n".join(lines))
    assert cli.main(["replay", str(out)]) == 1
    assert "Divergent" in capsys.readouterr().out


def test_replay_detects_truncation(tmp_path, capsys):
    out = tmp_path / "run"
    cli.main(["run", "interlock_reject", "--out", str(out)])
    trace = out / "run.trace"
    lines = trace.read_text().strip().split("\n")
    trace.write_text("\n".join(lines[: len(lines) // 2]) + "\n")
    assert cli.main(["replay", str(out)]) == 1
    assert "Incomplete" in capsys.readouterr().out


def test_failed_assertion_nonzero_exit(tmp_path, capsys):
    scn = tmp_path / "bad.scn"
    scn.write_text(
        "name always_fails\nticks 10\nexpect metric plc.completed >= 5\n"
    )
    assert cli.main(["run", str(scn), "--out", str(tmp_path / "o")]) == 1
    assert "FAILED" in capsys.readouterr().err


def test_malformed_scenario_names_line():
    with pytest.raises(ScenarioError) as err:
        parse_scenario("name x\nat banana mission pass 2 twin\n")
    assert "line 2" in str(err.value)


def test_malformed_scenario_via_cli(tmp_path, capsys):
    scn = tmp_path / "broken.scn"
    scn.write_text("name x\nticks 10\nat 5 mission warp 2 twin\n")
    assert cli.main(["run", str(scn)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_var_substitution_and_undefined(tmp_path):
    scn = parse_scenario("var origin twin\nat 5 mission pass 2 $origin\n",
                         {"origin": "hmi"})
    assert scn.schedule[0].args[2].value == "hmi"
    with pytest.raises(ScenarioError):
        parse_scenario("at 5 mission pass 2 $nope\n")


def test_init_writes_bundle(tmp_path, capsys):
    assert cli.main(["init", str(tmp_path / "bundle")]) == 0
    for name in ("factory.cfg", "device.cfg", "gateway.cfg", "core.cfg", "operator.cfg"):
        assert (tmp_path / "bundle" / name).exists()
    factory = (tmp_path / "bundle" / "factory.cfg").read_text()
    assert "station_count = 6" in factory
    gateway = (tmp_path / "bundle" / "gateway.cfg").read_text()
    assert "sha256:" in gateway  # secrets at rest are hashed
    operator = (tmp_path / "bundle" / "operator.cfg").read_text()
    assert "key = operator:" in operator


def test_gateway_admin_commands(tmp_path, capsys):
    cfg = tmp_path / "gateway.cfg"
    cfg.write_text("listen = 127.0.0.1:47809\n")
    assert cli.main(["gateway", "key", "add", "viewer", "--scopes",
                     "ReadTags,Subscribe", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "secret" in out
    assert "key.viewer = sha256:" in cfg.read_text()
    assert cli.main(["gateway", "allow", "10.1.0.0/16", "--config", str(cfg)]) == 0
    assert "allow = 10.1.0.0/16" in cfg.read_text()
    assert cli.main(["gateway", "key", "revoke", "viewer", "--config", str(cfg)]) == 0
    assert "key.viewer" not in cfg.read_text()
    assert cli.main(["gateway", "key", "add", "bad", "--scopes", "Nope",
                     "--config", str(cfg)]) == 2


@pytest.fixture(scope="module")
def live():
    stack = LiveStack(
        FactoryConfig(pallet_count=3),
        api_port=0, device_port=0, gateway_port=0, pace=25.0,
    ).start()
    stack.operator_secret = stack.stack.north_keys.add("operator", ALL_SCOPES)
    yield stack
    stack.stop()


class TestAgainstLiveStack:
    def wait_blocked(self, live, station=2):
        deadline = time.monotonic() + 15
        while time.monotonic() < deadline:
            with live.runner.lock:
                for p in live.stack.state.pallets:
                    if p.state.value == "BlockedAtDock" and p.station == station:
                        return True
            time.sleep(0.05)
        return False

    def test_mission_wrapper_polls_to_completed(self, live, capsys):
        assert self.wait_blocked(live, 2)
        code = cli.main(
            ["mission", "pass", "--station", "2", "--origin", "hmi",
             "--api", live.api.address]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "mission_id" in out and "Completed" in out

    def test_status_unknown_mission(self, live, capsys):
        assert cli.main(["status", "--mission", "999", "--api", live.api.address]) == 1
        assert "UnknownMission" in capsys.readouterr().err

    def test_tags_prefix_lists_seven_lines(self, live, capsys):
        code = cli.main([
            "tags", "ST2.",
            "--gateway", f"127.0.0.1:{live.gateway_tcp.port}",
            "--key", f"operator:{live.operator_secret}",
        ])
        out = capsys.readouterr().out
        assert code == 0
        lines = [l for l in out.strip().split("\n") if l]
        assert len(lines) == 7
        names = sorted(line.split(" = ")[0] for line in lines)
        assert names == sorted(tagnames.station_names(2))

    def test_interlock_wrapper(self, live, capsys):
        assert cli.main(["interlock", "3", "on", "--api", live.api.address]) == 0
        assert "engaged" in capsys.readouterr().out
        time.sleep(0.3)
        with live.runner.lock:
            assert live.stack.plc.table.value(tagnames.operator_mat(3)) is True
        assert cli.main(["interlock", "3", "off", "--api", live.api.address]) == 0


def test_distributed_smoke(tmp_path):
    import threading as _threading
    import urllib.request

    scn = tmp_path / "short.scn"
    scn.write_text(
        "name dist_smoke\nseed 7\nticks 90\n"
        "at 40 mission pass 2 twin\n"
        "expect mission 1 Completed\n"
    )
    metrics_text = {}

    def poll_gateway_metrics():
        # grab the gateway role's metrics endpoint once north traffic flows
        deadline = time.monotonic() + 25
        while time.monotonic() < deadline:
            try:
                with urllib.request.urlopen("http://127.0.0.1:8471/metrics", timeout=1) as r:
                    body = r.read().decode()
                if "north_frames_in" in body:
                    metrics_text["body"] = body
                    return
            except OSError:
                pass
            time.sleep(0.3)

    poller = _threading.Thread(target=poll_gateway_metrics, daemon=True)
    poller.start()
    assert cli.main(["run", str(scn), "--distributed", "--out", str(tmp_path / "d")]) == 0
    assert (tmp_path / "d" / "events.trace").exists()
    poller.join(timeout=1)
    assert "north_frames_in" in metrics_text.get("body", "")
