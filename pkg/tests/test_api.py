"""User-domain HTTP API against a live (fast-paced) stack."""

import json
import time
import urllib.error
import urllib.request

import pytest

from twinline.config import FactoryConfig
from twinline.harness.live import LiveStack


@pytest.fixture(scope="module")
def live():
    stack = LiveStack(
        FactoryConfig(pallet_count=3), api_port=0, device_port=0, gateway_port=0,
        pace=25.0,
    ).start()
    yield stack
    stack.stop()


def get(live, path):
    with urllib.request.urlopen(live.api.address + path, timeout=10) as resp:
        return json.loads(resp.read().decode())


def post(live, path, body):
    req = urllib.request.Request(
        live.api.address + path,
        data=json.dumps(body).encode(),
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req, timeout=10) as resp:
        return json.loads(resp.read().decode())


def wait_blocked(live, station=2, timeout_s=15.0):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        thing = get(live, f"/things/ST{station}")
        if thing["properties"]["PALLET_A"]["value"]:
            return True
        time.sleep(0.05)
    return False


def test_things_snapshot(live):
    payload = get(live, "/things")
    ids = [t["thing_id"] for t in payload["things"]]
    assert ids == ["FLOWS", "LINE", "ST1", "ST2", "ST3", "ST4", "ST5", "ST6"]
    st1 = get(live, "/things/ST1")
    assert set(st1["properties"]) >= {"PALLET_A", "STOP", "RFID", "MISSION"}


def test_thing_not_found(live):
    with pytest.raises(urllib.error.HTTPError) as err:
        get(live, "/things/ST99")
    assert err.value.code == 404


def test_mission_lifecycle_over_http(live):
    assert wait_blocked(live, 2)
    resp = post(live, "/missions", {"kind": "PassDockingStation", "station": 2,
                                    "origin": "Platform"})
    assert "mission_id" in resp
    record = live.wait_mission_terminal(resp["mission_id"])
    assert record is not None and record["state"] == "Completed"
    fetched = get(live, f"/missions/{resp['mission_id']}")
    assert fetched["state"] == "Completed"
    assert fetched["origin"] == "platform"
    assert fetched["replicated_at"] is not None


def test_elevator_mission_over_http(live):
    assert wait_blocked(live, 5)
    up = post(live, "/missions", {"kind": "ElevatorTransfer", "station": 5,
                                  "direction": "up", "origin": "twin"})
    record = live.wait_mission_terminal(up["mission_id"])
    assert record is not None and record["state"] == "Completed"
    elev_b = get(live, "/things/ST5")["properties"]["ELEV_B"]["value"]
    assert elev_b is True
    down = post(live, "/missions", {"kind": "ElevatorTransfer", "station": 5,
                                    "direction": "down", "origin": "twin"})
    record = live.wait_mission_terminal(down["mission_id"])
    assert record is not None and record["state"] == "Completed"


def test_mission_validation_errors(live):
    for body, fragment in [
        ({"kind": "Nope", "station": 1}, "unknown kind"),
        ({"kind": "PassDockingStation", "station": "x"}, "station"),
        ({"kind": "PassDockingStation", "station": 1, "origin": "alien"}, "origin"),
    ]:
        with pytest.raises(urllib.error.HTTPError) as err:
            post(live, "/missions", body)
        assert err.value.code == 400
        assert fragment in json.loads(err.value.read().decode())["error"]


def test_unknown_mission_404(live):
    with pytest.raises(urllib.error.HTTPError) as err:
        get(live, "/missions/99999")
    assert err.value.code == 404


def test_estimates_and_metrics(live):
    est = get(live, "/estimates")
    assert len(est["pallets"]) == 3
    assert {p["rfid"] for p in est["pallets"]} == {"P-001", "P-002", "P-003"}
    metrics = get(live, "/metrics/sync")
    assert "telemetry_latency" in metrics and "mission_rtt" in metrics


def test_kpi_window(live):
    time.sleep(0.3)
    kpi = get(live, "/kpi?from=0&to=100")
    assert "energy_uj" in kpi and "material_in" in kpi
    assert sum(kpi["energy_uj"].values()) > 0


def test_interlock_roundtrip(live):
    resp = post(live, "/interlocks", {"station": 4, "engaged": True})
    assert resp == {"station": 4, "engaged": True}
    time.sleep(0.3)
    mat = get(live, "/things/ST4")["properties"]["OPERATOR_MAT"]["value"]
    assert mat is True
    post(live, "/interlocks", {"station": 4, "engaged": False})


def test_gateway_metrics_text(live):
    with urllib.request.urlopen(live.api.address + "/metrics", timeout=10) as resp:
        text = resp.read().decode()
    assert any(line.startswith("north_frames_in ") for line in text.split("\n"))


def test_stream_emits_events(live):
    stream = urllib.request.urlopen(live.api.address + "/stream", timeout=10)
    types = set()
    for _ in range(40):
        line = stream.readline()
        if not line.strip():
            continue
        types.add(json.loads(line)["type"])
        if "estimates" in types and "hello" in types:
            break
    stream.close()
    assert "hello" in types
    assert "estimates" in types
