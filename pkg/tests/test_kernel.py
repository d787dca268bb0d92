import pytest
from hypothesis import given, strategies as st

from chessy.core import U64_MAX, VpRequest
from chessy.errors import BusError
from chessy.kernel import AddressMap, SimKernel, load_address_map, parse_address_map
from chessy.peripherals import EmgSensor, RegisterFile, RobotArm


def test_advance_without_events():
    k = SimKernel()
    k.advance_to(100)
    assert k.now == 100


def test_same_time_events_fire_in_insertion_order():
    k = SimKernel()
    fired = []
    k.schedule(10, lambda: fired.append("A"))
    k.schedule(10, lambda: fired.append("B"))
    k.advance_to(10)
    assert fired == ["A", "B"]


def test_advance_into_the_past_is_a_noop():
    k = SimKernel()
    k.advance_to(100)
    k.advance_to(50)
    assert k.now == 100


def test_schedule_zero_then_advance_to_now():
    k = SimKernel()
    k.advance_to(7)
    fired = []
    k.schedule(0, lambda: fired.append(k.now))
    k.advance_to(k.now)
    assert fired == [7]


def test_schedule_overflow():
    k = SimKernel()
    k.advance_to(U64_MAX - 1)
    with pytest.raises(OverflowError):
        k.schedule(5, lambda: None)


@given(st.lists(st.integers(0, 50), max_size=60), st.lists(st.integers(0, 60), min_size=1, max_size=5))
def test_event_order_matches_stable_sort(deltas, stops):
    k = SimKernel()
    fired = []
    for i, d in enumerate(deltas):
        k.schedule(d, lambda i=i: fired.append(i))
    expected_all = [i for _, i in sorted((d, i) for i, d in enumerate(deltas))]
    horizon = 0
    for t in stops:
        horizon = max(horizon, t)
        k.advance_to(t)
        assert fired == [i for i in expected_all if deltas[i] <= horizon]
    before = list(fired)
    k.advance_to(horizon)
    assert fired == before and k.now == horizon


def _kernel():
    amap = AddressMap()
    amap.add(0x1000, 0x100, RegisterFile(0x100, read_latency_us=3, write_latency_us=4))
    return SimKernel(amap)


def test_dispatch_reads_back_written_cell_and_advances_time():
    k = _kernel()
    k.advance_to(50)
    k.dispatch(VpRequest(False, 0x1010, 1, 50, b"\xab"))
    assert k.now == 54
    resp = k.dispatch(VpRequest(True, 0x1010, 1, 54))
    assert resp.payload == b"\xab" and resp.simulated_delay == 3
    assert k.now == 54 + 3


def test_dispatch_unmapped_is_bus_error():
    with pytest.raises(BusError):
        _kernel().dispatch(VpRequest(True, 0x5000, 4, 0))


def test_dispatch_straddling_window_end_is_bus_error():
    with pytest.raises(BusError):
        _kernel().dispatch(VpRequest(True, 0x10FE, 4, 0))


def test_open_bus_mode():
    k = _kernel()
    k.open_bus = True
    assert k.dispatch(VpRequest(True, 0x5000, 4, 0)).payload == bytes(4)
    assert k.dispatch(VpRequest(False, 0x5000, 2, 0, b"xy")).simulated_delay == 0


def test_overlapping_mappings_rejected():
    amap = AddressMap()
    amap.add(0, 0x100, RobotArm())
    with pytest.raises(ValueError):
        amap.add(0x80, 0x100, RobotArm())
    with pytest.raises(ValueError):
        amap.add(0x200, 0, RobotArm())


def test_parse_address_map_file():
    amap = parse_address_map(
        "# comment\n"
        "0x60000000 0x1000 emg period_us=500 sample_bytes=4 seed=9\n"
        "0x60010000 0x1000 arm latency_us=25\n"
        "0x60020000 0x100 regfile read_latency_us=1 write_latency_us=2\n"
    )
    emg, arm, rf = (m.device for m in amap)
    assert isinstance(emg, EmgSensor) and emg.sample_period_us == 500 and emg.sample_bytes == 4 and emg.seed == 9
    assert isinstance(arm, RobotArm) and arm.actuation_latency_us == 25
    assert isinstance(rf, RegisterFile) and rf.size == 0x100 and rf.write_latency_us == 2


@pytest.mark.parametrize("line", ["0x0 0x10", "0x0 0x10 gpu", "0x0 0x10 arm latency", "0x0 0x10 arm bogus=1"])
def test_parse_address_map_errors(line):
    with pytest.raises(ValueError):
        parse_address_map(line)


def test_default_map():
    amap = load_address_map(None)
    assert [m.base for m in amap] == [0x60000000, 0x60010000, 0x60020000]
    assert [m.device.kind for m in amap] == ["emg", "arm", "regfile"]
