import pytest
from hypothesis import given, strategies as st

from chessy.core import VpRequest
from chessy.errors import BusError, MalformedRequest
from chessy.peripherals import EmgSensor, RegisterFile, RobotArm


def rd(addr, size, t=0):
    return VpRequest(True, addr, size, t)


def wr(addr, data, t=0):
    return VpRequest(False, addr, len(data), t, bytes(data))


def test_regfile_write_then_read():
    rf = RegisterFile(64, read_latency_us=250, write_latency_us=7)
    assert rf.handle(wr(0, [1, 2, 3, 4]), 0).simulated_delay == 7
    resp = rf.handle(rd(0, 4), 0)
    assert resp.payload == bytes([1, 2, 3, 4])
    assert resp.simulated_delay == 250


def test_regfile_out_of_range():
    rf = RegisterFile(16)
    with pytest.raises(BusError):
        rf.handle(rd(16, 1), 0)
    with pytest.raises(BusError):
        rf.handle(rd(14, 4), 0)


ops = st.lists(
    st.tuples(st.booleans(), st.integers(0, 63), st.integers(1, 16), st.binary(min_size=16, max_size=16)),
    max_size=40,
)


@given(ops)
def test_regfile_matches_flat_array(seq):
    rf = RegisterFile(64, 0, 0)
    flat = [0] * 64
    for is_read, off, size, blob in seq:
        if off + size > 64:
            with pytest.raises(BusError):
                rf.handle(rd(off, size), 0)
            continue
        if is_read:
            assert rf.handle(rd(off, size), 0).payload == bytes(flat[off:off + size])
        else:
            rf.handle(wr(off, blob[:size]), 0)
            flat[off:off + size] = blob[:size]


def _emg_delay_by_enumeration(period, epoch, first, n, now):
    times = [epoch + k * period for k in range(first + n)]
    return max(0, max(times[first:first + n]) - now)


def test_emg_first_window_waits_for_last_sample():
    emg = EmgSensor(sample_period_us=1000, sample_bytes=2, seed=3)
    resp = emg.handle(rd(0, 8), 0)
    assert resp.simulated_delay == _emg_delay_by_enumeration(1000, 0, 0, 4, 0) == 3000
    assert len(resp.payload) == 8


def test_emg_late_read_does_not_wait():
    emg = EmgSensor(sample_period_us=1000, sample_bytes=2)
    assert emg.handle(rd(0, 8), 10_000).simulated_delay == 0


def test_emg_rejects_write_and_bad_size():
    emg = EmgSensor(sample_bytes=2)
    with pytest.raises(BusError):
        emg.handle(wr(0, b"ab"), 0)
    with pytest.raises(MalformedRequest):
        emg.handle(rd(0, 3), 0)


@given(st.integers(0, 2**32), st.lists(st.integers(1, 8), max_size=10))
def test_emg_stream_depends_only_on_seed(seed, windows):
    a, b = EmgSensor(seed=seed), EmgSensor(seed=seed)
    one = b"".join(a.handle(rd(0, 2 * n), 0).payload for n in windows)
    whole = b.handle(rd(0, 2 * sum(windows)), 0).payload if windows else b""
    assert one == whole


@given(st.integers(1, 5000), st.integers(0, 5000), st.lists(st.tuples(st.integers(1, 6), st.integers(0, 20_000)), max_size=12))
def test_emg_never_returns_future_samples(period, epoch, reads):
    emg = EmgSensor(sample_period_us=period, epoch=epoch)
    now = 0
    for n, gap in reads:
        now += gap
        first = emg.consumed
        resp = emg.handle(rd(0, 2 * n), now)
        assert now + resp.simulated_delay >= emg.available_at(first + n - 1)
        assert resp.simulated_delay == _emg_delay_by_enumeration(period, epoch, first, n, now)
        now += resp.simulated_delay


def test_arm_logs_at_actuation_time():
    arm = RobotArm(actuation_latency_us=500)
    resp = arm.handle(wr(0, b"\x01\x02"), 100)
    assert resp.simulated_delay == 500 and resp.payload == b""
    arm.handle(wr(0, b"\x03\x04"), 600)
    assert arm.command_log == [(600, b"\x01\x02"), (1100, b"\x03\x04")]
    assert arm.last_command == b"\x03\x04"
    assert arm.log_csv() == "time_us,hex_payload\n600,0102\n1100,0304\n"


def test_arm_rejects_read():
    with pytest.raises(BusError):
        RobotArm().handle(rd(0, 2), 0)
