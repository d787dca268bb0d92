from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from chessy.bench import (
    LinkModel,
    SweepConfig,
    compute_overhead,
    evaluate,
    generate_workload,
    plot_data,
    relative_spread,
    run_sweep,
    sweep_rows,
    temponet_profile,
)
from chessy.core import ClockSpec, cycles_to_micros
from chessy.errors import DegenerateBaseline, EncodingBounds
from chessy.script import Compute, Read, Write

LINK = LinkModel("modeled", 80, Fraction(2, 5))


def test_generate_workload_shape():
    script = generate_workload(4, 0, 1)
    (loop,) = script.steps
    assert loop.count == 1 and len(loop.body) == 3
    assert isinstance(loop.body[0], Read) and isinstance(loop.body[1], Compute) and isinstance(loop.body[2], Write)
    assert generate_workload(4, 0, 0).n_accesses() == 0
    assert generate_workload(64, 10, 7).n_accesses() == 14


def test_generate_workload_bounds():
    with pytest.raises(EncodingBounds):
        generate_workload(70_000, 0, 1)


@pytest.mark.parametrize("variant, micros", [("tns", 280_000), ("tnb", 560_000)])
def test_temponet_compute_per_iteration(variant, micros):
    (loop,) = temponet_profile(variant, iterations=1).steps
    compute = [s for s in loop.body if isinstance(s, Compute)]
    assert sum(cycles_to_micros(s.cycles, ClockSpec(50_000_000)) for s in compute) == micros
    assert temponet_profile(variant, iterations=5).n_accesses() == 15


def test_temponet_bad_variant():
    with pytest.raises(ValueError):
        temponet_profile("huge")


def test_overhead_hand_arithmetic():
    # 3 x (80 ms + 0.4 us x bytes), bytes 8 + 4 + 2
    cost, pct = compute_overhead(280_000, [8, 4, 2], LINK)
    assert cost == pytest.approx(240 + 0.4 * 14 / 1000)
    assert pct == pytest.approx(100 * (240.0056 / 280), abs=1e-9)
    assert round(pct, 1) == 85.7
    _, tnb = compute_overhead(560_000, [8, 4, 2], LINK)
    assert round(tnb, 1) == 42.9


def test_overhead_degenerate_cases():
    assert compute_overhead(0, [], LINK) == (0.0, 0.0)
    with pytest.raises(DegenerateBaseline):
        compute_overhead(0, [4], LINK)


def test_measured_mode_needs_wall_times():
    with pytest.raises(ValueError):
        compute_overhead(100, [4], LinkModel("measured"))
    assert compute_overhead(1000, [4, 4], LinkModel("measured"), [0.25, 0.25]) == (0.5, 50.0)


def test_link_model_validation():
    with pytest.raises(ValueError):
        LinkModel("psychic")
    with pytest.raises(ValueError):
        LinkModel("modeled", -1, 0)


@given(st.lists(st.integers(1, 65536), max_size=50), st.integers(1, 10**9))
def test_modeled_cost_is_affine_closed_form(sizes, baseline):
    cost, pct = compute_overhead(baseline, sizes, LINK)
    exact = Fraction(80) * len(sizes) + Fraction(2, 5) * sum(sizes) / 1000
    assert cost == float(exact)
    assert pct == (0.0 if not sizes else float(exact * 100_000 / baseline))


def test_overhead_strictly_decreasing_in_compute():
    pcts = [evaluate(generate_workload(64, c, 3), ClockSpec(), LINK).overhead_pct for c in (0, 10**4, 10**5, 10**6, 10**7)]
    assert all(a > b for a, b in zip(pcts, pcts[1:]))


def test_doubling_compute_roughly_halves_overhead():
    a = evaluate(generate_workload(64, 10**8, 2), ClockSpec(), LINK).overhead_pct
    b = evaluate(generate_workload(64, 2 * 10**8, 2), ClockSpec(), LINK).overhead_pct
    assert b / a == pytest.approx(0.5, rel=1e-4)


def test_self_hosted_modeled_matches_in_process():
    script = temponet_profile("tns", iterations=2)
    a = evaluate(script, ClockSpec(), LINK)
    b = evaluate(script, ClockSpec(), LINK, self_hosted=True)
    assert (a.baseline_us, a.protocol_cost_ms, a.overhead_pct) == (b.baseline_us, b.protocol_cost_ms, b.overhead_pct)
    assert a.trace == b.trace


def test_measured_mode_reports_wall_per_access():
    rep = evaluate(generate_workload(16, 1000, 3), ClockSpec(), LinkModel("measured"))
    assert rep.n_accesses == 6
    assert all(a.wall_ms >= 0 for a in rep.accesses)
    assert rep.protocol_cost_ms == pytest.approx(sum(a.wall_ms for a in rep.accesses))


def test_sweep_csv_and_plot_data():
    cfg = SweepConfig(sizes=[4, 64], compute_cycles=[0, 1000], iterations=2)
    text = run_sweep(cfg)
    lines = text.splitlines()
    assert lines[0] == "size_bytes,compute_cycles,iterations,n_acc,baseline_us,cost_ms,overhead_pct"
    assert len(lines) == 5
    assert run_sweep(cfg) == text
    data = plot_data(sweep_rows(cfg))
    assert '"compute_cycles": 1000' in data


def test_relative_spread():
    assert relative_spread([1.0, 1.0]) == 0.0
    assert relative_spread([96.0, 100.0]) == pytest.approx(0.04)
