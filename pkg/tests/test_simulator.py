import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import closed_form_savings
from vrtiles.errors import InfeasibleBudgetError, TraceError
from vrtiles.manifest import VideoSource, build_tileset, load_catalog
from vrtiles.simulator import (
    SessionConfig,
    Trace,
    TraceSample,
    compare_benchmarks,
    reference_budget,
    run_session,
    synthesize_tour_trace,
)
from vrtiles.viewport import EulerAngles

DEG = math.pi / 180
WALDO = VideoSource("Waldo", 3840, 1920, 20.0, 30)
STATIC_FRONT = Trace((TraceSample(0, EulerAngles()),), 30_000)


@pytest.fixture(scope="module")
def waldo(hexaface):
    return build_tileset(WALDO, hexaface)


def test_tour_trace_shape(hexaface):
    t = synthesize_tour_trace(hexaface, dwell_ms=5000)
    assert t.duration_ms == 30_000 and len(t.samples) == 6
    assert [s.t_ms for s in t.samples] == [0, 5000, 10000, 15000, 20000, 25000]
    assert t.samples[4].orientation.pitch == pytest.approx(math.pi / 2)


def test_single_segment_trace(hexaface):
    t = synthesize_tour_trace(hexaface, [0], 1000)
    assert t.duration_ms == 1000
    assert t.orientation_at(0) == t.orientation_at(999) == EulerAngles(0.0, 0.0, 0.0)


def test_duplicate_dwell_merges(hexaface, waldo):
    twice = synthesize_tour_trace(hexaface, ["front", "front"], 3000)
    once = Trace((TraceSample(0, EulerAngles()),), 6000)
    a = run_session(waldo, hexaface, twice)
    b = run_session(waldo, hexaface, once)
    assert a.adaptive_bits == b.adaptive_bits and a.baseline_bits == b.baseline_bits


def test_trace_validation():
    with pytest.raises(TraceError):
        Trace((TraceSample(5, EulerAngles()),), 100)
    with pytest.raises(TraceError):
        Trace((TraceSample(0, EulerAngles()), TraceSample(0, EulerAngles())), 100)
    with pytest.raises(TraceError):
        Trace((TraceSample(0, EulerAngles()), TraceSample(200, EulerAngles())), 100)
    with pytest.raises(TraceError):
        synthesize_tour_trace(None, [0], 0)


def test_trace_csv_round_trip(hexaface):
    t = synthesize_tour_trace(hexaface, dwell_ms=5000)
    again = Trace.from_csv(t.to_csv(), duration_ms=t.duration_ms)
    assert [s.t_ms for s in again.samples] == [s.t_ms for s in t.samples]
    for a, b in zip(again.samples, t.samples):
        assert a.orientation.yaw == pytest.approx(b.orientation.yaw, abs=1e-12)
        assert a.orientation.pitch == pytest.approx(b.orientation.pitch, abs=1e-12)
    with pytest.raises(TraceError, match="header"):
        Trace.from_csv("0,0,0,0\n")
    with pytest.raises(TraceError, match="line 2"):
        Trace.from_csv("t_ms,yaw_deg,pitch_deg,roll_deg\n0,zero,0,0\n")
    held = Trace.from_csv("t_ms,yaw_deg,pitch_deg,roll_deg\n0,0,0,0\n500,90,0,0\n")
    assert held.duration_ms == 1500


def test_static_front_96(hexaface, waldo):
    report = run_session(waldo, hexaface, STATIC_FRONT, SessionConfig(packing=False))
    for r in report.intervals:
        assert set(r.visible) == {hexaface.by_name(n).segment_id for n in ("front", "left", "right")}
        assert {t.tile_id: t.level for t in r.plan.tiles} == {0: 1, 1: 1, 2: 4, 3: 1, 4: 4, 5: 4}
    want = closed_form_savings(Fraction(3, 8))
    assert want == 1 - (Fraction(15, 2) + Fraction(25, 2) / 16) / 20
    assert report.savings_ratio == pytest.approx(float(want), abs=1e-12)
    assert round(report.savings_ratio, 3) == 0.586


def test_static_front_90(hexaface, waldo):
    cfg = SessionConfig(packing=False, hfov=90 * DEG)
    report = run_session(waldo, hexaface, STATIC_FRONT, cfg)
    assert all(r.visible == (0,) for r in report.intervals)
    want = closed_form_savings(Fraction(1, 8))
    assert want == 1 - (Fraction(5, 2) + Fraction(35, 2) / 16) / 20
    assert report.savings_ratio == pytest.approx(float(want), abs=1e-12)
    assert round(report.savings_ratio, 3) == 0.820


def test_infinite_budget_matches_baseline(hexaface, waldo):
    report = run_session(waldo, hexaface, STATIC_FRONT, SessionConfig(budget=math.inf))
    assert report.savings_ratio == 0.0
    assert report.adaptive_bits == report.baseline_bits


def test_baseline_bits_formula(hexaface, waldo):
    report = run_session(waldo, hexaface, synthesize_tour_trace(hexaface), SessionConfig())
    assert report.baseline_bits == 30 * 20_000_000


def test_reference_budget_value(hexaface, waldo):
    assert reference_budget(waldo, hexaface, 96 * DEG, 90 * DEG) == Fraction(15, 2) + Fraction(25, 2) / 16


def test_viewport_budget_mode(hexaface, waldo):
    report = run_session(waldo, hexaface, synthesize_tour_trace(hexaface), SessionConfig(budget="viewport"))
    assert 0.5 < report.savings_ratio < 0.85


def test_infeasible_interval_is_named(hexaface, waldo):
    budgets = [5.0] * 10 + [0.5] + [5.0] * 19
    with pytest.raises(InfeasibleBudgetError) as info:
        run_session(waldo, hexaface, STATIC_FRONT, SessionConfig(budget=budgets))
    assert info.value.interval == 10
    with pytest.raises(ValueError):
        run_session(waldo, hexaface, STATIC_FRONT, SessionConfig(budget=[5.0] * 3))


def test_sample_and_hold(hexaface, waldo):
    # a change half-way through an interval only shows up at the next boundary
    t = Trace((TraceSample(0, EulerAngles()), TraceSample(1500, EulerAngles(math.pi, 0, 0))), 3000)
    r = run_session(waldo, hexaface, t)
    back = hexaface.by_name("back").segment_id
    assert [back in rec.visible for rec in r.intervals] == [False, False, True]


def test_trace_invariance(hexaface, waldo):
    coarse = Trace((TraceSample(0, EulerAngles()), TraceSample(2000, EulerAngles(1.0, 0.2, 0))), 4000)
    fine = Trace(
        (
            TraceSample(0, EulerAngles()),
            TraceSample(1000, EulerAngles()),
            TraceSample(2000, EulerAngles(1.0, 0.2, 0)),
            TraceSample(3000, EulerAngles(1.0, 0.2, 0)),
        ),
        4000,
    )
    a, b = run_session(waldo, hexaface, coarse), run_session(waldo, hexaface, fine)
    assert a.to_json()["intervals"] == b.to_json()["intervals"]
    assert a.savings_ratio == b.savings_ratio


def test_partial_last_interval(hexaface, waldo):
    t = Trace((TraceSample(0, EulerAngles()),), 2500)
    r = run_session(waldo, hexaface, t)
    assert [rec.duration_ms for rec in r.intervals] == [1000, 1000, 500]
    assert r.baseline_bits == 2.5 * 20_000_000


def test_compare_benchmarks(hexaface):
    result = compare_benchmarks(load_catalog(), hexaface=hexaface)
    assert len(result.rows) == 5 and not result.failures
    assert all(0.5 < r["savings_ratio"] < 0.85 for r in result.rows)
    assert result.to_csv().splitlines()[0] == "video,adaptive_mbit,baseline_mbit,savings_ratio,mean_quality"


def test_single_video_catalog(hexaface, waldo):
    result = compare_benchmarks([WALDO], hexaface=hexaface)
    tour = synthesize_tour_trace(hexaface)
    assert result.rows[0]["savings_ratio"] == run_session(waldo, hexaface, tour).savings_ratio


def test_failures_are_collected(hexaface):
    cfg = SessionConfig(budget=0.1)
    result = compare_benchmarks([WALDO, VideoSource("Small", 1920, 960, 0.2, 30)], cfg, hexaface)
    assert [f["video"] for f in result.failures] == ["Waldo"]
    assert [r["video"] for r in result.rows] == ["Small"]
    with pytest.raises(ValueError):
        compare_benchmarks([], hexaface=hexaface)


def test_scale_invariance_two_videos(hexaface):
    a = VideoSource("a", 3840, 1920, 20.0, 30)
    b = VideoSource("b", 3840, 1920, 7.3, 30)
    result = compare_benchmarks([a, b], hexaface=hexaface)
    assert result.rows[0]["savings_ratio"] == result.rows[1]["savings_ratio"]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(1.3, 25.0), min_size=2, max_size=2).map(sorted), st.booleans())
def test_monotone_in_budget(hexaface, waldo, budgets, packing):
    lo, hi = budgets
    tour = synthesize_tour_trace(hexaface, dwell_ms=2000)
    a = run_session(waldo, hexaface, tour, SessionConfig(budget=lo, packing=packing))
    b = run_session(waldo, hexaface, tour, SessionConfig(budget=hi, packing=packing))
    assert b.savings_ratio <= a.savings_ratio
    assert a.adaptive_bits <= a.baseline_bits


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 100.0), st.sampled_from([90.0, 96.0, 120.0]))
def test_source_bitrate_scale_invariance(hexaface, rate, hfov):
    trace = synthesize_tour_trace(hexaface, dwell_ms=1000)
    cfg = SessionConfig(hfov=hfov * DEG)
    ref = run_session(build_tileset(WALDO, hexaface), hexaface, trace, cfg).savings_ratio
    scaled = run_session(build_tileset(VideoSource("x", 3840, 1920, rate, 30), hexaface), hexaface, trace, cfg)
    assert scaled.savings_ratio == pytest.approx(ref, abs=1e-12)


def test_session_config_validation():
    for bad in (dict(interval_ms=0), dict(budget=-1.0), dict(budget="huge"), dict(baseline_level=0), dict(coefficients=(1, 2, 3))):
        with pytest.raises(ValueError):
            SessionConfig(**bad)


def test_report_json_is_plain(hexaface, waldo):
    report = run_session(waldo, hexaface, STATIC_FRONT)
    text = json.dumps(report.to_json(), sort_keys=True)
    assert json.loads(text)["totals"]["savings_ratio"] == report.savings_ratio
