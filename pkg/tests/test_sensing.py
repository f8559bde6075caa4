import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snapbeam import bistability as bst
from snapbeam.cli import bundled_trace_path
from snapbeam.sensing import (CLOSED, CLOSING, OPEN, OPENING, GraspControllerConfig, GraspState,
                              PressureSample, TraceFormatError, controller_step, detect_peaks,
                              events_to_csv, first_event_time, read_trace_csv, run_controller,
                              synthetic_opening_trace, trace_to_csv)

ORDER = [OPEN, CLOSING, CLOSED, OPENING]


def samples(values, t0=0.0, dt=1.0):
    return [PressureSample(t0 + dt * i, float(p)) for i, p in enumerate(values)]


def test_zero_trace_stays_open():
    state = run_controller(samples([0.0] * 200), GraspControllerConfig("active", 10.0))
    assert state.phase == OPEN and state.events == ()


def test_debounce_example():
    cfg = GraspControllerConfig("active", vacuum_threshold=10, debounce=3)
    state = run_controller(samples([0, 0, 11, 11, 11, 11, 11, 11]), cfg)
    closes = [e for e in state.events if e.event == "close_triggered"]
    assert len(closes) == 1 and closes[0].t == 4.0 and closes[0].phase == CLOSING


def test_short_burst_is_ignored():
    cfg = GraspControllerConfig("active", vacuum_threshold=10, debounce=3)
    state = run_controller(samples([0, 11, 11, 0, 11, 11, 0]), cfg)
    assert state.events == ()


def test_full_cycle_with_hysteresis():
    cfg = GraspControllerConfig("active", vacuum_threshold=10, hysteresis_band=2, debounce=2)
    trace = samples([0, 12, 12, 12, 12, 9, 9, 9, 7, 7, 7, 7, 0])
    state = run_controller(trace, cfg)
    assert [e.phase for e in state.events] == [CLOSING, CLOSED, OPENING, OPEN]
    assert [e.t for e in state.events] == [2.0, 4.0, 9.0, 11.0]


def test_passive_mode_triggers_at_snap_force(arch):
    threshold = bst.trigger_force(arch)
    ramp = np.linspace(0.0, 2 * threshold, 101)
    cfg = GraspControllerConfig("passive", trigger_force_threshold=threshold)
    state = run_controller(samples(ramp), cfg)
    first = int(np.argmax(ramp >= threshold))
    assert state.events[0].t == first and state.events[0].phase == CLOSING
    assert state.phase == CLOSED  # the snapped palm stays latched


def test_controller_step_is_pure():
    cfg = GraspControllerConfig("active", 1.0)
    s0 = GraspState()
    s1 = controller_step(s0, PressureSample(0.0, 5.0), cfg)
    assert s0 == GraspState() and s1.phase == CLOSING


@pytest.mark.parametrize("kwargs", [dict(mode="manual"), dict(hysteresis_band=-1),
                                    dict(debounce=0)])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        GraspControllerConfig(**kwargs)


traces = st.lists(st.floats(0.0, 20.0), min_size=1, max_size=80)


@settings(max_examples=200, deadline=None)
@given(traces, st.floats(0.0, 20.0), st.floats(0.0, 5.0), st.integers(1, 4))
def test_transitions_follow_the_cycle(values, th, band, debounce):
    cfg = GraspControllerConfig("active", th, band, debounce)
    state = run_controller(samples(values), cfg)
    phases = [OPEN] + [e.phase for e in state.events]
    for a, b in zip(phases, phases[1:]):
        assert ORDER.index(b) == (ORDER.index(a) + 1) % 4
    assert run_controller(samples(values), cfg) == state


@settings(max_examples=200, deadline=None)
@given(traces, st.floats(0.0, 20.0), st.floats(0.0, 20.0), st.integers(1, 4))
def test_raising_threshold_never_closes_earlier(values, a, b, debounce):
    lo, hi = sorted((a, b))
    t_lo = first_event_time(run_controller(samples(values), GraspControllerConfig("active", lo,
                                                                                 0, debounce)))
    t_hi = first_event_time(run_controller(samples(values), GraspControllerConfig("active", hi,
                                                                                 0, debounce)))
    assert t_hi is None or (t_lo is not None and t_hi >= t_lo)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=10, max_size=100), st.integers(1, 3))
def test_noisy_plateau_gives_at_most_one_cycle(noise, debounce):
    th, amp = 10.0, 1.0
    trace = samples([0.0] * 3 + [th + amp * n for n in noise] + [0.0] * 5)
    cfg = GraspControllerConfig("active", th, hysteresis_band=1.5 * amp, debounce=debounce)
    events = run_controller(trace, cfg).events
    assert sum(e.phase == CLOSING for e in events) <= 1
    assert sum(e.phase == OPENING for e in events) <= 1


def test_bundled_trace_peaks():
    trace = read_trace_csv(bundled_trace_path().read_text())
    assert trace == synthetic_opening_trace()
    peaks = detect_peaks(trace, 2.0)
    assert [p for _, p in peaks] == [13.0, 11.0]
    t13, t11 = peaks[0][0], peaks[1][0]
    trough = min(s.p for s in trace if t13 < s.t < t11)
    assert trough == 6.0


def test_peak_examples():
    assert detect_peaks(samples([3.0] * 20), 0.5) == []
    pulse = samples([0, 1, 2, 3, 4, 5, 4, 3, 2, 1, 0])
    assert detect_peaks(pulse, 6.0) == []
    assert detect_peaks(pulse, 5.0) == [(5.0, 5.0)]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 20.0), min_size=3, max_size=80), st.floats(0.1, 10.0),
       st.floats(-100.0, 100.0), st.floats(0.0, 5.0))
def test_peaks_invariant_under_time_reindexing(values, a, b, prom):
    base = detect_peaks(samples(values), prom)
    moved = detect_peaks(samples(values, t0=b, dt=a), prom)
    assert [p for _, p in moved] == [p for _, p in base]


def test_trace_csv_round_trip_and_errors():
    trace = synthetic_opening_trace()
    assert read_trace_csv(trace_to_csv(trace)) == trace
    with pytest.raises(TraceFormatError) as info:
        read_trace_csv("t,p\n0,1\n1,abc\n")
    assert info.value.line == 3
    with pytest.raises(TraceFormatError, match="line 3"):
        read_trace_csv("t,p\n1,1\n1,2\n")
    with pytest.raises(TraceFormatError, match="line 1"):
        read_trace_csv("time,pressure\n0,1\n")
    with pytest.raises(TraceFormatError, match="line 2"):
        read_trace_csv("t,p\n0,1,2\n")


def test_event_csv_header():
    cfg = GraspControllerConfig("active", 1.0)
    text = events_to_csv(run_controller(samples([2.0, 2.0]), cfg).events)
    assert text.splitlines() == ["t,event,phase", "0,close_triggered,CLOSING", "1,closed,CLOSED"]
