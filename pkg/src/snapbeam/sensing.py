"""Grasp-mode controller emulation and pressure-trace peak analysis.

The controller is a four-phase cycle OPEN -> CLOSING -> CLOSED -> OPENING
-> OPEN driven one sample at a time.

* active mode: the input is the palm-chamber vacuum reading (magnitude
  positive). Closing starts once the reading has exceeded the threshold
  for ``debounce`` consecutive samples; reopening needs ``debounce``
  consecutive readings below ``threshold - hysteresis_band``.
* passive mode: the input is the contact force on the palm. Closing starts
  on the first sample at or above ``trigger_force_threshold`` (the snap
  condition). A snapped palm stays latched closed.

CLOSING and OPENING are actuation transients that last ``debounce``
samples.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import find_peaks

OPEN, CLOSING, CLOSED, OPENING = "OPEN", "CLOSING", "CLOSED", "OPENING"
NEXT_PHASE = {OPEN: CLOSING, CLOSING: CLOSED, CLOSED: OPENING, OPENING: OPEN}
EVENT_NAMES = {CLOSING: "close_triggered", CLOSED: "closed",
               OPENING: "open_triggered", OPEN: "opened"}


class TraceFormatError(ValueError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class PressureSample:
    t: float
    p: float


@dataclass(frozen=True)
class GraspControllerConfig:
    mode: str = "active"
    vacuum_threshold: float = 10.0
    hysteresis_band: float = 0.0
    debounce: int = 1
    trigger_force_threshold: float = math.inf

    def __post_init__(self):
        if self.mode not in ("active", "passive"):
            raise ValueError(f"mode must be 'active' or 'passive', got {self.mode!r}")
        if self.hysteresis_band < 0:
            raise ValueError("hysteresis_band must be >= 0")
        if self.debounce < 1:
            raise ValueError("debounce must be >= 1")


@dataclass(frozen=True)
class Event:
    t: float
    event: str
    phase: str


@dataclass(frozen=True)
class GraspState:
    phase: str = OPEN
    above_count: int = 0
    events: tuple = ()


def _advance(state: GraspState, t) -> GraspState:
    phase = NEXT_PHASE[state.phase]
    return GraspState(phase, 0, state.events + (Event(t, EVENT_NAMES[phase], phase),))


def controller_step(state: GraspState, sample: PressureSample,
                    config: GraspControllerConfig) -> GraspState:
    """Feed one sample; returns the new state (inputs are not modified)."""
    phase, count = state.phase, state.above_count
    if phase in (CLOSING, OPENING):
        count += 1
        if count >= config.debounce:
            return _advance(state, sample.t)
        return replace(state, above_count=count)

    if config.mode == "passive":
        if phase == OPEN and sample.p >= config.trigger_force_threshold:
            return _advance(state, sample.t)
        return state

    if phase == OPEN:
        hit = sample.p > config.vacuum_threshold
    else:  # CLOSED
        hit = sample.p < config.vacuum_threshold - config.hysteresis_band
    count = count + 1 if hit else 0
    if count >= config.debounce:
        return _advance(state, sample.t)
    return replace(state, above_count=count)


def run_controller(trace, config: GraspControllerConfig,
                   state: GraspState = GraspState()) -> GraspState:
    for sample in trace:
        state = controller_step(state, sample, config)
    return state


def first_event_time(state: GraspState, event=EVENT_NAMES[CLOSING]):
    for e in state.events:
        if e.event == event:
            return e.t
    return None


def detect_peaks(trace, min_prominence: float) -> list:
    """Local maxima with topographic prominence >= ``min_prominence``, in time order."""
    if not trace:
        return []
    p = np.array([s.p for s in trace], dtype=float)
    idx, _ = find_peaks(p, prominence=min_prominence)
    return [(trace[i].t, trace[i].p) for i in idx]


def synthetic_opening_trace(ripple: float = 0.3) -> list:
    """Deterministic opening-phase trace with two pressure peaks (13 then 11)
    separated by a trough at 6, plus a small ripple away from the extrema."""
    t = np.arange(300, dtype=float)
    knots_t = [0, 40, 80, 130, 180, 240, 299]
    knots_p = [1.0, 5.0, 13.0, 6.0, 11.0, 2.0, 1.0]
    p = np.interp(t, knots_t, knots_p)
    window = np.ones_like(t)
    for c in (80, 130, 180):
        window[np.abs(t - c) <= 10] = 0.0
    p = p + ripple * window * np.sin(1.3 * t)
    return [PressureSample(float(ti), float(pi)) for ti, pi in zip(t, p)]


def read_trace_csv(text: str) -> list:
    """Parse a ``t,p`` CSV; raises :class:`TraceFormatError` naming the line."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["t", "p"]:
        raise TraceFormatError(1, "expected header 't,p'")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise TraceFormatError(lineno, f"expected 2 fields, got {len(row)}")
        try:
            t, p = float(row[0]), float(row[1])
        except ValueError:
            raise TraceFormatError(lineno, "non-numeric field") from None
        if not (math.isfinite(t) and math.isfinite(p)):
            raise TraceFormatError(lineno, "non-finite value")
        if out and t <= out[-1].t:
            raise TraceFormatError(lineno, "t must be strictly increasing")
        out.append(PressureSample(t, p))
    return out


def _num(x: float) -> str:
    return format(x, ".17g")


def trace_to_csv(trace) -> str:
    lines = ["t,p"] + [f"{_num(s.t)},{_num(s.p)}" for s in trace]
    return "\n".join(lines) + "\n"


def events_to_csv(events) -> str:
    lines = ["t,event,phase"] + [f"{_num(e.t)},{e.event},{e.phase}" for e in events]
    return "\n".join(lines) + "\n"
