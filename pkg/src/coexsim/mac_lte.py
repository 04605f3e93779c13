"""Cat-4 style listen-before-talk state machine for the unlicensed-LTE base.

ED-only sensing at a runtime-adjustable threshold, a defer period of at
least one SIFS plus one slot, exponential-backoff contention and
fixed-length transmission bursts.  Like the DCF machine, this is a pure
transition function; the caller owns all clocks and must only deliver
``energy_below_slot`` once the defer window has elapsed idle.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .mac_wifi import ProtocolViolation


class LbtPhase(str, Enum):
    IDLE = "idle"
    DEFER = "defer"
    BACKOFF = "backoff"
    TX_BURST = "tx_burst"


LBT_EVENTS = (
    "energy_above",
    "energy_below_slot",
    "burst_done",
    "collision_feedback",
    "success_feedback",
)


@dataclass(frozen=True)
class DeferWindow:
    """Idle time the base must observe before counting backoff slots."""

    duration_us: float = 25.0
    sifs_us: float = 16.0
    slot_us: float = 9.0

    def __post_init__(self) -> None:
        if self.duration_us < self.sifs_us + self.slot_us:
            raise ValueError("defer duration must be at least one SIFS + one slot")


@dataclass(frozen=True)
class LbtState:
    phase: LbtPhase = LbtPhase.IDLE
    cw: int = 15
    backoff_counter: int = 0
    ed_threshold_dbm: float = -72.0
    burst_length_ms: float = 8.0
    cw_min: int = 15
    cw_max: int = 63
    max_burst_ms: float = 8.0

    def __post_init__(self) -> None:
        if not (self.cw_min <= self.cw <= self.cw_max):
            raise ValueError(f"cw {self.cw} outside [{self.cw_min}, {self.cw_max}]")
        if (self.cw + 1) & self.cw:
            raise ValueError("cw must have the 2^k - 1 form")
        if self.burst_length_ms > self.max_burst_ms:
            raise ValueError("burst length exceeds the regulatory cap")


def begin_access(state: LbtState, rng: np.random.Generator) -> LbtState:
    """Draw a fresh backoff and enter the defer phase."""
    if state.phase not in (LbtPhase.IDLE, LbtPhase.DEFER):
        raise ProtocolViolation(f"cannot begin access from phase {state.phase.value}")
    counter = int(rng.integers(0, state.cw + 1))
    return replace(state, phase=LbtPhase.DEFER, backoff_counter=counter)


def _redraw(state: LbtState, rng: np.random.Generator, cw: int) -> LbtState:
    counter = int(rng.integers(0, cw + 1))
    return replace(state, cw=cw, backoff_counter=counter, phase=LbtPhase.DEFER)


def lbt_step(
    state: LbtState,
    event: str,
    rng: np.random.Generator,
) -> tuple[LbtState, list[str]]:
    """Advance the LBT machine by one event; returns (state, actions).

    ``start_burst`` asks the caller to occupy the channel for
    ``state.burst_length_ms``.
    """
    if event not in LBT_EVENTS:
        raise ProtocolViolation(f"unknown event {event!r}")
    phase = state.phase

    if event == "energy_above":
        if phase in (LbtPhase.DEFER, LbtPhase.BACKOFF):
            # channel grabbed: freeze the counter and re-defer
            return replace(state, phase=LbtPhase.DEFER), []
        if phase == LbtPhase.IDLE:
            return state, []
        raise ProtocolViolation(f"energy_above is illegal in phase {phase.value}")

    if event == "energy_below_slot":
        if phase in (LbtPhase.DEFER, LbtPhase.BACKOFF):
            if state.backoff_counter > 0:
                counter = state.backoff_counter - 1
                if counter == 0:
                    return replace(state, phase=LbtPhase.TX_BURST, backoff_counter=0), [
                        "start_burst"
                    ]
                return replace(state, phase=LbtPhase.BACKOFF, backoff_counter=counter), []
            return replace(state, phase=LbtPhase.TX_BURST), ["start_burst"]
        if phase == LbtPhase.IDLE:
            return state, []
        raise ProtocolViolation(f"energy_below_slot is illegal in phase {phase.value}")

    if event == "burst_done":
        if phase != LbtPhase.TX_BURST:
            raise ProtocolViolation(f"burst_done is illegal in phase {phase.value}")
        return replace(state, phase=LbtPhase.IDLE), []

    if event == "collision_feedback":
        if phase not in (LbtPhase.TX_BURST, LbtPhase.IDLE):
            raise ProtocolViolation(f"collision_feedback is illegal in phase {phase.value}")
        return _redraw(state, rng, min(2 * state.cw + 1, state.cw_max)), []

    # success_feedback
    if phase not in (LbtPhase.TX_BURST, LbtPhase.IDLE):
        raise ProtocolViolation(f"success_feedback is illegal in phase {phase.value}")
    return replace(state, phase=LbtPhase.IDLE, cw=state.cw_min), []


def ack_window_check(
    data_end_us: float,
    rssi_of_ack_at_enb_dbm: float | None,
    ed_threshold_dbm: float,
    defer: DeferWindow,
) -> str:
    """Decide the base's move in the post-data ACK window.

    After a sensed transmission ends the base holds for SIFS + slot.  If
    the responding ACK arrives above the ED threshold inside that window
    the base defers for the ACK duration; otherwise it proceeds to
    transmit, colliding with any sub-threshold ACK still in flight.
    Returns ``"defer"`` or ``"transmit"``.
    """
    if data_end_us < 0 or defer.duration_us <= 0:
        raise ValueError("invalid timing")
    if rssi_of_ack_at_enb_dbm is None:
        return "transmit"
    if rssi_of_ack_at_enb_dbm >= ed_threshold_dbm:
        return "defer"
    return "transmit"
