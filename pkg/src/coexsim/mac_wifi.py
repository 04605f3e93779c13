"""Slotted 802.11 DCF transmitter state machine.

The state machine is a pure transition function over (phase, event)
pairs; all timing (when an idle slot has elapsed, when an ACK timed
out) belongs to the caller, which is either the discrete-event
simulator or a test harness.  Illegal (phase, event) pairs raise
``ProtocolViolation`` rather than being silently ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class ProtocolViolation(Exception):
    """A MAC state machine was fed an event that is illegal in its phase."""


class DcfPhase(str, Enum):
    IDLE = "idle"
    DEFER = "defer"
    BACKOFF = "backoff"
    TX_DATA = "tx_data"
    AWAIT_ACK = "await_ack"
    TX_ACK = "tx_ack"
    NAV_BLOCKED = "nav_blocked"


# events accepted by dcf_step
DCF_EVENTS = (
    "medium_busy",
    "medium_idle_slot",
    "tx_done",
    "ack_received",
    "ack_timeout",
    "rts_cts_fail",
)


@dataclass(frozen=True)
class MacTiming:
    """802.11 OFDM interframe timing; difs is derived as sifs + 2 slots."""

    slot_us: float = 9.0
    sifs_us: float = 16.0
    ack_duration_us: float = 44.0
    beacon_interval_ms: float = 100.0

    def __post_init__(self) -> None:
        if min(self.slot_us, self.sifs_us, self.ack_duration_us, self.beacon_interval_ms) <= 0:
            raise ValueError("all timing parameters must be positive")

    @property
    def difs_us(self) -> float:
        return self.sifs_us + 2.0 * self.slot_us


@dataclass(frozen=True)
class DcfState:
    phase: DcfPhase = DcfPhase.IDLE
    cw: int = 15
    backoff_counter: int = 0
    nav_until_us: float = 0.0
    retry_count: int = 0
    cw_min: int = 15
    cw_max: int = 1023
    retry_limit: int = 7
    use_rts: bool = False

    def __post_init__(self) -> None:
        if not (self.cw_min <= self.cw <= self.cw_max):
            raise ValueError(f"cw {self.cw} outside [{self.cw_min}, {self.cw_max}]")
        if (self.cw + 1) & self.cw:
            raise ValueError("cw must have the 2^k - 1 form")
        if self.backoff_counter > self.cw:
            raise ValueError("backoff counter may not exceed cw")


def start_access(state: DcfState, rng: np.random.Generator) -> DcfState:
    """Begin a channel-access attempt: draw a backoff and defer.

    Caller invokes this when a frame becomes pending while the machine
    is idle (or after a completed exchange with more frames queued).
    """
    if state.phase not in (DcfPhase.IDLE, DcfPhase.DEFER):
        raise ProtocolViolation(f"cannot start access from phase {state.phase.value}")
    counter = int(rng.integers(0, state.cw + 1))
    return replace(state, phase=DcfPhase.DEFER, backoff_counter=counter)


def _double_cw(state: DcfState, rng: np.random.Generator) -> DcfState:
    new_cw = min(2 * state.cw + 1, state.cw_max)
    counter = int(rng.integers(0, new_cw + 1))
    return replace(
        state,
        cw=new_cw,
        backoff_counter=counter,
        retry_count=state.retry_count + 1,
        phase=DcfPhase.DEFER,
    )


def dcf_step(
    state: DcfState,
    event: str,
    timing: MacTiming,
    rng: np.random.Generator,
) -> tuple[DcfState, list[str]]:
    """Advance the DCF machine by one event; returns (state, actions).

    Actions the caller must perform: ``tx_data`` / ``tx_rts`` (counter
    expired), ``access_complete`` (ACK received), ``drop_frame`` (retry
    limit exceeded, contention parameters reset).
    """
    if event not in DCF_EVENTS:
        raise ProtocolViolation(f"unknown event {event!r}")
    phase = state.phase

    if event == "medium_busy":
        if phase in (DcfPhase.DEFER, DcfPhase.BACKOFF):
            # freeze the counter; defer until the medium clears
            return replace(state, phase=DcfPhase.DEFER), []
        if phase in (DcfPhase.IDLE, DcfPhase.NAV_BLOCKED):
            return state, []
        raise ProtocolViolation(f"medium_busy is illegal in phase {phase.value}")

    if event == "medium_idle_slot":
        if phase in (DcfPhase.DEFER, DcfPhase.BACKOFF):
            if state.backoff_counter > 0:
                counter = state.backoff_counter - 1
                if counter == 0:
                    action = "tx_rts" if state.use_rts else "tx_data"
                    return replace(state, phase=DcfPhase.TX_DATA, backoff_counter=0), [action]
                return replace(state, phase=DcfPhase.BACKOFF, backoff_counter=counter), []
            # counter already zero at defer completion: transmit now
            action = "tx_rts" if state.use_rts else "tx_data"
            return replace(state, phase=DcfPhase.TX_DATA), [action]
        raise ProtocolViolation(f"medium_idle_slot is illegal in phase {phase.value}")

    if event == "tx_done":
        if phase == DcfPhase.TX_DATA:
            return replace(state, phase=DcfPhase.AWAIT_ACK), []
        if phase == DcfPhase.TX_ACK:
            return replace(state, phase=DcfPhase.IDLE), []
        raise ProtocolViolation(f"tx_done is illegal in phase {phase.value}")

    if event == "ack_received":
        if phase != DcfPhase.AWAIT_ACK:
            raise ProtocolViolation(f"ack_received is illegal in phase {phase.value}")
        return (
            replace(state, phase=DcfPhase.IDLE, cw=state.cw_min, retry_count=0),
            ["access_complete"],
        )

    # ack_timeout / rts_cts_fail: binary exponential backoff
    if event == "ack_timeout" and phase != DcfPhase.AWAIT_ACK:
        raise ProtocolViolation(f"ack_timeout is illegal in phase {phase.value}")
    if event == "rts_cts_fail" and phase not in (DcfPhase.TX_DATA, DcfPhase.AWAIT_ACK):
        raise ProtocolViolation(f"rts_cts_fail is illegal in phase {phase.value}")
    if state.retry_count + 1 > state.retry_limit:
        # give up on this frame; contention parameters reset
        fresh = replace(state, phase=DcfPhase.IDLE, cw=state.cw_min, retry_count=0)
        return fresh, ["drop_frame"]
    return _double_cw(state, rng), []


def nav_update(state: DcfState, duration_field_us: float, now_us: float) -> DcfState:
    """Fold a decoded duration field into the NAV (max rule)."""
    if duration_field_us < 0:
        raise ValueError("duration field must be >= 0")
    if duration_field_us == 0:
        # a zero duration field carries no reservation
        return state
    nav_until = max(state.nav_until_us, now_us + duration_field_us)
    phase = state.phase
    if now_us < nav_until and phase in (DcfPhase.IDLE, DcfPhase.DEFER, DcfPhase.BACKOFF,
                                        DcfPhase.NAV_BLOCKED):
        phase = DcfPhase.NAV_BLOCKED
    return replace(state, nav_until_us=nav_until, phase=phase)


def nav_clear(state: DcfState, now_us: float) -> DcfState:
    """Leave nav_blocked once the NAV timer has expired."""
    if state.phase == DcfPhase.NAV_BLOCKED and now_us >= state.nav_until_us:
        return replace(state, phase=DcfPhase.DEFER)
    return state


def ack_schedule(data_end_us: float, timing: MacTiming) -> tuple[float, float]:
    """Start and end times of the ACK that follows a data frame."""
    if data_end_us < 0:
        raise ValueError("data_end must be >= 0")
    start = data_end_us + timing.sifs_us
    return start, start + timing.ack_duration_us
