import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coexsim.mac_wifi import (
    DcfPhase,
    DcfState,
    MacTiming,
    ProtocolViolation,
    ack_schedule,
    dcf_step,
    nav_clear,
    nav_update,
    start_access,
)


def rng():
    return np.random.default_rng(1234)


class TestTiming:
    def test_difs_is_sifs_plus_two_slots(self):
        t = MacTiming(slot_us=9, sifs_us=16)
        assert t.difs_us == 34

    def test_positive_required(self):
        with pytest.raises(ValueError):
            MacTiming(slot_us=0)


class TestDcfStep:
    def test_idle_slot_decrements(self):
        s = DcfState(phase=DcfPhase.BACKOFF, backoff_counter=3)
        s2, actions = dcf_step(s, "medium_idle_slot", MacTiming(), rng())
        assert s2.backoff_counter == 2
        assert actions == []

    def test_ack_timeout_doubles_cw(self):
        s = DcfState(phase=DcfPhase.AWAIT_ACK, cw=15)
        s2, _ = dcf_step(s, "ack_timeout", MacTiming(), rng())
        assert s2.cw == 31
        assert 0 <= s2.backoff_counter <= 31
        assert s2.retry_count == 1

    def test_counter_expiry_emits_data(self):
        s = DcfState(phase=DcfPhase.BACKOFF, backoff_counter=1)
        s2, actions = dcf_step(s, "medium_idle_slot", MacTiming(), rng())
        assert s2.phase == DcfPhase.TX_DATA
        assert actions == ["tx_data"]

    def test_counter_expiry_emits_rts_when_enabled(self):
        s = DcfState(phase=DcfPhase.BACKOFF, backoff_counter=1, use_rts=True)
        _, actions = dcf_step(s, "medium_idle_slot", MacTiming(), rng())
        assert actions == ["tx_rts"]

    def test_busy_freezes_counter(self):
        s = DcfState(phase=DcfPhase.BACKOFF, backoff_counter=5)
        s2, _ = dcf_step(s, "medium_busy", MacTiming(), rng())
        assert s2.phase == DcfPhase.DEFER
        assert s2.backoff_counter == 5

    def test_ack_received_back_to_idle(self):
        s = DcfState(phase=DcfPhase.AWAIT_ACK, cw=255, retry_count=3)
        s2, actions = dcf_step(s, "ack_received", MacTiming(), rng())
        assert s2.phase == DcfPhase.IDLE
        assert s2.cw == s.cw_min
        assert s2.retry_count == 0
        assert actions == ["access_complete"]

    def test_cw_caps_at_max(self):
        s = DcfState(phase=DcfPhase.AWAIT_ACK, cw=1023, cw_max=1023, retry_limit=20)
        s2, _ = dcf_step(s, "ack_timeout", MacTiming(), rng())
        assert s2.cw == 1023

    def test_retry_limit_drops_frame(self):
        s = DcfState(phase=DcfPhase.AWAIT_ACK, cw=1023, retry_count=7, retry_limit=7)
        s2, actions = dcf_step(s, "ack_timeout", MacTiming(), rng())
        assert actions == ["drop_frame"]
        assert s2.cw == s2.cw_min
        assert s2.retry_count == 0

    def test_rts_cts_fail_doubles(self):
        s = DcfState(phase=DcfPhase.TX_DATA, cw=31)
        s2, _ = dcf_step(s, "rts_cts_fail", MacTiming(), rng())
        assert s2.cw == 63


# Expected legality per (phase, event); mirrors the documented transitions.
LEGAL = {
    ("idle", "medium_busy"), ("nav_blocked", "medium_busy"),
    ("defer", "medium_busy"), ("backoff", "medium_busy"),
    ("defer", "medium_idle_slot"), ("backoff", "medium_idle_slot"),
    ("tx_data", "tx_done"), ("tx_ack", "tx_done"),
    ("await_ack", "ack_received"), ("await_ack", "ack_timeout"),
    ("tx_data", "rts_cts_fail"), ("await_ack", "rts_cts_fail"),
}


@pytest.mark.parametrize("phase", list(DcfPhase))
@pytest.mark.parametrize("event", [
    "medium_busy", "medium_idle_slot", "tx_done", "ack_received",
    "ack_timeout", "rts_cts_fail",
])
def test_transition_table_exhaustive(phase, event):
    s = DcfState(phase=phase, backoff_counter=3)
    if (phase.value, event) in LEGAL:
        dcf_step(s, event, MacTiming(), rng())
    else:
        with pytest.raises(ProtocolViolation):
            dcf_step(s, event, MacTiming(), rng())


def test_unknown_event_rejected():
    with pytest.raises(ProtocolViolation):
        dcf_step(DcfState(), "solar_flare", MacTiming(), rng())


def test_cw_bounds_under_random_legal_streams():
    # fuzz the machine with random legal events; cw must stay a 2^k-1
    # value inside [cw_min, cw_max] throughout
    gen = np.random.default_rng(7)
    for _ in range(200):
        s = start_access(DcfState(retry_limit=1000), gen)
        for _ in range(60):
            legal = sorted(e for p, e in LEGAL if p == s.phase.value)
            if not legal:
                break
            event = legal[int(gen.integers(0, len(legal)))]
            s, _ = dcf_step(s, event, MacTiming(), gen)
            assert s.cw_min <= s.cw <= s.cw_max
            assert (s.cw + 1) & s.cw == 0
            assert 0 <= s.backoff_counter <= s.cw


class TestNav:
    def test_sets_from_zero(self):
        s = nav_update(DcfState(), 100.0, 50.0)
        assert s.nav_until_us == 150.0
        assert s.phase == DcfPhase.NAV_BLOCKED

    def test_max_rule_keeps_longer(self):
        s = DcfState(nav_until_us=200.0)
        s2 = nav_update(s, 10.0, 50.0)
        assert s2.nav_until_us == 200.0

    def test_zero_duration_is_identity(self):
        s = DcfState(phase=DcfPhase.BACKOFF, backoff_counter=2)
        assert nav_update(s, 0.0, 50.0) is s

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            nav_update(DcfState(), -1.0, 0.0)

    def test_clear_after_expiry(self):
        s = nav_update(DcfState(), 100.0, 0.0)
        assert nav_clear(s, 50.0).phase == DcfPhase.NAV_BLOCKED
        assert nav_clear(s, 100.0).phase == DcfPhase.DEFER


class TestAckSchedule:
    def test_standard_timing(self):
        t = MacTiming(sifs_us=16, ack_duration_us=44)
        assert ack_schedule(1000.0, t) == (1016.0, 1060.0)

    def test_tiny_sifs(self):
        t = MacTiming(sifs_us=1e-9, ack_duration_us=44)
        start, _ = ack_schedule(500.0, t)
        assert start == pytest.approx(500.0, abs=1e-6)

    @given(st.floats(min_value=0, max_value=1e7), st.floats(min_value=1, max_value=1e4))
    @settings(derandomize=True, max_examples=100)
    def test_monotone_shift(self, data_end, shift):
        t = MacTiming()
        a_start, a_end = ack_schedule(data_end, t)
        b_start, b_end = ack_schedule(data_end + shift, t)
        assert b_start - a_start == pytest.approx(shift, rel=1e-9)
        assert b_end - a_end == pytest.approx(shift, rel=1e-9)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ack_schedule(-1.0, MacTiming())


class TestStateValidation:
    def test_cw_form_enforced(self):
        with pytest.raises(ValueError):
            DcfState(cw=20)

    def test_counter_bound_enforced(self):
        with pytest.raises(ValueError):
            DcfState(cw=15, backoff_counter=16)
