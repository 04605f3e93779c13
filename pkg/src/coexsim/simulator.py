"""Deterministic discrete-event coexistence simulator.

Binds the propagation model, both MAC state machines, the pseudo-beacon
relay path and the coordination algorithms into runnable scenarios.
One run is strictly single-threaded; every random draw comes from
substreams derived from the scenario seed, and equal-time events are
ordered by a monotone sequence number, so identical (scenario, seed)
pairs produce bit-identical metrics and traces.

Model conventions (see README for the full list):

* Carrier sensing compares the sum of mean received powers (path gain
  plus the per-pair shadowing draw) against the sensing node's current
  ED threshold.  Fast fading applies to frame reception only, redrawn
  per transmission and receiver.
* A frame is lost if its SINR dips below the selected rate's threshold
  at any instant of the reception; overlapped frames additionally need
  to clear the capture threshold.
* SIFS-bound responses (ACK, CTS) are protocol-mandated and sent
  without carrier sensing; the ED-politeness invariant is asserted on
  every contention-based transmission start.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import mac_lte, mac_wifi
from .coordination import AdaptiveEdConfig, adapt_ed_threshold
from .mac_lte import LbtPhase, LbtState
from .mac_wifi import DcfPhase, DcfState, MacTiming
from .propagation import Building, Position, PropagationModel, sample_link_gains
from .relay import (
    CellInfo,
    MacSpec,
    NodeType,
    ScanEntry,
    decode_pseudo_beacon,
    encode_pseudo_beacon,
    merge_scans,
)


class SimulationError(RuntimeError):
    """An engine invariant was violated; the run is not trustworthy."""


# ---------------------------------------------------------------------------
# configuration dataclasses
# ---------------------------------------------------------------------------

WIFI_RATE_TABLE = [
    (5.0, 6.0), (6.0, 9.0), (7.0, 12.0), (9.0, 18.0),
    (12.0, 24.0), (16.0, 36.0), (20.0, 48.0), (22.0, 54.0),
]
LTE_RATE_TABLE = [
    (-5.0, 2.0), (0.0, 7.0), (5.0, 14.0), (9.0, 21.0),
    (13.0, 28.0), (17.0, 36.0), (21.0, 43.0), (25.0, 50.0),
]


@dataclass(frozen=True)
class Node:
    id: str
    kind: str  # wifi_ap | wifi_sta | lte_enb | lte_ue
    position: Position
    tx_power_dbm: float = 20.0
    ed_threshold_dbm: float | None = None  # None -> technology default
    channel: int = 36
    attach_to: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("wifi_ap", "wifi_sta", "lte_enb", "lte_ue"):
            raise ValueError(f"unknown node kind {self.kind!r}")

    @property
    def technology(self) -> str:
        return "wifi" if self.kind.startswith("wifi") else "lte"

    @property
    def is_base(self) -> bool:
        return self.kind in ("wifi_ap", "lte_enb")


@dataclass
class TrafficConfig:
    model: str = "file_transfer"  # file_transfer | full_buffer
    file_size_bytes: int = 2_000_000
    arrival_rate_per_client: float = 1.0  # files per second
    arrival_rate_overrides: dict = field(default_factory=dict)  # client id -> rate
    file_size_overrides: dict = field(default_factory=dict)  # client id -> bytes

    def __post_init__(self) -> None:
        if self.model not in ("file_transfer", "full_buffer"):
            raise ValueError(f"unknown traffic model {self.model!r}")
        if self.model == "file_transfer":
            if self.file_size_bytes <= 0 or self.arrival_rate_per_client <= 0:
                raise ValueError("file size and arrival rate must be positive")

    def rate_for(self, client_id: str) -> float:
        return float(self.arrival_rate_overrides.get(client_id,
                                                     self.arrival_rate_per_client))

    def size_bits_for(self, client_id: str) -> float:
        return 8.0 * float(self.file_size_overrides.get(client_id,
                                                        self.file_size_bytes))


@dataclass
class WifiMacConfig:
    timing: MacTiming = field(default_factory=MacTiming)
    cw_min: int = 15
    cw_max: int = 1023
    retry_limit: int = 7
    rts_cts: bool = True
    frame_payload_bytes: int = 1500
    preamble_us: float = 20.0
    rts_duration_us: float = 47.0
    cts_duration_us: float = 39.0
    beacon_duration_us: float = 180.0
    ed_threshold_dbm: float = -62.0
    decode_floor_dbm: float = -87.5


@dataclass
class LteMacConfig:
    ed_threshold_dbm: float = -72.0
    cw_min: int = 15
    cw_max: int = 63
    burst_ms: float = 8.0
    max_burst_ms: float = 8.0
    defer_us: float = 25.0
    slot_us: float = 9.0
    decode_floor_dbm: float = -100.0


@dataclass
class PhyConfig:
    noise_floor_dbm: float = -94.0
    rate_margin_db: float = 3.0
    capture_threshold_db: float = 10.0
    control_sinr_db: float = 5.0
    fading_branches: int = 4
    measurement_floor_dbm: float = -100.0
    wifi_rates: list = field(default_factory=lambda: list(WIFI_RATE_TABLE))
    lte_rates: list = field(default_factory=lambda: list(LTE_RATE_TABLE))


@dataclass
class ClientGenConfig:
    mode: str = "fixed"  # fixed | poisson
    per_base: float = 1.0


@dataclass
class RelayConfig:
    enabled: bool = True
    latency_ms: float = 100.0


@dataclass
class Scenario:
    building: Building = field(default_factory=Building)
    nodes: list = field(default_factory=list)
    propagation: PropagationModel = field(default_factory=PropagationModel)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    channels: list = field(default_factory=lambda: [36])
    seed: int = 1
    duration_s: float = 1.0
    warmup_s: float = 0.0
    adaptive_ed: bool = False
    wifi_mac: WifiMacConfig = field(default_factory=WifiMacConfig)
    lte_mac: LteMacConfig = field(default_factory=LteMacConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)
    adapt_wifi: AdaptiveEdConfig = field(
        default_factory=lambda: AdaptiveEdConfig(t_default_dbm=-62.0)
    )
    adapt_lte: AdaptiveEdConfig = field(
        default_factory=lambda: AdaptiveEdConfig(t_default_dbm=-72.0)
    )
    relay: RelayConfig = field(default_factory=RelayConfig)
    link_gains: dict = field(default_factory=dict)  # {(a, b): gain_db}, symmetric

    def validate(self) -> None:
        if not any(n.is_base for n in self.nodes):
            raise ValueError("scenario needs at least one base")
        for node in self.nodes:
            if not self.building.contains(node.position):
                raise ValueError(f"node {node.id} lies outside the building")
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")


@dataclass
class Metrics:
    duration_s: float = 0.0
    file_throughputs_mbps: dict = field(default_factory=dict)
    delivered_bits: dict = field(default_factory=dict)
    collision_count: int = 0
    ack_window_collisions: int = 0
    retransmissions: int = 0
    airtime: dict = field(default_factory=lambda: {"wifi": 0.0, "lte": 0.0,
                                                   "overlap": 0.0, "idle": 1.0})
    final_ed_thresholds: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SimEvent:
    time_us: float
    seq: int
    kind: str  # tx_start | tx_end | slot_tick | timer | file_arrival | adapt_tick
    node: str
    payload: tuple = ()

    def __lt__(self, other: "SimEvent") -> bool:
        return (self.time_us, self.seq) < (other.time_us, other.seq)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _lin(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def _dbm(linear: float) -> float:
    return 10.0 * math.log10(linear) if linear > 0 else -math.inf


def rate_from_sinr(sinr_db: float, technology: str, phy: PhyConfig | None = None) -> float:
    """Monotone step map from SINR to PHY rate in Mbps."""
    if math.isnan(sinr_db):
        raise ValueError("sinr must not be NaN")
    phy = phy or PhyConfig()
    table = phy.wifi_rates if technology == "wifi" else phy.lte_rates
    rate = 0.0
    for threshold, mbps in sorted(table):
        if sinr_db >= threshold:
            rate = mbps
    return rate


def required_sinr(rate_mbps: float, technology: str, phy: PhyConfig) -> float:
    table = phy.wifi_rates if technology == "wifi" else phy.lte_rates
    for threshold, mbps in sorted(table):
        if mbps == rate_mbps:
            return threshold
    raise ValueError(f"rate {rate_mbps} not in the {technology} table")


def percentile(values, pct: float) -> float:
    """Exact percentile by sorting with linear interpolation."""
    vals = sorted(values)
    if not vals:
        raise ValueError("cannot take a percentile of an empty list")
    if not (0.0 <= pct <= 100.0):
        raise ValueError("percentile must lie in [0, 100]")
    if len(vals) == 1:
        return float(vals[0])
    rank = pct / 100.0 * (len(vals) - 1)
    lo = int(math.floor(rank))
    hi = int(math.ceil(rank))
    frac = rank - lo
    return float(vals[lo] * (1.0 - frac) + vals[hi] * frac)


def summarize(throughputs, pct: float = 50.0) -> float:
    """Percentile summary of a throughput list; pct 50 is the median."""
    return percentile(throughputs, pct)


def jain_index(values) -> float:
    """Jain's fairness index (sum x)^2 / (n * sum x^2); 1 means equal."""
    vals = list(values)
    if not vals:
        raise ValueError("cannot compute fairness of an empty list")
    total_sq = sum(v * v for v in vals)
    if total_sq == 0:
        return 1.0
    return sum(vals) ** 2 / (len(vals) * total_sq)


def generate_topology(scenario: Scenario, clients: ClientGenConfig,
                      rng: np.random.Generator) -> Scenario:
    """Place generated clients around the configured bases.

    Bases keep their configured positions; each base receives a fixed
    or Poisson-distributed number of clients placed uniformly over the
    building and attached to it.
    """
    bases = [n for n in scenario.nodes if n.is_base]
    if not bases:
        raise ValueError("scenario needs at least one base")
    for base in bases:
        if not scenario.building.contains(base.position):
            raise ValueError(f"base {base.id} lies outside the building")
    out = [n for n in scenario.nodes]
    for base in bases:
        if clients.mode == "fixed":
            count = int(clients.per_base)
        elif clients.mode == "poisson":
            count = int(rng.poisson(clients.per_base))
        else:
            raise ValueError(f"unknown client generation mode {clients.mode!r}")
        kind = "wifi_sta" if base.kind == "wifi_ap" else "lte_ue"
        for i in range(count):
            pos = Position(
                float(rng.uniform(0.0, scenario.building.width_m)),
                float(rng.uniform(0.0, scenario.building.depth_m)),
            )
            out.append(
                Node(
                    id=f"{base.id}_c{i}",
                    kind=kind,
                    position=pos,
                    tx_power_dbm=base.tx_power_dbm,
                    channel=base.channel,
                    attach_to=base.id,
                )
            )
    return replace(scenario, nodes=out)


# ---------------------------------------------------------------------------
# transmissions and files
# ---------------------------------------------------------------------------

@dataclass
class Transmission:
    tx_id: int
    src: str
    dst: str | None
    kind: str  # data | ack | rts | cts | beacon | burst
    start_us: float
    end_us: float
    rate_mbps: float
    req_sinr_db: float
    bits: float
    nav_duration_us: float = 0.0
    frame_key: tuple | None = None
    fades_db: dict = field(default_factory=dict)
    overlaps: list = field(default_factory=list)  # (other Transmission, start, end)


@dataclass
class FileJob:
    file_id: int
    client: str
    size_bits: float
    arrival_us: float
    done_bits: float = 0.0
    complete_us: float | None = None


class _BaseQueues:
    """Per-base downlink file queues."""

    def __init__(self) -> None:
        self.files: deque[FileJob] = deque()

    def head(self) -> FileJob | None:
        return self.files[0] if self.files else None

    def pop_if_done(self) -> None:
        while self.files and self.files[0].done_bits >= self.files[0].size_bits:
            self.files.popleft()

# ---------------------------------------------------------------------------
# MAC controllers
# ---------------------------------------------------------------------------

class _WifiApController:
    """Drives the DCF machine for one AP's downlink queue plus beacons."""

    def __init__(self, sim: "Simulator", node: Node):
        self.sim = sim
        self.node = node
        cfg = sim.scenario.wifi_mac
        self.cfg = cfg
        self.timing = cfg.timing
        threshold = node.ed_threshold_dbm
        self.ed_threshold_dbm = cfg.ed_threshold_dbm if threshold is None else threshold
        self.dcf = DcfState(
            cw=cfg.cw_min, cw_min=cfg.cw_min, cw_max=cfg.cw_max,
            retry_limit=cfg.retry_limit, use_rts=cfg.rts_cts,
        )
        self.rng = sim.node_rng(node.id)
        self.queues = _BaseQueues()
        self.gen = 0          # invalidates stale difs/slot timers
        self.resp_gen = 0     # invalidates stale ack/cts timeouts
        self.beacon_pending = False
        self.in_exchange = False  # RTS..ACK chain in flight
        self.busy_us = 0.0        # own airtime in current beacon interval

    # -- queue / access management ------------------------------------

    def has_traffic(self) -> bool:
        self.queues.pop_if_done()
        return bool(self.queues.files)

    def next_chunk_bits(self) -> float:
        job = self.queues.head()
        remaining = job.size_bits - job.done_bits
        return min(self.cfg.frame_payload_bytes * 8.0, remaining)

    def maybe_start(self) -> None:
        if self.in_exchange:
            return
        if self.dcf.phase == DcfPhase.IDLE and self.has_traffic():
            self.dcf = mac_wifi.start_access(self.dcf, self.rng)
            self.sim.trace(self.node.id, "phase", "defer")
        contending = self.dcf.phase in (DcfPhase.DEFER, DcfPhase.BACKOFF)
        if contending or self.beacon_pending:
            if not self.sim.node_blocked(self.node.id):
                self.arm_difs()

    def arm_difs(self) -> None:
        self.gen += 1
        self.sim.schedule_timer(
            self.node.id, self.timing.difs_us, "difs_done", self.gen
        )

    def cancel_countdown(self) -> None:
        self.gen += 1

    # -- medium transitions ---------------------------------------------

    def on_medium(self, busy: bool) -> None:
        if busy:
            self.cancel_countdown()
            if self.dcf.phase in (DcfPhase.DEFER, DcfPhase.BACKOFF):
                self.dcf, _ = mac_wifi.dcf_step(
                    self.dcf, "medium_busy", self.timing, self.rng
                )
        else:
            if self.dcf.phase == DcfPhase.NAV_BLOCKED:
                return
            if self.dcf.phase in (DcfPhase.DEFER, DcfPhase.BACKOFF) or self.has_traffic():
                self.maybe_start()

    # -- timers ----------------------------------------------------------

    def handle_timer(self, purpose: str, gen: int, payload: tuple) -> None:
        if purpose in ("difs_done", "slot"):
            if gen != self.gen or self.sim.node_blocked(self.node.id):
                return
            if purpose == "difs_done" and self.beacon_pending:
                self.start_beacon()
                return
            if self.dcf.phase not in (DcfPhase.DEFER, DcfPhase.BACKOFF):
                return
            if purpose == "difs_done":
                self.sim.schedule_timer(self.node.id, self.timing.slot_us, "slot", self.gen)
                return
            self.dcf, actions = mac_wifi.dcf_step(
                self.dcf, "medium_idle_slot", self.timing, self.rng
            )
            if "tx_data" in actions:
                self.start_data()
            elif "tx_rts" in actions:
                self.start_rts()
            else:
                self.sim.trace(self.node.id, "decrement", str(self.dcf.backoff_counter))
                self.sim.schedule_timer(self.node.id, self.timing.slot_us, "slot", self.gen)
        elif purpose == "ack_timeout":
            if gen != self.resp_gen:
                return
            self.in_exchange = False
            self.fail_exchange("ack_timeout")
        elif purpose == "cts_timeout":
            if gen != self.resp_gen:
                return
            self.in_exchange = False
            self.fail_exchange("rts_cts_fail")
        elif purpose == "nav_expire":
            self.dcf = mac_wifi.nav_clear(self.dcf, self.sim.now_us)
            self.maybe_start()
        elif purpose == "send_data_after_cts":
            self.transmit_data_frame()

    def fail_exchange(self, event: str) -> None:
        self.sim.metrics.retransmissions += 1
        self.dcf, actions = mac_wifi.dcf_step(self.dcf, event, self.timing, self.rng)
        if "drop_frame" in actions:
            self.sim.trace(self.node.id, "action", "drop_frame")
            # head chunk stays owed; a fresh access attempt follows
        self.maybe_start()

    # -- transmissions -----------------------------------------------------

    def current_frame_key(self) -> tuple:
        job = self.queues.head()
        return (job.file_id, job.done_bits)

    def start_beacon(self) -> None:
        self.beacon_pending = False
        self.cancel_countdown()
        self.sim.assert_politeness(self.node.id, self.ed_threshold_dbm)
        self.sim.start_transmission(
            src=self.node.id, dst=None, kind="beacon",
            duration_us=self.cfg.beacon_duration_us,
            rate_mbps=0.0, req_sinr_db=self.sim.scenario.phy.control_sinr_db,
            bits=0.0,
        )

    def start_rts(self) -> None:
        self.cancel_countdown()
        self.in_exchange = True
        self.sim.assert_politeness(self.node.id, self.ed_threshold_dbm)
        job = self.queues.head()
        data_us = self.data_duration_us()
        t = self.timing
        nav = (t.sifs_us + self.cfg.cts_duration_us + t.sifs_us + data_us
               + t.sifs_us + t.ack_duration_us)
        self.sim.start_transmission(
            src=self.node.id, dst=job.client, kind="rts",
            duration_us=self.cfg.rts_duration_us, rate_mbps=0.0,
            req_sinr_db=self.sim.scenario.phy.control_sinr_db, bits=0.0,
            nav_duration_us=nav, frame_key=self.current_frame_key(),
        )

    def start_data(self) -> None:
        self.cancel_countdown()
        self.in_exchange = True
        self.sim.assert_politeness(self.node.id, self.ed_threshold_dbm)
        self.transmit_data_frame()

    def data_duration_us(self) -> float:
        bits = self.next_chunk_bits()
        rate = self.sim.link_rate(self.node.id, self.queues.head().client)
        return bits / rate + self.cfg.preamble_us

    def transmit_data_frame(self) -> None:
        job = self.queues.head()
        bits = self.next_chunk_bits()
        rate = self.sim.link_rate(self.node.id, job.client)
        duration = bits / rate + self.cfg.preamble_us
        t = self.timing
        self.sim.start_transmission(
            src=self.node.id, dst=job.client, kind="data",
            duration_us=duration, rate_mbps=rate,
            req_sinr_db=required_sinr(rate, "wifi", self.sim.scenario.phy),
            bits=bits, nav_duration_us=t.sifs_us + t.ack_duration_us,
            frame_key=self.current_frame_key(),
        )

    def handle_own_tx_end(self, tx: Transmission) -> None:
        self.busy_us += tx.end_us - tx.start_us
        if tx.kind == "beacon":
            self.maybe_start()
            return
        if tx.kind == "rts":
            # await the CTS
            self.resp_gen += 1
            t = self.timing
            wait = t.sifs_us + self.cfg.cts_duration_us + t.slot_us
            self.sim.schedule_timer(self.node.id, wait, "cts_timeout", self.resp_gen)
            return
        if tx.kind == "data":
            self.dcf, _ = mac_wifi.dcf_step(self.dcf, "tx_done", self.timing, self.rng)
            self.resp_gen += 1
            t = self.timing
            wait = t.sifs_us + t.ack_duration_us + t.slot_us
            self.sim.schedule_timer(self.node.id, wait, "ack_timeout", self.resp_gen)

    def handle_rx(self, tx: Transmission, success: bool) -> None:
        if not success:
            return  # timeouts recover the exchange
        if tx.kind == "cts" and self.in_exchange:
            self.resp_gen += 1
            self.sim.schedule_timer(
                self.node.id, self.timing.sifs_us, "send_data_after_cts", self.resp_gen
            )
        elif tx.kind == "ack" and self.in_exchange:
            self.resp_gen += 1
            self.in_exchange = False
            self.dcf, _ = mac_wifi.dcf_step(self.dcf, "ack_received", self.timing, self.rng)
            self.sim.credit_frame(self.node.id, tx.frame_key)
            self.maybe_start()

    def make_cell_info(self) -> CellInfo:
        interval_us = self.timing.beacon_interval_ms * 1000.0
        util = min(1.0, self.busy_us / interval_us)
        self.busy_us = 0.0
        return CellInfo(
            operator_cell_id=self.node.id,
            channel=self.node.channel,
            station_count=self.sim.attached_count(self.node.id),
            channel_utilization=util,
            node_type=NodeType.WIFI,
            mac_spec=MacSpec.DCF,
            tx_power_offset_db=0,
        )


class _WifiStaController:
    """Responds with CTS/ACK and tracks the NAV."""

    def __init__(self, sim: "Simulator", node: Node):
        self.sim = sim
        self.node = node
        self.cfg = sim.scenario.wifi_mac
        self.timing = self.cfg.timing
        self.dcf = DcfState(cw=self.cfg.cw_min, cw_min=self.cfg.cw_min,
                            cw_max=self.cfg.cw_max)
        self.seen_frames: set = set()

    def on_medium(self, busy: bool) -> None:
        pass

    def maybe_start(self) -> None:
        pass

    def handle_timer(self, purpose: str, gen: int, payload: tuple) -> None:
        if purpose == "send_cts":
            dst, nav = payload
            self.sim.start_transmission(
                src=self.node.id, dst=dst, kind="cts",
                duration_us=self.cfg.cts_duration_us, rate_mbps=0.0,
                req_sinr_db=self.sim.scenario.phy.control_sinr_db, bits=0.0,
                nav_duration_us=nav,
            )
        elif purpose == "send_ack":
            dst, frame_key, bits = payload
            self.sim.start_transmission(
                src=self.node.id, dst=dst, kind="ack",
                duration_us=self.timing.ack_duration_us, rate_mbps=0.0,
                req_sinr_db=self.sim.scenario.phy.control_sinr_db, bits=bits,
                frame_key=frame_key,
            )

    def handle_own_tx_end(self, tx: Transmission) -> None:
        pass

    def handle_rx(self, tx: Transmission, success: bool) -> None:
        if not success:
            return
        if tx.kind == "rts":
            t = self.timing
            nav = tx.nav_duration_us - t.sifs_us - self.cfg.cts_duration_us
            self.sim.schedule_timer(
                self.node.id, t.sifs_us, "send_cts", 0, (tx.src, max(nav, 0.0))
            )
        elif tx.kind == "data":
            self.sim.schedule_timer(
                self.node.id, self.timing.sifs_us, "send_ack", 0,
                (tx.src, tx.frame_key, tx.bits),
            )

    def overheard(self, tx: Transmission) -> None:
        # frames addressed elsewhere set the NAV
        if tx.nav_duration_us > 0:
            self.dcf = mac_wifi.nav_update(self.dcf, tx.nav_duration_us, self.sim.now_us)
            self.sim.trace(self.node.id, "nav", f"{self.dcf.nav_until_us:.1f}")


class _LteEnbController:
    """Cat-4 LBT contention plus fixed-length downlink bursts."""

    def __init__(self, sim: "Simulator", node: Node):
        self.sim = sim
        self.node = node
        cfg = sim.scenario.lte_mac
        self.cfg = cfg
        threshold = node.ed_threshold_dbm
        self.ed_threshold_dbm = cfg.ed_threshold_dbm if threshold is None else threshold
        self.lbt = LbtState(
            cw=cfg.cw_min, cw_min=cfg.cw_min, cw_max=cfg.cw_max,
            ed_threshold_dbm=self.ed_threshold_dbm,
            burst_length_ms=cfg.burst_ms, max_burst_ms=cfg.max_burst_ms,
        )
        self.rng = sim.node_rng(node.id)
        self.queues = _BaseQueues()
        self.gen = 0
        self.busy_us = 0.0

    def has_traffic(self) -> bool:
        self.queues.pop_if_done()
        return bool(self.queues.files)

    def maybe_start(self) -> None:
        if self.lbt.phase == LbtPhase.IDLE and self.has_traffic():
            self.lbt = mac_lte.begin_access(self.lbt, self.rng)
            self.sim.trace(self.node.id, "phase", "defer")
        if self.lbt.phase in (LbtPhase.DEFER, LbtPhase.BACKOFF):
            if not self.sim.node_blocked(self.node.id):
                self.arm_defer()

    def arm_defer(self) -> None:
        self.gen += 1
        self.sim.schedule_timer(self.node.id, self.cfg.defer_us, "defer_done", self.gen)

    def on_medium(self, busy: bool) -> None:
        if busy:
            self.gen += 1
            if self.lbt.phase in (LbtPhase.DEFER, LbtPhase.BACKOFF):
                self.lbt, _ = mac_lte.lbt_step(self.lbt, "energy_above", self.rng)
        else:
            if self.lbt.phase in (LbtPhase.DEFER, LbtPhase.BACKOFF) or self.has_traffic():
                self.maybe_start()

    def handle_timer(self, purpose: str, gen: int, payload: tuple) -> None:
        if purpose not in ("defer_done", "slot"):
            return
        if gen != self.gen or self.sim.node_blocked(self.node.id):
            return
        if self.lbt.phase not in (LbtPhase.DEFER, LbtPhase.BACKOFF):
            return
        self.lbt, actions = mac_lte.lbt_step(self.lbt, "energy_below_slot", self.rng)
        if "start_burst" in actions:
            self.start_burst()
        else:
            self.sim.trace(self.node.id, "decrement", str(self.lbt.backoff_counter))
            self.sim.schedule_timer(self.node.id, self.cfg.slot_us, "slot", self.gen)

    def start_burst(self) -> None:
        self.gen += 1
        self.sim.assert_politeness(self.node.id, self.ed_threshold_dbm)
        job = self.queues.head()
        rate = self.sim.link_rate(self.node.id, job.client)
        remaining = job.size_bits - job.done_bits
        max_bits = rate * self.cfg.burst_ms * 1000.0
        bits = min(remaining, max_bits)
        duration = bits / rate
        self.sim.start_transmission(
            src=self.node.id, dst=job.client, kind="burst",
            duration_us=duration, rate_mbps=rate,
            req_sinr_db=required_sinr(rate, "lte", self.sim.scenario.phy),
            bits=bits, frame_key=(job.file_id, job.done_bits),
        )

    def handle_own_tx_end(self, tx: Transmission) -> None:
        self.busy_us += tx.end_us - tx.start_us

    def handle_rx(self, tx: Transmission, success: bool) -> None:
        pass

    def burst_feedback(self, tx: Transmission, success: bool) -> None:
        # HARQ-style outcome known at burst end
        if success:
            self.lbt, _ = mac_lte.lbt_step(self.lbt, "success_feedback", self.rng)
            self.sim.credit_frame(self.node.id, tx.frame_key, bits=tx.bits)
        else:
            self.sim.metrics.retransmissions += 1
            self.lbt, _ = mac_lte.lbt_step(self.lbt, "collision_feedback", self.rng)
            self.sim.trace(self.node.id, "action", "burst_retx")
        self.maybe_start()

    def make_cell_info(self) -> CellInfo:
        interval_us = self.sim.scenario.wifi_mac.timing.beacon_interval_ms * 1000.0
        util = min(1.0, self.busy_us / interval_us)
        self.busy_us = 0.0
        return CellInfo(
            operator_cell_id=self.node.id,
            channel=self.node.channel,
            station_count=self.sim.attached_count(self.node.id),
            channel_utilization=util,
            node_type=NodeType.REL13_LAA,
            mac_spec=MacSpec.LBT_CAT4,
            tx_power_offset_db=0,
        )


class _LteUeController:
    """Pure receiver; HARQ feedback is delivered out of band."""

    def __init__(self, sim: "Simulator", node: Node):
        self.sim = sim
        self.node = node

    def on_medium(self, busy: bool) -> None:
        pass

    def maybe_start(self) -> None:
        pass

    def handle_timer(self, purpose: str, gen: int, payload: tuple) -> None:
        pass

    def handle_own_tx_end(self, tx: Transmission) -> None:
        pass

    def handle_rx(self, tx: Transmission, success: bool) -> None:
        if tx.kind == "burst":
            self.sim.controllers[tx.src].burst_feedback(tx, success)


# add NAV bookkeeping to the AP controller (shared with the STA behavior)
def _ap_overheard(self, tx: Transmission) -> None:
    if tx.nav_duration_us > 0:
        self.dcf = mac_wifi.nav_update(self.dcf, tx.nav_duration_us, self.sim.now_us)
        if self.dcf.phase == DcfPhase.NAV_BLOCKED:
            self.cancel_countdown()
            self.sim.schedule_timer(
                self.node.id, self.dcf.nav_until_us - self.sim.now_us, "nav_expire", 0
            )


_WifiApController.overheard = _ap_overheard


# ---------------------------------------------------------------------------
# the engine
# ---------------------------------------------------------------------------

class Simulator:
    """Single-run engine; construct with a Scenario and call run()."""

    def __init__(self, scenario: Scenario, collect_trace: bool = False):
        scenario.validate()
        self.scenario = scenario
        self.now_us = 0.0
        self.end_us = scenario.duration_s * 1e6
        self.warmup_us = scenario.warmup_s * 1e6
        self._heap: list[SimEvent] = []
        self._seq = 0
        self._tx_counter = 0
        self._file_counter = 0
        self.metrics = Metrics(duration_s=scenario.duration_s)
        self.trace_lines: list[str] | None = [] if collect_trace else None

        self.nodes: dict[str, Node] = {n.id: n for n in scenario.nodes}
        self._sorted_ids = sorted(self.nodes)
        self._node_index = {nid: i for i, nid in enumerate(self._sorted_ids)}
        self._traffic_rngs: dict = {}
        self.rng_links = np.random.default_rng([scenario.seed, 1])
        self.rng_fades = np.random.default_rng([scenario.seed, 2])
        self.gains = self._build_gain_matrix()
        self._rate_cache: dict[tuple, tuple] = {}

        self.controllers: dict[str, object] = {}
        for node in scenario.nodes:
            if node.kind == "wifi_ap":
                self.controllers[node.id] = _WifiApController(self, node)
            elif node.kind == "wifi_sta":
                self.controllers[node.id] = _WifiStaController(self, node)
            elif node.kind == "lte_enb":
                self.controllers[node.id] = _LteEnbController(self, node)
            else:
                self.controllers[node.id] = _LteUeController(self, node)

        self.active: dict[int, Transmission] = {}
        self.busy_cache: dict[str, bool] = {nid: False for nid in self._sorted_ids}
        self.tx_log: list[tuple[float, float, str]] = []  # (start, end, tech)
        self.completed_files: list[FileJob] = []
        self.delivered_after_warmup: dict[str, float] = {}
        self.relay_tables: dict[str, dict[str, tuple[CellInfo, float]]] = {
            n.id: {} for n in scenario.nodes if n.is_base
        }
        self.last_cell_info: dict[str, CellInfo] = {}

    # -- randomness ------------------------------------------------------

    def node_rng(self, node_id: str) -> np.random.Generator:
        return np.random.default_rng([self.scenario.seed, 100 + self._node_index[node_id]])

    def traffic_rng(self, node_id: str) -> np.random.Generator:
        # one persistent stream per client; a fresh generator per call
        # would replay the same first draw forever
        if node_id not in self._traffic_rngs:
            self._traffic_rngs[node_id] = np.random.default_rng(
                [self.scenario.seed, 500 + self._node_index[node_id]]
            )
        return self._traffic_rngs[node_id]

    # -- static link model -------------------------------------------------

    def _build_gain_matrix(self) -> dict[tuple[str, str], float]:
        gains: dict[tuple[str, str], float] = {}
        overrides = {}
        for (a, b), g in self.scenario.link_gains.items():
            overrides[(a, b)] = g
            overrides[(b, a)] = g
        for i, a in enumerate(self._sorted_ids):
            for b in self._sorted_ids[i + 1:]:
                if (a, b) in overrides:
                    g = float(overrides[(a, b)])
                else:
                    d = self.nodes[a].position.distance_to(self.nodes[b].position)
                    g = float(
                        sample_link_gains(
                            max(d, 1.0), self.scenario.propagation, self.rng_links
                        )
                    )
                gains[(a, b)] = g
                gains[(b, a)] = g
        return gains

    def mean_rssi(self, src: str, dst: str) -> float:
        return self.nodes[src].tx_power_dbm + self.gains[(src, dst)]

    def link_rate(self, src: str, dst: str) -> float:
        key = (src, dst)
        if key not in self._rate_cache:
            tech = self.nodes[src].technology
            snr = self.mean_rssi(src, dst) - self.scenario.phy.noise_floor_dbm
            rate = rate_from_sinr(snr - self.scenario.phy.rate_margin_db, tech,
                                  self.scenario.phy)
            if rate <= 0:
                raise SimulationError(
                    f"link {src}->{dst} falls below the minimum rate threshold"
                )
            self._rate_cache[key] = rate
        return self._rate_cache[key]

    def attached_count(self, base_id: str) -> int:
        return sum(1 for n in self.scenario.nodes if n.attach_to == base_id)

    # -- event plumbing ---------------------------------------------------

    def _push(self, delay_us: float, kind: str, node: str, payload: tuple = ()) -> None:
        self._seq += 1
        heapq.heappush(
            self._heap, SimEvent(self.now_us + delay_us, self._seq, kind, node, payload)
        )

    def schedule_timer(self, node: str, delay_us: float, purpose: str, gen: int,
                       payload: tuple = ()) -> None:
        kind = "slot_tick" if purpose in ("slot",) else "timer"
        self._push(delay_us, kind, node, (purpose, gen, payload))

    def trace(self, node: str, record: str, detail: str) -> None:
        if self.trace_lines is not None:
            tech = self.nodes[node].technology if node in self.nodes else "sim"
            self.trace_lines.append(
                f"{self.now_us:.3f},{node},{tech},{record},{detail}"
            )

    # -- sensing ------------------------------------------------------------

    def sensed_power_dbm(self, node_id: str) -> float:
        """Total mean in-band power from other nodes' active transmissions."""
        channel = self.nodes[node_id].channel
        total = 0.0
        for tx in self.active.values():
            if tx.src == node_id:
                continue
            if self.nodes[tx.src].channel != channel:
                continue
            total += _lin(self.mean_rssi(tx.src, node_id))
        return _dbm(total)

    def _threshold_of(self, node_id: str) -> float:
        ctrl = self.controllers[node_id]
        thr = getattr(ctrl, "ed_threshold_dbm", None)
        if thr is not None:
            return thr
        node = self.nodes[node_id]
        if node.technology == "wifi":
            return self.scenario.wifi_mac.ed_threshold_dbm
        return self.scenario.lte_mac.ed_threshold_dbm

    def node_blocked(self, node_id: str) -> bool:
        if self.busy_cache[node_id]:
            return True
        ctrl = self.controllers[node_id]
        dcf = getattr(ctrl, "dcf", None)
        if dcf is not None and dcf.nav_until_us > self.now_us:
            return True
        return False

    def recompute_busy(self) -> None:
        for nid in self._sorted_ids:
            busy = self.sensed_power_dbm(nid) >= self._threshold_of(nid)
            if busy != self.busy_cache[nid]:
                self.busy_cache[nid] = busy
                self.controllers[nid].on_medium(busy)

    def assert_politeness(self, node_id: str, threshold_dbm: float) -> None:
        sensed = self.sensed_power_dbm(node_id)
        if sensed >= threshold_dbm:
            raise SimulationError(
                f"ED politeness violated: {node_id} would transmit while sensing "
                f"{sensed:.1f} dBm >= threshold {threshold_dbm:.1f} dBm at "
                f"t={self.now_us:.1f}"
            )

    # -- transmissions -------------------------------------------------------

    def start_transmission(self, src: str, dst: str | None, kind: str,
                           duration_us: float, rate_mbps: float, req_sinr_db: float,
                           bits: float, nav_duration_us: float = 0.0,
                           frame_key: tuple | None = None) -> Transmission:
        self._tx_counter += 1
        fades = {}
        branches = max(1, self.scenario.phy.fading_branches)
        for nid in self._sorted_ids:
            factor = float(np.mean(self.rng_fades.exponential(1.0, size=branches)))
            fades[nid] = 10.0 * math.log10(factor)
        tx = Transmission(
            tx_id=self._tx_counter, src=src, dst=dst, kind=kind,
            start_us=self.now_us, end_us=self.now_us + duration_us,
            rate_mbps=rate_mbps, req_sinr_db=req_sinr_db, bits=bits,
            nav_duration_us=nav_duration_us, frame_key=frame_key, fades_db=fades,
        )
        for other in self.active.values():
            if self.nodes[other.src].channel != self.nodes[src].channel:
                continue
            o_start = max(other.start_us, tx.start_us)
            o_end = min(other.end_us, tx.end_us)
            if o_end > o_start:
                other.overlaps.append((tx, o_start, o_end))
                tx.overlaps.append((other, o_start, o_end))
        self.active[tx.tx_id] = tx
        self.tx_log.append((tx.start_us, tx.end_us, self.nodes[src].technology))
        self.trace(src, "tx_start", f"kind={kind};dst={dst};dur={duration_us:.1f}")
        self._push(duration_us, "tx_end", src, (tx.tx_id,))
        self.recompute_busy()
        return tx

    def _finish_transmission(self, tx: Transmission) -> None:
        del self.active[tx.tx_id]
        self.trace(tx.src, "tx_end", f"kind={tx.kind};dst={tx.dst}")
        self.recompute_busy()
        src_ctrl = self.controllers[tx.src]
        src_ctrl.handle_own_tx_end(tx)
        if tx.dst is not None:
            success = self._evaluate_reception(tx)
            self.controllers[tx.dst].handle_rx(tx, success)
        # NAV for frames decodable by third-party Wi-Fi nodes
        if tx.nav_duration_us > 0 and self.nodes[tx.src].technology == "wifi":
            floor = self.scenario.wifi_mac.decode_floor_dbm
            for nid in self._sorted_ids:
                if nid in (tx.src, tx.dst):
                    continue
                node = self.nodes[nid]
                if node.technology != "wifi" or node.channel != self.nodes[tx.src].channel:
                    continue
                if self.mean_rssi(tx.src, nid) >= floor:
                    self.controllers[nid].overheard(tx)
        src_ctrl.maybe_start()

    def _evaluate_reception(self, tx: Transmission) -> bool:
        dst = tx.dst
        phy = self.scenario.phy
        # half duplex: a receiver that transmitted during the frame hears nothing
        for other, _, _ in tx.overlaps:
            if other.src == dst:
                self.trace(dst, "rx_fail", f"half_duplex;from={tx.src}")
                return False
        signal_db = self.mean_rssi(tx.src, dst) + tx.fades_db[dst]
        floor = (self.scenario.wifi_mac.decode_floor_dbm
                 if self.nodes[dst].technology == "wifi"
                 else self.scenario.lte_mac.decode_floor_dbm)
        if signal_db < floor:
            self.trace(dst, "rx_fail", f"below_floor;from={tx.src}")
            return False
        noise_lin = _lin(phy.noise_floor_dbm)
        overlapped = [o for o in tx.overlaps
                      if self.nodes[o[0].src].channel == self.nodes[dst].channel]
        max_interference = 0.0
        if overlapped:
            bounds = sorted({b for _, s, e in overlapped for b in (s, e)})
            for a, b in zip(bounds, bounds[1:]):
                seg = 0.0
                for other, s, e in overlapped:
                    if s <= a and e >= b:
                        seg += _lin(self.mean_rssi(other.src, dst)
                                    + other.fades_db[dst])
                max_interference = max(max_interference, seg)
        sinr_db = signal_db - _dbm(noise_lin + max_interference)
        required = tx.req_sinr_db
        if overlapped:
            required = max(required, phy.capture_threshold_db)
        success = sinr_db >= required
        if not success:
            clean_sinr = signal_db - phy.noise_floor_dbm
            if overlapped and clean_sinr >= tx.req_sinr_db:
                self.metrics.collision_count += 1
                detail = f"from={tx.src};kind={tx.kind}"
                if tx.kind == "ack":
                    for other, _, _ in overlapped:
                        if (other.kind == "burst"
                                and tx.start_us <= other.start_us < tx.end_us):
                            self.metrics.ack_window_collisions += 1
                            detail += ";ack_window"
                            break
                self.trace(dst, "collision", detail)
            else:
                self.trace(dst, "rx_fail", f"fade;from={tx.src}")
        return success

    # -- traffic ---------------------------------------------------------------

    def credit_frame(self, base_id: str, frame_key: tuple | None,
                     bits: float | None = None) -> None:
        ctrl = self.controllers[base_id]
        job = ctrl.queues.head()
        if job is None or frame_key is None:
            return
        file_id, offset = frame_key
        if job.file_id != file_id or job.done_bits != offset:
            return  # duplicate delivery of an already-credited frame
        credit = bits if bits is not None else min(
            self.scenario.wifi_mac.frame_payload_bytes * 8.0,
            job.size_bits - job.done_bits,
        )
        job.done_bits += credit
        if self.now_us >= self.warmup_us:
            self.delivered_after_warmup[job.client] = (
                self.delivered_after_warmup.get(job.client, 0.0) + credit
            )
        if job.done_bits >= job.size_bits and math.isfinite(job.size_bits):
            job.complete_us = self.now_us
            self.completed_files.append(job)
            ctrl.queues.pop_if_done()
            self.trace(base_id, "file_done", f"client={job.client};id={job.file_id}")

    def _schedule_first_traffic(self) -> None:
        traffic = self.scenario.traffic
        clients = [n for n in self.scenario.nodes if n.attach_to is not None]
        for client in clients:
            if traffic.model == "full_buffer":
                self._file_counter += 1
                job = FileJob(self._file_counter, client.id, math.inf, 0.0)
                self.controllers[client.attach_to].queues.files.append(job)
            else:
                rng = self.traffic_rng(client.id)
                delay_us = rng.exponential(1.0 / traffic.rate_for(client.id)) * 1e6
                if delay_us <= self.end_us:
                    self._push(delay_us, "file_arrival", client.id, ())

    def _handle_file_arrival(self, event: SimEvent) -> None:
        client = self.nodes[event.node]
        traffic = self.scenario.traffic
        self._file_counter += 1
        job = FileJob(self._file_counter, client.id,
                      traffic.size_bits_for(client.id), self.now_us)
        base_ctrl = self.controllers[client.attach_to]
        base_ctrl.queues.files.append(job)
        self.trace(client.id, "file_arrival", f"id={job.file_id}")
        rng = self.traffic_rng(client.id)
        delay_us = rng.exponential(1.0 / traffic.rate_for(client.id)) * 1e6
        if self.now_us + delay_us <= self.end_us:
            self._push(delay_us, "file_arrival", client.id, ())
        base_ctrl.maybe_start()

    # -- relaying and adaptation ------------------------------------------------

    def _handle_relay_publish(self, base_id: str) -> None:
        if not self.scenario.relay.enabled:
            return
        ctrl = self.controllers[base_id]
        cell = ctrl.make_cell_info()
        self.last_cell_info[base_id] = cell
        ies = encode_pseudo_beacon(cell)
        latency_us = self.scenario.relay.latency_ms * 1000.0
        for other_id in self.relay_tables:
            if other_id != base_id:
                self._push(latency_us, "timer", other_id,
                           ("relay_deliver", 0, (base_id, ies)))
        interval_us = self.scenario.wifi_mac.timing.beacon_interval_ms * 1000.0
        if self.now_us + interval_us <= self.end_us:
            self._push(interval_us, "timer", base_id, ("relay_publish", 0, ()))

    def _handle_relay_deliver(self, base_id: str, src_base: str, ies) -> None:
        cell = decode_pseudo_beacon(ies)
        rssi = self.mean_rssi(src_base, base_id)
        self.relay_tables[base_id][src_base] = (cell, rssi)

    def _scan_at(self, base_id: str) -> list[ScanEntry]:
        node = self.nodes[base_id]
        phy = self.scenario.phy
        ota = []
        if node.technology == "wifi":
            for other_id, cell in self.last_cell_info.items():
                if other_id == base_id or self.nodes[other_id].technology != "wifi":
                    continue
                level = self.mean_rssi(other_id, base_id)
                if level >= self.scenario.wifi_mac.decode_floor_dbm:
                    ota.append(ScanEntry("over_the_air", cell, level,
                                         n_attached=cell.station_count,
                                         utilization=cell.channel_utilization))
        relayed = []
        for src_base, (cell, rssi) in sorted(self.relay_tables[base_id].items()):
            if rssi >= phy.measurement_floor_dbm:
                relayed.append(ScanEntry("relayed", cell, rssi,
                                         n_attached=cell.station_count,
                                         utilization=cell.channel_utilization))
        return merge_scans(ota, relayed)

    def _handle_adapt_tick(self, base_id: str) -> None:
        node = self.nodes[base_id]
        cfg = (self.scenario.adapt_wifi if node.technology == "wifi"
               else self.scenario.adapt_lte)
        scan = self._scan_at(base_id)
        new_threshold = adapt_ed_threshold(scan, cfg, own_channel=node.channel)
        ctrl = self.controllers[base_id]
        if new_threshold != ctrl.ed_threshold_dbm:
            ctrl.ed_threshold_dbm = new_threshold
            self.trace(base_id, "threshold", f"{new_threshold:.2f}")
            self.recompute_busy()
        period_us = cfg.update_period_s * 1e6
        if self.now_us + period_us <= self.end_us:
            self._push(period_us, "adapt_tick", base_id, ())

    # -- main loop ------------------------------------------------------------

    def run(self) -> Metrics:
        scenario = self.scenario
        if self.end_us <= 0:
            return self.metrics
        self._schedule_first_traffic()
        bases = [n for n in scenario.nodes if n.is_base]
        aps = [n for n in bases if n.technology == "wifi"]
        interval_us = scenario.wifi_mac.timing.beacon_interval_ms * 1000.0
        for idx, ap in enumerate(aps):
            first = interval_us * (idx + 1) / (len(aps) + 1)
            self._push(first, "timer", ap.id, ("beacon_due", 0, ()))
        for base in bases:
            self._push(0.0, "timer", base.id, ("relay_publish", 0, ()))
            if scenario.adaptive_ed:
                cfg = (scenario.adapt_wifi if base.technology == "wifi"
                       else scenario.adapt_lte)
                self._push(cfg.update_period_s * 1e6, "adapt_tick", base.id, ())
        for nid in self._sorted_ids:
            self.controllers[nid].maybe_start()

        last_time = 0.0
        while self._heap:
            event = heapq.heappop(self._heap)
            if event.time_us > self.end_us:
                break
            if event.time_us < last_time - 1e-9:
                raise SimulationError("event queue went backwards in time")
            last_time = event.time_us
            self.now_us = event.time_us
            self._dispatch(event)
        self.now_us = self.end_us
        return self._finalize()

    def _dispatch(self, event: SimEvent) -> None:
        if event.kind == "tx_end":
            tx = self.active.get(event.payload[0])
            if tx is not None:
                self._finish_transmission(tx)
            return
        if event.kind == "file_arrival":
            self._handle_file_arrival(event)
            return
        if event.kind == "adapt_tick":
            self._handle_adapt_tick(event.node)
            return
        # slot_tick / timer
        purpose, gen, payload = event.payload
        if purpose == "relay_publish":
            self._handle_relay_publish(event.node)
        elif purpose == "relay_deliver":
            self._handle_relay_deliver(event.node, payload[0], payload[1])
        elif purpose == "beacon_due":
            ctrl = self.controllers[event.node]
            ctrl.beacon_pending = True
            interval_us = self.scenario.wifi_mac.timing.beacon_interval_ms * 1000.0
            if self.now_us + interval_us <= self.end_us:
                self._push(interval_us, "timer", event.node, ("beacon_due", 0, ()))
            ctrl.maybe_start()
        else:
            self.controllers[event.node].handle_timer(purpose, gen, payload)

    # -- metrics ---------------------------------------------------------------

    def _airtime_fractions(self) -> dict:
        total = self.end_us
        if total <= 0:
            return {"wifi": 0.0, "lte": 0.0, "overlap": 0.0, "idle": 1.0}
        events = []
        for start, end, tech in self.tx_log:
            s = max(0.0, min(start, total))
            e = max(0.0, min(end, total))
            if e > s:
                events.append((s, 1, tech))
                events.append((e, -1, tech))
        events.sort(key=lambda x: (x[0], x[1]))
        counts = {"wifi": 0, "lte": 0}
        out = {"wifi": 0.0, "lte": 0.0, "overlap": 0.0, "idle": 0.0}
        prev = 0.0
        for time, delta, tech in events:
            if time > prev:
                span = time - prev
                w, l = counts["wifi"] > 0, counts["lte"] > 0
                key = "overlap" if (w and l) else "wifi" if w else "lte" if l else "idle"
                out[key] += span
                prev = time
            counts[tech] += delta
        if total > prev:
            out["idle"] += total - prev
        fractions = {k: v / total for k, v in out.items()}
        if abs(sum(fractions.values()) - 1.0) > 1e-9:
            raise SimulationError("airtime fractions do not sum to 1")
        return fractions

    def _finalize(self) -> Metrics:
        m = self.metrics
        m.airtime = self._airtime_fractions()
        throughputs: dict[str, list[float]] = {}
        if self.scenario.traffic.model == "full_buffer":
            window_us = self.end_us - self.warmup_us
            for client, bits in sorted(self.delivered_after_warmup.items()):
                if window_us > 0:
                    throughputs[client] = [bits / window_us]
        else:
            for job in self.completed_files:
                if job.arrival_us >= self.warmup_us and job.complete_us is not None:
                    elapsed = job.complete_us - job.arrival_us
                    if elapsed > 0:
                        throughputs.setdefault(job.client, []).append(
                            job.size_bits / elapsed
                        )
        max_rate = max(
            max(r for _, r in self.scenario.phy.wifi_rates),
            max(r for _, r in self.scenario.phy.lte_rates),
        )
        for client, tputs in throughputs.items():
            for tput in tputs:
                if tput > max_rate + 1e-9:
                    raise SimulationError(
                        f"throughput {tput:.2f} Mbps exceeds the rate-table maximum"
                    )
        m.file_throughputs_mbps = throughputs
        m.delivered_bits = dict(sorted(self.delivered_after_warmup.items()))
        m.final_ed_thresholds = {
            nid: self._threshold_of(nid)
            for nid in self._sorted_ids if self.nodes[nid].is_base
        }
        return m


def run(scenario: Scenario, collect_trace: bool = False):
    """Run one scenario; returns Metrics (and the trace lines if collected)."""
    sim = Simulator(scenario, collect_trace=collect_trace)
    metrics = sim.run()
    if collect_trace:
        return metrics, sim.trace_lines
    return metrics
