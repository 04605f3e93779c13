"""Energy-detection predicates and coverage analytics.

Covers the sensing-side math: the boolean ED comparison, the closed-form
probability that every link in a set is simultaneously sensed above an
ED threshold under unit-mean exponential fading, Monte-Carlo fractional
ED coverage over a building, and the uplink failure complement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .propagation import Building, Position, PropagationModel, sample_link_gains


@dataclass
class EdConfig:
    """Detection threshold and decode floor, independent axes in dBm."""

    threshold_dbm: float = -62.0
    min_sensitivity_dbm: float = -87.5

    def __post_init__(self) -> None:
        # -inf is a legal "no threshold" sentinel; NaN and +/-inf sensitivity are not
        if math.isnan(self.threshold_dbm) or self.threshold_dbm == math.inf:
            raise ValueError("threshold must be finite or -inf")
        if not math.isfinite(self.min_sensitivity_dbm):
            raise ValueError("min_sensitivity must be finite")


@dataclass
class CoverageResult:
    cell_fraction: float
    ed_fraction: float
    samples: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.cell_fraction <= 1.0 and 0.0 <= self.ed_fraction <= 1.0):
            raise ValueError("fractions must lie in [0, 1]")


def detect(rssi_dbm: float, threshold_dbm: float) -> bool:
    """Energy detection: true iff the received power reaches the threshold.

    The comparison is inclusive at the boundary.
    """
    if math.isnan(rssi_dbm) or math.isnan(threshold_dbm):
        raise ValueError("detect() requires non-NaN inputs")
    return rssi_dbm >= threshold_dbm


def ed_success_prob(mean_rssi_dbm, threshold_dbm: float) -> float:
    """P{every link sensed above threshold} under exponential fading.

    With unit-mean exponential fade power X, a link whose mean received
    power is r dBm exceeds the threshold t iff X > 10^((t - r)/10), so

        P = prod_i exp(-10^((t - r_i)/10))

    Exact closed form, no sampling.
    """
    rssis = np.asarray(mean_rssi_dbm, dtype=float)
    if rssis.size == 0:
        raise ValueError("mean_rssi list must be nonempty")
    margins = 10.0 ** ((threshold_dbm - rssis) / 10.0)
    return float(np.exp(-np.sum(margins)))


def ed_success_factors(mean_rssi_dbm, threshold_dbm: float) -> list[float]:
    """Per-link factors of ed_success_prob (same fading model)."""
    rssis = np.asarray(mean_rssi_dbm, dtype=float)
    if rssis.size == 0:
        raise ValueError("mean_rssi list must be nonempty")
    return [float(math.exp(-(10.0 ** ((threshold_dbm - r) / 10.0)))) for r in rssis]


def fractional_ed_coverage(
    building: Building,
    base,
    model: PropagationModel,
    ed: EdConfig,
    n_samples: int = 100_000,
    rng: np.random.Generator | None = None,
    include_shadow: bool = True,
    margin_db: float = 0.0,
) -> CoverageResult:
    """Monte-Carlo cell and ED coverage fractions over a building.

    Client positions are sampled uniformly over the building.  A point
    belongs to the cell when its mean RSSI (path gain plus shadowing,
    no fast fading) reaches ``ed.min_sensitivity_dbm``; the ED fraction
    is the share of cell points whose RSSI also reaches the threshold.
    ``margin_db`` is an optional multipath allowance subtracted from the
    RSSI before both comparisons.

    ``base`` needs ``.position`` and ``.tx_power_dbm`` attributes.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    pos = base.position
    if not building.contains(Position(pos[0], pos[1]) if not isinstance(pos, Position) else pos):
        raise ValueError("base position lies outside the building")
    bx = pos.x if isinstance(pos, Position) else pos[0]
    by = pos.y if isinstance(pos, Position) else pos[1]
    rng = rng if rng is not None else np.random.default_rng(0)

    xs = rng.uniform(0.0, building.width_m, n_samples)
    ys = rng.uniform(0.0, building.depth_m, n_samples)
    dists = np.hypot(xs - bx, ys - by)
    gains = sample_link_gains(dists, model, rng, include_shadow=include_shadow)
    rssis = base.tx_power_dbm + gains - margin_db

    in_cell = rssis >= ed.min_sensitivity_dbm
    n_cell = int(np.count_nonzero(in_cell))
    if n_cell == 0:
        raise ValueError("degenerate cell: no sampled point reaches the decode floor")
    above = np.count_nonzero(in_cell & (rssis >= ed.threshold_dbm))
    return CoverageResult(
        cell_fraction=n_cell / n_samples,
        ed_fraction=above / n_cell,
        samples=n_samples,
    )


def uplink_ed_failure(coverage: CoverageResult) -> float:
    """P{uplink transmission not sensed} = 1 - ed_fraction.

    Assumes client EIRP equal to the downlink so uplink coverage mirrors
    the downlink fractions by reciprocity.
    """
    return 1.0 - coverage.ed_fraction
