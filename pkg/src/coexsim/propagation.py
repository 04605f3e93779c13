"""Indoor radio propagation: path gain laws, shadowing, fast fading.

Two path-gain models are supported:

* ``inh`` -- the 3GPP indoor-hotspot law (LOS/NLOS pair plus a
  distance-dependent LOS probability).
* ``diffusion`` -- exponential-in-distance attenuation times geometric
  spreading, G(d) = G0 * e^(-d/L) / d in linear terms.

All functions are pure and accept an injected ``numpy.random.Generator``
where randomness is involved, so identical seeds reproduce identical
sample streams.  Scalar arguments work everywhere; the gain laws also
accept numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN10_OVER_10 = math.log(10.0) / 10.0
DB_PER_NEPER = 10.0 / math.log(10.0)

# LOS-assignment modes for the inh model (how the LOS probability curve
# is turned into a per-link LOS/NLOS decision).
LOS_MODES = ("range", "bernoulli", "nlos", "los")


@dataclass(frozen=True)
class Position:
    """A 2-D point in meters."""

    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Building:
    """Rectangular floor plan with one corner at the origin."""

    width_m: float = 50.0
    depth_m: float = 120.0

    def contains(self, pos: Position) -> bool:
        return 0.0 <= pos.x <= self.width_m and 0.0 <= pos.y <= self.depth_m

    @property
    def area_m2(self) -> float:
        return self.width_m * self.depth_m


@dataclass
class PropagationModel:
    """Path-gain law plus shadowing / LOS parameters.

    ``los_mode`` controls how the inh LOS probability becomes a LOS
    decision for a sampled link:

    * ``range``     -- deterministic: LOS iff distance <= los_range_m.
                       los_range_m defaults to the radius whose disc area
                       matches the expected LOS area of the probability
                       curve over its transition zone (calibrated against
                       the reference coverage data, see README).
    * ``bernoulli`` -- independent draw per link with p = los_probability.
    * ``nlos`` / ``los`` -- force one branch.
    """

    variant: str = "inh"  # "inh" | "diffusion"
    carrier_freq_ghz: float = 5.0
    shadow_sigma_los_db: float = 3.0
    shadow_sigma_nlos_db: float = 4.0
    diffusion_ref_gain_db: float = -54.5
    diffusion_length_m: float = 5.6
    los_mode: str = "range"
    los_range_m: float = 30.5

    def __post_init__(self) -> None:
        if self.variant not in ("inh", "diffusion"):
            raise ValueError(f"unknown propagation variant: {self.variant!r}")
        if self.carrier_freq_ghz <= 0:
            raise ValueError("carrier_freq_ghz must be > 0")
        if self.shadow_sigma_los_db < 0 or self.shadow_sigma_nlos_db < 0:
            raise ValueError("shadow sigmas must be >= 0")
        if self.diffusion_length_m <= 0:
            raise ValueError("diffusion_length_m must be > 0")
        if self.los_mode not in LOS_MODES:
            raise ValueError(f"unknown los_mode: {self.los_mode!r}")


@dataclass
class LinkBudget:
    """One link's budget terms: dB values plus a linear fast-fade factor."""

    tx_power_dbm: float = 20.0
    path_gain_db: float = 0.0
    shadow_db: float = 0.0
    fast_fade: float = 1.0

    def __post_init__(self) -> None:
        if self.fast_fade <= 0:
            raise ValueError("fast_fade must be a positive linear power factor")


def _check_distance(d) -> np.ndarray:
    arr = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"distance must be finite and positive, got {d!r}")
    # below-1m distances clamp to the 1 m value to avoid gain divergence
    return np.maximum(arr, 1.0)


def path_gain_inh(d, fc_ghz: float = 5.0, los: bool = True):
    """Indoor-hotspot path gain in dB (negative of the path loss).

    LOS:  PL = 16.9 log10(d) + 32.8 + 20 log10(fc)
    NLOS: PL = 43.3 log10(d) + 11.5 + 20 log10(fc)
    """
    dd = _check_distance(d)
    logd = np.log10(dd)
    logf = math.log10(fc_ghz)
    if los:
        pl = 16.9 * logd + 32.8 + 20.0 * logf
    else:
        pl = 43.3 * logd + 11.5 + 20.0 * logf
    out = -pl
    return float(out) if np.isscalar(d) or np.ndim(d) == 0 else out


def los_probability_inh(d):
    """LOS probability for the indoor-hotspot model.

    1 for d <= 18 m, exp(-(d-18)/27) for 18 < d < 37, 0.5 beyond.
    """
    arr = np.asarray(d, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"distance must be finite and >= 0, got {d!r}")
    p = np.where(arr <= 18.0, 1.0, np.where(arr >= 37.0, 0.5, np.exp(-(arr - 18.0) / 27.0)))
    return float(p) if np.ndim(d) == 0 else p


def path_gain_diffusion(d, model: PropagationModel):
    """Diffusion-law path gain in dB.

    dB form of G = G0 * e^(-d/L) / d:
    gain = ref_gain - 10 log10(d) - (10/ln 10) * d / L
    """
    dd = _check_distance(d)
    out = (
        model.diffusion_ref_gain_db
        - 10.0 * np.log10(dd)
        - DB_PER_NEPER * dd / model.diffusion_length_m
    )
    return float(out) if np.isscalar(d) or np.ndim(d) == 0 else out


def sample_shadow(sigma_db: float, rng: np.random.Generator, size=None):
    """Zero-mean lognormal shadowing term in dB."""
    if sigma_db < 0:
        raise ValueError("sigma must be >= 0")
    if sigma_db == 0:
        return 0.0 if size is None else np.zeros(size)
    out = rng.normal(0.0, sigma_db, size=size)
    return float(out) if size is None else out


def sample_fast_fade(rng: np.random.Generator, size=None):
    """Unit-mean exponential power factor (chi-square with 2 dof, normalized)."""
    out = rng.exponential(1.0, size=size)
    return float(out) if size is None else out


def rssi(tx_power_dbm: float, link: LinkBudget, include_fast_fade: bool = False) -> float:
    """Received power in dBm from a link budget."""
    value = tx_power_dbm + link.path_gain_db + link.shadow_db
    if include_fast_fade:
        value += 10.0 * math.log10(link.fast_fade)
    return value


def _los_flags(dists: np.ndarray, model: PropagationModel, rng: np.random.Generator) -> np.ndarray:
    if model.los_mode == "range":
        return dists <= model.los_range_m
    if model.los_mode == "bernoulli":
        return rng.random(dists.shape) < los_probability_inh(dists)
    if model.los_mode == "los":
        return np.ones(dists.shape, dtype=bool)
    return np.zeros(dists.shape, dtype=bool)


def sample_link_gains(
    dists,
    model: PropagationModel,
    rng: np.random.Generator,
    include_shadow: bool = True,
) -> np.ndarray:
    """Path gain + shadowing (dB) for an array of link distances.

    For the inh variant the LOS branch is chosen per ``model.los_mode``
    and the matching shadow sigma applies; the diffusion variant is a
    single law and uses the NLOS sigma.  Fast fading is never included
    here -- callers add it per transmission attempt.
    """
    arr = _check_distance(dists)
    scalar = np.ndim(dists) == 0
    arr = np.atleast_1d(arr)
    if model.variant == "diffusion":
        gain = path_gain_diffusion(arr, model)
        sigma = np.full(arr.shape, model.shadow_sigma_nlos_db)
    else:
        los = _los_flags(arr, model, rng)
        gain = np.where(
            los,
            path_gain_inh(arr, model.carrier_freq_ghz, los=True),
            path_gain_inh(arr, model.carrier_freq_ghz, los=False),
        )
        sigma = np.where(los, model.shadow_sigma_los_db, model.shadow_sigma_nlos_db)
    if include_shadow:
        gain = gain + rng.normal(0.0, 1.0, size=arr.shape) * sigma
    return float(gain[0]) if scalar else gain
