"""
Stochastic count sampling and the ratios derived from counts.

Every draw is Poisson. Functions that sample several points take a root seed
(or a ``Generator``) and give point ``k`` its own stream via
:func:`qfcsim.seeding.child_seed`, so results do not depend on the order in
which points are evaluated.

Temporal correlations follow A·exp(−|τ − τ₀|/τ_d) + B with the convention
Δν = 1/(2π·τ_d).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from lmfit import Minimizer, Parameters

from .errors import FitError, InvalidInputError, UndefinedRatioError
from .jones import born_probability
from .pair_source import ChannelRateModel, expected_coincidences, expected_singles, ideal_state
from .seeding import SeedLike, point_seeds, rng_from

logger = logging.getLogger(__name__)

__all__ = [
    "CountRecord",
    "VisibilityPoint",
    "car",
    "car_sweep",
    "histogram_bandwidth",
    "histogram_generate",
    "sample_counts",
    "sample_record",
    "visibility",
    "visibility_scan",
    "visibility_series",
]

DA_OUTCOMES = (("D", "D"), ("D", "A"), ("A", "D"), ("A", "A"))


@dataclass(frozen=True)
class CountRecord:
    singles_s: int
    singles_i: int
    coincidences: int
    accidentals: int
    integration_time: float  # s
    power: float  # mW
    seed: int

    def __post_init__(self) -> None:
        for name in ("singles_s", "singles_i", "coincidences", "accidentals"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0")
        if not self.integration_time > 0:
            raise InvalidInputError(f"integration_time must be positive, got {self.integration_time}")

    @property
    def coincidence_rate(self) -> float:
        return self.coincidences / self.integration_time

    @property
    def net_coincidences(self) -> int:
        """Window coincidences above the accidental background, floored at 0."""
        return max(self.coincidences - self.accidentals, 0)

    @property
    def car(self) -> float:
        return car(self.net_coincidences, self.accidentals)


class VisibilityPoint(NamedTuple):
    index: int
    theta: float
    visibility: float
    sigma: float
    expected: float


def _seed_int(seed: SeedLike) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return int(rng_from(seed).integers(0, 2**63 - 1))


def sample_counts(expected_rate: float, integration_time: float, seed: SeedLike) -> int:
    if not expected_rate >= 0:
        raise InvalidInputError(f"expected_rate must be >= 0, got {expected_rate}")
    if not integration_time > 0:
        raise InvalidInputError(f"integration_time must be positive, got {integration_time}")
    return int(rng_from(seed).poisson(expected_rate * integration_time))


def sample_record(
    model: ChannelRateModel, power: float, integration_time: float, seed: SeedLike
) -> CountRecord:
    seed_value = _seed_int(seed)
    rng = np.random.default_rng(seed_value)
    rates = expected_coincidences(model, power)
    return CountRecord(
        singles_s=sample_counts(expected_singles(model, "signal", power), integration_time, rng),
        singles_i=sample_counts(expected_singles(model, "idler", power), integration_time, rng),
        coincidences=sample_counts(rates.total, integration_time, rng),
        accidentals=sample_counts(rates.accidental, integration_time, rng),
        integration_time=integration_time,
        power=power,
        seed=seed_value,
    )


def visibility(cc_dd: float, cc_da: float, cc_ad: float, cc_aa: float) -> float:
    if min(cc_dd, cc_da, cc_ad, cc_aa) < 0:
        raise InvalidInputError("Coincidence counts must be >= 0")
    total = cc_dd + cc_da + cc_ad + cc_aa
    if total == 0:
        raise UndefinedRatioError("Visibility is undefined when all counts are zero")
    return ((cc_dd + cc_aa) - (cc_da + cc_ad)) / total


def visibility_sigma(value: float, total: float) -> float:
    if total <= 0:
        return math.inf
    return math.sqrt(max(0.0, 1.0 - value * value) / total)


def car(coincidences: float, accidentals: float) -> float:
    if coincidences < 0 or accidentals < 0:
        raise InvalidInputError("Counts must be >= 0")
    if accidentals == 0:
        raise UndefinedRatioError(
            f"CAR is undefined with zero accidentals ({coincidences} coincidences)",
            lower_bound=float(coincidences),
        )
    return coincidences / accidentals


def car_sweep(
    model: ChannelRateModel,
    powers: Sequence[float],
    integration_time: float,
    seed: SeedLike,
    min_accidentals: Optional[float] = None,
) -> List[CountRecord]:
    """Counts at each power; integration is stretched so each point expects
    at least ``min_accidentals`` accidental counts."""
    seeds = point_seeds(seed, "car", len(powers))
    records: List[CountRecord] = []
    for power, point_seed in zip(powers, seeds):
        t = integration_time
        if min_accidentals:
            acc_rate = expected_coincidences(model, power).accidental
            if acc_rate > 0:
                t = max(t, min_accidentals / acc_rate)
        records.append(sample_record(model, power, t, point_seed))
    return records


def _da_counts(theta: float, coincidences: float, rng: np.random.Generator) -> Tuple[int, int, int, int]:
    state = ideal_state(theta)
    probs = [born_probability(state, s, i) for s, i in DA_OUTCOMES]
    dd, da, ad, aa = (int(rng.poisson(coincidences * max(p, 0.0))) for p in probs)
    return dd, da, ad, aa


def visibility_scan(thetas: Sequence[float], coincidences: float, seed: SeedLike) -> List[VisibilityPoint]:
    """D/A visibility of the ideal state at each phase, ``coincidences`` expected per point."""
    if not coincidences > 0:
        raise InvalidInputError(f"coincidences must be positive, got {coincidences}")
    seeds = point_seeds(seed, "visibility", len(thetas))
    points: List[VisibilityPoint] = []
    for k, (theta, point_seed) in enumerate(zip(thetas, seeds)):
        counts = _da_counts(theta, coincidences, np.random.default_rng(point_seed))
        value = visibility(*counts)
        points.append(VisibilityPoint(k, float(theta), value, visibility_sigma(value, sum(counts)), math.cos(theta)))
    return points


def visibility_series(
    theta: float,
    repeats: int,
    coincidences: float,
    seed: SeedLike,
    phase_jitter: float = 0.0,
) -> List[VisibilityPoint]:
    """Repeated visibility measurements at a fixed phase.

    ``phase_jitter`` is the standard deviation (rad) of the residual phase
    error of each repetition.
    """
    if repeats < 1:
        raise InvalidInputError(f"repeats must be >= 1, got {repeats}")
    seeds = point_seeds(seed, "visibility-series", repeats)
    points: List[VisibilityPoint] = []
    for k, point_seed in enumerate(seeds):
        rng = np.random.default_rng(point_seed)
        actual = theta + (rng.normal(0.0, phase_jitter) if phase_jitter > 0 else 0.0)
        counts = _da_counts(actual, coincidences, rng)
        value = visibility(*counts)
        points.append(VisibilityPoint(k, float(actual), value, visibility_sigma(value, sum(counts)), math.cos(theta)))
    return points


def correlation_time(bandwidth: float) -> float:
    if not bandwidth > 0:
        raise InvalidInputError(f"bandwidth must be positive, got {bandwidth}")
    return 1.0 / (2.0 * math.pi * bandwidth)


def histogram_generate(
    bandwidth: float,
    peak_counts: float = 1e5,
    background: float = 100.0,
    bins_per_tau: float = 8.0,
    half_span_taus: float = 10.0,
    center: float = 0.0,
    seed: SeedLike = None,
) -> List[Tuple[float, float]]:
    """Poisson-sampled coincidence histogram for a channel of bandwidth Δν (Hz)."""
    tau_d = correlation_time(bandwidth)
    width = tau_d / bins_per_tau
    half_bins = int(math.ceil(half_span_taus * bins_per_tau))
    delays = center + width * np.arange(-half_bins, half_bins + 1)
    expected = peak_counts * np.exp(-np.abs(delays - center) / tau_d) + background
    counts = rng_from(seed).poisson(expected)
    return list(zip(delays.tolist(), counts.astype(float).tolist()))


def _exp_residual(pars: Parameters, x: np.ndarray, data: np.ndarray, weights: np.ndarray) -> np.ndarray:
    v = pars.valuesdict()
    model = v["amp"] * np.exp(-np.abs(x - v["center"]) / v["tau"]) + v["background"]
    return (model - data) * weights


def histogram_bandwidth(histogram: Sequence[Tuple[float, float]]) -> float:
    data = np.asarray(histogram, dtype=float)
    if data.ndim != 2 or data.shape[0] < 21:
        raise InvalidInputError("Histogram needs at least 10 bins on each side of the peak")
    order = np.argsort(data[:, 0])
    delays, counts = data[order, 0], data[order, 1]
    peak = int(np.argmax(counts))
    if peak < 10 or len(counts) - 1 - peak < 10:
        raise InvalidInputError("Histogram needs at least 10 bins on each side of the peak")

    width = float(np.median(np.diff(delays)))
    edge = max(3, len(counts) // 10)
    background = float(np.median(np.concatenate([counts[:edge], counts[-edge:]])))
    amp = float(counts[peak] - background)
    if amp <= 5.0 * math.sqrt(background + 1.0):
        raise FitError("No correlation peak above the background")
    tau_guess = max(float(np.sum(np.clip(counts - background, 0.0, None))) * width / (2.0 * amp), width)

    # Delays in units of the initial τ guess keep the fit well scaled.
    x = (delays - delays[peak]) / tau_guess
    pars = Parameters()
    pars.add("amp", value=amp, min=0.0)
    pars.add("center", value=0.0)
    pars.add("tau", value=1.0, min=1e-6)
    pars.add("background", value=background, min=0.0)
    weights = 1.0 / np.sqrt(np.maximum(counts, 1.0))
    out = Minimizer(_exp_residual, pars, fcn_args=(x, counts, weights)).leastsq(max_nfev=5000)
    v = out.params.valuesdict()
    span = (delays[-1] - delays[0]) / tau_guess
    if not out.success or not np.isfinite(v["tau"]) or v["tau"] >= span:
        raise FitError(f"Exponential decay fit failed: {out.message}")
    tau_d = v["tau"] * tau_guess
    logger.debug("histogram fit tau_d=%.4e s amp=%.1f bg=%.1f", tau_d, v["amp"], v["background"])
    return 1.0 / (2.0 * math.pi * tau_d)
