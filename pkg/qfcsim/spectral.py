"""
Power-dependence fits, resonance classification, the derived pair quantities
and the joint spectral intensity.

Counts versus pump power are fitted to a·P² + b·P + c with a, b, c ≥ 0.
From the quadratic coefficients of the two singles arms (r_s, r_i) and of the
net coincidences (r_c):

    R_PGR = r_s·r_i / r_c,    η_s = r_c / r_i,    η_i = r_c / r_s
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import nnls

from .errors import InvalidInputError, InvalidParameterError, LossBudgetWarning, UndefinedRatioError
from .pair_source import Arm, ChannelRateModel, expected_coincidences, expected_singles
from .seeding import SeedLike, point_seeds

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PowerSeries:
    points: Tuple[Tuple[float, float], ...]  # (mW, s⁻¹)
    channel_frequency: float = 0.0  # Hz
    resonant: Optional[bool] = None
    label: str = ""

    def __post_init__(self) -> None:
        pts = tuple((float(p), float(r)) for p, r in self.points)
        powers = [p for p, _ in pts]
        if any(p <= 0 for p in powers):
            raise InvalidInputError("Powers must be strictly positive")
        if len(set(powers)) != len(powers):
            raise InvalidInputError("Powers must be distinct")
        object.__setattr__(self, "points", pts)

    @property
    def powers(self) -> NDArray[np.float64]:
        return np.array([p for p, _ in self.points])

    @property
    def rates(self) -> NDArray[np.float64]:
        return np.array([r for _, r in self.points])


class PowerFit(NamedTuple):
    a: float  # s⁻¹·mW⁻²
    b: float  # s⁻¹·mW⁻¹
    c: float  # s⁻¹
    sigma_a: float
    sigma_b: float
    sigma_c: float


class ChannelFit(NamedTuple):
    label: str
    fit: PowerFit


class Partition(NamedTuple):
    on_resonance: List[str]
    off_resonance: List[str]


class Efficiencies(NamedTuple):
    eta_s: float
    eta_i: float
    extraction_s: float
    extraction_i: float


def fit_power_quadratic(series: PowerSeries) -> PowerFit:
    if len(series.points) < 4:
        raise InvalidInputError(f"At least 4 powers are needed for a 3-term fit, got {len(series.points)}")
    p = series.powers
    design = np.column_stack([p * p, p, np.ones_like(p)])
    coeffs, residual_norm = nnls(design, series.rates)
    dof = len(p) - 3
    variance = residual_norm**2 / dof
    cov = variance * np.linalg.inv(design.T @ design)
    sigmas = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    a, b, c = (float(x) for x in coeffs)
    return PowerFit(a, b, c, *(float(s) for s in sigmas))


def classify_resonant(
    fits: Sequence[ChannelFit],
    significance: float = 2.0,
    factor: float = 3.0,
) -> Partition:
    """On resonance: a is significant and b clearly exceeds the off-resonance level.

    The off-resonance level is the median b over channels whose a is not
    significant (all channels when every a is significant).
    """
    if len(fits) < 2:
        raise InvalidInputError("At least two channels are needed for classification")

    def significant(fit: PowerFit) -> bool:
        return fit.a > significance * fit.sigma_a if fit.sigma_a > 0 else fit.a > 0

    flat = [f.fit.b for f in fits if not significant(f.fit)] or [f.fit.b for f in fits]
    reference = float(np.median(flat))
    on: List[str] = []
    off: List[str] = []
    for item in fits:
        if significant(item.fit) and item.fit.b > factor * reference:
            on.append(item.label)
        else:
            off.append(item.label)
    logger.debug("classified %d on / %d off (reference b=%.4g)", len(on), len(off), reference)
    return Partition(on, off)


def pgr(rs: float, ri: float, rc: float) -> float:
    if min(rs, ri, rc) < 0:
        raise InvalidInputError("Rates must be >= 0")
    if rc == 0:
        raise UndefinedRatioError("Pair generation rate is undefined without coincidences")
    return rs * ri / rc


def spectral_brightness(pgr_value: float, bandwidth_mhz: float) -> float:
    if not bandwidth_mhz > 0:
        raise InvalidParameterError(f"bandwidth must be positive, got {bandwidth_mhz} MHz")
    return pgr_value / bandwidth_mhz


def efficiencies(
    rs: float,
    ri: float,
    rc: float,
    transmission_s: float,
    transmission_i: float,
    detection: float,
) -> Efficiencies:
    if not (rs > 0 and ri > 0):
        raise InvalidInputError("Singles coefficients must be positive")
    if rc < 0:
        raise InvalidInputError("Coincidence coefficient must be >= 0")
    for name, value in (("transmission_s", transmission_s), ("transmission_i", transmission_i), ("detection", detection)):
        if not 0 < value <= 1:
            raise InvalidParameterError(f"{name} must be in (0, 1], got {value}")
    eta_s, eta_i = rc / ri, rc / rs
    result = Efficiencies(
        eta_s=eta_s,
        eta_i=eta_i,
        extraction_s=eta_s / (transmission_s * detection),
        extraction_i=eta_i / (transmission_i * detection),
    )
    if result.extraction_s > 1 or result.extraction_i > 1:
        message = (
            f"Extraction efficiency above 1 (signal {result.extraction_s:.3f}, "
            f"idler {result.extraction_i:.3f}); loss budget is inconsistent"
        )
        logger.warning(message)
        warnings.warn(message, LossBudgetWarning, stacklevel=2)
    return result


def singles_series(
    model: ChannelRateModel,
    arm: Arm,
    powers: Sequence[float],
    integration_time: float,
    seed: SeedLike,
    channel_frequency: float = 0.0,
    label: str = "",
) -> PowerSeries:
    """Poisson-sampled singles rates of one arm at each power."""
    seeds = point_seeds(seed, f"singles-{arm}", len(powers))
    points = []
    for power, point_seed in zip(powers, seeds):
        rate = expected_singles(model, arm, power)
        counts = np.random.default_rng(point_seed).poisson(rate * integration_time)
        points.append((power, counts / integration_time))
    return PowerSeries(tuple(points), channel_frequency, label=label)


def coincidence_series(
    model: ChannelRateModel,
    powers: Sequence[float],
    integration_time: float,
    seed: SeedLike,
    label: str = "",
) -> PowerSeries:
    """Net coincidence rate (measured minus sampled accidentals) at each power."""
    seeds = point_seeds(seed, "coincidences", len(powers))
    points = []
    for power, point_seed in zip(powers, seeds):
        rates = expected_coincidences(model, power)
        rng = np.random.default_rng(point_seed)
        measured = rng.poisson(rates.total * integration_time)
        accidental = rng.poisson(rates.accidental * integration_time)
        points.append((power, (measured - accidental) / integration_time))
    return PowerSeries(tuple(points), label=label)


@dataclass(frozen=True, eq=False)
class JsiGrid:
    rates: NDArray[np.float64]  # s⁻¹, rows = signal channel, columns = idler channel
    channels: Tuple[int, ...]

    def __post_init__(self) -> None:
        rates = np.array(self.rates, dtype=float)
        n = len(self.channels)
        if rates.shape != (n, n):
            raise InvalidInputError(f"JSI grid must be {n}x{n}, got {rates.shape}")
        if np.any(rates < 0):
            raise InvalidInputError("JSI entries must be >= 0")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))

    @property
    def diagonal(self) -> NDArray[np.float64]:
        return np.diag(self.rates).copy()

    def to_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for j, m in enumerate(self.channels):
            row: Dict[str, Any] = {"signal": m}
            row.update({f"idler_{k}": float(self.rates[j, i]) for i, k in enumerate(self.channels)})
            rows.append(row)
        return rows


def jsi(
    rate_models: Sequence[ChannelRateModel],
    power: float,
    time: float,
    seed: SeedLike,
    cross_accidental_rate: Optional[float] = None,
) -> JsiGrid:
    """Sampled coincidence rates for every signal x idler channel combination.

    Off-diagonal cells hold accidentals only: ``cross_accidental_rate`` when
    given, otherwise N_s(j)·N_i(k)·τ_w of the signal channel.
    """
    n = len(rate_models)
    if n == 0:
        raise InvalidInputError("JSI needs at least one channel")
    if not time > 0:
        raise InvalidInputError(f"time must be positive, got {time}")
    if cross_accidental_rate is not None and cross_accidental_rate < 0:
        raise InvalidInputError("cross_accidental_rate must be >= 0")
    singles_s = [expected_singles(m, "signal", power) for m in rate_models]
    singles_i = [expected_singles(m, "idler", power) for m in rate_models]
    expected = np.empty((n, n))
    for j, model in enumerate(rate_models):
        for k in range(n):
            if j == k:
                expected[j, k] = expected_coincidences(model, power).total
            elif cross_accidental_rate is not None:
                expected[j, k] = cross_accidental_rate
            else:
                expected[j, k] = singles_s[j] * singles_i[k] * model.tau_w
    seeds = point_seeds(seed, "jsi", n * n)
    counts = np.array(
        [np.random.default_rng(s).poisson(lam * time) for s, lam in zip(seeds, expected.reshape(-1))],
        dtype=float,
    ).reshape(n, n)
    return JsiGrid(counts / time, tuple(m.m for m in rate_models))


def dominance_ratio(grid: JsiGrid) -> float:
    """min(diagonal) / max(off-diagonal); infinite for an empty off-diagonal."""
    rates = grid.rates
    off = rates[~np.eye(len(rates), dtype=bool)]
    peak_off = float(off.max()) if off.size else 0.0
    if peak_off == 0:
        return math.inf
    return float(rates.diagonal().min()) / peak_off
