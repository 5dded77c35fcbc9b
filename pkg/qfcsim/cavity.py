"""
Static spectral model of the microring.

Resonances are Lorentzian dips with an explicit transmission floor:

    T(δ) = 1 − (1 − T_min)·(Γ/2)² / (δ² + (Γ/2)²)

where Γ is the FWHM and δ the laser-resonance detuning, all in Hz. The comb
grid is indexed by pair number m ≥ 1 with signal = pump + m·spacing and
idler = pump − m·spacing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from lmfit import Minimizer, Parameters
from numpy.typing import NDArray
from pydantic import BaseModel, Field, model_validator
from pydantic.config import ConfigDict
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import FitError, InvalidInputError, InvalidParameterError
from .seeding import SeedLike, rng_from

logger = logging.getLogger(__name__)

FloatOrArray = Union[float, NDArray[np.floating]]

PUMP_FREQUENCY_HZ = 193.5e12
GRID_SPACING_HZ = 99e9


class RingSpec(BaseModel):
    """Cavity description, frequencies in Hz, tuning coefficients signed."""

    pump_frequency: float = Field(default=PUMP_FREQUENCY_HZ, gt=0)
    fsr: float = Field(default=99.03e9, gt=0)
    fwhm: float = Field(default=190.41e6, gt=0)
    min_transmission: float = Field(default=0.02, ge=0, lt=1)
    k_temp: float = -3.01e9  # Hz / °C
    k_current: float = -0.91e9  # Hz / mA²
    heater_resistance: float = Field(default=2050.0, gt=0)  # Ω
    # Pumped resonance at zero heater current; None means aligned with the pump.
    cold_resonance: Optional[float] = Field(default=None, gt=0)
    grid_spacing: float = Field(default=GRID_SPACING_HZ, gt=0)
    resonance_fwhms: Dict[int, float] = Field(default_factory=dict)
    thermal_time_constant: float = Field(default=10e-3, gt=0)  # s
    heating_efficiency: float = -0.15e9  # Hz / mW absorbed
    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _check_overrides(self) -> "RingSpec":
        for index, width in self.resonance_fwhms.items():
            if not width > 0:
                raise ValueError(f"resonance_fwhms[{index}] must be positive, got {width}")
        return self

    @property
    def resonance_frequency(self) -> float:
        return self.cold_resonance if self.cold_resonance is not None else self.pump_frequency

    @property
    def q_factor(self) -> float:
        return self.resonance_frequency / self.fwhm

    def fwhm_for(self, index: int) -> float:
        return self.resonance_fwhms.get(index, self.fwhm)


@dataclass(frozen=True)
class ChannelPair:
    index: int
    signal_frequency: float
    idler_frequency: float

    def __post_init__(self) -> None:
        if self.index < 1:
            raise InvalidParameterError(f"Channel index must be >= 1, got {self.index}")

    @property
    def center(self) -> float:
        return 0.5 * (self.signal_frequency + self.idler_frequency)


class LorentzianFit(NamedTuple):
    f0: float
    fwhm: float
    min_transmission: float
    q_factor: float


def _check_lineshape(fwhm: float, min_transmission: float) -> None:
    if not fwhm > 0:
        raise InvalidParameterError(f"fwhm must be positive, got {fwhm}")
    if not 0 <= min_transmission < 1:
        raise InvalidParameterError(f"min_transmission must be in [0, 1), got {min_transmission}")


def transmission(detuning: FloatOrArray, fwhm: float, min_transmission: float) -> FloatOrArray:
    _check_lineshape(fwhm, min_transmission)
    half = 0.5 * fwhm
    delta = np.asarray(detuning, dtype=float)
    value = 1.0 - (1.0 - min_transmission) * half**2 / (delta**2 + half**2)
    return float(value) if value.ndim == 0 else value


def extinction_db(value: float) -> float:
    if not 0 < value <= 1:
        raise InvalidParameterError(f"Transmission must be in (0, 1], got {value}")
    return float(-10.0 * np.log10(value))


def comb_grid(pump_frequency: float, grid_spacing: float, pair_count: int) -> List[ChannelPair]:
    if not grid_spacing > 0:
        raise InvalidParameterError(f"grid_spacing must be positive, got {grid_spacing}")
    if pair_count < 0:
        raise InvalidParameterError(f"pair_count must be >= 0, got {pair_count}")
    return [
        ChannelPair(
            index=m,
            signal_frequency=pump_frequency + m * grid_spacing,
            idler_frequency=pump_frequency - m * grid_spacing,
        )
        for m in range(1, pair_count + 1)
    ]


def thermal_shift(delta_temp: float, heater_current: float, spec: RingSpec) -> float:
    return spec.k_temp * delta_temp + spec.k_current * heater_current**2


def heater_power_mw(heater_current: float, spec: RingSpec) -> float:
    # mA² · Ω = µW
    return heater_current**2 * spec.heater_resistance * 1e-3


def resonance_comb(spec: RingSpec, count: int, start: float) -> List[Tuple[float, float]]:
    """Centers and widths of ``count`` resonances spaced by the FSR."""
    return [(start + k * spec.fsr, spec.fwhm_for(k)) for k in range(count)]


def estimate_fsr(centers: Sequence[float]) -> float:
    if len(centers) < 2:
        raise InvalidInputError("At least two resonance centers are needed to estimate the FSR")
    return float(np.mean(np.diff(np.sort(np.asarray(centers, dtype=float)))))


def wavelength_span(f_low: float, f_high: float) -> float:
    if not 0 < f_low < f_high:
        raise InvalidParameterError("Expected 0 < f_low < f_high")
    return SPEED_OF_LIGHT / f_low - SPEED_OF_LIGHT / f_high


def synthetic_spectrum(
    f0: float,
    fwhm: float,
    min_transmission: float,
    span_fwhm: float = 10.0,
    points: int = 401,
    noise: float = 0.0,
    seed: SeedLike = None,
) -> List[Tuple[float, float]]:
    freqs = f0 + np.linspace(-0.5 * span_fwhm * fwhm, 0.5 * span_fwhm * fwhm, points)
    values = transmission(freqs - f0, fwhm, min_transmission)
    if noise > 0:
        values = values + rng_from(seed).normal(0.0, noise, size=points)
    return list(zip(freqs.tolist(), np.asarray(values).tolist()))


def _dip_residual(pars: Parameters, x: NDArray[np.floating], data: NDArray[np.floating]) -> NDArray[np.floating]:
    v = pars.valuesdict()
    half = 0.5 * v["width"]
    model = 1.0 - (1.0 - v["tmin"]) * half**2 / ((x - v["center"]) ** 2 + half**2)
    return model - data


def fit_lorentzian(samples: Sequence[Tuple[float, float]]) -> LorentzianFit:
    if len(samples) < 5:
        raise InvalidInputError(f"At least 5 samples are required, got {len(samples)}")
    data = np.asarray(samples, dtype=float)
    order = np.argsort(data[:, 0])
    freqs, values = data[order, 0], data[order, 1]
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("Transmission samples must be finite")

    noise = 1.4826 * float(np.median(np.abs(np.diff(values)))) / np.sqrt(2.0)
    depth = 1.0 - float(values.min())
    if depth < max(6.0 * noise, 1e-3):
        raise FitError(f"No resonance dip detected (depth {depth:.3g}, noise {noise:.3g})")

    # Initial guess: minimum sample, then width from the half-depth crossing.
    i_min = int(np.argmin(values))
    f_guess = float(freqs[i_min])
    t_guess = float(np.clip(values[i_min], 0.0, 0.999))
    below = freqs[values < 0.5 * (1.0 + t_guess)]
    step = float(np.min(np.diff(freqs))) if len(freqs) > 1 else 1.0
    w_guess = max(float(below.max() - below.min()), 2.0 * step)

    x = (freqs - f_guess) / w_guess
    pars = Parameters()
    pars.add("center", value=0.0)
    pars.add("width", value=1.0, min=1e-9)
    pars.add("tmin", value=t_guess, min=0.0, max=0.999999)

    out = Minimizer(_dip_residual, pars, fcn_args=(x, values)).leastsq(max_nfev=20000, xtol=1e-14, ftol=1e-14)
    v = out.params.valuesdict()
    if not out.success or not np.isfinite(v["width"]) or v["width"] <= 0:
        raise FitError(f"Lorentzian fit did not converge: {out.message}")

    f0 = f_guess + v["center"] * w_guess
    fwhm = v["width"] * w_guess
    logger.debug("Lorentzian fit f0=%.6e fwhm=%.4e tmin=%.4f", f0, fwhm, v["tmin"])
    return LorentzianFit(f0=f0, fwhm=fwhm, min_transmission=float(v["tmin"]), q_factor=f0 / fwhm)
