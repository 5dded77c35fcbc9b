"""
Self-heating dynamics of the pumped resonance and the transmission lock.

Single-pole thermal model, one explicit Euler step per call:

    dS/dt = (κ·P·(1 − T(δ_eff)) − S) / τ_th
    δ_eff = f_laser − (f_cold + drift + k_T·ΔT + k_I·I² + S)

κ is signed (Hz per absorbed mW). With κ < 0 absorbed heat pulls the
resonance towards lower frequency, so the thermally stable side of the dip is
δ_eff > 0 and that is where the lock operates. Raising the heater current
moves the resonance away from the pump and lowers the absorbed power.

The proportional controller accumulates current steps, which makes it an
integrating loop on the resonance position: a constant drift rate r (Hz/s)
leaves a steady transmission error of about
r·sample_period / (gain · |dT/dI|), and the lock holds while that stays
inside the deadband-limited band.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from pydantic.config import ConfigDict
from scipy.integrate import trapezoid

from .cavity import RingSpec, thermal_shift
from .errors import InvalidInputError, InvalidParameterError, ThermalStabilityError
from .seeding import SeedLike, rng_from

logger = logging.getLogger(__name__)

Direction = Literal["forward", "backward"]
DriftFn = Callable[[float], float]


@dataclass(frozen=True)
class ThermalState:
    self_heat_shift: float = 0.0  # Hz
    heater_current: float = 0.0  # mA
    time: float = 0.0  # s

    def __post_init__(self) -> None:
        if not math.isfinite(self.self_heat_shift):
            raise InvalidParameterError("self_heat_shift must be finite")


class ControllerConfig(BaseModel):
    setpoint_transmission: float = Field(default=0.05, gt=0, lt=1)
    proportional_gain: float = Field(default=0.05, gt=0)  # mA per unit transmission error
    deadband: float = Field(default=0.002, ge=0)
    max_step: float = Field(default=0.01, gt=0)  # mA
    sample_period: float = Field(default=0.01, gt=0)  # s
    max_current: float = Field(default=3.0, gt=0)  # mA
    measurement_noise: float = Field(default=0.001, ge=0)
    model_config = ConfigDict(frozen=True, extra="forbid")


class LockSample(NamedTuple):
    time: float
    transmission: float
    current: float
    saturated: bool


class LockSummary(NamedTuple):
    samples: int
    max_abs_error: float
    fraction_in_band: float
    saturations: int


def _dip(delta: float, fwhm: float, tmin: float) -> float:
    half_sq = 0.25 * fwhm * fwhm
    return 1.0 - (1.0 - tmin) * half_sq / (delta * delta + half_sq)


def effective_detuning(
    state: ThermalState,
    laser_frequency: float,
    spec: RingSpec,
    drift: float = 0.0,
    delta_temp: float = 0.0,
) -> float:
    resonance = (
        spec.resonance_frequency
        + drift
        + thermal_shift(delta_temp, state.heater_current, spec)
        + state.self_heat_shift
    )
    return laser_frequency - resonance


def cavity_transmission(
    state: ThermalState,
    laser_frequency: float,
    spec: RingSpec,
    drift: float = 0.0,
    delta_temp: float = 0.0,
) -> float:
    delta = effective_detuning(state, laser_frequency, spec, drift, delta_temp)
    return _dip(delta, spec.fwhm, spec.min_transmission)


def thermal_step(
    state: ThermalState,
    pump_power: float,
    laser_frequency: float,
    spec: RingSpec,
    dt: float,
    drift: float = 0.0,
    delta_temp: float = 0.0,
) -> ThermalState:
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    tau = spec.thermal_time_constant
    # Small relative slack so that dt = τ/10 computed in floating point is accepted.
    if dt > tau / 10 * (1 + 1e-9):
        raise ThermalStabilityError(f"dt={dt:g}s exceeds tau_th/10={tau / 10:g}s")
    t_now = cavity_transmission(state, laser_frequency, spec, drift, delta_temp)
    target = spec.heating_efficiency * pump_power * (1.0 - t_now)
    shift = state.self_heat_shift + dt * (target - state.self_heat_shift) / tau
    return replace(state, self_heat_shift=shift, time=state.time + dt)


def _check_ramp(current_ramp: Sequence[float], direction: Direction) -> np.ndarray:
    ramp = np.asarray(current_ramp, dtype=float)
    if ramp.ndim != 1 or ramp.size == 0:
        raise InvalidInputError("current_ramp must be a non-empty sequence")
    steps = np.diff(ramp)
    if direction == "forward":
        ok = bool(np.all(steps >= 0))
    elif direction == "backward":
        ok = bool(np.all(steps <= 0))
    else:
        raise InvalidInputError(f"Unknown sweep direction {direction!r}")
    if not ok:
        raise InvalidInputError(f"current_ramp is not monotone in the {direction} direction")
    return ramp


def static_trace(spec: RingSpec, current_ramp: Sequence[float]) -> List[Tuple[float, float]]:
    """Cold-cavity lineshape along a current ramp (no self-heating)."""
    out: List[Tuple[float, float]] = []
    for current in current_ramp:
        state = ThermalState(heater_current=float(current))
        out.append((float(current), cavity_transmission(state, spec.pump_frequency, spec)))
    return out


def sweep_trace(
    spec: RingSpec,
    pump_power: float,
    current_ramp: Sequence[float],
    direction: Direction,
    dwell: Optional[float] = None,
    dt: Optional[float] = None,
) -> List[Tuple[float, float]]:
    ramp = _check_ramp(current_ramp, direction)
    if pump_power < 0:
        raise InvalidInputError(f"pump_power must be >= 0, got {pump_power}")
    tau = spec.thermal_time_constant
    dt = tau / 20 if dt is None else dt
    dwell = 5 * tau if dwell is None else dwell
    steps = max(1, int(math.ceil(dwell / dt)))

    state = ThermalState(heater_current=float(ramp[0]))
    trace: List[Tuple[float, float]] = []
    for current in ramp:
        state = replace(state, heater_current=float(current))
        for _ in range(steps):
            state = thermal_step(state, pump_power, spec.pump_frequency, spec, dt)
        trace.append((float(current), cavity_transmission(state, spec.pump_frequency, spec)))
    return trace


def hysteresis_area(
    forward: Sequence[Tuple[float, float]], backward: Sequence[Tuple[float, float]]
) -> float:
    """Area enclosed between the two sweep directions, in mA."""
    fwd = np.asarray(forward, dtype=float)
    bwd = np.asarray(backward, dtype=float)
    order = np.argsort(bwd[:, 0])
    on_grid = np.interp(fwd[:, 0], bwd[order, 0], bwd[order, 1])
    return float(trapezoid(np.abs(fwd[:, 1] - on_grid), fwd[:, 0]))


def lock_step(
    measured_transmission: float,
    previous_transmission: float,
    state: ThermalState,
    cfg: ControllerConfig,
) -> float:
    measured = min(max(measured_transmission, 0.0), 1.0)
    error = cfg.setpoint_transmission - measured
    if abs(error) <= cfg.deadband:
        return 0.0
    step = math.copysign(min(cfg.proportional_gain * abs(error), cfg.max_step), error)
    logger.debug(
        "lock t=%.4fs T=%.4f (prev %.4f) I=%.5fmA step=%+.2e",
        state.time,
        measured,
        previous_transmission,
        state.heater_current,
        step,
    )
    return step


def lock_operating_point(
    spec: RingSpec,
    cfg: ControllerConfig,
    pump_power: float,
    drift: float = 0.0,
    delta_temp: float = 0.0,
) -> ThermalState:
    """Steady state that sits on the setpoint on the thermally stable side."""
    target = cfg.setpoint_transmission
    if target <= spec.min_transmission:
        raise InvalidParameterError(
            f"Setpoint {target} is below the dip floor {spec.min_transmission}"
        )
    depth = (1.0 - target) / (1.0 - spec.min_transmission)
    side = 1.0 if spec.heating_efficiency <= 0 else -1.0
    delta = side * 0.5 * spec.fwhm * math.sqrt(1.0 / depth - 1.0)
    shift = spec.heating_efficiency * pump_power * (1.0 - target)
    # δ = f_L − f_c − drift − k_T·ΔT − k_I·I² − S
    base = spec.pump_frequency - spec.resonance_frequency - drift - spec.k_temp * delta_temp
    if spec.k_current == 0:
        raise InvalidParameterError("Heater has no tuning effect (k_current = 0)")
    current_sq = (base - delta - shift) / spec.k_current
    if current_sq < 0 or math.sqrt(current_sq) > cfg.max_current:
        raise InvalidParameterError("Setpoint cannot be reached within the heater current range")
    return ThermalState(self_heat_shift=shift, heater_current=math.sqrt(current_sq))


def sinusoidal_drift(amplitude: float, period: float) -> DriftFn:
    if not period > 0:
        raise InvalidParameterError(f"period must be positive, got {period}")
    return lambda t: amplitude * math.sin(2 * math.pi * t / period)


def tabulated_drift(samples: Sequence[Tuple[float, float]]) -> DriftFn:
    table = np.asarray(samples, dtype=float)
    if table.ndim != 2 or table.shape[0] < 2:
        raise InvalidInputError("Drift table needs at least two (time, Hz) rows")
    order = np.argsort(table[:, 0])
    times, values = table[order, 0], table[order, 1]
    return lambda t: float(np.interp(t, times, values))


def run_lock(
    spec: RingSpec,
    cfg: ControllerConfig,
    pump_power: float,
    drift: DriftFn,
    duration: float,
    seed: SeedLike = None,
    closed_loop: bool = True,
    initial_state: Optional[ThermalState] = None,
) -> List[LockSample]:
    if not duration > 0:
        raise InvalidParameterError(f"duration must be positive, got {duration}")
    rng = rng_from(seed)
    tau = spec.thermal_time_constant
    substeps = max(1, int(math.ceil(cfg.sample_period / (tau / 10) - 1e-9)))
    dt = cfg.sample_period / substeps
    n_samples = int(round(duration / cfg.sample_period))

    state = initial_state or lock_operating_point(spec, cfg, pump_power, drift=drift(0.0))
    previous = cavity_transmission(state, spec.pump_frequency, spec, drift(0.0))
    trace: List[LockSample] = []
    saturations = 0
    for _ in range(n_samples):
        for _ in range(substeps):
            state = thermal_step(state, pump_power, spec.pump_frequency, spec, dt, drift=drift(state.time))
        actual = cavity_transmission(state, spec.pump_frequency, spec, drift(state.time))
        measured = actual
        if cfg.measurement_noise > 0:
            measured = min(max(actual + rng.normal(0.0, cfg.measurement_noise), 0.0), 1.0)

        saturated = False
        if closed_loop:
            wanted = state.heater_current + lock_step(measured, previous, state, cfg)
            current = min(max(wanted, 0.0), cfg.max_current)
            saturated = current != wanted
            state = replace(state, heater_current=current)
        saturations += int(saturated)
        previous = measured
        trace.append(LockSample(state.time, actual, state.heater_current, saturated))

    if saturations:
        logger.warning("Heater current saturated on %d of %d samples", saturations, n_samples)
    return trace


def lock_summary(trace: Sequence[LockSample], cfg: ControllerConfig, band: float = 0.03) -> LockSummary:
    values = np.asarray([s.transmission for s in trace], dtype=float)
    errors = np.abs(values - cfg.setpoint_transmission)
    return LockSummary(
        samples=len(trace),
        max_abs_error=float(errors.max()) if len(trace) else 0.0,
        fraction_in_band=float(np.mean(errors <= band)) if len(trace) else 1.0,
        saturations=sum(1 for s in trace if s.saturated),
    )
