from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic.config import ConfigDict

from .cavity import ChannelPair, RingSpec, comb_grid
from .errors import ScenarioError
from .pair_source import ChannelRateModel, EnvelopeSpec
from .thermal_lock import ControllerConfig

SCHEMA_VERSION = 1
BUNDLED_DIR = Path(__file__).resolve().parent / "scenarios"

_STRICT = ConfigDict(frozen=True, extra="forbid")


class SpectrumStage(BaseModel):
    points: int = Field(default=401, ge=21)
    span_fwhm: float = Field(default=10.0, gt=0)
    noise: float = Field(default=0.002, ge=0)
    temperatures: List[float] = Field(default_factory=lambda: [-1.0, -0.5, 0.0, 0.5, 1.0])  # °C
    currents: List[float] = Field(default_factory=lambda: [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0])  # mA
    model_config = _STRICT


class HysteresisStage(BaseModel):
    powers: List[float] = Field(default_factory=lambda: [0.015, 2.773])  # mW
    current_start: float = Field(default=1.75, ge=0)
    current_stop: float = Field(default=2.25, gt=0)
    points: int = Field(default=501, ge=2)
    dwell_taus: float = Field(default=5.0, gt=0)
    step_taus: float = Field(default=0.05, gt=0, le=0.1)
    model_config = _STRICT

    @model_validator(mode="after")
    def _check_ramp(self) -> "HysteresisStage":
        if self.current_stop <= self.current_start:
            raise ValueError("current_stop must exceed current_start")
        return self


class LockStage(BaseModel):
    duration: float = Field(default=100.0, gt=0)  # s
    drift_amplitude: float = 0.5e9  # Hz
    drift_period: float = Field(default=60.0, gt=0)  # s
    # (time s, drift Hz) samples, linearly interpolated; replaces the sinusoid when set
    drift_table: Optional[List[Tuple[float, float]]] = None
    band: float = Field(default=0.03, gt=0)
    model_config = _STRICT

    @field_validator("drift_table")
    @classmethod
    def _check_table(cls, value: Optional[List[Tuple[float, float]]]) -> Optional[List[Tuple[float, float]]]:
        if value is not None and len({t for t, _ in value}) < 2:
            raise ValueError("drift_table needs at least two distinct sample times")
        return value


class TomoStage(BaseModel):
    loop_phase: float = 0.7  # rad, fixed by the Sagnac loop
    hwp_offset: float = 0.0  # rad, error on the compensation angle
    optimize_phase: bool = False
    # "accidental": Werner weight true/(true+accidental) at each power.
    # "multiphoton": 1/(1+R·P²·τ_w), which leaves accidentals to the counts only.
    state_noise: Literal["accidental", "multiphoton"] = "accidental"
    density_channel: int = Field(default=8, ge=1)
    power_sweep_channel: int = Field(default=8, ge=1)
    power_sweep_time: float = Field(default=5000.0, gt=0)  # s per setting
    visibility_points: int = Field(default=25, ge=2)
    visibility_coincidences: float = Field(default=1e5, gt=0)
    stability_repeats: int = Field(default=60, ge=1)
    stability_jitter: float = Field(default=0.02, ge=0)  # rad
    model_config = _STRICT


class PowerFitStage(BaseModel):
    powers: List[float] = Field(
        default_factory=lambda: [0.1, 0.311, 0.522, 0.733, 0.944, 1.156, 1.367, 1.578, 1.789, 2.0]
    )
    integration_time: float = Field(default=10.0, gt=0)
    off_raman_stokes: float = Field(default=1.32e3, ge=0)  # s⁻¹·mW⁻¹, low-frequency side
    off_raman_anti_stokes: float = Field(default=1.14e3, ge=0)
    off_dark: float = Field(default=100.0, ge=0)
    significance: float = Field(default=2.0, gt=0)
    factor: float = Field(default=3.0, gt=0)
    model_config = _STRICT


class JsiStage(BaseModel):
    power: float = Field(default=0.3, gt=0)
    integration_time: float = Field(default=1000.0, gt=0)
    cross_accidental_rate: Optional[float] = Field(default=None, ge=0)
    model_config = _STRICT


class MetricsStage(BaseModel):
    car_channel: int = Field(default=4, ge=1)
    car_power_min: float = Field(default=0.01, gt=0)
    car_power_max: float = Field(default=3.0, gt=0)
    car_points: int = Field(default=12, ge=3)
    car_time: float = Field(default=10.0, gt=0)
    min_accidentals: float = Field(default=400.0, ge=0)
    bandwidth: float = Field(default=184.58e6, gt=0)  # Hz, channels without an override
    bandwidths: Dict[int, float] = Field(default_factory=dict)
    histogram_peak: float = Field(default=1e5, gt=0)
    histogram_background: float = Field(default=100.0, ge=0)
    model_config = _STRICT

    @model_validator(mode="after")
    def _check(self) -> "MetricsStage":
        if self.car_power_max <= self.car_power_min:
            raise ValueError("car_power_max must exceed car_power_min")
        for m, value in self.bandwidths.items():
            if not value > 0:
                raise ValueError(f"bandwidths[{m}] must be positive")
        return self


class BudgetStage(BaseModel):
    transmission_s: float = Field(default=0.5, gt=0, le=1)
    transmission_i: float = Field(default=0.5, gt=0, le=1)
    detection: float = Field(default=0.9, gt=0, le=1)
    model_config = _STRICT


class Scenario(BaseModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "scenario"
    ring: RingSpec = Field(default_factory=RingSpec)
    envelope: EnvelopeSpec = Field(default_factory=EnvelopeSpec)
    channels: List[ChannelRateModel] = Field(min_length=1)
    controller: ControllerConfig = Field(default_factory=ControllerConfig)
    operating_power: float = Field(default=1.0, gt=0)  # mW
    powers: List[float] = Field(default_factory=lambda: [0.6, 1.2, 1.8, 2.4, 3.0])  # mW
    integration_time: float = Field(default=100.0, gt=0)  # s per tomography setting
    root_seed: int = Field(default=20240101, ge=0)
    outputs: Optional[str] = None
    spectrum: SpectrumStage = Field(default_factory=SpectrumStage)
    hysteresis: HysteresisStage = Field(default_factory=HysteresisStage)
    lock: LockStage = Field(default_factory=LockStage)
    tomo: TomoStage = Field(default_factory=TomoStage)
    power_fit: PowerFitStage = Field(default_factory=PowerFitStage)
    jsi: JsiStage = Field(default_factory=JsiStage)
    metrics: MetricsStage = Field(default_factory=MetricsStage)
    budget: BudgetStage = Field(default_factory=BudgetStage)
    model_config = _STRICT

    @field_validator("powers")
    @classmethod
    def _positive_powers(cls, value: List[float]) -> List[float]:
        if not value or any(p <= 0 for p in value):
            raise ValueError("powers must be a non-empty list of positive mW values")
        return value

    @model_validator(mode="after")
    def _check_channels(self) -> "Scenario":
        indices = [c.m for c in self.channels]
        if len(set(indices)) != len(indices):
            raise ValueError("channel indices m must be unique")
        for stage, m in (
            ("tomo.density_channel", self.tomo.density_channel),
            ("tomo.power_sweep_channel", self.tomo.power_sweep_channel),
            ("metrics.car_channel", self.metrics.car_channel),
        ):
            if m not in indices:
                raise ValueError(f"{stage}={m} is not one of the configured channels")
        return self

    def channel(self, m: int) -> ChannelRateModel:
        for model in self.channels:
            if model.m == m:
                return model
        raise KeyError(m)

    def channel_pair(self, m: int) -> ChannelPair:
        return comb_grid(self.ring.pump_frequency, self.ring.grid_spacing, m)[-1]


def resolve_config(config: Union[str, Path]) -> Path:
    """A path on disk, or the name of a bundled scenario."""
    path = Path(config)
    if path.exists():
        return path
    bundled = BUNDLED_DIR / f"{config}.json"
    if bundled.exists():
        return bundled
    raise ScenarioError(f"Scenario not found: {config}")


def load_scenario(config: Union[str, Path]) -> Scenario:
    path = resolve_config(config)
    try:
        with path.open("r", encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return Scenario.model_validate(payload)


def with_seed(scenario: Scenario, seed: int) -> Scenario:
    return Scenario.model_validate({**scenario.model_dump(), "root_seed": seed})


def scenario_hash(scenario: Scenario) -> str:
    canonical = json.dumps(scenario.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
