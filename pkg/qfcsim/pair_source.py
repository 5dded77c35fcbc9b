"""
Per-channel pair and noise rates, the SFWM envelope, and the state family.

Rates follow the usual single-pump SFWM bookkeeping (P in mW):

    N_s = η_s·R·P² + r_s·P + d_s
    N_i = η_i·R·P² + r_i·P + d_i
    N_c = η_s·η_i·R·P² + N_s·N_i·τ_w

R is the loss-free pair generation rate of the channel, r the Raman (linear)
term and d the dark count rate. Accidentals use the flat-background estimate
N_s·N_i·τ_w.
"""

from __future__ import annotations

import math
from typing import Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, Field
from pydantic.config import ConfigDict

from .cavity import ChannelPair
from .errors import InvalidInputError
from .jones import TwoQubitState, bell_target

# Average off-resonance linear terms on the low- and high-frequency sides.
STOKES_RAMAN_RATIO = 1.32 / 1.14

Arm = Literal["signal", "idler"]
EnvelopeShape = Literal["gaussian", "sech2", "lorentzian"]


class EnvelopeSpec(BaseModel):
    fwhm: float = Field(default=3e12, gt=0)  # Hz
    shape: EnvelopeShape = "gaussian"
    model_config = ConfigDict(frozen=True, extra="forbid")


class ChannelRateModel(BaseModel):
    """Rates of one signal/idler channel pair.

    ``pgr`` is the intrinsic rate at zero pump detuning (s⁻¹·mW⁻²); use
    :func:`with_envelope` to get the model of a detuned channel. The signal
    arm sits on the high-frequency (anti-Stokes) side of the pump.
    """

    m: int = Field(ge=1)
    pgr: float = Field(ge=0)
    eta_s: float = Field(ge=0, le=1)
    eta_i: float = Field(ge=0, le=1)
    raman_s: float = Field(default=0.0, ge=0)  # s⁻¹·mW⁻¹
    raman_i: float = Field(default=0.0, ge=0)
    dark_s: float = Field(default=0.0, ge=0)  # s⁻¹
    dark_i: float = Field(default=0.0, ge=0)
    tau_w: float = Field(gt=0)  # s
    model_config = ConfigDict(frozen=True, extra="forbid")


class CoincidenceRates(NamedTuple):
    true: float
    accidental: float

    @property
    def total(self) -> float:
        return self.true + self.accidental

    @property
    def signal_fraction(self) -> float:
        """true/(true+accidental); 1 when nothing is detected."""
        return self.true / self.total if self.total > 0 else 1.0


def pgr_envelope(channel: ChannelPair, pump: float, env: EnvelopeSpec) -> float:
    x = (channel.signal_frequency - pump) / env.fwhm
    if env.shape == "gaussian":
        return float(math.exp(-4.0 * math.log(2.0) * x * x))
    if env.shape == "sech2":
        # sech²(k·x) with k chosen so the value is 1/2 at x = 1/2
        k = 2.0 * math.acosh(math.sqrt(2.0))
        return float(1.0 / math.cosh(k * x) ** 2)
    if env.shape == "lorentzian":
        return float(1.0 / (1.0 + 4.0 * x * x))
    raise InvalidInputError(f"Unknown envelope shape {env.shape!r}")


def channel_pgr(model: ChannelRateModel, channel: ChannelPair, pump: float, env: EnvelopeSpec) -> float:
    return model.pgr * pgr_envelope(channel, pump, env)


def with_envelope(
    model: ChannelRateModel, channel: ChannelPair, pump: float, env: EnvelopeSpec
) -> ChannelRateModel:
    return model.model_copy(update={"pgr": channel_pgr(model, channel, pump, env)})


def _check_power(power: float) -> None:
    if not power >= 0:
        raise InvalidInputError(f"Pump power must be >= 0 mW, got {power}")


def expected_singles(model: ChannelRateModel, arm: Arm, power: float) -> float:
    _check_power(power)
    if arm == "signal":
        eta, raman, dark = model.eta_s, model.raman_s, model.dark_s
    elif arm == "idler":
        eta, raman, dark = model.eta_i, model.raman_i, model.dark_i
    else:
        raise InvalidInputError(f"arm must be 'signal' or 'idler', got {arm!r}")
    return eta * model.pgr * power**2 + raman * power + dark


def expected_coincidences(model: ChannelRateModel, power: float) -> CoincidenceRates:
    _check_power(power)
    true = model.eta_s * model.eta_i * model.pgr * power**2
    accidental = expected_singles(model, "signal", power) * expected_singles(model, "idler", power) * model.tau_w
    return CoincidenceRates(true=true, accidental=accidental)


def car_expected(model: ChannelRateModel, power: float) -> float:
    rates = expected_coincidences(model, power)
    if rates.accidental == 0:
        return math.inf
    return rates.true / rates.accidental


def multiphoton_fraction(pgr: float, power: float, tau_w: float) -> float:
    """Share of detected pairs not spoiled by a second pair in the same window."""
    _check_power(power)
    return 1.0 / (1.0 + pgr * power**2 * tau_w)


def stokes_raman(anti_stokes: float) -> float:
    return anti_stokes * STOKES_RAMAN_RATIO


def ideal_state(theta: float) -> TwoQubitState:
    return bell_target(theta)


def noisy_state(theta: float, signal_fraction: float) -> TwoQubitState:
    p = signal_fraction
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"signal_fraction must be in [0, 1], got {p}")
    mixed = p * ideal_state(theta).matrix + (1.0 - p) * np.eye(4, dtype=complex) / 4
    return TwoQubitState(mixed)
