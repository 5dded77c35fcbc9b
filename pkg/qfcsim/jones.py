"""
Jones calculus in the {H, V} basis and the two-qubit polarization state.

Waveplate convention (retardance Γ, fast axis at angle α):

    J(Γ, α) = [[cos(Γ/2) − i·sin(Γ/2)·cos2α,   i·sin(Γ/2)·sin2α        ],
               [i·sin(Γ/2)·sin2α,              cos(Γ/2) + i·sin(Γ/2)·cos2α]]

With it HWP(0) ∝ diag(1, −1), HWP(45°) swaps H and V, QWP(45°) sends |H⟩ to
(|H⟩ + i|V⟩)/√2, and QWP(45°)·HWP(φ)·QWP(45°) ∝ diag(1, e^{i(4φ+π)}), so the
relative phase of [1; e^{iθ}] becomes 4φ + θ − π (mod 2π). Global phases are
dropped everywhere.

Two-qubit states are ordered HH, HV, VH, VV (signal first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Literal, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import eigh

from .errors import InvalidInputError, InvalidStateError

JonesMatrix = NDArray[np.complex128]
JonesVector = NDArray[np.complex128]
WaveplateKind = Literal["half", "quarter"]

STATE_TOLERANCE = 1e-10

_S = 1 / math.sqrt(2)
POLARIZATIONS: Dict[str, JonesVector] = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, 1j * _S], dtype=complex),
    "L": np.array([_S, -1j * _S], dtype=complex),
}

BASES: Dict[str, Tuple[str, str]] = {"HV": ("H", "V"), "DA": ("D", "A"), "RL": ("R", "L")}


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    matrix: NDArray[np.complex128]

    def __post_init__(self) -> None:
        rho = np.array(self.matrix, dtype=complex)
        if rho.shape != (4, 4):
            raise InvalidStateError(f"Density matrix must be 4x4, got {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise InvalidStateError("Density matrix has non-finite entries")
        if np.max(np.abs(rho - rho.conj().T)) > STATE_TOLERANCE:
            raise InvalidStateError("Density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > STATE_TOLERANCE:
            raise InvalidStateError(f"Density matrix trace is {np.trace(rho).real!r}, expected 1")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -STATE_TOLERANCE:
            raise InvalidStateError("Density matrix is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    @classmethod
    def from_vector(cls, psi: ArrayLike) -> "TwoQubitState":
        vec = np.asarray(psi, dtype=complex).reshape(4)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise InvalidStateError("Zero state vector")
        vec = vec / norm
        return cls(np.outer(vec, vec.conj()))

    @classmethod
    def maximally_mixed(cls) -> "TwoQubitState":
        return cls(np.eye(4, dtype=complex) / 4)

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def element(self, row: str, col: str) -> complex:
        index = {"HH": 0, "HV": 1, "VH": 2, "VV": 3}
        return complex(self.matrix[index[row], index[col]])

    def to_json_list(self) -> List[List[float]]:
        """Row-major [re, im] pairs, 16 entries."""
        return [[float(z.real), float(z.imag)] for z in self.matrix.reshape(16)]

    @classmethod
    def from_json_list(cls, values: Sequence[Sequence[float]]) -> "TwoQubitState":
        if len(values) != 16:
            raise InvalidStateError(f"Expected 16 complex entries, got {len(values)}")
        flat = np.array([complex(re, im) for re, im in values], dtype=complex)
        return cls(flat.reshape(4, 4))


StateLike = Union[TwoQubitState, ArrayLike]


def as_state(rho: StateLike) -> TwoQubitState:
    return rho if isinstance(rho, TwoQubitState) else TwoQubitState(np.asarray(rho))


@dataclass(frozen=True)
class MeasurementSetting:
    basis_signal: str
    basis_idler: str

    def __post_init__(self) -> None:
        for basis in (self.basis_signal, self.basis_idler):
            if basis not in BASES:
                raise InvalidInputError(f"Unknown basis {basis!r}; expected one of {sorted(BASES)}")

    @property
    def label(self) -> str:
        return f"{self.basis_signal}×{self.basis_idler}"

    def outcomes(self) -> List[Tuple[str, str]]:
        return [(s, i) for s in BASES[self.basis_signal] for i in BASES[self.basis_idler]]

    def outcome_labels(self) -> List[str]:
        return [s + i for s, i in self.outcomes()]


def measurement_settings() -> List[MeasurementSetting]:
    return [MeasurementSetting(s, i) for s in BASES for i in BASES]


def retarder(retardance: float, angle: float) -> JonesMatrix:
    c, s = math.cos(retardance / 2), math.sin(retardance / 2)
    c2, s2 = math.cos(2 * angle), math.sin(2 * angle)
    return np.array(
        [[c - 1j * s * c2, 1j * s * s2], [1j * s * s2, c + 1j * s * c2]],
        dtype=complex,
    )


def waveplate(kind: WaveplateKind, angle: float) -> JonesMatrix:
    if kind == "half":
        return retarder(math.pi, angle)
    if kind == "quarter":
        return retarder(math.pi / 2, angle)
    raise InvalidInputError(f"Unknown waveplate kind {kind!r}")


def compensator(phi: float) -> JonesMatrix:
    """QWP(45°)·HWP(φ)·QWP(45°)."""
    qwp = waveplate("quarter", math.pi / 4)
    return qwp @ waveplate("half", phi) @ qwp


def compensator_phase(theta: float, phi: float) -> float:
    out = compensator(phi) @ np.array([1.0, np.exp(1j * theta)], dtype=complex)
    return float(np.angle(out[1] / out[0]))


def compensation_angle(theta: float) -> float:
    # The compensator phase depends on 4φ only, so φ is reduced to [0, π/2).
    return float(np.mod((math.pi - theta) / 4, math.pi / 2))


def projector(label: str) -> JonesMatrix:
    try:
        vec = POLARIZATIONS[label]
    except KeyError:
        raise InvalidInputError(f"Unknown polarization label {label!r}") from None
    return np.outer(vec, vec.conj())


def bell_vector(theta: float = 0.0) -> NDArray[np.complex128]:
    """(|HH⟩ + e^{iθ}|VV⟩)/√2."""
    return np.array([_S, 0, 0, _S * np.exp(1j * theta)], dtype=complex)


def sagnac_state(pump_polarization: ArrayLike, loop_phase: float) -> TwoQubitState:
    """Pair state leaving the Sagnac loop for a given pump polarization.

    The V pump component travels clockwise and its VV pair is rotated to HH on
    the way out; the H component is rotated to V, travels counterclockwise and
    its VV pair leaves unrotated. The two paths recombine with phase θ.
    """
    pump = np.asarray(pump_polarization, dtype=complex).reshape(2)
    norm = np.linalg.norm(pump)
    if norm == 0:
        raise InvalidInputError("Pump polarization has zero norm")
    a_h, a_v = pump / norm
    psi = np.array([a_v, 0, 0, np.exp(1j * loop_phase) * a_h], dtype=complex)
    return TwoQubitState.from_vector(psi)


def apply_local(rho: StateLike, jones: JonesMatrix, qubit: int) -> TwoQubitState:
    if qubit not in (0, 1):
        raise InvalidInputError(f"qubit must be 0 (signal) or 1 (idler), got {qubit}")
    state = as_state(rho)
    eye = np.eye(2, dtype=complex)
    op = np.kron(jones, eye) if qubit == 0 else np.kron(eye, jones)
    out = op @ state.matrix @ op.conj().T
    return TwoQubitState(0.5 * (out + out.conj().T))


def compensated_state(theta: float, phi: float) -> TwoQubitState:
    """Sagnac output for a diagonal pump after the signal-arm compensator."""
    return apply_local(sagnac_state(POLARIZATIONS["D"], theta), compensator(phi), qubit=0)


def born_probability(rho: StateLike, label_s: str, label_i: str) -> float:
    state = as_state(rho)
    op = np.kron(projector(label_s), projector(label_i))
    return float(np.real(np.trace(state.matrix @ op)))


def bell_target(theta: float = 0.0) -> TwoQubitState:
    return TwoQubitState.from_vector(bell_vector(theta))


def purity(rho: StateLike) -> float:
    return as_state(rho).purity


_SIGMA_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence(rho: StateLike) -> float:
    """Wootters concurrence."""
    m = as_state(rho).matrix
    flipped = _SIGMA_YY @ m.conj() @ _SIGMA_YY
    eig = np.sort(np.sqrt(np.clip(np.linalg.eigvals(m @ flipped).real, 0.0, None)))[::-1]
    return float(max(0.0, eig[0] - eig[1] - eig[2] - eig[3]))


def psd_sqrt(matrix: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Square root of a Hermitian PSD matrix; negative round-off eigenvalues are clipped."""
    values, vectors = eigh(matrix)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.conj().T


def state_fidelity(rho: StateLike, sigma: StateLike) -> float:
    """Uhlmann fidelity (tr√(√ρ σ √ρ))²."""
    a = as_state(rho).matrix
    b = as_state(sigma).matrix
    root = psd_sqrt(a)
    inner = root @ b @ root
    eig = np.clip(np.linalg.eigvalsh(0.5 * (inner + inner.conj().T)), 0.0, None)
    return float(min(1.0, np.sum(np.sqrt(eig)) ** 2))
