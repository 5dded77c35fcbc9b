"""
Two-qubit polarization tomography over the nine HV/DA/RL setting pairs.

Reconstruction maximises Σ n_k·log p_k with p_k = tr(ρ·Π_k), where each
setting's four outcome probabilities sum to one. This is the Poisson
likelihood with a free rate per setting, profiled out. The estimate is
parameterised as ρ = T†T / tr(T†T) with T lower triangular (real diagonal,
16 real parameters), so every iterate is a valid density matrix. The ascent
is plain gradient ascent with Armijo backtracking, started from the linear
inversion estimate projected onto the physical states.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidInputError, ReconstructionError
from .jones import (
    MeasurementSetting,
    StateLike,
    TwoQubitState,
    as_state,
    measurement_settings,
    projector,
)
from .seeding import SeedLike, rng_from

logger = logging.getLogger(__name__)

SETTINGS: List[MeasurementSetting] = measurement_settings()
SETTING_LABELS: List[str] = [s.label for s in SETTINGS]

# (9, 4, 4, 4): setting, outcome, then the 4x4 projector.
_PROJECTORS = np.array(
    [[np.kron(projector(a), projector(b)) for a, b in s.outcomes()] for s in SETTINGS],
    dtype=complex,
)
_FLAT_PROJECTORS = _PROJECTORS.reshape(36, 4, 4)

_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]
_PAULI_BASIS = np.array([np.kron(a, b) for a in _PAULI for b in _PAULI])


@dataclass(frozen=True, eq=False)
class TomographyTable:
    counts: NDArray[np.float64]  # (9, 4), settings in SETTINGS order
    accidentals: NDArray[np.float64]  # (9, 4) expected accidental counts
    integration_time: float

    def __post_init__(self) -> None:
        counts = np.array(self.counts, dtype=float)
        accidentals = np.array(self.accidentals, dtype=float)
        if counts.shape != (9, 4) or accidentals.shape != (9, 4):
            raise InvalidInputError("Tomography tables have 9 settings x 4 outcomes")
        if np.any(counts < 0) or np.any(accidentals < 0):
            raise InvalidInputError("Counts and accidental estimates must be >= 0")
        if not self.integration_time > 0:
            raise InvalidInputError(f"integration_time must be positive, got {self.integration_time}")
        counts.setflags(write=False)
        accidentals.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "accidentals", accidentals)

    @property
    def total_counts(self) -> float:
        return float(self.counts.sum())

    def setting_counts(self, label: str) -> Dict[str, float]:
        k = SETTING_LABELS.index(label)
        return dict(zip(SETTINGS[k].outcome_labels(), self.counts[k].tolist()))

    def to_json(self) -> Dict[str, Any]:
        return {
            "integration_time": self.integration_time,
            "settings": [
                {
                    "label": s.label,
                    "counts": dict(zip(s.outcome_labels(), self.counts[k].tolist())),
                    "accidentals": dict(zip(s.outcome_labels(), self.accidentals[k].tolist())),
                }
                for k, s in enumerate(SETTINGS)
            ],
        }

    @classmethod
    def from_json(cls, payload: Dict[str, Any]) -> "TomographyTable":
        by_label = {entry["label"]: entry for entry in payload.get("settings", [])}
        missing = [label for label in SETTING_LABELS if label not in by_label]
        if missing:
            raise InvalidInputError(f"Missing settings: {', '.join(missing)}")
        counts = np.zeros((9, 4))
        accidentals = np.zeros((9, 4))
        for k, s in enumerate(SETTINGS):
            entry = by_label[s.label]
            for j, outcome in enumerate(s.outcome_labels()):
                counts[k, j] = entry["counts"][outcome]
                accidentals[k, j] = entry.get("accidentals", {}).get(outcome, 0.0)
        return cls(counts, accidentals, float(payload["integration_time"]))


class MleResult(NamedTuple):
    state: TwoQubitState
    log_likelihood_trace: List[float]
    iterations: int
    converged: bool


class NetFidelity(NamedTuple):
    raw: float
    net: float


def born_table(rho: StateLike) -> NDArray[np.float64]:
    """Outcome probabilities, shape (9, 4)."""
    m = as_state(rho).matrix
    return np.real(np.einsum("skij,ji->sk", _PROJECTORS, m))


def simulate_tomography(
    rho: StateLike,
    total_rate: float,
    accidental_rate: float,
    time: float,
    seed: SeedLike,
) -> TomographyTable:
    if total_rate < 0 or accidental_rate < 0:
        raise InvalidInputError("Rates must be >= 0")
    if not time > 0:
        raise InvalidInputError(f"time must be positive, got {time}")
    probs = np.clip(born_table(rho), 0.0, None)
    expected = (total_rate * probs + accidental_rate / 4.0) * time
    counts = rng_from(seed).poisson(expected).astype(float)
    return TomographyTable(counts, np.full((9, 4), accidental_rate * time / 4.0), time)


def subtract_accidentals(table: TomographyTable) -> TomographyTable:
    net = np.clip(table.counts - table.accidentals, 0.0, None)
    return TomographyTable(net, np.zeros((9, 4)), table.integration_time)


def _setting_totals(table: TomographyTable) -> NDArray[np.float64]:
    totals = table.counts.sum(axis=1)
    empty = [SETTING_LABELS[k] for k in np.flatnonzero(totals <= 0)]
    if empty:
        raise ReconstructionError(f"No counts in setting(s) {', '.join(empty)}")
    return totals


def linear_inversion(table: TomographyTable) -> NDArray[np.complex128]:
    """Least-squares inversion of the outcome frequencies; may be unphysical."""
    freqs = (table.counts / _setting_totals(table)[:, None]).reshape(36)
    design = np.real(np.einsum("jab,kba->kj", _PAULI_BASIS, _FLAT_PROJECTORS)) / 4.0
    coeffs, *_ = np.linalg.lstsq(design, freqs, rcond=None)
    rho = np.einsum("j,jab->ab", coeffs, _PAULI_BASIS) / 4.0
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def _simplex(values: NDArray[np.float64]) -> NDArray[np.float64]:
    u = np.sort(values)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, len(u) + 1)
    k = idx[u - (css - 1.0) / idx > 0][-1]
    shift = (css[k - 1] - 1.0) / k
    return np.clip(values - shift, 0.0, None)


def project_physical(matrix: ArrayLike) -> TwoQubitState:
    """Closest density matrix in eigenvalues (Frobenius norm)."""
    m = np.asarray(matrix, dtype=complex)
    m = 0.5 * (m + m.conj().T)
    vals, vecs = np.linalg.eigh(m)
    rho = (vecs * _simplex(vals)) @ vecs.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return TwoQubitState(rho / np.trace(rho).real)


def _antidiag(m: NDArray[np.complex128]) -> NDArray[np.complex128]:
    return m[::-1, ::-1]


def _t_from_state(rho: NDArray[np.complex128]) -> NDArray[np.complex128]:
    # JρJ = L·L† with L lower, so T = J·L†·J is lower and T†T = ρ.
    lower = np.linalg.cholesky(_antidiag(rho))
    return _antidiag(lower.conj().T)


def _state_from_t(t: NDArray[np.complex128]) -> NDArray[np.complex128]:
    m = t.conj().T @ t
    return m / np.trace(m).real


_TRIL = np.tril(np.ones((4, 4), dtype=bool))


def _log_likelihood(weights: NDArray[np.float64], rho: NDArray[np.complex128]) -> tuple:
    probs = np.real(np.einsum("kij,ji->k", _FLAT_PROJECTORS, rho))
    used = weights > 0
    if np.any(probs[used] <= 0):
        return -np.inf, probs
    return float(np.sum(weights[used] * np.log(probs[used]))), probs


def maximum_likelihood(
    table: TomographyTable,
    max_iterations: int = 10_000,
    tolerance: float = 1e-10,
    mixing: float = 1e-3,
) -> MleResult:
    _setting_totals(table)
    weights = table.counts.reshape(36) / table.total_counts

    start = project_physical(linear_inversion(table)).matrix
    start = (1.0 - mixing) * start + mixing * np.eye(4) / 4.0
    t = _t_from_state(start)
    rho = _state_from_t(t)
    ll, probs = _log_likelihood(weights, rho)
    trace = [ll]
    step = 1.0
    converged = False
    iterations = 0

    while iterations < max_iterations:
        iterations += 1
        ratio = np.divide(weights, probs, out=np.zeros_like(weights), where=weights > 0)
        g = np.einsum("k,kij->ij", ratio, _FLAT_PROJECTORS)
        c = np.real(np.trace(g @ rho))
        grad = 2.0 * t @ (g - c * np.eye(4))
        grad = np.where(_TRIL, grad, 0.0)
        grad[np.diag_indices(4)] = grad.diagonal().real
        slope = float(np.sum(np.abs(grad) ** 2))
        if slope == 0.0:
            converged = True
            break

        accepted = False
        while step > 1e-20:
            t_new = t + step * grad
            norm = np.sqrt(np.real(np.trace(t_new.conj().T @ t_new)))
            t_new = t_new / norm
            rho_new = _state_from_t(t_new)
            ll_new, probs_new = _log_likelihood(weights, rho_new)
            if ll_new >= ll + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # No ascent step left at machine precision.
            converged = True
            break

        change = abs(ll_new - ll) / max(abs(ll), 1e-300)
        t, rho, ll, probs = t_new, rho_new, ll_new, probs_new
        trace.append(ll)
        step *= 2.0
        if change < tolerance:
            converged = True
            break

    if not converged:
        logger.warning("MLE stopped after %d iterations without converging", iterations)
    else:
        logger.debug("MLE converged in %d iterations, logL=%.12g", iterations, ll)
    state = TwoQubitState(0.5 * (rho + rho.conj().T))
    return MleResult(state, trace, iterations, converged)


def mle_reconstruct(table: TomographyTable) -> TwoQubitState:
    return maximum_likelihood(table).state


def fidelity(rho: StateLike, target_phase: float = 0.0, optimize_phase: bool = False) -> float:
    """Overlap with (|HH⟩ + e^{iθ}|VV⟩)/√2.

    With ``optimize_phase`` the target phase is chosen to maximise the overlap.
    """
    m = as_state(rho).matrix
    diag = 0.5 * float(np.real(m[0, 0] + m[3, 3]))
    if optimize_phase:
        return diag + float(abs(m[0, 3]))
    return diag + float(np.real(np.exp(1j * target_phase) * m[0, 3]))


def best_phase(rho: StateLike) -> float:
    return float(-np.angle(as_state(rho).matrix[0, 3]))


def net_fidelity(
    table: TomographyTable, target_phase: float = 0.0, optimize_phase: bool = False
) -> NetFidelity:
    raw = fidelity(mle_reconstruct(table), target_phase, optimize_phase)
    if not np.any(table.accidentals > 0):
        return NetFidelity(raw, raw)
    net = fidelity(mle_reconstruct(subtract_accidentals(table)), target_phase, optimize_phase)
    return NetFidelity(raw, net)


def density_rows(rho: StateLike) -> List[Dict[str, Any]]:
    labels: Sequence[str] = ("HH", "HV", "VH", "VV")
    m = as_state(rho).matrix
    return [
        {"row": labels[i], "col": labels[j], "re": float(m[i, j].real), "im": float(m[i, j].imag)}
        for i in range(4)
        for j in range(4)
    ]
