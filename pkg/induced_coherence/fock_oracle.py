"""
Fock-space oracle for the interferometer.

Builds the same optical chain as the Gaussian engine out of explicit unitaries
on a photon-number-truncated multimode Fock space and evaluates every
expectation value by direct linear algebra. Nothing here relies on Gaussian
moment factorization, which is what makes it an independent check.

Modes are stored in the fixed order (b_s, b_i, f, v3_aux, c_s); after the
chain these slots carry (s1, v3, i2, w3, s2).
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm

from .errors import RangeError, ResourceError, TruncationError, ZeroPhoton
from .models import ExperimentParams, LowGainAmplitudes, OracleReport

logger = logging.getLogger(__name__)

ORACLE_MODES: Tuple[str, ...] = ("b_s", "b_i", "f", "v3_aux", "c_s")
OUTPUT_MODES: Tuple[str, ...] = ("s1", "v3", "i2", "w3", "s2")
IDLER_BUCKET: Tuple[str, ...] = ("v3", "w3")

MIN_CUTOFF = 4
DEFAULT_PADDING = 4
DEFAULT_BASIS_CAP = 100_000
DEFAULT_TRUNCATION_TOL = 1e-3
LOW_GAIN_LIMIT = 0.1


@dataclass(frozen=True)
class TruncatedOperator:
    """Dense operator on ``n_modes`` modes, each truncated to ``cutoff`` levels.

    Two-mode operators use the basis index n_a·d + n_b.
    """

    matrix: np.ndarray
    cutoff: int
    n_modes: int = 1

    def __post_init__(self) -> None:
        dim = self.cutoff**self.n_modes
        if self.matrix.shape != (dim, dim):
            raise ValueError(
                f"{self.n_modes}-mode operator at cutoff {self.cutoff} must be "
                f"{dim}x{dim}, got {self.matrix.shape}"
            )

    @property
    def dag(self) -> "TruncatedOperator":
        return TruncatedOperator(self.matrix.conj().T, self.cutoff, self.n_modes)

    def safe_indices(self) -> np.ndarray:
        """Basis states holding at most d − 2 photons in total."""
        levels = np.indices((self.cutoff,) * self.n_modes).reshape(self.n_modes, -1)
        return np.flatnonzero(levels.sum(axis=0) <= self.cutoff - 2)

    def unitarity_defect(self) -> float:
        """max |O†O − I| on the safe subspace; truncation-edge states are exempt."""
        safe = self.safe_indices()
        product = self.matrix.conj().T @ self.matrix
        block = product[np.ix_(safe, safe)] - np.eye(len(safe))
        return float(np.max(np.abs(block), initial=0.0))


def ladder_ops(cutoff: int) -> Tuple[TruncatedOperator, TruncatedOperator]:
    """Single-mode annihilation and creation operators, <n−1|a|n> = √n."""
    lower = np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1).astype(complex)
    return TruncatedOperator(lower, cutoff), TruncatedOperator(lower.conj().T, cutoff)


def _project(matrix: np.ndarray, padded: int, cutoff: int) -> np.ndarray:
    block = matrix.reshape(padded, padded, padded, padded)[
        :cutoff, :cutoff, :cutoff, :cutoff
    ]
    return np.ascontiguousarray(block.reshape(cutoff * cutoff, cutoff * cutoff))


def squeeze_unitary(
    gain: float, pump_phase: float, cutoff: int, padding: int = DEFAULT_PADDING
) -> TruncatedOperator:
    """Two-mode squeezer exp[−iG(e^{iφ} a†b† + e^{−iφ} ab)].

    On |00⟩ it gives c_n ∝ (−i e^{iφ} tanh G)ⁿ / cosh G on |nn⟩, the Fock-space
    counterpart of a → cosh G·a − i e^{iφ} sinh G·b†. The exponential is taken
    at ``cutoff + padding`` levels and projected back, so amplitude pushed past
    the cutoff shows up as a norm deficit instead of being folded back in.
    """
    if gain < 0.0:
        raise RangeError("gain", gain, "[0, inf)")
    padded = cutoff + padding
    lower, create = ladder_ops(padded)
    pump = complex(math.cos(pump_phase), math.sin(pump_phase))
    generator = -1j * gain * (
        pump * np.kron(create.matrix, create.matrix)
        + pump.conjugate() * np.kron(lower.matrix, lower.matrix)
    )
    unitary = expm(generator)
    return TruncatedOperator(_project(unitary, padded, cutoff), cutoff, 2)


def phase_unitary(phi: float, cutoff: int) -> TruncatedOperator:
    """exp(iφ n̂): a → e^{iφ} a."""
    levels = np.arange(cutoff)
    return TruncatedOperator(np.diag(np.exp(1j * phi * levels)), cutoff)


def bs_unitary(amplitude: complex, cutoff: int) -> TruncatedOperator:
    """Number-conserving mixer realizing a → t a + r′ b, b → −r′ a + t* b.

    Written as P·R·P with R = exp[θ(a†b − b†a)], cos θ = |t|, and
    P = exp[i(χ/2)(n_a − n_b)] carrying the phase χ = arg t.
    """
    magnitude = abs(amplitude)
    if magnitude > 1.0 + 1e-15:
        raise RangeError("amplitude", amplitude, "|amplitude| <= 1")
    theta = math.acos(min(1.0, magnitude))
    chi = math.atan2(complex(amplitude).imag, complex(amplitude).real)
    lower, create = ladder_ops(cutoff)
    generator = theta * (
        np.kron(create.matrix, lower.matrix) - np.kron(lower.matrix, create.matrix)
    )
    rotation = expm(generator)
    half = phase_unitary(chi / 2.0, cutoff).matrix
    phases = np.kron(half, half.conj())
    return TruncatedOperator(phases @ rotation @ phases, cutoff, 2)


ModeRef = Union[int, str]


@dataclass(frozen=True)
class TruncatedFockState:
    """Pure state stored as a tensor with one axis of length ``cutoff`` per mode."""

    cutoff: int
    modes: Tuple[str, ...]
    amplitudes: np.ndarray

    @classmethod
    def vacuum(cls, modes: Sequence[str], cutoff: int) -> "TruncatedFockState":
        amplitudes = np.zeros((cutoff,) * len(modes), dtype=complex)
        amplitudes[(0,) * len(modes)] = 1.0
        return cls(cutoff, tuple(modes), amplitudes)

    @property
    def basis_size(self) -> int:
        return int(self.amplitudes.size)

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def norm_deficit(self) -> float:
        return 1.0 - self.norm_squared

    def axis(self, mode: ModeRef) -> int:
        return mode if isinstance(mode, int) else self.modes.index(mode)

    def relabel(self, labels: Sequence[str]) -> "TruncatedFockState":
        return TruncatedFockState(self.cutoff, tuple(labels), self.amplitudes)

    def apply(
        self, operator: TruncatedOperator, modes: Sequence[ModeRef]
    ) -> "TruncatedFockState":
        """Apply a one- or two-mode operator to the listed modes."""
        axes = [self.axis(mode) for mode in modes]
        if len(axes) != operator.n_modes:
            raise ValueError(
                f"{operator.n_modes}-mode operator applied to {len(axes)} modes"
            )
        shaped = operator.matrix.reshape((self.cutoff,) * (2 * operator.n_modes))
        inputs = list(range(operator.n_modes, 2 * operator.n_modes))
        result = np.tensordot(shaped, self.amplitudes, axes=(inputs, axes))
        result = np.moveaxis(result, list(range(operator.n_modes)), axes)
        return TruncatedFockState(self.cutoff, self.modes, result)

    def lowered(self, mode: ModeRef) -> np.ndarray:
        """Amplitude tensor of a_mode|ψ⟩."""
        lower, _ = ladder_ops(self.cutoff)
        return self.apply(lower, [mode]).amplitudes

    def mean_photon(self, mode: ModeRef) -> float:
        lowered = self.lowered(mode)
        return float(np.vdot(lowered, lowered).real) / self.norm_squared

    def normal_corr(self, m: ModeRef, n: ModeRef) -> complex:
        """<a_m† a_n>."""
        return complex(np.vdot(self.lowered(m), self.lowered(n))) / self.norm_squared

    def anomalous_corr(self, m: ModeRef, n: ModeRef) -> complex:
        """<a_m a_n>."""
        lower, _ = ladder_ops(self.cutoff)
        both = self.apply(lower, [n]).apply(lower, [m]).amplitudes
        return complex(np.vdot(self.amplitudes, both)) / self.norm_squared

    def g2(self, m: ModeRef, n: Union[ModeRef, Sequence[ModeRef]]) -> float:
        """<a_m† a_n† a_n a_m> / (N_m N_n), summed over a bucket of modes ``n``."""
        detected = [n] if isinstance(n, (int, str)) else list(n)
        n_m = self.mean_photon(m)
        n_n = sum(self.mean_photon(k) for k in detected)
        if n_m <= 0.0 or n_n <= 0.0:
            raise ZeroPhoton(f"no photons on {m} or {detected}")
        lower, _ = ladder_ops(self.cutoff)
        first = self.apply(lower, [m])
        joint = 0.0
        for k in detected:
            pair = first.apply(lower, [k]).amplitudes
            joint += float(np.vdot(pair, pair).real)
        return joint / self.norm_squared / (n_m * n_n)

    def g1(self, m: ModeRef, n: ModeRef) -> float:
        n_m, n_n = self.mean_photon(m), self.mean_photon(n)
        if n_m <= 0.0 or n_n <= 0.0:
            raise ZeroPhoton(f"no photons on {m} or {n}")
        return abs(self.normal_corr(m, n)) / math.sqrt(n_m * n_n)

    def fringe_visibility(self, m: ModeRef, n: ModeRef) -> float:
        """Extremes of N_m + N_n + 2Re[e^{iφ}<a_m†a_n>] over all φ."""
        total = self.mean_photon(m) + self.mean_photon(n)
        if total <= 0.0:
            raise ZeroPhoton(f"no photons on {m} or {n}")
        return 2.0 * abs(self.normal_corr(m, n)) / total


def _run_chain(
    params: ExperimentParams, cutoff: int, padding: int
) -> TruncatedFockState:
    b_s, b_i, f, v3_aux, c_s = range(len(ORACLE_MODES))
    first = squeeze_unitary(params.gain, params.phi_p1, cutoff, padding)
    second = squeeze_unitary(params.gain, params.phi_p2, cutoff, padding)
    signal_drift = phase_unitary(params.k_s * params.crystal_length, cutoff)
    idler_drift = phase_unitary(params.k_i * params.crystal_length, cutoff)

    state = TruncatedFockState.vacuum(ORACLE_MODES, cutoff)
    state = state.apply(first, [b_s, b_i])
    state = state.apply(signal_drift, [b_s]).apply(idler_drift, [b_i])
    state = state.apply(phase_unitary(params.phi_i1, cutoff), [b_i])
    state = state.apply(phase_unitary(params.phi_s1, cutoff), [b_s])
    state = state.apply(bs_unitary(params.t, cutoff), [b_i, f])
    state = state.apply(bs_unitary(params.gamma, cutoff), [b_i, v3_aux])
    state = state.apply(second, [c_s, b_i])
    state = state.apply(signal_drift, [c_s]).apply(idler_drift, [b_i])
    state = state.apply(phase_unitary(params.phi_s2, cutoff), [c_s])
    state = state.apply(phase_unitary(params.phi_i3, cutoff), [b_i])
    return state.relabel(OUTPUT_MODES)


def _check_size(cutoff: int, basis_cap: int) -> int:
    if cutoff < MIN_CUTOFF:
        raise RangeError("cutoff", cutoff, f"[{MIN_CUTOFF}, inf)")
    basis_size = cutoff ** len(ORACLE_MODES)
    if basis_size > basis_cap:
        raise ResourceError(
            f"basis of {basis_size} states exceeds the cap of {basis_cap}",
            {"cutoff": cutoff, "basis_size": basis_size, "basis_cap": basis_cap},
        )
    return basis_size


def build_state(
    params: ExperimentParams,
    cutoff: int = 8,
    padding: int = DEFAULT_PADDING,
    basis_cap: int = DEFAULT_BASIS_CAP,
    truncation_tol: float = DEFAULT_TRUNCATION_TOL,
) -> TruncatedFockState:
    """Output state of the interferometer on the truncated space.

    Raises:
        RangeError: if the cutoff is below 4.
        ResourceError: if cutoff^5 exceeds ``basis_cap``.
        TruncationError: if the chain leaks more norm than ``truncation_tol``.
    """
    basis_size = _check_size(cutoff, basis_cap)
    state = _run_chain(params, cutoff, padding)
    deficit = state.norm_deficit
    logger.info(
        "oracle basis %d (cutoff %d), norm deficit %.3e", basis_size, cutoff, deficit
    )
    if deficit > truncation_tol:
        raise TruncationError(
            f"norm deficit {deficit:.3e} exceeds {truncation_tol:.1e} at cutoff {cutoff}",
            {"cutoff": cutoff, "norm_deficit": deficit},
        )
    if deficit > truncation_tol / 10.0:
        logger.warning(
            "norm deficit %.3e is close to the tolerance %.1e", deficit, truncation_tol
        )
    return state


def simulate(
    params: ExperimentParams,
    cutoff: int = 8,
    padding: int = DEFAULT_PADDING,
    basis_cap: int = DEFAULT_BASIS_CAP,
    truncation_tol: float = DEFAULT_TRUNCATION_TOL,
) -> OracleReport:
    """Singles and correlations of the interferometer by brute force.

    At zero gain every mode is empty; the report is flagged ``vacuum`` and the
    correlation fields are left unset.
    """
    state = build_state(params, cutoff, padding, basis_cap, truncation_tol)
    singles = {mode: state.mean_photon(mode) for mode in OUTPUT_MODES}
    vacuum = params.gain == 0.0
    report: Dict[str, Optional[float]] = {}
    if not vacuum:
        report = {
            "g13": state.g2("s1", IDLER_BUCKET),
            "g23": state.g2("s2", IDLER_BUCKET),
            "g12": state.g1("s1", "s2"),
            "fringe_visibility": state.fringe_visibility("s1", "s2"),
        }
    return OracleReport(
        params=params,
        cutoff=cutoff,
        basis_size=state.basis_size,
        norm_deficit=state.norm_deficit,
        vacuum=vacuum,
        singles=singles,
        **report,
    )


def _photon_totals(state: TruncatedFockState) -> np.ndarray:
    return np.indices(state.amplitudes.shape).sum(axis=0)


def low_gain_amplitudes(params: ExperimentParams, cutoff: int = 6) -> LowGainAmplitudes:
    """Single-pair sector of the output state.

    Reads the amplitudes of s1 paired with each idler mode (i2, v3, w3) and of
    s2 paired with them, and compares the s1 branches with r : tγ : t√(1−γ²).
    The vacuum and multi-pair components are kept and their weight reported.
    """
    if params.gain > LOW_GAIN_LIMIT:
        raise RangeError("gain", params.gain, f"[0, {LOW_GAIN_LIMIT}]")
    if params.gain == 0.0:
        raise RangeError("gain", params.gain, f"(0, {LOW_GAIN_LIMIT}]")
    state = build_state(params, cutoff)
    psi = state.amplitudes
    s1, v3, i2, w3, s2 = range(len(OUTPUT_MODES))

    def pair(signal: int, idler: int) -> complex:
        index = [0] * len(OUTPUT_MODES)
        index[signal] = 1
        index[idler] = 1
        return complex(psi[tuple(index)])

    from_first = np.array([pair(s1, i2), pair(s1, v3), pair(s1, w3)])
    from_second = np.array([pair(s2, i2), pair(s2, v3), pair(s2, w3)])
    branch = np.abs(from_first) / np.linalg.norm(from_first)
    idler_first = from_first / np.linalg.norm(from_first)
    idler_second = from_second / np.linalg.norm(from_second)
    overlap = abs(np.vdot(idler_first, idler_second))

    totals = _photon_totals(state)
    weights = np.abs(psi) ** 2 / state.norm_squared
    t_mag, gamma_mag = params.t_mag, params.gamma_mag
    expected = [
        params.r_mag,
        t_mag * gamma_mag,
        t_mag * math.sqrt(max(0.0, 1.0 - gamma_mag * gamma_mag)),
    ]
    return LowGainAmplitudes(
        params=params,
        branch_ratios=[float(x) for x in branch],
        expected_ratios=expected,
        overlap=float(overlap),
        distinguishability=math.sqrt(max(0.0, 1.0 - float(overlap) ** 2)),
        single_pair_weight=float(weights[totals == 2].sum()),
        higher_order_weight=float(weights[totals >= 4].sum()),
    )
