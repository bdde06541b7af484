"""
Gaussian moment engine.

The interferometer acts linearly on annihilation and creation operators,
a_out = A·a_in + B·a_in†, so a zero-mean Gaussian input stays Gaussian and is
fully described by its second moments

    n_corr[i, j] = <a_i† a_j>        m_corr[i, j] = <a_i a_j>

which this module propagates exactly through squeezers, beamsplitters and
phase shifts, starting from the multimode vacuum.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from . import closed_form
from .errors import (
    BogoliubovViolation,
    DimensionMismatch,
    PhysicalityError,
    RangeError,
    ZeroPhoton,
)
from .models import EngineReport, ExperimentParams

logger = logging.getLogger(__name__)

ModeLabel = str

# b_s, b_i: NLC1 inputs; c_s: NLC2 signal input; f: loss ancilla;
# v3_aux: mode orthogonal to the NLC2 idler mode
PRE_CHAIN_MODES: Tuple[ModeLabel, ...] = ("b_s", "b_i", "c_s", "f", "v3_aux")
POST_CHAIN_MODES: Tuple[ModeLabel, ...] = ("s1", "s2", "i2", "v3", "w3")
IDLER_BUCKET: Tuple[ModeLabel, ...] = ("v3", "w3")

BOGOLIUBOV_TOL = 1e-12
PHYSICALITY_TOL = 1e-10


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LinearBosonicMap:
    """Bogoliubov transformation a_out = A·a_in + B·a_in†."""

    a_coeff: np.ndarray
    b_coeff: np.ndarray

    def __post_init__(self) -> None:
        a_coeff, b_coeff = _frozen(self.a_coeff), _frozen(self.b_coeff)
        if a_coeff.ndim != 2 or a_coeff.shape[0] != a_coeff.shape[1]:
            raise DimensionMismatch(f"A must be square, got {a_coeff.shape}")
        if b_coeff.shape != a_coeff.shape:
            raise DimensionMismatch(
                f"A is {a_coeff.shape} but B is {b_coeff.shape}"
            )
        object.__setattr__(self, "a_coeff", a_coeff)
        object.__setattr__(self, "b_coeff", b_coeff)
        defect = self.bogoliubov_defect()
        scale = max(1.0, float(np.max(np.abs(a_coeff))) ** 2)
        if defect > BOGOLIUBOV_TOL * scale:
            raise BogoliubovViolation(
                f"map violates the commutation relations by {defect:.3e}",
                {"defect": defect},
            )

    @property
    def size(self) -> int:
        return self.a_coeff.shape[0]

    @property
    def is_passive(self) -> bool:
        return not np.any(self.b_coeff)

    @classmethod
    def identity(cls, size: int) -> "LinearBosonicMap":
        return cls(np.eye(size), np.zeros((size, size)))

    def bogoliubov_defect(self) -> float:
        """Largest entry of A A† − B B† − I and of A Bᵀ − B Aᵀ."""
        a, b = self.a_coeff, self.b_coeff
        commutator = a @ a.conj().T - b @ b.conj().T - np.eye(self.size)
        symmetry = a @ b.T - b @ a.T
        return float(max(np.max(np.abs(commutator)), np.max(np.abs(symmetry))))

    def then(self, other: "LinearBosonicMap") -> "LinearBosonicMap":
        """The map that applies ``self`` first and ``other`` second."""
        if other.size != self.size:
            raise DimensionMismatch(f"cannot compose {self.size} and {other.size} modes")
        a1, b1 = self.a_coeff, self.b_coeff
        a2, b2 = other.a_coeff, other.b_coeff
        return LinearBosonicMap(a2 @ a1 + b2 @ b1.conj(), a2 @ b1 + b2 @ a1.conj())


@dataclass(frozen=True)
class MomentState:
    """Second moments of a zero-mean Gaussian multimode state."""

    modes: Tuple[ModeLabel, ...]
    n_corr: np.ndarray
    m_corr: np.ndarray

    def __post_init__(self) -> None:
        modes = tuple(self.modes)
        if len(set(modes)) != len(modes):
            raise ValueError(f"mode labels must be unique: {modes}")
        n_corr, m_corr = _frozen(self.n_corr), _frozen(self.m_corr)
        shape = (len(modes), len(modes))
        if n_corr.shape != shape or m_corr.shape != shape:
            raise DimensionMismatch(
                f"{len(modes)} modes but moments of shape {n_corr.shape}, {m_corr.shape}"
            )
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "n_corr", n_corr)
        object.__setattr__(self, "m_corr", m_corr)
        self._check_physical()

    def _check_physical(self) -> None:
        scale = max(1.0, float(np.max(np.abs(self.n_corr), initial=0.0)))
        tol = PHYSICALITY_TOL * scale
        if np.max(np.abs(self.n_corr - self.n_corr.conj().T), initial=0.0) > tol:
            raise PhysicalityError("n_corr is not Hermitian")
        if np.max(np.abs(self.m_corr - self.m_corr.T), initial=0.0) > tol:
            raise PhysicalityError("m_corr is not symmetric")
        if np.min(np.linalg.eigvalsh(self.n_corr), initial=0.0) < -tol:
            raise PhysicalityError("n_corr has a negative eigenvalue")
        smallest = float(np.min(np.linalg.eigvalsh(self.moment_matrix()), initial=0.0))
        if smallest < -tol:
            raise PhysicalityError(
                f"moment matrix has eigenvalue {smallest:.3e}", {"eigenvalue": smallest}
            )

    @property
    def size(self) -> int:
        return len(self.modes)

    def moment_matrix(self) -> np.ndarray:
        """<ξ ξ†> for ξ = (a, a†): [[nᵀ + I, m], [m†, n]]."""
        identity = np.eye(self.size)
        top = np.hstack([self.n_corr.T + identity, self.m_corr])
        bottom = np.hstack([self.m_corr.conj().T, self.n_corr])
        return np.vstack([top, bottom])

    def index(self, mode: ModeLabel) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise KeyError(f"unknown mode '{mode}', state has {self.modes}") from None

    def relabel(self, labels: Sequence[ModeLabel]) -> "MomentState":
        """Same moments, new names (slot order unchanged)."""
        return MomentState(tuple(labels), self.n_corr, self.m_corr)

    def reorder(self, labels: Sequence[ModeLabel]) -> "MomentState":
        """Permute the modes into the given label order."""
        order = [self.index(label) for label in labels]
        if len(order) != self.size:
            raise DimensionMismatch("reorder must list every mode exactly once")
        grid = np.ix_(order, order)
        return MomentState(tuple(labels), self.n_corr[grid], self.m_corr[grid])

    def total_photons(self) -> float:
        return float(np.real(np.trace(self.n_corr)))


def vacuum(modes: Sequence[ModeLabel]) -> MomentState:
    size = len(modes)
    return MomentState(tuple(modes), np.zeros((size, size)), np.zeros((size, size)))


def squeezer_map(
    mode_pair: Tuple[int, int],
    gain: float,
    pump_phase: float,
    k_s: float,
    k_i: float,
    length: float,
    total_modes: int,
) -> LinearBosonicMap:
    """Two-mode squeezer on (signal, idler) slots, identity elsewhere.

    a_s → U_s a_s + V_s e^{iφ_p} a_i†,  a_i → U_i a_i + V_i e^{iφ_p} a_s†
    """
    signal, idler = mode_pair
    u_s, v_s = closed_form.bogoliubov_uv(gain, k_s, length)
    u_i, v_i = closed_form.bogoliubov_uv(gain, k_i, length)
    pump = complex(math.cos(pump_phase), math.sin(pump_phase))
    a_coeff = np.eye(total_modes, dtype=complex)
    b_coeff = np.zeros((total_modes, total_modes), dtype=complex)
    a_coeff[signal, signal] = u_s
    a_coeff[idler, idler] = u_i
    b_coeff[signal, idler] = v_s * pump
    b_coeff[idler, signal] = v_i * pump
    return LinearBosonicMap(a_coeff, b_coeff)


def beamsplitter_map(
    mode_pair: Tuple[int, int], amplitude: complex, total_modes: int
) -> LinearBosonicMap:
    """Passive two-mode mixer [[t, r'], [−r'*, t*]] with r' = √(1 − |t|²)."""
    magnitude = abs(amplitude)
    if magnitude > 1.0 + 1e-15:
        raise RangeError("amplitude", amplitude, "|amplitude| <= 1")
    first, second = mode_pair
    reflect = math.sqrt(max(0.0, 1.0 - magnitude * magnitude))
    a_coeff = np.eye(total_modes, dtype=complex)
    a_coeff[first, first] = amplitude
    a_coeff[first, second] = reflect
    a_coeff[second, first] = -reflect
    a_coeff[second, second] = complex(amplitude).conjugate()
    return LinearBosonicMap(a_coeff, np.zeros((total_modes, total_modes)))


def phase_map(mode: int, phi: float, total_modes: int) -> LinearBosonicMap:
    a_coeff = np.eye(total_modes, dtype=complex)
    a_coeff[mode, mode] = complex(math.cos(phi), math.sin(phi))
    return LinearBosonicMap(a_coeff, np.zeros((total_modes, total_modes)))


def apply_map(state: MomentState, bosonic_map: LinearBosonicMap) -> MomentState:
    """Propagate second moments through a_out = A a + B a†.

    Substituting and normal-ordering with [a_k, a_l†] = δ_kl:

        n' = A* n Aᵀ + A* m* Bᵀ + B* m Aᵀ + B* (I + nᵀ) Bᵀ
        m' = A m Aᵀ + A (I + nᵀ) Bᵀ + B n Aᵀ + B m* Bᵀ
    """
    if bosonic_map.size != state.size:
        raise DimensionMismatch(
            f"map acts on {bosonic_map.size} modes, state has {state.size}",
            {"map": bosonic_map.size, "state": state.size},
        )
    a, b = bosonic_map.a_coeff, bosonic_map.b_coeff
    n, m = state.n_corr, state.m_corr
    anti_normal = np.eye(state.size) + n.T
    n_out = (
        a.conj() @ n @ a.T
        + a.conj() @ m.conj() @ b.T
        + b.conj() @ m @ a.T
        + b.conj() @ anti_normal @ b.T
    )
    m_out = a @ m @ a.T + a @ anti_normal @ b.T + b @ n @ a.T + b @ m.conj() @ b.T
    return MomentState(state.modes, n_out, m_out)


def setup_maps(params: ExperimentParams) -> List[LinearBosonicMap]:
    """The optical chain in slot order (b_s, b_i, c_s, f, v3_aux)."""
    size = len(PRE_CHAIN_MODES)
    b_s, b_i, c_s, f, v3_aux = range(size)
    squeeze = dict(
        gain=params.gain,
        k_s=params.k_s,
        k_i=params.k_i,
        length=params.crystal_length,
        total_modes=size,
    )
    return [
        squeezer_map((b_s, b_i), pump_phase=params.phi_p1, **squeeze),
        phase_map(b_i, params.phi_i1, size),
        phase_map(b_s, params.phi_s1, size),
        beamsplitter_map((b_i, f), params.t, size),
        beamsplitter_map((b_i, v3_aux), params.gamma, size),
        squeezer_map((c_s, b_i), pump_phase=params.phi_p2, **squeeze),
        phase_map(c_s, params.phi_s2, size),
        phase_map(b_i, params.phi_i3, size),
    ]


def build_setup(params: ExperimentParams) -> MomentState:
    """Output state of the interferometer over (s1, s2, i2, v3, w3).

    After the chain the slots hold: b_s → s1, b_i → v3 (NLC2 idler mode),
    c_s → s2, f → i2 (reflected idler), v3_aux → w3 (NLC1 idler component
    orthogonal to the NLC2 mode).
    """
    state = vacuum(PRE_CHAIN_MODES)
    for bosonic_map in setup_maps(params):
        state = apply_map(state, bosonic_map)
    return state.relabel(("s1", "v3", "s2", "i2", "w3")).reorder(POST_CHAIN_MODES)


def mean_photon(state: MomentState, mode: ModeLabel) -> float:
    i = state.index(mode)
    return float(np.real(state.n_corr[i, i]))


def normal_corr(state: MomentState, m: ModeLabel, n: ModeLabel) -> complex:
    """<a_m† a_n>."""
    return complex(state.n_corr[state.index(m), state.index(n)])


def anomalous_corr(state: MomentState, m: ModeLabel, n: ModeLabel) -> complex:
    """<a_m a_n>."""
    return complex(state.m_corr[state.index(m), state.index(n)])


Detector = Union[ModeLabel, Sequence[ModeLabel]]


def _modes_of(detector: Detector) -> Tuple[ModeLabel, ...]:
    return (detector,) if isinstance(detector, str) else tuple(detector)


def g2(state: MomentState, m: ModeLabel, n: Detector) -> float:
    """Normalized g2 between mode ``m`` and a detector on ``n``.

    ``n`` may be a tuple of modes seen by one detector that does not resolve
    them. Gaussian moment factorization gives, for each detected mode k,
    <a_m† a_k† a_k a_m> = N_m N_k + |<a_m† a_k>|² + |<a_m a_k>|².
    """
    detected = _modes_of(n)
    if m in detected:
        raise ValueError("g2 is computed between distinct modes")
    n_m = mean_photon(state, m)
    n_n = sum(mean_photon(state, k) for k in detected)
    if n_m <= 0.0 or n_n <= 0.0:
        raise ZeroPhoton(
            f"no photons on {m} or {detected}", {"n_m": n_m, "n_n": n_n}
        )
    cross = sum(
        abs(normal_corr(state, m, k)) ** 2 + abs(anomalous_corr(state, m, k)) ** 2
        for k in detected
    )
    return 1.0 + cross / (n_m * n_n)


def g1(state: MomentState, m: ModeLabel, n: ModeLabel) -> float:
    """|<a_m† a_n>| / √(N_m N_n)."""
    n_m, n_n = mean_photon(state, m), mean_photon(state, n)
    if n_m <= 0.0 or n_n <= 0.0:
        raise ZeroPhoton(f"no photons on {m} or {n}", {"n_m": n_m, "n_n": n_n})
    return abs(normal_corr(state, m, n)) / math.sqrt(n_m * n_n)


def fringe_scan(
    state: MomentState, m: ModeLabel, n: ModeLabel, phase_grid: Sequence[float]
) -> List[Tuple[float, float]]:
    """Mean photons N3(φ) of the superposition a_m + e^{iφ} a_n over a phase grid."""
    n_m, n_n = mean_photon(state, m), mean_photon(state, n)
    coherence = normal_corr(state, m, n)
    phases = np.asarray(phase_grid, dtype=float)
    combined = n_m + n_n + 2.0 * np.real(np.exp(1j * phases) * coherence)
    return [(float(phi), float(value)) for phi, value in zip(phases, combined)]


def fringe_visibility(
    state: MomentState,
    m: ModeLabel,
    n: ModeLabel,
    points: int = 721,
    refine: bool = True,
) -> float:
    """(max − min)/(max + min) of a fringe scan.

    With ``refine`` the grid extremes are polished by a bounded scalar
    minimization so the result does not depend on the grid spacing.
    """
    phases = np.linspace(0.0, 2.0 * math.pi, points, endpoint=False)
    values = np.array([value for _, value in fringe_scan(state, m, n, phases)])
    highest, lowest = float(values.max()), float(values.min())
    if refine:
        n_m, n_n = mean_photon(state, m), mean_photon(state, n)
        coherence = normal_corr(state, m, n)
        step = 2.0 * math.pi / points

        def combined(phi: float) -> float:
            return n_m + n_n + 2.0 * (complex(math.cos(phi), math.sin(phi)) * coherence).real

        for index, sign in ((int(values.argmax()), -1.0), (int(values.argmin()), 1.0)):
            centre = float(phases[index])
            result = minimize_scalar(
                lambda phi: sign * combined(phi),
                bounds=(centre - step, centre + step),
                method="bounded",
                options={"xatol": 1e-12},
            )
            polished = combined(float(result.x))
            if sign < 0.0:
                highest = max(highest, polished)
            else:
                lowest = min(lowest, polished)
    if highest + lowest <= 0.0:
        raise ZeroPhoton(f"no photons on {m} or {n}")
    return (highest - lowest) / (highest + lowest)


def energy_imbalance(state: MomentState, m: ModeLabel, n: ModeLabel) -> float:
    n_m, n_n = mean_photon(state, m), mean_photon(state, n)
    if n_m + n_n <= 0.0:
        raise ZeroPhoton(f"no photons on {m} or {n}")
    return abs(n_m - n_n) / (n_m + n_n)


def analyze(params: ExperimentParams, points: int = 721) -> EngineReport:
    """Build the setup and extract every reported quantity.

    Raises:
        ZeroPhoton: on the vacuum (G = 0), where correlations are undefined.
    """
    state = build_setup(params)
    report = EngineReport(
        params=params,
        n_s1=mean_photon(state, "s1"),
        n_s2=mean_photon(state, "s2"),
        n_i2=mean_photon(state, "i2"),
        n_v3=mean_photon(state, "v3"),
        n_w3=mean_photon(state, "w3"),
        g13=g2(state, "s1", IDLER_BUCKET),
        g23=g2(state, "s2", IDLER_BUCKET),
        g12=g1(state, "s1", "s2"),
        fringe_visibility=fringe_visibility(state, "s1", "s2", points=points),
        energy_imbalance=energy_imbalance(state, "s1", "s2"),
    )
    logger.debug(
        "engine G=%.4g t=%.4g gamma=%.4g: g13=%.10g g23=%.10g g12=%.10g",
        params.gain,
        params.t_mag,
        params.gamma_mag,
        report.g13,
        report.g23,
        report.g12,
    )
    return report
