"""
Closed-form expressions for the two-crystal induced-coherence interferometer.

Everything here is a pure function of magnitudes (|t|, |γ|, |V|²); phases never
enter. These are the reference values the Gaussian engine, the Fock oracle and
the Monte Carlo are checked against.
"""

import cmath
import math
from typing import NamedTuple, Tuple

from scipy.optimize import brentq

from .errors import DomainError, RangeError, ZeroGain
from .models import G2Pair

# radicands at most this far below zero are rounding noise of the g2 inputs
RADICAND_TOL = 1e-12


class SinglesRates(NamedTuple):
    """Mean photon numbers of s1, s2 and i3."""

    n_s1: float
    n_s2: float
    n_i3: float


def bogoliubov_uv(gain: float, k: float, length: float) -> Tuple[complex, complex]:
    """U = cosh(G)·e^{ikL}, V = −i·sinh(G)·e^{ikL}."""
    if gain < 0.0:
        raise RangeError("gain", gain, "[0, inf)")
    phase = cmath.exp(1j * k * length)
    return math.cosh(gain) * phase, -1j * math.sinh(gain) * phase


def singles_rates(t_mag: float, v2: float) -> SinglesRates:
    u2 = 1.0 + v2
    t2 = t_mag * t_mag
    return SinglesRates(v2, v2 * (1.0 + t2 * v2), v2 * (1.0 + t2 * u2))


def _require_gain(v2: float) -> None:
    if v2 <= 0.0:
        raise ZeroGain("g2 is undefined on the vacuum (v2 = 0)", {"v2": v2})


def g13_full(t_mag: float, v2: float) -> float:
    """g2 between s1 and i3 at any gain."""
    _require_gain(v2)
    u2 = 1.0 + v2
    t2 = t_mag * t_mag
    return 1.0 + t2 * u2 * u2 / ((1.0 + t2 * u2) * v2)


def g23_full(t_mag: float, v2: float) -> float:
    """g2 between s2 and i3 at any gain."""
    _require_gain(v2)
    u2 = 1.0 + v2
    t2 = t_mag * t_mag
    t4 = t2 * t2
    numerator = (
        t4 * u2**3 + 2.0 * t2 * u2**2 - 2.0 * t4 * u2**2 + u2 * (1.0 - t2) ** 2
    )
    return 1.0 + numerator / (v2 * (1.0 + t2 * v2) * (1.0 + t2 * u2))


def g13_low(t_mag: float, v2: float) -> float:
    """Low-gain form of g13 (|U|² ≈ 1)."""
    _require_gain(v2)
    t2 = t_mag * t_mag
    return 1.0 + t2 / ((1.0 + t2) * v2)


def g23_low(t_mag: float, v2: float) -> float:
    """Low-gain form of g23 (|U|² ≈ 1)."""
    _require_gain(v2)
    return 1.0 + 1.0 / ((1.0 + t_mag * t_mag) * v2)


def g2_pair(t_mag: float, v2: float, low_gain: bool = False) -> G2Pair:
    """g13 and g23 together, from the full or the low-gain expressions."""
    if low_gain:
        return G2Pair(g13=g13_low(t_mag, v2), g23=g23_low(t_mag, v2))
    return G2Pair(g13=g13_full(t_mag, v2), g23=g23_full(t_mag, v2))


def _clamped_sqrt(radicand: float, what: str) -> float:
    if radicand < 0.0:
        if radicand < -RADICAND_TOL:
            raise DomainError(
                f"negative radicand {radicand:.3e} in {what}", {"radicand": radicand}
            )
        return 0.0
    return math.sqrt(radicand)


def dist_from_g2(g13: float, g23: float) -> float:
    """Distinguishability √[(g23 − g13)/(g23 − 1)] from measured g2 values.

    Raises:
        DomainError: if g23 <= 1 or g13 exceeds g23 beyond rounding tolerance.
    """
    if g23 <= 1.0:
        raise DomainError(f"g23={g23} must exceed 1", {"g13": g13, "g23": g23})
    return _clamped_sqrt((g23 - g13) / (g23 - 1.0), "dist_from_g2")


def dist_from_g2_overlap(g13: float, g23: float, gamma_mag: float) -> float:
    """Distinguishability corrected for an idler mode overlap |γ| < 1."""
    if g23 <= 1.0:
        raise DomainError(f"g23={g23} must exceed 1", {"g13": g13, "g23": g23})
    ratio = (g13 - 1.0) / (g23 - 1.0)
    return _clamped_sqrt(1.0 - gamma_mag * gamma_mag * ratio, "dist_from_g2_overlap")


def dist_trace(t_mag: float, gamma_mag: float) -> float:
    """Trace distance between the idler states conditioned on the source crystal."""
    return math.sqrt(max(0.0, 1.0 - gamma_mag * gamma_mag * t_mag * t_mag))


def visibility_low(t_mag: float, gamma_mag: float) -> float:
    return gamma_mag * t_mag


def dist_highgain(t_mag: float, v2: float) -> float:
    """Distinguishability at any gain for perfect overlap."""
    t2 = t_mag * t_mag
    numerator = 1.0 - t2 + t2 * (1.0 - t2) * v2
    denominator = 1.0 + 2.0 * t2 * v2 + t2 * t2 * v2 * v2
    return math.sqrt(max(0.0, numerator / denominator))


def g12_coherence(t_mag: float, v2: float) -> float:
    """Degree of first-order coherence between s1 and s2 at any gain."""
    return t_mag * math.sqrt((1.0 + v2) / (1.0 + v2 * t_mag * t_mag))


def g12_coherence_overlap(t_mag: float, v2: float, gamma_mag: float) -> float:
    """First-order coherence when the NLC1 idler only overlaps the NLC2 mode by γ."""
    return g12_coherence(gamma_mag * t_mag, v2)


def complementarity_residual(t_mag: float, v2: float) -> float:
    """D² + g12² − 1; zero for every input."""
    return dist_highgain(t_mag, v2) ** 2 + g12_coherence(t_mag, v2) ** 2 - 1.0


def coincidence_rate(
    rate_m: float,
    rate_n: float,
    t_window: float,
    t_coherence: float,
    big_gamma: float,
) -> float:
    """Coincidence rate R_mn = R_m R_n T_R [1 + (T_c/T_R) Γ_mn]."""
    return rate_m * rate_n * t_window * (1.0 + (t_coherence / t_window) * big_gamma)


def ratio_r13(t_coherence: float, t_window: float, v2: float) -> float:
    """Approximate R13 peak ratio between |t| = 1 and |t| = 0, T_c/(T_R v2)."""
    _require_gain(v2)
    return t_coherence / (t_window * v2)


def ratio_r23() -> float:
    return 1.0


def ratio_r13_exact(t_coherence: float, t_window: float, v2: float) -> float:
    """R13 peak ratio between |t| = 1 and |t| = 0 without the T_c/(T_R v2) ≫ 1 step.

    Composes :func:`coincidence_rate` with :func:`g13_low`; the signal singles are
    unchanged by the loss while the idler singles grow with the transmitted
    NLC1 idler.
    """
    n_idler_open = singles_rates(1.0, v2).n_i3
    n_idler_blocked = singles_rates(0.0, v2).n_i3
    open_rate = coincidence_rate(
        1.0, n_idler_open, t_window, t_coherence, g13_low(1.0, v2) - 1.0
    )
    blocked_rate = coincidence_rate(
        1.0, n_idler_blocked, t_window, t_coherence, g13_low(0.0, v2) - 1.0
    )
    return open_rate / blocked_rate


def solve_v2_for_ratio(
    ratio: float, t_coherence: float, t_window: float, exact: bool = False
) -> float:
    """Mean photon number that produces a given R13 peak ratio."""
    if ratio <= 0.0:
        raise RangeError("ratio", ratio, "(0, inf)")
    if not exact:
        return t_coherence / (t_window * ratio)
    # the exact ratio falls monotonically until v2 = √(T_c/T_R), then rises
    high = math.sqrt(t_coherence / t_window)
    floor = ratio_r13_exact(t_coherence, t_window, high)
    if ratio <= floor:
        raise RangeError("ratio", ratio, f"({floor:.6g}, inf)")
    low = min(t_coherence / (t_window * ratio), high) * 1e-3
    return brentq(
        lambda v2: ratio_r13_exact(t_coherence, t_window, v2) - ratio,
        low,
        high,
        xtol=1e-30,
        rtol=1e-14,
    )


def visibility_from_g1(n1: float, n2: float, g1_mag: float) -> float:
    """Fringe visibility √(1 − Δ²)·|g1| of two beams with mean photons n1, n2."""
    if n1 < 0.0 or n2 < 0.0 or n1 + n2 <= 0.0:
        raise DomainError(
            "photon numbers must be non-negative and not both zero",
            {"n1": n1, "n2": n2},
        )
    if not 0.0 <= g1_mag <= 1.0:
        raise RangeError("g1_mag", g1_mag, "[0, 1]")
    delta = abs(n1 - n2) / (n1 + n2)
    return math.sqrt(1.0 - delta * delta) * g1_mag


def visibility_highgain(t_mag: float, v2: float, gamma_mag: float = 1.0) -> float:
    """Fringe visibility between s1 and s2 at any gain.

    Below one at |t| = 1 as soon as the gain is not small, because s2 carries
    more photons than s1.
    """
    if v2 <= 0.0:
        return visibility_low(t_mag, gamma_mag)
    overlap_t = gamma_mag * t_mag
    n1 = v2
    n2 = v2 * (1.0 + overlap_t * overlap_t * v2)
    return visibility_from_g1(n1, n2, g12_coherence(overlap_t, v2))


def dist_uncertainty(
    g13: float, sigma13: float, g23: float, sigma23: float, gamma_mag: float
) -> float:
    """First-order standard error of :func:`dist_from_g2_overlap`.

    Works from the spread of D² = 1 − γ²Γ13/Γ23, so noisy inputs with D² slightly
    negative still get an error bar.
    """
    big13, big23 = g13 - 1.0, g23 - 1.0
    if big23 <= 0.0:
        raise DomainError(f"g23={g23} must exceed 1", {"g13": g13, "g23": g23})
    gamma2 = gamma_mag * gamma_mag
    d_squared = 1.0 - gamma2 * big13 / big23
    spread = gamma2 * math.hypot(sigma13 / big23, big13 * sigma23 / big23**2)
    if d_squared <= spread:
        # linearization breaks down next to D = 0
        return math.sqrt(spread)
    return spread / (2.0 * math.sqrt(d_squared))
