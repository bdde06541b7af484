"""
Cross-module acceptance checks.

Each check compares two independent routes to the same quantity (closed form
against itself, engine against closed form, oracle against engine, Monte
Carlo against the rate model) and reports pass/fail with the worst deviation.
Functions are always looked up through their module so that a corrupted
formula is caught wherever it is used.
"""

import logging
import math
import time
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from . import closed_form, counting_sim, fock_oracle, gaussian_engine
from .errors import InterferometerError
from .models import DetectionParams, ExperimentParams

logger = logging.getLogger(__name__)

T_GRID = [round(0.02 * i, 2) for i in range(51)]
ENGINE_GAINS = (0.1, 0.5, 1.0, 1.5)
ENGINE_T = (0.0, 0.25, 0.5, 0.75, 1.0)
MEASURED_GAMMA = 0.855


class CheckResult(BaseModel):
    """Outcome of one acceptance check."""

    number: int
    name: str
    passed: bool
    detail: str = Field(description="Worst deviation or failure reason")
    seconds: float = 0.0


def _v2_grid() -> np.ndarray:
    return np.logspace(-4.0, 1.0, 50)


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0.0 else 0.0


def check_complementarity() -> Tuple[bool, str]:
    worst = max(
        abs(
            closed_form.dist_highgain(t, v2) ** 2
            + closed_form.g12_coherence(t, v2) ** 2
            - 1.0
        )
        for t in T_GRID
        for v2 in _v2_grid()
    )
    return worst <= 1e-12, f"max |D² + g12² − 1| = {worst:.2e}"


def check_g2_equivalence() -> Tuple[bool, str]:
    # compared as D², the square root amplifies rounding near D = 0
    worst = max(
        abs(
            closed_form.dist_from_g2(
                closed_form.g13_full(t, v2), closed_form.g23_full(t, v2)
            )
            ** 2
            - closed_form.dist_highgain(t, v2) ** 2
        )
        for t in T_GRID
        for v2 in _v2_grid()
    )
    return worst <= 1e-12, f"max |D(g2)² − D_highgain²| = {worst:.2e}"


def check_low_gain() -> Tuple[bool, str]:
    v2 = 1e-4
    worst = max(
        abs(
            closed_form.dist_from_g2(
                closed_form.g13_low(t, v2), closed_form.g23_low(t, v2)
            )
            - math.sqrt(1.0 - t * t)
        )
        for t in T_GRID
    )
    return worst <= 5e-4, f"max |D(g2_low) − √(1−t²)| = {worst:.2e}"


def check_engine_closed_form() -> Tuple[bool, str]:
    worst = 0.0
    for gain in ENGINE_GAINS:
        for t in ENGINE_T:
            params = ExperimentParams(gain=gain, t_mag=t)
            state = gaussian_engine.build_setup(params)
            singles = closed_form.singles_rates(t, params.v2)
            pairs = [
                (gaussian_engine.g2(state, "s1", "v3"), closed_form.g13_full(t, params.v2)),
                (gaussian_engine.g2(state, "s2", "v3"), closed_form.g23_full(t, params.v2)),
                (gaussian_engine.mean_photon(state, "s1"), singles.n_s1),
                (gaussian_engine.mean_photon(state, "s2"), singles.n_s2),
                (gaussian_engine.mean_photon(state, "v3"), singles.n_i3),
            ]
            worst = max(worst, max(_relative(a, b) for a, b in pairs))
    return worst <= 1e-10, f"max relative deviation {worst:.2e}"


def _oracle_gap(oracle, engine) -> float:
    pairs = [
        (oracle.singles["s1"], engine.n_s1),
        (oracle.singles["s2"], engine.n_s2),
        (oracle.singles["v3"] + oracle.singles["w3"], engine.n_i3),
        (oracle.g13, engine.g13),
        (oracle.g23, engine.g23),
        (oracle.g12, engine.g12),
    ]
    return max(abs(a - b) for a, b in pairs)


def check_oracle_engine() -> Tuple[bool, str]:
    failures = []
    worst = 0.0
    for t in (0.0, 0.5, 1.0):
        for gamma in (1.0, MEASURED_GAMMA):
            params = ExperimentParams(gain=0.2, t_mag=t, gamma_mag=gamma)
            oracle = fock_oracle.simulate(params, cutoff=8)
            engine = gaussian_engine.analyze(params)
            gap = _oracle_gap(oracle, engine)
            worst = max(worst, gap)
            if gap > max(1e-4, 10.0 * oracle.norm_deficit):
                failures.append(f"t={t} γ={gamma}: {gap:.2e}")
    params = ExperimentParams(gain=0.2, t_mag=0.5)
    exact = closed_form.g13_full(0.5, params.v2)
    gaps = [
        abs(fock_oracle.simulate(params, cutoff=d).g13 - exact)  # type: ignore[operator]
        for d in range(4, 11)
    ]
    for d, (before, after) in enumerate(zip(gaps, gaps[1:]), start=5):
        if after > before and after >= 1e-11:
            failures.append(f"g13 gap grew at d={d}: {before:.2e} → {after:.2e}")
    if gaps[-1] > 1e-4:
        failures.append(f"final gap {gaps[-1]:.2e}")
    detail = "; ".join(failures) if failures else f"max gap {worst:.2e}, d=10 gap {gaps[-1]:.2e}"
    return not failures, detail


def check_overlap_calibration() -> Tuple[bool, str]:
    failures = []
    base = ExperimentParams(gain=0.05, gamma_mag=MEASURED_GAMMA)
    for t in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0):
        report = gaussian_engine.analyze(base.replace(t_mag=t))
        dist = closed_form.dist_from_g2_overlap(report.g13, report.g23, MEASURED_GAMMA)
        visibility = report.fringe_visibility
        if abs(dist**2 + visibility**2 - 1.0) > 1e-3:
            failures.append(f"t={t}: D²+V²={dist**2 + visibility**2:.5f}")
        if abs(dist - closed_form.dist_trace(t, MEASURED_GAMMA)) > 1e-3:
            failures.append(f"t={t}: D={dist:.5f}")
        if t == 1.0 and abs(visibility - MEASURED_GAMMA) > 1e-3:
            failures.append(f"V(t=1)={visibility:.5f}")
    return not failures, "; ".join(failures) or "D, V and D²+V² within 1e-3"


def _mc_delays(t_window: float) -> List[float]:
    return [-3.0 * t_window, -2.0 * t_window, -0.5 * t_window, t_window, 2.0 * t_window]


def _pooled(
    params: ExperimentParams,
    det: DetectionParams,
    arm: counting_sim.Arm,
    trials: int,
) -> List[counting_sim.CoincidenceHistogram]:
    return counting_sim.run_trials(
        params, det, arm, _mc_delays(det.t_window), trials=trials
    )


def check_monte_carlo(seeds: int = 100, calibrated_trials: int = 10) -> Tuple[bool, str]:
    failures = []
    det = DetectionParams(integration_time=30.0, rng_seed=1)
    source = ExperimentParams(v2=1e-9)

    # (a) accidental floor
    scans = _pooled(source.replace(t_mag=1.0), det, "s1", seeds)
    floor = counting_sim.CoincidenceHistogram.merge(scans)
    measured, sigma = floor.floor_rate()
    predicted = floor.rate_signal_measured * floor.rate_idler_measured * det.t_window
    if abs(measured - predicted) > 3.0 * sigma:
        failures.append(f"floor {measured:.4g} vs {predicted:.4g} ± {sigma:.2g}")

    # (b) s2 peak independent of t
    peaks = []
    for t in (0.0, 1.0):
        pooled = counting_sim.CoincidenceHistogram.merge(
            _pooled(source.replace(t_mag=t), det, "s2", seeds // 4 or 1)
        )
        peaks.append(pooled.peak_rate())
    (low, low_err), (high, high_err) = peaks
    if abs(high - low) > 3.0 * math.hypot(low_err, high_err):
        failures.append(f"s2 peak {low:.4g} vs {high:.4g}")

    # (c) s1 peak ratio and absolute scale of the calibrated source
    calibration = counting_sim.reference_calibration()
    cal_det = calibration.detection
    open_peak = counting_sim.CoincidenceHistogram.merge(
        _pooled(calibration.params, cal_det, "s1", calibrated_trials)
    ).peak_rate()
    blocked_peak = counting_sim.CoincidenceHistogram.merge(
        _pooled(calibration.params.replace(t_mag=0.0), cal_det, "s1", calibrated_trials)
    ).peak_rate()
    ratio = open_peak[0] / blocked_peak[0]
    ratio_err = ratio * math.hypot(open_peak[1] / open_peak[0], blocked_peak[1] / blocked_peak[0])
    expected = closed_form.ratio_r13_exact(
        cal_det.t_coherence, cal_det.t_window, calibration.params.v2
    )
    if abs(ratio - expected) > 3.0 * ratio_err:
        failures.append(f"R13 ratio {ratio:.3f} ± {ratio_err:.2f} vs {expected:.3f}")
    if abs(open_peak[0] - 112.5) > 0.1 * 112.5:
        failures.append(f"R13 peak {open_peak[0]:.1f}/s vs 112.5/s")
    detail = "; ".join(failures) or (
        f"floor {measured:.3g}/s, s2 peaks {low:.4g}/{high:.4g}, "
        f"R13 ratio {ratio:.2f}, peak {open_peak[0]:.1f}/s"
    )
    return not failures, detail


def check_closed_loop(trials: int = 4) -> Tuple[bool, str]:
    calibration = counting_sim.reference_calibration()
    det = calibration.detection
    failures = []
    for t in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        params = calibration.params.replace(t_mag=t, gamma_mag=MEASURED_GAMMA)
        h13 = counting_sim.CoincidenceHistogram.merge(_pooled(params, det, "s1", trials))
        h23 = counting_sim.CoincidenceHistogram.merge(_pooled(params, det, "s2", trials))
        dist, sigma = counting_sim.estimate_distinguishability(
            h13, h23, det, MEASURED_GAMMA
        )
        truth = closed_form.dist_trace(t, MEASURED_GAMMA)
        if abs(dist - truth) > 3.0 * sigma:
            failures.append(f"t={t}: D̂={dist:.4f} ± {sigma:.4f} vs {truth:.4f}")
    return not failures, "; ".join(failures) or "all D̂ within 3σ"


def check_fringe_property() -> Tuple[bool, str]:
    params = ExperimentParams(gain=1.0, t_mag=0.5)
    state = gaussian_engine.build_setup(params)
    visibility = gaussian_engine.fringe_visibility(state, "s1", "s2")
    predicted = closed_form.visibility_from_g1(
        gaussian_engine.mean_photon(state, "s1"),
        gaussian_engine.mean_photon(state, "s2"),
        gaussian_engine.g1(state, "s1", "s2"),
    )
    gap = abs(visibility - predicted)
    return gap <= 1e-10, f"|V − √(1−Δ²) g12| = {gap:.2e}"


Check = Tuple[int, str, Callable[[], Tuple[bool, str]], bool]

CHECKS: Sequence[Check] = (
    (1, "complementarity identity", check_complementarity, True),
    (2, "g2 route to D equals high-gain D", check_g2_equivalence, True),
    (3, "low-gain D from g2", check_low_gain, True),
    (4, "engine vs closed form", check_engine_closed_form, True),
    (5, "oracle vs engine", check_oracle_engine, False),
    (6, "overlap calibration", check_overlap_calibration, True),
    (7, "Monte Carlo rate model", check_monte_carlo, False),
    (8, "closed-loop D estimation", check_closed_loop, False),
    (9, "visibility from g1 and imbalance", check_fringe_property, True),
)


def run_checks(
    quick: bool = False, checks: Optional[Iterable[Check]] = None
) -> List[CheckResult]:
    """Run the acceptance checks; ``quick`` keeps only the fast ones."""
    results = []
    for number, name, check, fast in checks if checks is not None else CHECKS:
        if quick and not fast:
            continue
        start = time.perf_counter()
        try:
            passed, detail = check()
        except (InterferometerError, ArithmeticError, ValueError) as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        seconds = time.perf_counter() - start
        logger.info("check %d %s: %s (%.2fs)", number, name, "PASS" if passed else "FAIL", seconds)
        results.append(
            CheckResult(number=number, name=name, passed=passed, detail=detail, seconds=seconds)
        )
    return results


def format_table(results: Sequence[CheckResult]) -> str:
    width = max((len(r.name) for r in results), default=4)
    lines = [f"{'#':>2}  {'check':<{width}}  result  time     detail"]
    for r in results:
        lines.append(
            f"{r.number:>2}  {r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  "
            f"{r.seconds:6.2f}s  {r.detail}"
        )
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines)
