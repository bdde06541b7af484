"""
Bridge module for the induced-coherence toolkit.

Every front end (CLI, MCP server, validation suite) goes through
:class:`InterferometerBridge`, which turns parameter points into table rows
and report objects using the closed form, the Gaussian engine, the Fock
oracle and the counting simulator.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple, TypeVar

import numpy as np

from . import closed_form, counting_sim, fock_oracle, gaussian_engine
from .errors import InsufficientCounts, RangeError
from .models import (
    DetectionParams,
    EngineReport,
    ExperimentParams,
    OracleReport,
    SweepSpec,
)

logger = logging.getLogger(__name__)

NAN = float("nan")

Kind = Literal["analytic", "engine", "oracle", "mc"]
Row = Tuple[float, ...]
T = TypeVar("T")

ANALYTIC_COLUMNS: Tuple[str, ...] = (
    "t",
    "v2",
    "gamma",
    "g13",
    "g23",
    "g13_low",
    "g23_low",
    "D_trace",
    "D_from_g2",
    "D_highgain",
    "g12",
    "V_low",
    "residual",
)
ENGINE_COLUMNS = ANALYTIC_COLUMNS + ("n_s1", "n_s2", "n_i3", "V_fringe")
ORACLE_COLUMNS = ENGINE_COLUMNS + ("norm_deficit",)
MC_COLUMNS = ANALYTIC_COLUMNS + (
    "R13_peak",
    "rate_err",
    "R23_peak",
    "rate_err_23",
    "gamma13_hat",
    "gamma13_err",
    "gamma23_hat",
    "gamma23_err",
    "D_mc_err",
)

COLUMNS: Dict[str, Tuple[str, ...]] = {
    "analytic": ANALYTIC_COLUMNS,
    "engine": ENGINE_COLUMNS,
    "oracle": ORACLE_COLUMNS,
    "mc": MC_COLUMNS,
}


@dataclass
class Config:
    """Runtime settings of the toolkit (physical parameters live in the models)."""

    cutoff: int = 8  # oracle photon-number cutoff per mode
    padding: int = fock_oracle.DEFAULT_PADDING  # extra levels when exponentiating squeezers
    basis_cap: int = fock_oracle.DEFAULT_BASIS_CAP
    truncation_tol: float = fock_oracle.DEFAULT_TRUNCATION_TOL
    fringe_points: int = 721
    gate_delays: Optional[List[float]] = None  # None: -4 T_R to 3 T_R in T_R/4 steps
    max_relative_error: float = counting_sim.DEFAULT_MAX_RELATIVE_ERROR
    max_events: int = counting_sim.DEFAULT_MAX_EVENTS
    workers: int = 1
    trials: Optional[int] = None  # None: DetectionParams.trials


def _g2_values(t_mag: float, v2: float, low_gain: bool = False) -> Tuple[float, float]:
    if v2 <= 0.0:
        return NAN, NAN
    pair = closed_form.g2_pair(t_mag, v2, low_gain)
    return pair.g13, pair.g23


def _truncated_dist(g13: float, g23: float, gamma_mag: float) -> float:
    # truncation noise can push the radicand a little below zero at D = 0
    radicand = 1.0 - gamma_mag**2 * (g13 - 1.0) / (g23 - 1.0)
    return math.sqrt(max(0.0, radicand))


class InterferometerBridge:
    """
    Main bridge class of the toolkit.

    Holds the runtime :class:`Config` and exposes one method per compute
    module, plus sweeps that evaluate a :class:`SweepSpec` in grid order.
    """

    def __init__(self, config: Optional[Config] = None):
        """
        Initialize the bridge.

        Args:
            config: Runtime configuration. If None, uses the defaults.
        """
        self.config = config or Config()

    def _closed_form_part(self, params: ExperimentParams) -> Dict[str, float]:
        t_mag, v2, gamma_mag = params.t_mag, params.v2, params.gamma_mag
        g13, g23 = _g2_values(t_mag, v2)
        g13_low, g23_low = _g2_values(t_mag, v2, low_gain=True)
        values: Dict[str, float] = {
            "t": t_mag,
            "v2": v2,
            "gamma": gamma_mag,
            "g13": g13,
            "g23": g23,
            "g13_low": g13_low,
            "g23_low": g23_low,
            "D_trace": closed_form.dist_trace(t_mag, gamma_mag),
            "D_highgain": closed_form.dist_highgain(t_mag, v2),
            "g12": closed_form.g12_coherence_overlap(t_mag, v2, gamma_mag),
            "V_low": closed_form.visibility_low(t_mag, gamma_mag),
            "residual": closed_form.complementarity_residual(t_mag, v2),
        }
        values["D_from_g2"] = (
            closed_form.dist_from_g2_overlap(values["g13"], values["g23"], gamma_mag)
            if v2 > 0.0
            else NAN
        )
        return values

    def closed_form_point(self, params: ExperimentParams) -> Dict[str, float]:
        """All closed-form quantities at one parameter point."""
        return self._closed_form_part(params)

    def analytic_row(self, params: ExperimentParams) -> Row:
        values = self._closed_form_part(params)
        return tuple(values[name] for name in ANALYTIC_COLUMNS)

    def engine_point(self, params: ExperimentParams) -> EngineReport:
        """Gaussian engine report; raises ZeroPhoton on the vacuum."""
        return gaussian_engine.analyze(params, points=self.config.fringe_points)

    def engine_row(self, params: ExperimentParams) -> Row:
        values = self._closed_form_part(params)
        if params.v2 > 0.0:
            report = self.engine_point(params)
            values.update(
                g13=report.g13,
                g23=report.g23,
                g12=report.g12,
                D_from_g2=closed_form.dist_from_g2_overlap(
                    report.g13, report.g23, params.gamma_mag
                ),
                n_s1=report.n_s1,
                n_s2=report.n_s2,
                n_i3=report.n_i3,
                V_fringe=report.fringe_visibility,
            )
            values["residual"] = values["D_from_g2"] ** 2 + report.g12**2 - 1.0
        else:
            values.update(n_s1=0.0, n_s2=0.0, n_i3=0.0, V_fringe=NAN, g12=NAN)
        return tuple(values[name] for name in ENGINE_COLUMNS)

    def oracle_point(
        self, params: ExperimentParams, cutoff: Optional[int] = None
    ) -> OracleReport:
        """Fock oracle report at the configured (or given) cutoff."""
        return fock_oracle.simulate(
            params,
            cutoff=cutoff if cutoff is not None else self.config.cutoff,
            padding=self.config.padding,
            basis_cap=self.config.basis_cap,
            truncation_tol=self.config.truncation_tol,
        )

    def oracle_row(self, params: ExperimentParams, cutoff: Optional[int] = None) -> Row:
        values = self._closed_form_part(params)
        report = self.oracle_point(params, cutoff)
        singles = report.singles
        values.update(
            n_s1=singles["s1"],
            n_s2=singles["s2"],
            n_i3=singles["v3"] + singles["w3"],
            norm_deficit=report.norm_deficit,
        )
        if report.vacuum:
            values.update(g12=NAN, V_fringe=NAN)
        else:
            assert report.g13 is not None and report.g23 is not None
            values.update(
                g13=report.g13,
                g23=report.g23,
                g12=report.g12,
                V_fringe=report.fringe_visibility,
                D_from_g2=_truncated_dist(report.g13, report.g23, params.gamma_mag),
            )
            values["residual"] = values["D_from_g2"] ** 2 + values["g12"] ** 2 - 1.0
        return tuple(values[name] for name in ORACLE_COLUMNS)

    def mc_histograms(
        self, params: ExperimentParams, det: DetectionParams, arm: counting_sim.Arm
    ) -> counting_sim.CoincidenceHistogram:
        """Delay scan of one arm, pooled over the configured number of trials."""
        histograms = counting_sim.run_trials(
            params,
            det,
            arm,
            gate_delays=self.config.gate_delays,
            trials=self.config.trials,
            workers=self.config.workers,
            max_events=self.config.max_events,
        )
        return counting_sim.CoincidenceHistogram.merge(histograms)

    def mc_point(
        self, params: ExperimentParams, det: DetectionParams
    ) -> Tuple[Row, counting_sim.CoincidenceHistogram, counting_sim.CoincidenceHistogram]:
        """Monte Carlo row together with the pooled s1 and s2 delay scans."""
        values = self._closed_form_part(params)
        h13 = self.mc_histograms(params, det, "s1")
        h23 = self.mc_histograms(params, det, "s2")
        values["R13_peak"], values["rate_err"] = h13.peak_rate()
        values["R23_peak"], values["rate_err_23"] = h23.peak_rate()
        limit = self.config.max_relative_error
        try:
            big13, err13 = counting_sim.estimate_big_gamma(h13, det, limit)
            big23, err23 = counting_sim.estimate_big_gamma(h23, det, limit)
            dist, dist_err = counting_sim.estimate_distinguishability(
                h13, h23, det, params.gamma_mag, limit
            )
        except InsufficientCounts as exc:
            logger.warning("t=%.4g v2=%.4g: %s", params.t_mag, params.v2, exc.message)
            big13 = err13 = big23 = err23 = dist = dist_err = NAN
        values.update(
            g13=1.0 + big13,
            g23=1.0 + big23,
            D_from_g2=dist,
            gamma13_hat=big13,
            gamma13_err=err13,
            gamma23_hat=big23,
            gamma23_err=err23,
            D_mc_err=dist_err,
        )
        return tuple(values[name] for name in MC_COLUMNS), h13, h23

    def mc_row(self, params: ExperimentParams, det: DetectionParams) -> Row:
        return self.mc_point(params, det)[0]

    def _map_ordered(
        self, func: Callable[[ExperimentParams], T], points: Sequence[ExperimentParams]
    ) -> List[T]:
        if self.config.workers <= 1:
            return [func(point) for point in points]
        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            return list(pool.map(func, points))

    def sweep(
        self,
        kind: Kind,
        spec: SweepSpec,
        det: Optional[DetectionParams] = None,
        cutoff: Optional[int] = None,
    ) -> Tuple[Tuple[str, ...], List[Row]]:
        """
        Evaluate a sweep with one of the compute modules.

        Args:
            kind: ``analytic``, ``engine``, ``oracle`` or ``mc``
            spec: Grid and fixed parameters
            det: Detection parameters (``mc`` only)
            cutoff: Oracle cutoff overriding the configured one

        Returns:
            Column names and one row per grid point, in grid order
        """
        points = list(spec.points())
        logger.info("%s sweep over %s: %d points", kind, spec.variable, len(points))
        func: Callable[[ExperimentParams], Row]
        if kind == "analytic":
            func = self.analytic_row
        elif kind == "engine":
            func = self.engine_row
        elif kind == "oracle":
            func = lambda p: self.oracle_row(p, cutoff)  # noqa: E731
        elif kind == "mc":
            detection = det if det is not None else DetectionParams()
            func = lambda p: self.mc_row(p, detection)  # noqa: E731
        else:
            raise RangeError("kind", kind, "{analytic, engine, oracle, mc}")
        rows = self._map_ordered(func, points)
        logger.info("%s sweep finished", kind)
        return COLUMNS[kind], rows

    def mc_sweep(
        self, spec: SweepSpec, det: DetectionParams
    ) -> Tuple[
        Tuple[str, ...],
        List[Row],
        List[Tuple[counting_sim.CoincidenceHistogram, counting_sim.CoincidenceHistogram]],
    ]:
        """Monte Carlo sweep that also returns the pooled (s1, s2) delay scans."""
        points = list(spec.points())
        logger.info("mc sweep over %s: %d points", spec.variable, len(points))
        results = self._map_ordered(lambda p: self.mc_point(p, det), points)
        rows = [row for row, _, _ in results]
        scans = [(h13, h23) for _, h13, h23 in results]
        return MC_COLUMNS, rows, scans

    def complementarity_check(
        self, t_points: int = 51, v2_points: int = 50, v2_range: Tuple[float, float] = (1e-4, 10.0)
    ) -> Dict[str, Any]:
        """Largest |D² + g12² − 1| and D² mismatch over a (t, v2) grid."""
        t_grid = np.linspace(0.0, 1.0, t_points)
        v2_grid = np.logspace(math.log10(v2_range[0]), math.log10(v2_range[1]), v2_points)
        residual = 0.0
        mismatch = 0.0
        for t_mag in t_grid:
            for v2 in v2_grid:
                residual = max(residual, abs(closed_form.complementarity_residual(t_mag, v2)))
                from_g2 = closed_form.dist_from_g2(
                    closed_form.g13_full(t_mag, v2), closed_form.g23_full(t_mag, v2)
                )
                mismatch = max(
                    mismatch, abs(from_g2**2 - closed_form.dist_highgain(t_mag, v2) ** 2)
                )
        return {
            "points": int(t_points * v2_points),
            "max_residual": residual,
            "max_dist_sq_mismatch": mismatch,
        }
