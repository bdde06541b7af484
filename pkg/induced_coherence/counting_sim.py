"""
Event-level Monte Carlo of the coincidence measurement.

Pairs are produced one crystal at a time (low gain), thinned by the detector
efficiencies and the idler loss, topped up with uncorrelated background, and
counted with a gated coincidence logic: every signal event opens a gate of
width T_R at (signal time + gate delay) and the gate fires at most once.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import closed_form
from .errors import InsufficientCounts, RangeError, RegimeError, ResourceError
from .models import DetectionParams, ExperimentParams

logger = logging.getLogger(__name__)

Arm = Literal["s1", "s2"]

# provenance tags
FROM_FIRST = 0
FROM_SECOND = 1
BACKGROUND = 2

REGIME_LIMIT = 1e-2
DEFAULT_MAX_EVENTS = 50_000_000
DEFAULT_MAX_RELATIVE_ERROR = 0.5
FLOOR_EXCLUSION = 5.0  # coherence times on each side of zero delay


def default_gate_delays(t_window: float) -> List[float]:
    """Quarter-window steps from −4 T_R to 3 T_R."""
    return [float(x) for x in np.arange(-16, 12) * (t_window / 4.0)]


@dataclass(frozen=True)
class EventStream:
    """Sorted arrival times at one detector, with the origin of each event."""

    times: np.ndarray
    provenance: np.ndarray
    integration_time: float

    def __post_init__(self) -> None:
        if self.times.shape != self.provenance.shape:
            raise ValueError("times and provenance must have the same length")
        if self.times.size and (
            self.times[0] < 0.0 or self.times[-1] > self.integration_time
        ):
            raise ValueError("event times outside [0, integration_time]")
        if np.any(np.diff(self.times) < 0.0):
            raise ValueError("event times must be sorted")

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def rate(self) -> float:
        return len(self) / self.integration_time

    def count(self, tag: int) -> int:
        return int(np.count_nonzero(self.provenance == tag))

    @classmethod
    def from_parts(
        cls, parts: Iterable[Tuple[np.ndarray, int]], integration_time: float
    ) -> "EventStream":
        parts = list(parts)
        times = np.concatenate([np.asarray(t, dtype=float) for t, _ in parts])
        tags = np.concatenate([np.full(len(t), tag, dtype=np.int8) for t, tag in parts])
        keep = (times >= 0.0) & (times <= integration_time)
        times, tags = times[keep], tags[keep]
        order = np.argsort(times, kind="stable")
        return cls(times[order], tags[order], integration_time)


class CoincidenceHistogram(BaseModel):
    """Coincidence counts against gate delay for one arm and one setting."""

    model_config = ConfigDict(frozen=True)

    tau_bins: List[float] = Field(description="Gate delays (s)")
    counts: List[int] = Field(description="Coincidences per gate delay")
    errors: List[float] = Field(description="Poisson errors √counts")
    rate_signal_measured: float = Field(ge=0.0, description="Signal singles (Hz)")
    rate_idler_measured: float = Field(ge=0.0, description="Idler singles (Hz)")
    integration_time: float = Field(gt=0.0)
    t_window: float = Field(gt=0.0)
    t_coherence: float = Field(gt=0.0)
    arm: Arm
    t_mag: float
    seed: int

    @model_validator(mode="after")
    def _poisson_errors(self) -> "CoincidenceHistogram":
        if len(self.counts) != len(self.tau_bins) or len(self.errors) != len(
            self.counts
        ):
            raise ValueError("tau_bins, counts and errors must have equal length")
        if any(count < 0 for count in self.counts):
            raise ValueError("counts must be non-negative")
        if not np.allclose(self.errors, np.sqrt(self.counts)):
            raise ValueError("errors must equal √counts")
        return self

    @property
    def rates(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.integration_time

    @property
    def rate_errors(self) -> np.ndarray:
        return np.asarray(self.errors) / self.integration_time

    def _peak_mask(self) -> np.ndarray:
        # gates that contain zero delay with the whole jitter profile
        tau = np.asarray(self.tau_bins)
        return (tau > -self.t_window) & (tau < 0.0)

    def _floor_mask(self) -> np.ndarray:
        tau = np.asarray(self.tau_bins)
        margin = FLOOR_EXCLUSION * self.t_coherence
        return (tau + self.t_window < -margin) | (tau > margin)

    def _mean_rate(self, mask: np.ndarray, what: str) -> Tuple[float, float]:
        bins = int(np.count_nonzero(mask))
        if bins == 0:
            raise RangeError("tau_bins", f"{len(self.tau_bins)} delays", f"some {what} bins")
        total = float(np.asarray(self.counts)[mask].sum())
        exposure = bins * self.integration_time
        return total / exposure, math.sqrt(total) / exposure

    def floor_rate(self) -> Tuple[float, float]:
        """Mean accidental rate over gates clear of the pair peak, with its error."""
        return self._mean_rate(self._floor_mask(), "floor")

    def peak_rate(self) -> Tuple[float, float]:
        """Mean rate over gates that fully contain the pair peak, with its error."""
        return self._mean_rate(self._peak_mask(), "peak")

    def peak_counts(self) -> int:
        return int(np.asarray(self.counts)[self._peak_mask()].sum())

    def peak_excess(self) -> Tuple[float, float]:
        peak, peak_err = self.peak_rate()
        floor, floor_err = self.floor_rate()
        return peak - floor, math.hypot(peak_err, floor_err)

    @classmethod
    def merge(cls, histograms: Sequence["CoincidenceHistogram"]) -> "CoincidenceHistogram":
        """Pool independent trials of the same setting into one histogram."""
        if not histograms:
            raise ValueError("nothing to merge")
        first = histograms[0]
        for other in histograms[1:]:
            if other.tau_bins != first.tau_bins or other.arm != first.arm:
                raise ValueError("histograms differ in gate delays or arm")
        counts = np.sum([h.counts for h in histograms], axis=0)
        durations = np.array([h.integration_time for h in histograms])
        total_time = float(durations.sum())
        return cls(
            tau_bins=first.tau_bins,
            counts=[int(c) for c in counts],
            errors=[float(e) for e in np.sqrt(counts)],
            rate_signal_measured=float(
                np.dot([h.rate_signal_measured for h in histograms], durations)
                / total_time
            ),
            rate_idler_measured=float(
                np.dot([h.rate_idler_measured for h in histograms], durations)
                / total_time
            ),
            integration_time=total_time,
            t_window=first.t_window,
            t_coherence=first.t_coherence,
            arm=first.arm,
            t_mag=first.t_mag,
            seed=first.seed,
        )


ARMS: Tuple[Arm, ...] = ("s1", "s2")


def _point_key(params: ExperimentParams) -> Tuple[int, ...]:
    # bit pattern of the physical settings, so every parameter point draws afresh
    values = np.array(
        [params.gain, params.t_mag, params.t_phase, params.gamma_mag, params.gamma_phase],
        dtype=np.float64,
    )
    return tuple(int(word) for word in values.view(np.uint32))


def trial_rng(
    seed: int,
    trial: int = 0,
    arm: Optional[Arm] = None,
    params: Optional[ExperimentParams] = None,
) -> np.random.Generator:
    """Independent generator derived from (seed, trial, arm, parameter point).

    The two arms are separate measurements and so are different parameter
    points; each gets its own child of the seed sequence.
    """
    key: Tuple[int, ...] = (trial,)
    if arm is not None:
        key += (ARMS.index(arm),)
    if params is not None:
        key += _point_key(params)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def pair_rate(params: ExperimentParams, det: DetectionParams) -> float:
    """Pairs per second from each crystal, v2 / T_c."""
    return params.v2 / det.t_coherence


def _background_rate(target: float, from_pairs: float, which: str) -> float:
    fill = target - from_pairs
    if fill < 0.0:
        if target > 0.0:
            logger.warning(
                "%s pair rate %.4g Hz already exceeds the target %.4g Hz; "
                "no background added",
                which,
                from_pairs,
                target,
            )
        return 0.0
    return fill


def generate_streams(
    params: ExperimentParams,
    det: DetectionParams,
    arm: Arm = "s1",
    rng: Optional[np.random.Generator] = None,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> Tuple[EventStream, EventStream]:
    """Signal and idler detector streams for one integration period.

    ``arm`` selects which crystal's signal reaches the signal detector. The
    idler detector always sees the NLC2 idler and the NLC1 idler that
    survived the loss.

    Raises:
        RegimeError: if v2 is above the low-gain limit of the event model.
        ResourceError: if the expected event count exceeds ``max_events``.
    """
    if params.v2 > REGIME_LIMIT:
        raise RegimeError(
            f"v2={params.v2:.3g} is beyond the single-pair event model",
            {"v2": params.v2, "limit": REGIME_LIMIT},
        )
    if arm not in ("s1", "s2"):
        raise RangeError("arm", arm, "{s1, s2}")
    rng = rng if rng is not None else trial_rng(det.rng_seed, 0, arm, params)
    duration = det.integration_time
    rate = pair_rate(params, det)
    eta_s, eta_i = det.eta_signal, det.eta_idler
    t2 = params.t_mag**2

    signal_from_pairs = rate * eta_s
    idler_from_pairs = rate * eta_i * (1.0 + t2)
    bg_signal = _background_rate(det.rate_signal, signal_from_pairs, "signal")
    bg_idler = _background_rate(det.rate_idler, idler_from_pairs, "idler")
    expected = duration * (signal_from_pairs + idler_from_pairs + bg_signal + bg_idler)
    if expected > max_events:
        raise ResourceError(
            f"{expected:.3g} expected events exceed the cap of {max_events}",
            {"expected_events": expected, "max_events": max_events},
        )

    # detection probabilities: (both, signal only, idler only)
    idler_first = t2 * eta_i
    correlated_idler = idler_first if arm == "s1" else eta_i
    lone_idler = eta_i if arm == "s1" else idler_first
    probabilities = [
        eta_s * correlated_idler,
        eta_s * (1.0 - correlated_idler),
        (1.0 - eta_s) * correlated_idler,
    ]
    probabilities.append(max(0.0, 1.0 - sum(probabilities)))
    heralded = rng.poisson(rate * duration)
    both, signal_only, idler_only, _ = rng.multinomial(heralded, probabilities)
    unheralded = rng.binomial(rng.poisson(rate * duration), lone_idler)

    correlated = FROM_FIRST if arm == "s1" else FROM_SECOND
    other = FROM_SECOND if arm == "s1" else FROM_FIRST
    pair_times = rng.uniform(0.0, duration, both)
    partner_times = pair_times + rng.normal(0.0, det.jitter, both)

    signal = EventStream.from_parts(
        [
            (pair_times, correlated),
            (rng.uniform(0.0, duration, signal_only), correlated),
            (rng.uniform(0.0, duration, rng.poisson(bg_signal * duration)), BACKGROUND),
        ],
        duration,
    )
    idler = EventStream.from_parts(
        [
            (partner_times, correlated),
            (rng.uniform(0.0, duration, idler_only), correlated),
            (rng.uniform(0.0, duration, unheralded), other),
            (rng.uniform(0.0, duration, rng.poisson(bg_idler * duration)), BACKGROUND),
        ],
        duration,
    )
    logger.info(
        "arm %s t=%.3g: %d signal and %d idler events (%d pairs in both)",
        arm,
        params.t_mag,
        len(signal),
        len(idler),
        both,
    )
    return signal, idler


def gated_coincidences(
    signal: EventStream,
    idler: EventStream,
    det: DetectionParams,
    gate_delay: float,
) -> int:
    """Coincidences for one gate delay.

    Each signal event opens the gate [t + delay, t + delay + T_R). In ``gated``
    mode a gate registers at most one coincidence; ``free_running`` counts
    every idler inside it.
    """
    if len(signal) == 0 or len(idler) == 0:
        return 0
    opens = signal.times + gate_delay
    first = np.searchsorted(idler.times, opens, side="left")
    last = np.searchsorted(idler.times, opens + det.t_window, side="left")
    inside = last - first
    if det.coincidence_mode == "free_running":
        return int(inside.sum())
    return int(np.count_nonzero(inside))


def _histogram(
    signal: EventStream,
    idler: EventStream,
    params: ExperimentParams,
    det: DetectionParams,
    arm: Arm,
    gate_delays: Sequence[float],
    seed: int,
) -> CoincidenceHistogram:
    counts = [gated_coincidences(signal, idler, det, d) for d in gate_delays]
    return CoincidenceHistogram(
        tau_bins=[float(d) for d in gate_delays],
        counts=counts,
        errors=[math.sqrt(c) for c in counts],
        rate_signal_measured=signal.rate,
        rate_idler_measured=idler.rate,
        integration_time=det.integration_time,
        t_window=det.t_window,
        t_coherence=det.t_coherence,
        arm=arm,
        t_mag=params.t_mag,
        seed=seed,
    )


def delay_scan(
    params: ExperimentParams,
    det: DetectionParams,
    arm: Arm = "s1",
    gate_delays: Optional[Sequence[float]] = None,
    trial: int = 0,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> CoincidenceHistogram:
    """Coincidence histogram of one trial over a list of gate delays."""
    gate_delays = (
        list(gate_delays) if gate_delays is not None else default_gate_delays(det.t_window)
    )
    signal, idler = generate_streams(
        params, det, arm, trial_rng(det.rng_seed, trial, arm, params), max_events
    )
    return _histogram(signal, idler, params, det, arm, gate_delays, det.rng_seed)


def run_trials(
    params: ExperimentParams,
    det: DetectionParams,
    arm: Arm = "s1",
    gate_delays: Optional[Sequence[float]] = None,
    trials: Optional[int] = None,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> List[CoincidenceHistogram]:
    """Independent delay scans, one per trial, returned in trial order."""
    count = trials if trials is not None else det.trials

    def one(trial: int) -> CoincidenceHistogram:
        return delay_scan(params, det, arm, gate_delays, trial, max_events)

    if workers <= 1:
        return [one(trial) for trial in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(count)))


def estimate_big_gamma(
    histogram: CoincidenceHistogram,
    det: DetectionParams,
    max_relative_error: float = DEFAULT_MAX_RELATIVE_ERROR,
) -> Tuple[float, float]:
    """Γ̂ = (T_R/T_c)(R̂/(R_m R_n T_R) − 1) from the peak rate and measured singles.

    Raises:
        InsufficientCounts: if the peak holds no counts or its relative Poisson
            error exceeds ``max_relative_error``.
    """
    counts = histogram.peak_counts()
    if counts == 0 or 1.0 / math.sqrt(counts) > max_relative_error:
        raise InsufficientCounts(
            f"{counts} peak coincidences are too few for a Γ estimate",
            {"counts": counts, "max_relative_error": max_relative_error},
        )
    rate_m, rate_n = histogram.rate_signal_measured, histogram.rate_idler_measured
    peak, peak_err = histogram.peak_rate()
    t_window, t_coherence = det.t_window, det.t_coherence
    accidental = rate_m * rate_n * t_window
    big_gamma = (t_window / t_coherence) * (peak / accidental - 1.0)
    return big_gamma, peak_err / (rate_m * rate_n * t_coherence)


def estimate_distinguishability(
    h13: CoincidenceHistogram,
    h23: CoincidenceHistogram,
    det: DetectionParams,
    gamma_mag: float = 1.0,
    max_relative_error: float = DEFAULT_MAX_RELATIVE_ERROR,
) -> Tuple[float, float]:
    """D̂ ± σ from the two arms, corrected for the idler mode overlap."""
    big13, sigma13 = estimate_big_gamma(h13, det, max_relative_error)
    big23, sigma23 = estimate_big_gamma(h23, det, max_relative_error)
    if big23 <= 0.0:
        raise InsufficientCounts(
            f"Γ23 estimate {big23:.3g} is not positive", {"gamma_23": big23}
        )
    d_squared = 1.0 - gamma_mag**2 * big13 / big23
    sigma = closed_form.dist_uncertainty(
        1.0 + big13, sigma13, 1.0 + big23, sigma23, gamma_mag
    )
    return math.sqrt(max(0.0, d_squared)), sigma


class Calibration(NamedTuple):
    """Source and detector settings reproducing a target R13 peak ratio."""

    params: ExperimentParams
    detection: DetectionParams
    pair_rate: float
    floor_blocked: float
    peak_open: float


def reference_calibration(
    ratio: float = 22.5,
    floor_blocked: float = 5.0,
    t_coherence: float = 580e-15,
    t_window: float = 2.5e-9,
    integration_time: float = 30.0,
    rng_seed: int = 0,
) -> Calibration:
    """One member of the family of (v2, η) settings matching a peak ratio.

    v2 follows from inverting the exact R13 ratio; equal efficiencies are then
    fixed by the accidental rate with the idler blocked,
    (P η)² T_R = ``floor_blocked``. No background is added, so the singles come
    out at √(floor_blocked / T_R) rather than at a separately chosen value.
    """
    v2 = closed_form.solve_v2_for_ratio(ratio, t_coherence, t_window, exact=True)
    rate = v2 / t_coherence
    eta = math.sqrt(floor_blocked / (rate * rate * t_window))
    if eta > 1.0:
        raise RangeError("floor_blocked", floor_blocked, "values needing efficiency <= 1")
    detection = DetectionParams(
        t_window=t_window,
        t_coherence=t_coherence,
        rate_signal=0.0,
        rate_idler=0.0,
        integration_time=integration_time,
        eta_signal=eta,
        eta_idler=eta,
        rng_seed=rng_seed,
    )
    params = ExperimentParams(v2=v2, t_mag=1.0)
    peak_open = rate * eta * eta + 2.0 * floor_blocked
    return Calibration(params, detection, rate, floor_blocked, peak_open)


HISTOGRAM_COLUMNS = ("gate_delay_s", "rate_hz", "rate_err_hz", "arm", "t_mag", "seed")


def histogram_rows(histogram: CoincidenceHistogram) -> List[Tuple[object, ...]]:
    """CSV rows of a delay scan, in gate-delay order."""
    return [
        (tau, rate, err, histogram.arm, histogram.t_mag, histogram.seed)
        for tau, rate, err in zip(
            histogram.tau_bins, histogram.rates.tolist(), histogram.rate_errors.tolist()
        )
    ]
