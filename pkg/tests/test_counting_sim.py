"""
Tests for the event-level coincidence Monte Carlo.
"""

import math

import numpy as np
import pytest

from induced_coherence import closed_form, counting_sim
from induced_coherence.counting_sim import (
    BACKGROUND,
    FROM_FIRST,
    FROM_SECOND,
    CoincidenceHistogram,
    EventStream,
    default_gate_delays,
    delay_scan,
    estimate_big_gamma,
    estimate_distinguishability,
    gated_coincidences,
    generate_streams,
    reference_calibration,
    trial_rng,
)
from induced_coherence.errors import (
    InsufficientCounts,
    RangeError,
    RegimeError,
    ResourceError,
)
from induced_coherence.models import DetectionParams, ExperimentParams

T_WINDOW = 2.5e-9
T_COHERENCE = 580e-15


def _stream(times, tag=BACKGROUND, duration=1.0):
    times = np.asarray(times, dtype=float)
    return EventStream(times, np.full(times.size, tag, dtype=np.int8), duration)


def _histogram(counts, rate=2000.0, integration_time=1000.0, arm="s1"):
    delays = default_gate_delays(T_WINDOW)
    return CoincidenceHistogram(
        tau_bins=delays,
        counts=counts,
        errors=[math.sqrt(c) for c in counts],
        rate_signal_measured=rate,
        rate_idler_measured=rate,
        integration_time=integration_time,
        t_window=T_WINDOW,
        t_coherence=T_COHERENCE,
        arm=arm,
        t_mag=1.0,
        seed=0,
    )


def _peak_counts(peak, floor=10):
    """Counts with ``peak`` in the three gates that hold zero delay."""
    delays = np.asarray(default_gate_delays(T_WINDOW))
    in_peak = (delays > -T_WINDOW) & (delays < 0.0)
    return [peak if inside else floor for inside in in_peak]


class TestEventStream:
    """Test stream construction."""

    def test_from_parts_sorts_and_clips(self):
        """Parts are merged in time order; events outside [0, T] are dropped."""
        stream = EventStream.from_parts(
            [(np.array([0.5, -0.1]), FROM_FIRST), (np.array([0.2, 1.5]), BACKGROUND)], 1.0
        )
        assert stream.times.tolist() == [0.2, 0.5]
        assert stream.provenance.tolist() == [BACKGROUND, FROM_FIRST]
        assert stream.rate == 2.0
        assert stream.count(FROM_FIRST) == 1

    def test_unsorted_rejected(self):
        """Streams must be time ordered."""
        with pytest.raises(ValueError):
            _stream([0.3, 0.1])

    def test_out_of_range_rejected(self):
        """Events must lie inside the integration time."""
        with pytest.raises(ValueError):
            _stream([0.1, 2.0])


class TestGatedCoincidences:
    """Test the gate logic on hand-made streams."""

    def test_aligned_pair(self):
        """A pair inside the gate gives one coincidence."""
        det = DetectionParams()
        signal = _stream([1e-3])
        idler = _stream([1e-3 + 1e-12])
        assert gated_coincidences(signal, idler, det, -T_WINDOW / 2) == 1
        assert gated_coincidences(signal, idler, det, T_WINDOW) == 0

    def test_empty_idler(self):
        """No idler events, no coincidences."""
        assert gated_coincidences(_stream([1e-3]), _stream([]), DetectionParams(), 0.0) == 0

    def test_gate_fires_once(self):
        """Gated mode counts one per gate; free-running counts every idler."""
        signal = _stream([1e-3])
        idler = _stream([1e-3 + 1e-10, 1e-3 + 2e-10, 1e-3 + 3e-10])
        gated = DetectionParams()
        free = DetectionParams(coincidence_mode="free_running")
        assert gated_coincidences(signal, idler, gated, 0.0) == 1
        assert gated_coincidences(signal, idler, free, 0.0) == 3

    def test_gate_is_half_open(self):
        """An idler exactly at the gate's closing edge is outside."""
        signal = _stream([0.25])
        idler = _stream([0.25 + T_WINDOW])
        assert gated_coincidences(signal, idler, DetectionParams(), 0.0) == 0


class TestGenerateStreams:
    """Test the source and detector model."""

    def test_no_detection_no_events(self):
        """Zero efficiency and zero targets leave both detectors dark."""
        det = DetectionParams(eta_signal=0.0, eta_idler=0.0, rate_signal=0.0, rate_idler=0.0)
        signal, idler = generate_streams(ExperimentParams(v2=1e-6), det)
        assert len(signal) == 0 and len(idler) == 0

    def test_blocked_idler_provenance(self):
        """With t = 0 no NLC1 idler reaches the idler detector."""
        det = DetectionParams(integration_time=0.01)
        _, idler = generate_streams(ExperimentParams(v2=1e-6, t_mag=0.0), det, "s1")
        assert idler.count(FROM_FIRST) == 0
        assert idler.count(FROM_SECOND) > 0

    def test_s2_arm_provenance(self):
        """In the s2 arm every signal event comes from NLC2 or background."""
        det = DetectionParams(integration_time=0.01)
        signal, _ = generate_streams(ExperimentParams(v2=1e-6), det, "s2")
        assert signal.count(FROM_FIRST) == 0
        assert signal.count(FROM_SECOND) > 0

    def test_singles_match_targets(self):
        """Background tops the singles up to the target rates."""
        det = DetectionParams(integration_time=30.0, rng_seed=3)
        signal, idler = generate_streams(ExperimentParams(v2=1e-9), det)
        expected = det.rate_signal * det.integration_time
        assert abs(len(signal) - expected) < 5 * math.sqrt(expected)
        assert abs(len(idler) - expected) < 5 * math.sqrt(expected)
        assert signal.count(BACKGROUND) > 0

    def test_deterministic(self):
        """Same seed and trial, same histogram; another trial differs."""
        det = DetectionParams(integration_time=1.0, rng_seed=42)
        params = ExperimentParams(v2=1e-7)
        first = delay_scan(params, det, "s1", trial=0)
        again = delay_scan(params, det, "s1", trial=0)
        other = delay_scan(params, det, "s1", trial=1)
        assert first.counts == again.counts
        assert first.rate_signal_measured == again.rate_signal_measured
        assert other.rate_signal_measured != first.rate_signal_measured

    def test_trial_rng_independent(self):
        """Trial generators do not repeat each other."""
        a = trial_rng(5, 0).random(4)
        b = trial_rng(5, 1).random(4)
        assert not np.allclose(a, b)

    def test_arms_draw_independently(self):
        """The s1 and s2 measurements do not replay the same events."""
        calibration = reference_calibration(integration_time=0.05)
        s1, _ = generate_streams(calibration.params, calibration.detection, "s1")
        s2, _ = generate_streams(calibration.params, calibration.detection, "s2")
        assert len(s1) > 0 and len(s2) > 0
        assert len(s1) != len(s2) or not np.array_equal(s1.times, s2.times)

    def test_parameter_points_draw_independently(self):
        """Two loss settings of the same arm use fresh draws."""
        det = DetectionParams(integration_time=0.01, rng_seed=4)
        blocked, _ = generate_streams(ExperimentParams(v2=1e-6, t_mag=0.0), det, "s2")
        open_, _ = generate_streams(ExperimentParams(v2=1e-6, t_mag=1.0), det, "s2")
        assert blocked.count(FROM_SECOND) != open_.count(FROM_SECOND) or not np.array_equal(
            blocked.times, open_.times
        )
        again, _ = generate_streams(ExperimentParams(v2=1e-6, t_mag=1.0), det, "s2")
        assert np.array_equal(again.times, open_.times)

    def test_arm_estimates_uncorrelated(self):
        """Γ̂13 and Γ̂23 of the same trials are statistically independent."""
        calibration = reference_calibration(integration_time=0.5)
        det = calibration.detection
        delays = [-3 * T_WINDOW, -0.5 * T_WINDOW]
        h13 = counting_sim.run_trials(calibration.params, det, "s1", delays, trials=60)
        h23 = counting_sim.run_trials(calibration.params, det, "s2", delays, trials=60)
        big13 = [estimate_big_gamma(h, det)[0] for h in h13]
        big23 = [estimate_big_gamma(h, det)[0] for h in h23]
        assert abs(np.corrcoef(big13, big23)[0, 1]) < 0.45

    def test_regime_error(self):
        """High gain is outside the single-pair model."""
        with pytest.raises(RegimeError):
            generate_streams(ExperimentParams(v2=0.02), DetectionParams())

    def test_resource_error(self):
        """The expected event count is capped."""
        with pytest.raises(ResourceError):
            generate_streams(ExperimentParams(v2=1e-9), DetectionParams(), max_events=10)

    def test_bad_arm(self):
        """Only s1 and s2 exist."""
        with pytest.raises(RangeError):
            generate_streams(ExperimentParams(v2=1e-9), DetectionParams(), arm="s3")

    def test_overfull_source_warns(self, caplog):
        """Pairs above the target singles log a warning and add no background."""
        det = DetectionParams(integration_time=1e-3)
        with caplog.at_level("WARNING", logger="induced_coherence.counting_sim"):
            signal, _ = generate_streams(ExperimentParams(v2=1e-6), det)
        assert signal.count(BACKGROUND) == 0
        assert any("exceeds the target" in r.getMessage() for r in caplog.records)


class TestHistogram:
    """Test histogram bookkeeping."""

    def test_default_delays(self):
        """Quarter-window steps from −4 T_R to just below 3 T_R."""
        delays = default_gate_delays(T_WINDOW)
        assert len(delays) == 28
        assert delays[0] == pytest.approx(-4 * T_WINDOW)
        assert delays[1] - delays[0] == pytest.approx(T_WINDOW / 4)

    def test_errors_must_be_poisson(self):
        """Errors other than √counts are rejected."""
        with pytest.raises(ValueError):
            CoincidenceHistogram(
                tau_bins=[0.0],
                counts=[4],
                errors=[3.0],
                rate_signal_measured=1.0,
                rate_idler_measured=1.0,
                integration_time=1.0,
                t_window=T_WINDOW,
                t_coherence=T_COHERENCE,
                arm="s1",
                t_mag=1.0,
                seed=0,
            )

    def test_peak_and_floor(self):
        """Peak and floor rates average their own gates."""
        histogram = _histogram(_peak_counts(50, floor=10))
        peak, peak_err = histogram.peak_rate()
        floor, _ = histogram.floor_rate()
        assert peak == pytest.approx(50 / 1000.0)
        assert peak_err == pytest.approx(math.sqrt(150) / 3000.0)
        assert floor == pytest.approx(10 / 1000.0)
        assert histogram.peak_counts() == 150
        excess, _ = histogram.peak_excess()
        assert excess == pytest.approx(0.04)

    def test_merge(self):
        """Merging sums counts and time and time-weights the singles."""
        one = _histogram(_peak_counts(5, 1), rate=1000.0, integration_time=10.0)
        two = _histogram(_peak_counts(7, 2), rate=4000.0, integration_time=30.0)
        merged = CoincidenceHistogram.merge([one, two])
        assert merged.counts == [a + b for a, b in zip(one.counts, two.counts)]
        assert merged.integration_time == 40.0
        assert merged.rate_signal_measured == pytest.approx(3250.0)

    def test_merge_rejects_mixed_arms(self):
        """Only scans of the same arm pool."""
        with pytest.raises(ValueError):
            CoincidenceHistogram.merge([_histogram([0] * 28), _histogram([0] * 28, arm="s2")])

    def test_rows(self):
        """One CSV row per gate delay, in delay order."""
        histogram = _histogram(_peak_counts(50))
        rows = counting_sim.histogram_rows(histogram)
        assert len(rows) == 28
        assert len(rows[0]) == len(counting_sim.HISTOGRAM_COLUMNS)
        assert [row[0] for row in rows] == histogram.tau_bins
        assert rows[0][3:] == ("s1", 1.0, 0)


class TestEstimators:
    """Test the Γ and D estimators on synthetic histograms."""

    def test_big_gamma(self):
        """Γ̂ = (T_R/T_c)(R/(R_m R_n T_R) − 1)."""
        histogram = _histogram(_peak_counts(50))
        big_gamma, sigma = estimate_big_gamma(histogram, DetectionParams())
        # accidentals: 2000 Hz × 2000 Hz × 2.5 ns = 0.01 Hz, peak 0.05 Hz
        assert big_gamma == pytest.approx((T_WINDOW / T_COHERENCE) * 4.0)
        assert sigma == pytest.approx((math.sqrt(150) / 3000.0) / (2000.0**2 * T_COHERENCE))

    def test_empty_peak(self):
        """No peak counts, no estimate."""
        with pytest.raises(InsufficientCounts):
            estimate_big_gamma(_histogram([0] * 28), DetectionParams())

    def test_too_few_counts(self):
        """A relative error above the limit is refused."""
        histogram = _histogram(_peak_counts(1, floor=0))
        with pytest.raises(InsufficientCounts):
            estimate_big_gamma(histogram, DetectionParams(), max_relative_error=0.1)

    def test_distinguishability(self):
        """Equal Γ values and γ = 1 give D = 0; Γ13 = 0 gives D = 1."""
        det = DetectionParams()
        h23 = _histogram(_peak_counts(50), arm="s2")
        dist, sigma = estimate_distinguishability(_histogram(_peak_counts(50)), h23, det)
        assert dist == 0.0
        assert sigma > 0.0
        dist, _ = estimate_distinguishability(_histogram(_peak_counts(10)), h23, det)
        assert dist == pytest.approx(1.0)

    def test_overlap_correction(self):
        """|γ| < 1 raises D at fixed Γ ratio."""
        det = DetectionParams()
        h13 = _histogram(_peak_counts(50))
        h23 = _histogram(_peak_counts(50), arm="s2")
        dist, _ = estimate_distinguishability(h13, h23, det, gamma_mag=0.855)
        assert dist == pytest.approx(closed_form.dist_trace(1.0, 0.855))

    def test_negative_gamma_23(self):
        """A non-positive Γ23 cannot normalize D."""
        det = DetectionParams()
        h13 = _histogram(_peak_counts(50))
        h23 = _histogram(_peak_counts(9), arm="s2")
        with pytest.raises(InsufficientCounts):
            estimate_distinguishability(h13, h23, det)


class TestCalibration:
    """Test the calibrated source."""

    def test_values(self):
        """v2, pair rate, efficiency and expected peak of the calibrated source."""
        calibration = reference_calibration()
        assert calibration.params.v2 == pytest.approx(1.1317e-5, rel=1e-3)
        assert calibration.pair_rate == pytest.approx(1.951e7, rel=1e-3)
        assert calibration.detection.eta_signal == pytest.approx(2.292e-3, rel=1e-3)
        assert calibration.detection.rate_signal == 0.0
        assert calibration.peak_open == pytest.approx(112.5, rel=1e-2)
        assert calibration.floor_blocked == 5.0

    def test_ratio_reproduced(self):
        """The calibrated v2 gives the target ratio exactly."""
        calibration = reference_calibration(ratio=30.0)
        det = calibration.detection
        assert closed_form.ratio_r13_exact(
            det.t_coherence, det.t_window, calibration.params.v2
        ) == pytest.approx(30.0, rel=1e-10)

    def test_unreachable_floor(self):
        """A floor needing efficiency above one is rejected."""
        with pytest.raises(RangeError):
            reference_calibration(floor_blocked=1e9)


@pytest.mark.slow
class TestStatistics:
    """Long runs comparing the simulator with the rate model."""

    def test_accidental_floor(self):
        """The floor matches R_m R_n T_R within 3σ."""
        det = DetectionParams(integration_time=30.0, rng_seed=1)
        delays = [-3 * T_WINDOW, -2 * T_WINDOW, T_WINDOW, 2 * T_WINDOW]
        scans = counting_sim.run_trials(ExperimentParams(v2=1e-9), det, "s1", delays, trials=40)
        pooled = CoincidenceHistogram.merge(scans)
        measured, sigma = pooled.floor_rate()
        predicted = pooled.rate_signal_measured * pooled.rate_idler_measured * T_WINDOW
        assert abs(measured - predicted) < 3 * sigma

    def test_blocked_floor_of_calibration(self):
        """With the idler blocked the calibrated floor is about 5 per second."""
        calibration = reference_calibration(integration_time=10.0)
        params = calibration.params.replace(t_mag=0.0)
        scan = delay_scan(params, calibration.detection, "s1", [-3 * T_WINDOW, T_WINDOW])
        floor, sigma = scan.floor_rate()
        assert abs(floor - 5.0) < 4 * sigma + 0.05 * 5.0

    def test_closed_loop(self):
        """D̂ recovers the trace distance within 3σ at both ends of the loss range."""
        calibration = reference_calibration()
        det = calibration.detection
        delays = [-3 * T_WINDOW, -2 * T_WINDOW, -0.5 * T_WINDOW, T_WINDOW, 2 * T_WINDOW]
        for t_mag in (0.2, 1.0):
            params = calibration.params.replace(t_mag=t_mag, gamma_mag=0.855)
            h13 = CoincidenceHistogram.merge(
                counting_sim.run_trials(params, det, "s1", delays, trials=3)
            )
            h23 = CoincidenceHistogram.merge(
                counting_sim.run_trials(params, det, "s2", delays, trials=3)
            )
            dist, sigma = estimate_distinguishability(h13, h23, det, 0.855)
            assert abs(dist - closed_form.dist_trace(t_mag, 0.855)) < 3 * sigma

    def test_error_scaling(self):
        """The Γ̂ error falls as 1/√T."""
        calibration = reference_calibration()
        delays = [-0.5 * T_WINDOW, T_WINDOW]
        errors = []
        for duration in (4.0, 16.0):
            det = calibration.detection.replace(integration_time=duration)
            scan = delay_scan(calibration.params, det, "s1", delays)
            errors.append(estimate_big_gamma(scan, det)[1])
        assert errors[0] / errors[1] == pytest.approx(2.0, rel=0.15)


if __name__ == "__main__":
    pytest.main([__file__])
