"""Filter application, range-Doppler maps, detection, Pd/SER machinery."""

import numpy as np
import pytest

from dfrcrx.filterdesign import design_coherent_circular, design_coherent_linear
from dfrcrx.processing import (
    DetectionParams,
    apply_filterbank,
    detect_targets,
    estimate_pd,
    nearest_doppler_bin,
    range_doppler_map,
    scene_truth,
    simulate_ser,
    snr_at_ser,
    wilson_interval,
)
from dfrcrx.radarsim import (
    DataMatrix,
    Scatterer,
    Scene,
    SceneConfig,
    TargetSpec,
    random_pulse_train,
    simulate_ncpi,
)
from dfrcrx.waveform import ModulationParams, make_alphabet


@pytest.fixture(scope="module")
def small_alphabet():
    p = ModulationParams(n_chips=10, chip_duration=1e-3, sample_rate=3000.0)
    return make_alphabet(4, p, seed=4)


@pytest.fixture(scope="module")
def small_banks(small_alphabet):
    from dfrcrx.filterdesign import design_uncoherent_ls_baseline
    return {
        "coherent-linear": design_coherent_linear(small_alphabet),
        "coherent-circular": design_coherent_circular(small_alphabet),
        "baseline-LS": design_uncoherent_ls_baseline(small_alphabet),
    }


def static_scene(n_gates=80, n_pulses=12, gates=(30, 55)):
    scatterers = [Scatterer(g, 0.0, 1.0 + 0j) for g in gates]
    return Scene(scatterers=scatterers, n_range_gates=n_gates, t_pri=0.04,
                 n_pulses=n_pulses, wavelength=0.03, cnr_db=-np.inf,
                 snr_db=0.0, noise_seed=None)


class TestApplyFilterbank:
    def test_coherent_columns_symbol_independent(self, small_alphabet,
                                                 small_banks):
        scene = static_scene()
        train = random_pulse_train(scene.n_pulses, 4, seed=0)
        data = simulate_ncpi(scene, small_alphabet, train)
        for name in ("coherent-linear", "coherent-circular"):
            filtered = apply_filterbank(data, small_banks[name], train)
            cols = filtered.entries
            ref = cols[:, 0]
            spread = max(np.linalg.norm(cols[:, m] - ref)
                         for m in range(cols.shape[1])) / np.linalg.norm(ref)
            assert spread <= 1e-6, name

    def test_baseline_columns_differ(self, small_alphabet, small_banks):
        scene = static_scene()
        train = random_pulse_train(scene.n_pulses, 4, seed=0)
        assert len(set(train.symbol_indices.tolist())) > 1
        data = simulate_ncpi(scene, small_alphabet, train)
        filtered = apply_filterbank(data, small_banks["baseline-LS"], train)
        cols = filtered.entries
        ref = cols[:, 0]
        spread = max(np.linalg.norm(cols[:, m] - ref)
                     for m in range(cols.shape[1])) / np.linalg.norm(ref)
        assert spread > 1e-2

    def test_impulse_column_places_filter_taps(self, small_banks):
        bank = small_banks["coherent-linear"]
        n_fast = 120
        entries = np.zeros((n_fast, 1), dtype=complex)
        r0 = 40
        entries[r0, 0] = 1.0
        train = random_pulse_train(1, 4, seed=0)
        k = train.symbol_indices[0]
        out = apply_filterbank(DataMatrix(entries=entries), bank, train)
        taps = bank.filters[k]
        peak = bank.peak_index
        expected = np.zeros(n_fast, dtype=complex)
        for i, tap in enumerate(taps):
            r = r0 + i - peak
            if 0 <= r < n_fast:
                expected[r] = tap
        np.testing.assert_allclose(out.entries[:, 0], expected, atol=1e-10)

    def test_scatterer_peaks_at_own_gate(self, small_alphabet, small_banks):
        scene = static_scene(gates=(30,))
        train = random_pulse_train(scene.n_pulses, 4, seed=3)
        data = simulate_ncpi(scene, small_alphabet, train)
        for name, bank in small_banks.items():
            filtered = apply_filterbank(data, bank, train)
            assert int(np.argmax(np.abs(filtered.entries[:, 0]))) == 30, name

    def test_circular_mode_requires_circular_bank(self, small_alphabet,
                                                  small_banks):
        scene = static_scene()
        train = random_pulse_train(scene.n_pulses, 4, seed=0)
        data = simulate_ncpi(scene, small_alphabet, train)
        with pytest.raises(ValueError):
            apply_filterbank(data, small_banks["coherent-linear"], train,
                             mode="circular")

    def test_circular_bank_linear_mode_exposed(self, small_alphabet,
                                               small_banks):
        scene = static_scene()
        train = random_pulse_train(scene.n_pulses, 4, seed=0)
        data = simulate_ncpi(scene, small_alphabet, train)
        filtered = apply_filterbank(data, small_banks["coherent-circular"],
                                    train, mode="linear")
        assert filtered.entries.shape == data.entries.shape

    def test_train_symbols_validated(self, small_alphabet, small_banks):
        scene = static_scene()
        train = random_pulse_train(scene.n_pulses, 9, seed=0)
        data = simulate_ncpi(scene, small_alphabet,
                             random_pulse_train(scene.n_pulses, 4, seed=0))
        with pytest.raises(ValueError):
            apply_filterbank(data, small_banks["coherent-linear"], train)


class TestRangeDopplerMap:
    def test_static_scatterer_concentrates_at_zero_doppler(self, small_alphabet,
                                                           small_banks):
        scene = static_scene(gates=(30,))
        train = random_pulse_train(scene.n_pulses, 4, seed=1)
        data = simulate_ncpi(scene, small_alphabet, train)
        filtered = apply_filterbank(data, small_banks["coherent-linear"], train)
        rdmap = range_doppler_map(filtered)
        row = rdmap.magnitudes[30]
        zero_bin = nearest_doppler_bin(rdmap.doppler_axis, 0.0)
        assert int(np.argmax(row)) == zero_bin

    def test_mover_lands_on_expected_bin(self, small_alphabet, small_banks):
        nu = 0.3
        scene = Scene(scatterers=[Scatterer(30, nu, 1.0 + 0j)],
                      n_range_gates=80, t_pri=0.04, n_pulses=50,
                      wavelength=0.03, cnr_db=-np.inf, snr_db=0.0)
        train = random_pulse_train(50, 4, seed=1)
        data = simulate_ncpi(scene, small_alphabet, train)
        filtered = apply_filterbank(data, small_banks["coherent-linear"], train)
        rdmap = range_doppler_map(filtered)
        bin_ = int(np.argmax(rdmap.magnitudes[30]))
        assert rdmap.doppler_axis[bin_] == pytest.approx(0.3)
        # nu * M = 15 bins into the positive half
        positive = np.where(rdmap.doppler_axis > 0)[0]
        assert bin_ == positive[14]

    def test_axis_spans_half_open_interval(self):
        for m in (50, 8, 7):
            entries = np.zeros((3, m), dtype=complex)
            rdmap = range_doppler_map(DataMatrix(entries=entries))
            axis = rdmap.doppler_axis
            assert axis.size == m
            assert axis.min() > -0.5 - 1e-12
            assert axis.max() <= 0.5 + 1e-12
            np.testing.assert_allclose(np.diff(axis), 1.0 / m, atol=1e-12)

    def test_parseval_per_row(self, small_alphabet, small_banks):
        scene = static_scene()
        train = random_pulse_train(scene.n_pulses, 4, seed=2)
        scene.noise_seed = 5
        data = simulate_ncpi(scene, small_alphabet, train)
        filtered = apply_filterbank(data, small_banks["coherent-linear"], train)
        rdmap = range_doppler_map(filtered)
        m = scene.n_pulses
        lhs = np.sum(rdmap.magnitudes ** 2, axis=1)
        rhs = m * np.sum(np.abs(filtered.entries) ** 2, axis=1)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9)

    def test_needs_two_pulses(self):
        with pytest.raises(ValueError):
            range_doppler_map(DataMatrix(entries=np.zeros((4, 1), dtype=complex)))


class TestDetection:
    def test_empty_scene_yields_no_detections(self):
        entries = np.zeros((40, 10), dtype=complex)
        rdmap = range_doppler_map(DataMatrix(entries=entries))
        det = detect_targets(rdmap, threshold_db=10.0)
        assert det.detections == []

    def test_localization_noise_free(self, small_alphabet, small_banks):
        nu = 0.3
        scene = Scene(scatterers=[Scatterer(30, nu, 1.0 + 0j)],
                      n_range_gates=80, t_pri=0.04, n_pulses=50,
                      wavelength=0.03, cnr_db=-np.inf, snr_db=0.0)
        train = random_pulse_train(50, 4, seed=1)
        data = simulate_ncpi(scene, small_alphabet, train)
        filtered = apply_filterbank(data, small_banks["coherent-circular"], train)
        rdmap = range_doppler_map(filtered)
        det = detect_targets(rdmap, threshold_db=10.0, truth=[(30, nu)])
        assert det.truth_matches == 1
        gate, bin_, _ = det.detections[0]
        assert gate == 30
        assert bin_ == nearest_doppler_bin(rdmap.doppler_axis, nu)

    def test_exclusion_band_suppresses_low_doppler(self, small_alphabet,
                                                   small_banks):
        scene = static_scene(gates=(30,))
        train = random_pulse_train(scene.n_pulses, 4, seed=1)
        data = simulate_ncpi(scene, small_alphabet, train)
        filtered = apply_filterbank(data, small_banks["coherent-linear"], train)
        det = detect_targets(range_doppler_map(filtered), exclusion=0.1,
                             threshold_db=6.0)
        assert all(abs(range_doppler_map(filtered).doppler_axis[b]) > 0.1
                   for _, b, _ in det.detections)

    def test_all_detections_exceed_threshold(self, small_alphabet, small_banks):
        scene = static_scene(gates=(30,))
        scene.scatterers.append(Scatterer(50, 0.25, 2.0 + 0j))
        train = random_pulse_train(scene.n_pulses, 4, seed=1)
        data = simulate_ncpi(scene, small_alphabet, train)
        det = detect_targets(
            range_doppler_map(
                apply_filterbank(data, small_banks["coherent-linear"], train)),
            threshold_db=8.0)
        assert det.detections
        assert all(mag > det.threshold for _, _, mag in det.detections)


class TestWilson:
    def test_interval_contains_estimate(self):
        for successes, n in [(0, 10), (10, 10), (3, 17), (250, 500)]:
            lo, hi = wilson_interval(successes, n)
            assert lo <= successes / n <= hi
            assert 0.0 <= lo <= hi <= 1.0

    def test_width_shrinks_like_sqrt_trials(self):
        lo1, hi1 = wilson_interval(300, 1000)
        lo2, hi2 = wilson_interval(600, 2000)
        ratio = (hi2 - lo2) / (hi1 - lo1)
        assert abs(ratio - 1.0 / np.sqrt(2.0)) <= 0.2 / np.sqrt(2.0)


class TestPd:
    def test_high_snr_pd_one_and_reproducible(self, small_alphabet, small_banks):
        template = SceneConfig(pulse_len=small_alphabet.pulse_len,
                               n_range_gates=80, n_pulses=16, cnr_db=-np.inf,
                               snr_db=0.0, targets=[TargetSpec(40, 0.3)])
        points = estimate_pd(small_banks["coherent-linear"], small_alphabet,
                             [40.0], trials=30, scene_template=template,
                             seed=77)
        assert points[0].y == 1.0
        again = estimate_pd(small_banks["coherent-linear"], small_alphabet,
                            [40.0], trials=30, scene_template=template,
                            seed=77)
        assert again[0].y == points[0].y

    def test_very_low_snr_pd_near_floor(self, small_alphabet, small_banks):
        template = SceneConfig(pulse_len=small_alphabet.pulse_len,
                               n_range_gates=80, n_pulses=16, cnr_db=-np.inf,
                               snr_db=0.0, targets=[TargetSpec(40, 0.3)])
        points = estimate_pd(small_banks["coherent-linear"], small_alphabet,
                             [-40.0], trials=30, scene_template=template,
                             seed=78)
        assert points[0].y <= 0.2

    def test_requires_single_target(self, small_alphabet, small_banks):
        template = SceneConfig(pulse_len=small_alphabet.pulse_len,
                               n_range_gates=80, n_pulses=16,
                               targets=[TargetSpec(30, 0.3),
                                        TargetSpec(40, 0.2)])
        with pytest.raises(ValueError):
            estimate_pd(small_banks["coherent-linear"], small_alphabet, [0.0],
                        trials=1, scene_template=template, seed=0)


class TestSer:
    def test_noiseless_ser_zero_at_reference_point(self, paper_alphabet,
                                                   paper_banks):
        # zero noiseless SER needs real discrimination margin between the
        # auto- and cross-responses, which the 30-chip alphabet provides
        for name, bank in paper_banks.items():
            points = simulate_ser(paper_alphabet, bank, [np.inf], trials=400,
                                  seed=9)
            assert points[0].y == 0.0, name

    def test_two_bits_per_symbol(self, small_alphabet):
        assert small_alphabet.bits_per_symbol == 2

    def test_reproducible_and_monotone_trend(self, small_alphabet, small_banks):
        bank = small_banks["baseline-LS"]
        a = simulate_ser(small_alphabet, bank, [0.0, 12.0], trials=2000, seed=3)
        b = simulate_ser(small_alphabet, bank, [0.0, 12.0], trials=2000, seed=3)
        assert [p.y for p in a] == [p.y for p in b]
        assert a[0].y > a[1].y

    def test_snr_at_ser_interpolation(self):
        from dfrcrx.processing import CurvePoint
        points = [CurvePoint(0.0, 1e-1, 100, (0, 1)),
                  CurvePoint(10.0, 1e-3, 100, (0, 1))]
        # log-linear: 1e-2 sits exactly halfway
        assert snr_at_ser(points, 1e-2) == pytest.approx(5.0)
        assert np.isnan(snr_at_ser(points, 1e-5))


class TestSceneTruth:
    def test_extracts_targets_only(self):
        scene = Scene(scatterers=[Scatterer(3, 0.1, 1.0 + 0j, kind="target"),
                                  Scatterer(5, 0.0, 1.0 + 0j, kind="clutter")],
                      n_range_gates=10, t_pri=0.04, n_pulses=4,
                      wavelength=0.03, cnr_db=0.0, snr_db=0.0)
        assert scene_truth(scene) == [(3, 0.1)]
