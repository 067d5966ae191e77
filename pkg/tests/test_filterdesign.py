"""Constrained least-squares designs vs. the nullspace oracle, plus metrics."""

import logging

import numpy as np
import pytest

from dfrcrx.convmat import assemble_block_system
from dfrcrx.errors import ConditioningError, DimensionError, InfeasibleError
from dfrcrx.filterdesign import (
    coherence_error,
    design_coherent_circular,
    design_coherent_linear,
    design_penalized_iterative_baseline,
    design_uncoherent_ls_baseline,
    evaluate_filterbank,
    filter_outputs,
    nullspace_gradient_norm,
    solve_coherent,
    solve_constrained_ls_oracle,
)
from dfrcrx.waveform import BasebandWaveform, ModulationParams, WaveformAlphabet

from conftest import random_unit_modulus


def toy_alphabet(rng, k, n_chips, spc=1):
    """Alphabet of random constant-modulus pulses on a dummy timing grid."""
    p = ModulationParams(n_chips=n_chips, chip_duration=1e-3,
                         sample_rate=1000.0 * spc)
    length = n_chips * spc
    return WaveformAlphabet([
        BasebandWaveform(np.exp(1j * rng.uniform(0, 2 * np.pi, length)), p, "dpsk")
        for _ in range(k)
    ])


class TestOracle:
    def test_unconstrained_reduces_to_plain_least_squares(self, rng):
        x = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
        e = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        h = solve_constrained_ls_oracle(x, np.zeros((0, 4)), e)
        expected, *_ = np.linalg.lstsq(x, e, rcond=None)
        np.testing.assert_allclose(h, expected, atol=1e-10)

    def test_solution_lies_in_constraint_nullspace(self, rng):
        vecs = random_unit_modulus(rng, 2, 3)
        sys_ = assemble_block_system(vecs, 4, flavor="linear")
        h = solve_constrained_ls_oracle(sys_.X, sys_.Xtil, sys_.e)
        assert np.linalg.norm(sys_.Xtil @ h) <= 1e-12 * max(np.linalg.norm(h), 1.0)

    def test_empty_nullspace_raises(self, rng):
        xtil = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        with pytest.raises(InfeasibleError):
            solve_constrained_ls_oracle(np.eye(3, dtype=complex), xtil,
                                        np.ones(3, dtype=complex))

    def test_matches_closed_form_small_instance(self, rng):
        vecs = random_unit_modulus(rng, 2, 3)
        sys_ = assemble_block_system(vecs, 4, flavor="linear")
        h_formula, _ = solve_coherent(sys_)
        h_oracle = solve_constrained_ls_oracle(sys_.X, sys_.Xtil, sys_.e)
        rel = np.linalg.norm(h_formula - h_oracle) / np.linalg.norm(h_oracle)
        assert rel <= 1e-10


class TestCoherentLinear:
    def test_identical_waveforms_give_unconstrained_filter(self, rng):
        # symmetry makes the coherency constraint inactive
        v = random_unit_modulus(rng, 1, 3)[0]
        p = ModulationParams(n_chips=3, chip_duration=1e-3, sample_rate=1000.0)
        alph = WaveformAlphabet([BasebandWaveform(v, p, "dpsk"),
                                 BasebandWaveform(v.copy(), p, "dpsk")])
        bank = design_coherent_linear(alph, L_f=4)
        single = assemble_block_system([v], 4, flavor="linear")
        h_u, *_ = np.linalg.lstsq(single.X, single.e, rcond=None)
        np.testing.assert_allclose(bank.filters[0], h_u, atol=1e-8)
        np.testing.assert_allclose(bank.filters[1], h_u, atol=1e-8)

    def test_matches_oracle_randomized(self, rng):
        worst = 0.0
        for _ in range(25):
            k = int(rng.integers(2, 5))
            length = int(rng.integers(2, 7))
            l_f = (k - 1) * (length - 1) + 1 + int(rng.integers(0, 4))
            vecs = random_unit_modulus(rng, k, length)
            sys_ = assemble_block_system(vecs, l_f, flavor="linear")
            h_formula, _ = solve_coherent(sys_)
            h_oracle = solve_constrained_ls_oracle(sys_.X, sys_.Xtil, sys_.e)
            worst = max(worst, np.linalg.norm(h_formula - h_oracle)
                        / np.linalg.norm(h_oracle))
        assert worst <= 1e-8

    def test_paper_setup_fully_coherent(self, paper_alphabet, paper_banks):
        report = evaluate_filterbank(paper_banks["coherent-linear"],
                                     paper_alphabet, compute_condition=False)
        assert report.coherence_error <= 1e-6

    def test_infeasible_length_raises_dimension_error(self, paper_alphabet):
        with pytest.raises(DimensionError):
            design_coherent_linear(paper_alphabet, L_f=266)

    def test_at_bound_succeeds_with_warning(self, paper_alphabet, caplog):
        with caplog.at_level(logging.WARNING, logger="dfrcrx.filterdesign"):
            bank = design_coherent_linear(paper_alphabet, L_f=267)
        assert any("feasibility bound" in rec.message for rec in caplog.records)
        assert bank.filters.shape == (4, 267)

    def test_scaling_linearity(self, rng):
        # scaling the desired response scales the filters exactly
        vecs = random_unit_modulus(rng, 2, 4)
        sys_ = assemble_block_system(vecs, 5, flavor="linear")
        h1, _ = solve_coherent(sys_)
        sys_.e *= 2.5
        h2, _ = solve_coherent(sys_)
        np.testing.assert_allclose(h2, 2.5 * h1, rtol=1e-12)


class TestCoherentCircular:
    def test_single_waveform_exact_impulse(self, rng):
        # square nonsingular system: output is exactly the desired impulse
        alph = toy_alphabet(rng, 1, 4)
        bank = design_coherent_circular(alph, L_f=5, peak_index=3)
        out = filter_outputs(bank, alph)[0]
        expected = np.zeros(8, dtype=complex)
        expected[3] = 1.0
        np.testing.assert_allclose(out, expected, atol=1e-9)

    def test_matches_oracle_randomized(self, rng):
        worst = 0.0
        for _ in range(25):
            k = int(rng.integers(2, 4))
            length = int(rng.integers(2, 6))
            l_f = int(rng.integers(1, 6))
            vecs = random_unit_modulus(rng, k, length)
            sys_ = assemble_block_system(vecs, l_f, flavor="circular")
            h_formula, _ = solve_coherent(sys_)
            h_oracle = solve_constrained_ls_oracle(sys_.X, sys_.Xtil, sys_.e)
            worst = max(worst, np.linalg.norm(h_formula - h_oracle)
                        / np.linalg.norm(h_oracle))
        assert worst <= 1e-8

    def test_paper_setup_outputs_identical(self, paper_alphabet, paper_banks):
        outs = filter_outputs(paper_banks["coherent-circular"], paper_alphabet)
        ref = outs[0]
        for y in outs[1:]:
            assert (np.linalg.norm(y - ref) / np.linalg.norm(ref)) <= 1e-6

    def test_singular_spectrum_names_waveform_and_bin(self):
        # odd chip counts null the Nyquist frequency of a 3-samples/chip
        # DPSK pulse; an even padded length makes that an exact DFT bin
        from dfrcrx.waveform import generate_chip_sequence, synth_dpsk
        p = ModulationParams(n_chips=5, chip_duration=1e-3, sample_rate=3000.0)
        wf = synth_dpsk(generate_chip_sequence(5, seed=0), p)
        wf2 = synth_dpsk(generate_chip_sequence(5, seed=1), p)
        alph = WaveformAlphabet([wf, wf2])
        with pytest.raises(ConditioningError, match=r"waveform 0.*bin 9"):
            design_coherent_circular(alph, L_f=4)

    def test_lower_psl_than_linear_on_paper_setup(self, paper_alphabet,
                                                  paper_banks):
        rep_c = evaluate_filterbank(paper_banks["coherent-circular"],
                                    paper_alphabet, compute_condition=False)
        rep_l = evaluate_filterbank(paper_banks["coherent-linear"],
                                    paper_alphabet, compute_condition=False)
        assert max(rep_c.psl_db) < max(rep_l.psl_db)


class TestBaselines:
    def test_single_waveform_baseline_equals_coherent(self, rng):
        alph = toy_alphabet(rng, 1, 4)
        base = design_uncoherent_ls_baseline(alph, L_f=6)
        coh = design_coherent_linear(alph, L_f=6)
        np.testing.assert_allclose(base.filters, coh.filters, atol=1e-10)

    def test_identical_waveforms_zero_coherence_error(self, rng):
        v = random_unit_modulus(rng, 1, 4)[0]
        p = ModulationParams(n_chips=4, chip_duration=1e-3, sample_rate=1000.0)
        alph = WaveformAlphabet([BasebandWaveform(v, p, "dpsk"),
                                 BasebandWaveform(v.copy(), p, "dpsk")])
        bank = design_uncoherent_ls_baseline(alph, L_f=6)
        outs = filter_outputs(bank, alph)
        assert coherence_error(outs) <= 1e-12

    def test_paper_setup_visibly_non_coherent(self, paper_alphabet, paper_banks):
        report = evaluate_filterbank(paper_banks["baseline-LS"], paper_alphabet,
                                     compute_condition=False)
        assert report.coherence_error > 1e-2

    def test_penalized_mu_zero_equals_ls(self, paper_alphabet):
        pen = design_penalized_iterative_baseline(paper_alphabet, L_f=100,
                                                  mu=0.0, iters=2)
        base = design_uncoherent_ls_baseline(paper_alphabet, L_f=100)
        np.testing.assert_allclose(pen.filters, base.filters, atol=1e-12)

    def test_penalized_objective_monotone(self, rng):
        alph = toy_alphabet(rng, 4, 6)
        bank = design_penalized_iterative_baseline(alph, L_f=20, mu=5.0,
                                                   iters=50)
        hist = bank.meta["objective_history"]
        assert len(hist) == 51
        diffs = np.diff(hist)
        assert np.all(diffs <= 1e-12)

    def test_penalized_large_mu_approaches_constrained(self, rng):
        alph = toy_alphabet(rng, 2, 4)
        pen = design_penalized_iterative_baseline(alph, L_f=5, mu=1e6,
                                                  iters=400)
        coh = design_coherent_linear(alph, L_f=5)
        err_pen = evaluate_filterbank(pen, alph, compute_condition=False)
        err_coh = evaluate_filterbank(coh, alph, compute_condition=False)
        assert abs(err_pen.coherence_error - err_coh.coherence_error) <= 1e-3

    def test_negative_mu_rejected(self, rng):
        with pytest.raises(ValueError):
            design_penalized_iterative_baseline(toy_alphabet(rng, 2, 4),
                                                L_f=5, mu=-1.0)


class TestKktAndInvariants:
    def test_constraint_feasibility_all_coherent_designs(self, paper_alphabet,
                                                         paper_banks):
        norm_e = 2.0  # ||e|| = sqrt(K) with unit impulses
        for name in ("coherent-linear", "coherent-circular"):
            rep = evaluate_filterbank(paper_banks[name], paper_alphabet,
                                      compute_condition=False)
            assert rep.constraint_residual <= 1e-8 * norm_e

    def test_stationarity_on_nullspace(self, rng):
        for flavor in ("linear", "circular"):
            vecs = random_unit_modulus(rng, 3, 4)
            sys_ = assemble_block_system(vecs, 7, flavor=flavor)
            h, _ = solve_coherent(sys_)
            grad_ref = np.linalg.norm(sys_.X.conj().T @ sys_.e)
            assert nullspace_gradient_norm(sys_, h) <= 1e-8 * grad_ref

    def test_coherence_error_reference_invariance_for_coherent(self,
                                                               paper_alphabet,
                                                               paper_banks):
        outs = filter_outputs(paper_banks["coherent-linear"], paper_alphabet)
        errs = [coherence_error(outs, reference=k) for k in range(4)]
        assert max(errs) - min(errs) <= 1e-12


class TestEvaluate:
    def test_perfect_impulse_hits_psl_floor(self, rng):
        alph = toy_alphabet(rng, 1, 4)
        bank = design_coherent_circular(alph, L_f=5)
        rep = evaluate_filterbank(bank, alph, compute_condition=False)
        assert rep.psl_db[0] == -300.0
        assert rep.isl_db[0] <= -250.0

    def test_condition_numbers_reported(self, rng):
        alph = toy_alphabet(rng, 2, 4)
        bank = design_coherent_linear(alph, L_f=6)
        rep = evaluate_filterbank(bank, alph, compute_condition=True)
        assert rep.condition_numbers["gram"] >= 1.0
        assert rep.condition_numbers["constraint_gram"] >= 1.0

    def test_report_serializes(self, rng):
        alph = toy_alphabet(rng, 2, 4)
        bank = design_uncoherent_ls_baseline(alph, L_f=6)
        rep = evaluate_filterbank(bank, alph, compute_condition=False)
        d = rep.to_dict()
        assert set(d) == {"coherence_error", "psl_db", "isl_db",
                          "objective_residual", "constraint_residual",
                          "condition_numbers"}
