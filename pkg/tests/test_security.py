"""Security ledger math: indistinguishability, attacker error, leakage."""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from noisekey.errors import ParameterError
from noisekey.params import SystemParams, params_for
from noisekey.security import (BayesGuesser, attacker_error_analytic,
                               attacker_error_empirical, indistinguishability,
                               leaked_bits, leakage_estimate,
                               level_likelihoods, mutual_information,
                               mutual_information_nr, noise_pmf, sigma_k,
                               wilson_interval)


class TestIndistinguishability:
    def test_identical_levels(self):
        assert indistinguishability(0, SystemParams()) == 1.0

    def test_published_arithmetic_point(self):
        # exp(-(<n>/4)(dk/M)^2) at <n>=400, M=100, dk=10 is exactly 1/e.
        stand_in = SimpleNamespace(mean_photons=400.0, M=100)
        value = indistinguishability(10, stand_in)
        assert value == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_both_printed_forms_agree(self):
        for M in (64, 256, 1024):
            for nbar in (10.0, 100.0, 1000.0):
                p = params_for(M, nbar)
                sk = sigma_k(p)
                for dk in (0, 1, 5, 37):
                    first = indistinguishability(dk, p)
                    second = math.exp(-dk ** 2 / (2.0 * sk ** 2))
                    assert abs(first - second) < 1e-12

    def test_monotone_in_delta_and_m(self):
        p1 = params_for(64, 100.0)
        p2 = params_for(256, 100.0)
        values = [indistinguishability(dk, p1) for dk in range(0, 50, 5)]
        assert all(a >= b for a, b in zip(values, values[1:]))
        for dk in (1, 10, 20):
            assert indistinguishability(dk, p2) > indistinguishability(dk, p1)

    def test_negative_delta_rejected(self):
        with pytest.raises(ParameterError):
            indistinguishability(-1, SystemParams())


class TestSigmaK:
    def test_unit_factor(self):
        stand_in = SimpleNamespace(mean_photons=2.0, M=256)
        assert sigma_k(stand_in) == pytest.approx(256.0)

    def test_direct_value(self):
        stand_in = SimpleNamespace(mean_photons=800.0, M=200)
        assert sigma_k(stand_in) == pytest.approx(10.0)

    def test_linear_in_m(self):
        a = sigma_k(SimpleNamespace(mean_photons=100.0, M=128))
        b = sigma_k(SimpleNamespace(mean_photons=100.0, M=256))
        assert b == pytest.approx(2 * a, rel=1e-12)


class TestAttackerAnalytic:
    def test_single_basis_leaks_everything(self):
        assert attacker_error_analytic(params_for(1, 100.0)) == 0.0

    def test_interleaved_constellation_saturates(self):
        # With bases covering the full cycle, each bit hypothesis
        # occupies every basis position once, so the symbol carries no
        # bit information at all.
        p = params_for(256, 100.0)
        p0, p1 = level_likelihoods(p)
        assert np.allclose(p0, p1, atol=1e-15)
        assert attacker_error_analytic(p) == pytest.approx(0.5, abs=1e-12)

    def test_approach_to_half_across_photon_numbers(self):
        values = [attacker_error_analytic(params_for(1024, nbar))
                  for nbar in (10.0, 100.0, 1000.0, 10_000.0)]
        # non-increasing in <n> (within summation round-off), converged
        # at one half
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))
        assert values[0] == pytest.approx(0.5, abs=1e-9)

    def test_monotone_in_m(self):
        values = [attacker_error_analytic(params_for(M, 100.0))
                  for M in (1, 2, 4, 64, 1024)]
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))

    def test_noise_pmf_normalizes_and_is_symmetric(self):
        pmf, B = noise_pmf(SystemParams())
        assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(pmf, pmf[::-1])
        assert B == round(SystemParams().noise_bound / SystemParams().level_step)


class TestAttackerEmpirical:
    def test_known_basis_reduces_to_legitimate_decode(self):
        p = params_for(256, 100.0)
        result = attacker_error_empirical(20_000, p, seed=4, known_basis=True)
        assert result.p_e == 0.0

    def test_random_guesser_baseline(self):
        rng = np.random.default_rng(9)
        truth = rng.integers(0, 2, 100_000)
        guesses = rng.integers(0, 2, 100_000)
        errors = int(np.count_nonzero(truth != guesses))
        low, high = wilson_interval(errors, truth.size)
        assert low <= 0.5 <= high

    def test_agrees_with_analytic(self):
        p = params_for(256, 100.0)
        result = attacker_error_empirical(10 ** 6, p, seed=2)
        assert result.contains(attacker_error_analytic(p))

    def test_guesser_rejects_alien_codes(self):
        guesser = BayesGuesser(params_for(8, 100.0))
        with pytest.raises(ParameterError):
            guesser.guess(np.array([10_000]))


class TestLeakedBits:
    def test_no_advantage_no_leak(self):
        assert leaked_bits(0.5, 10 ** 6) == 0

    def test_worked_number(self):
        assert leaked_bits(0.5 - 1e-4, 10 ** 6) == 100

    def test_full_leak_bound(self):
        assert leaked_bits(0.0, 10 ** 6) == 500_000

    def test_rounds_up(self):
        assert leaked_bits(0.4999997, 10 ** 6) == 1

    def test_out_of_range(self):
        with pytest.raises(ParameterError):
            leaked_bits(0.6, 100)
        with pytest.raises(ParameterError):
            leaked_bits(-0.1, 100)


class TestMutualInformation:
    def test_lambda_zero(self):
        assert mutual_information(0) == pytest.approx(1 / math.log(2),
                                                      rel=1e-15)

    def test_lambda_ten(self):
        assert mutual_information(10) == pytest.approx(1.4089e-3, rel=1e-4)

    def test_figure_scale_point(self):
        n = 9 * 10 ** 6
        value = mutual_information_nr(n, 100, n - 200)
        assert math.log10(value) == pytest.approx(-29.94, abs=0.01)

    def test_exact_halving(self):
        for lam in range(0, 300, 17):
            assert mutual_information(lam + 1) * 2.0 == mutual_information(lam)

    def test_negative_rejected(self):
        with pytest.raises(ParameterError):
            mutual_information(-1)
        with pytest.raises(ParameterError):
            mutual_information_nr(100, 60, 50)


class TestLedger:
    def test_leakage_estimate_consistency(self):
        p = params_for(256, 100.0, s=4096, lam=64)
        est = leakage_estimate(p)
        assert est.t == leaked_bits(est.p_e, p.s)
        assert est.i_lambda == mutual_information(p.lam)
        assert est.s == p.s
