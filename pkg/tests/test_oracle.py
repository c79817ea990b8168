import numpy as np
import pytest

from fehmm.expressions import MultiscaleCoefficient, parse
from fehmm.expressions import harmonic_mean_1d
from fehmm.oracle import (
    OracleConvergenceError,
    a0_oracle_periodic,
    oracle_corrector,
)

from conftest import A0_EXAMPLE_1, A0_EXAMPLE_2


class TestOracleValue:
    def test_constant(self, constant25):
        assert a0_oracle_periodic(constant25, n_y=8, n_s=4) == pytest.approx(2.5, abs=1e-12)

    def test_example2_matches_harmonic_mean(self, example2):
        # paper: A_0 = C_0 = 1/2; cross-check the two independent routes
        oracle = a0_oracle_periodic(example2, n_y=512)
        harmonic = harmonic_mean_1d(example2, 512)
        assert oracle == pytest.approx(A0_EXAMPLE_2, abs=1e-6)
        assert abs(oracle - harmonic) <= 1e-6

    def test_example1_paper_value(self, example1):
        value = a0_oracle_periodic(example1, n_y=256, n_s=256)
        assert value == pytest.approx(A0_EXAMPLE_1, abs=1e-3)

    def test_slow_arguments_enter(self):
        coeff = MultiscaleCoefficient(parse("2 + x + 0.5*cos(2*pi*y)"), 1.0, 4.0)
        low = a0_oracle_periodic(coeff, x=0.0, n_y=64)
        high = a0_oracle_periodic(coeff, x=1.0, n_y=64)
        assert high > low  # larger baseline shifts the effective value up

    def test_resolution_floor(self, example1):
        with pytest.raises(ValueError):
            a0_oracle_periodic(example1, n_y=2)
        with pytest.raises(ValueError):
            a0_oracle_periodic(example1, n_s=3)

    def test_non_convergence_raises(self, example1):
        with pytest.raises(OracleConvergenceError):
            a0_oracle_periodic(example1, n_y=16, n_s=16, period_tol=1e-300, max_periods=1)


class TestOracleCorrector:
    def test_constant_coefficient_zero_corrector(self, constant25):
        chi = oracle_corrector(constant25, n_y=16)
        ys = np.linspace(-0.5, 0.5, 33)
        assert np.abs(chi(ys)).max() <= 1e-12

    def test_known_stationary_corrector(self, example2):
        # for a = 1/(2 - cos(2 pi y)): chi'(y) = A0/a - 1 = -cos(2 pi y)/2,
        # so chi(y) = -sin(2 pi y)/(4 pi) up to a constant (zero mean)
        chi = oracle_corrector(example2, n_y=256)
        ys = np.linspace(-0.5, 0.5, 101)
        expected = -np.sin(2 * np.pi * ys) / (4 * np.pi)
        assert np.abs(chi(ys) - expected).max() <= 1e-6

    def test_periodic_wraparound(self, example2):
        chi = oracle_corrector(example2, n_y=64)
        ys = np.array([-0.4, 0.17, 0.49])
        assert np.allclose(chi(ys), chi(ys + 1.0), atol=1e-13)
        assert np.allclose(chi.derivative_at(ys), chi.derivative_at(ys - 2.0), atol=1e-11)

    def test_zero_mean(self, example2):
        chi = oracle_corrector(example2, n_y=128)
        ys = np.linspace(-0.5, 0.5, 20001)
        assert abs(np.trapz(chi(ys), ys)) <= 1e-8
