import numpy as np
import pytest

from fehmm.expressions import MultiscaleCoefficient, parse

EPS = 1e-3
DELTA = EPS ** (1.0 / 3.0)
SIGMA = EPS ** (2.0 / 3.0)

A0_EXAMPLE_1 = 3.352429824667637
A0_EXAMPLE_2 = 0.5


@pytest.fixture(scope="session")
def example1():
    """Space-time oscillatory coefficient; true range [2, 5]."""
    return MultiscaleCoefficient(parse("3 + cos(2*pi*y) + cos(2*pi*s)^2"), 2.0, 5.0)


@pytest.fixture(scope="session")
def example2():
    """Purely spatial coefficient with harmonic mean exactly 1/2."""
    return MultiscaleCoefficient(parse("1/(2 - cos(2*pi*y))"), 1.0 / 3.0, 1.0)


@pytest.fixture(scope="session")
def constant25():
    return MultiscaleCoefficient(parse("2.5"), 2.5, 2.5)


def manufactured_rhs(a0):
    def rhs(t, x):
        return 2.0 * t * (x - x**2) + 2.0 * a0 * t * t

    return rhs


def zero_initial(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def exact_solution(t, x):
    return t * t * (x - x**2)


def exact_solution_dx(t, x):
    return t * t * (1.0 - 2.0 * x)
