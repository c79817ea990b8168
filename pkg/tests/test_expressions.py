import math

import numpy as np
import pytest

from fehmm.expressions import (
    BoundsReport,
    EvaluationError,
    MultiscaleCoefficient,
    ParseError,
    UnknownIdentifierError,
    check_bounds,
    evaluate,
    harmonic_mean_1d,
    parse,
    pretty_print,
)


class TestParse:
    def test_example1_coefficient(self):
        e = parse("3 + cos(2*pi*y) + cos(2*pi*s)^2")
        assert e.variables() == {"s", "y"}

    def test_example2_coefficient(self):
        e = parse("1/(2 - cos(2*pi*y))")
        assert e.variables() == {"y"}

    def test_truncated_input_reports_offset(self):
        with pytest.raises(ParseError) as err:
            parse("3 + cos(")
        assert err.value.offset == 8

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifierError):
            parse("3 + z")
        with pytest.raises(UnknownIdentifierError):
            parse("tan(y)")

    def test_unbalanced_parens(self):
        with pytest.raises(ParseError):
            parse("(1 + 2")

    def test_trailing_garbage(self):
        with pytest.raises(ParseError):
            parse("1 + 2 )")

    @pytest.mark.parametrize(
        "source,expected",
        [
            ("2^3^2", 512.0),          # right-associative power
            ("-2^2", -4.0),            # power binds tighter than unary minus
            ("(-2)^2", 4.0),
            ("2^-2", 0.25),
            ("2*3 + 4/2^2", 7.0),
            ("1 - 2 - 3", -4.0),       # left-associative subtraction
            ("12/3/2", 2.0),
            ("1.5e2 + 1e-2", 150.01),
            ("pi", math.pi),
            ("abs(0 - 3)", 3.0),
            ("exp(0)", 1.0),
        ],
    )
    def test_arithmetic(self, source, expected):
        assert evaluate(parse(source)) == pytest.approx(expected, rel=1e-15)


class TestEvaluate:
    def test_example1_at_origin(self):
        assert evaluate(parse("3 + cos(2*pi*y) + cos(2*pi*s)^2")) == 5.0

    def test_example2_at_y0(self):
        assert evaluate(parse("1/(2 - cos(2*pi*y))"), y=0.0) == 1.0

    def test_product(self):
        assert evaluate(parse("x*y"), t=0.0, x=2.0, s=0.0, y=3.0) == 6.0

    def test_array_broadcast(self):
        e = parse("x*y + s")
        out = evaluate(e, x=np.array([1.0, 2.0]), y=3.0, s=np.array([0.5, 0.5]))
        assert np.array_equal(out, [3.5, 6.5])

    def test_division_by_zero(self):
        with pytest.raises(EvaluationError):
            evaluate(parse("1/x"), x=0.0)

    def test_non_finite_power(self):
        with pytest.raises(EvaluationError):
            evaluate(parse("(0 - 2)^0.5"))

    def test_pure(self):
        e = parse("sin(x) + cos(y)^2 / (1 + exp(t))")
        a = evaluate(e, t=0.3, x=0.7, s=0.1, y=0.9)
        b = evaluate(e, t=0.3, x=0.7, s=0.1, y=0.9)
        assert a == b  # bit identical


class TestRoundTrip:
    SOURCES = [
        "3 + cos(2*pi*y) + cos(2*pi*s)^2",
        "1/(2 - cos(2*pi*y))",
        "-x^2 + 4*t*s - y/2",
        "exp(-(x - 1)^2) * sin(pi*t)",
        "2^-s^2",
        "abs(y - 1/3) + 1e-3",
    ]

    @pytest.mark.parametrize("source", SOURCES)
    def test_pretty_print_reparses_identically(self, source):
        tree = parse(source)
        reparsed = parse(pretty_print(tree))
        rng = np.random.default_rng(7)
        for _ in range(100):
            t, x, s, y = rng.uniform(-2, 2, 4)
            a = evaluate(tree, t=t, x=x, s=s, y=y)
            b = evaluate(reparsed, t=t, x=x, s=s, y=y)
            assert a == pytest.approx(b, rel=1e-15, abs=0.0)


class TestMultiscaleCoefficient:
    def test_flags(self, example1, example2):
        assert not example1.depends_on_t and not example1.depends_on_x
        assert example1.depends_on_s and example1.depends_on_y
        assert not example2.depends_on_s and example2.depends_on_y

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            MultiscaleCoefficient(parse("1"), 2.0, 1.0)
        with pytest.raises(ValueError):
            MultiscaleCoefficient(parse("1"), 0.0, 1.0)


class TestCheckBounds:
    def test_example1_true_range(self, example1):
        # dense-sampling oracle: min over (s, y) of 3 + cos(2 pi y) + cos^2(2 pi s)
        # is 2 (at y = 1/2, cos^2 = 0), max is 5
        report = check_bounds(example1, 128)
        assert report.ok
        assert report.min_seen >= 2.0 and report.min_seen < 2.01
        assert report.max_seen <= 5.0 and report.max_seen > 4.99

    def test_example1_tight_declaration_fails(self):
        coeff = MultiscaleCoefficient(parse("3 + cos(2*pi*y) + cos(2*pi*s)^2"), 4.0, 5.0)
        report = check_bounds(coeff, 64)
        assert not report.ok
        assert report.min_seen < 4.0  # values below 4 near y = 1/2

    def test_constant(self):
        coeff = MultiscaleCoefficient(parse("2.5"), 2.5, 2.5)
        report = check_bounds(coeff, 16)
        assert report == BoundsReport(min_seen=2.5, max_seen=2.5, ok=True)

    def test_requires_two_samples(self, example1):
        with pytest.raises(ValueError):
            check_bounds(example1, 1)


class TestHarmonicMean:
    def test_example2_value(self, example2):
        # paper value: A_0 = C_0 = 1/2 for a(y) = 1/(2 - cos(2 pi y))
        assert harmonic_mean_1d(example2, 512) == pytest.approx(0.5, abs=1e-9)

    def test_constant(self, constant25):
        assert harmonic_mean_1d(constant25, 8) == pytest.approx(2.5, rel=1e-15)

    def test_shifted_cosine(self):
        # (integral of dy / (3 + cos 2 pi y))^-1 = sqrt(9 - 1) = 2 sqrt(2),
        # cross-checked against dense quadrature
        coeff = MultiscaleCoefficient(parse("3 + cos(2*pi*y)"), 2.0, 4.0)
        value = harmonic_mean_1d(coeff, 512)
        assert value == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-12)
        ys = np.linspace(-0.5, 0.5, 200001)
        dense = 1.0 / np.trapz(1.0 / (3.0 + np.cos(2 * np.pi * ys)), ys)
        assert value == pytest.approx(dense, abs=1e-8)

    def test_rejects_multiscale_expression(self, example1):
        with pytest.raises(ValueError):
            harmonic_mean_1d(example1, 64)

    def test_within_declared_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            c0 = float(rng.uniform(1.0, 4.0))
            amp = float(rng.uniform(0.0, 0.9) * (c0 - 0.5))
            coeff = MultiscaleCoefficient(
                parse(f"{c0!r} + {amp!r}*cos(2*pi*y)"), c0 - amp, c0 + amp
            )
            value = harmonic_mean_1d(coeff, 128)
            assert coeff.lambda_min <= value <= coeff.lambda_max

    def test_panel_halving_reduces_error(self):
        # non-periodic smooth integrand so the composite rule is in its
        # algebraic-convergence regime
        coeff = MultiscaleCoefficient(parse("2 + y + y^3"), 1.0, 3.0)
        errs = []
        for n in (4, 8):
            errs.append(abs(harmonic_mean_1d(coeff, n) - harmonic_mean_1d(coeff, 10 * n)))
        assert errs[0] / errs[1] >= 4.0
