# Copyright 2025 Google LLC
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import itertools
import math
from fractions import Fraction

import pytest
from mpmath import mp

from diagorbit.arith import (
    AlgebraicNumber,
    approximate_integer_kernel,
    best_rational,
    cf_expand,
    convergent_pairs,
    discriminant,
    distance_to_integer,
    enclosure,
    evaluate_scalar,
    format_decimal,
    integer_kernel,
    nf_arith,
    parse_real,
    poly_roots,
    primitive_poly,
    split_top_level,
    to_fraction,
)
from diagorbit.errors import DivisionByZeroElement, NotSquarefree, RationalRootFound


class TestConversions:
    def test_to_fraction_is_exact(self):
        assert to_fraction(mp.mpf(0.5)) == Fraction(1, 2)
        assert to_fraction(0.1) == Fraction(0.1)
        assert to_fraction("3/4") == Fraction(3, 4)

    def test_to_fraction_rejects_infinity(self):
        with pytest.raises(ValueError, match="non-finite"):
            to_fraction(mp.inf)

    def test_evaluate_scalar(self):
        with mp.workprec(128):
            assert evaluate_scalar(Fraction(1, 3), 128) == mp.mpf(1) / 3

    def test_distance_to_integer(self):
        assert distance_to_integer(mp.mpf("2.75")) == mp.mpf("0.25")

    def test_primitive_poly(self):
        assert primitive_poly([-2, 0, 4]) == (1, 0, -2)
        assert primitive_poly([0, 3, 6]) == (1, 2)

    def test_format_decimal(self):
        assert format_decimal(Fraction(1, 3), 64, 5) == "0.33333"


class TestAlgebraicNumber:
    def test_parse_radicals(self):
        sqrt2 = parse_real("sqrt2")
        assert isinstance(sqrt2, AlgebraicNumber)
        assert sqrt2.minpoly == (1, 0, -2)
        assert abs(sqrt2.evaluate(128) - mp.sqrt(2)) < mp.mpf(2) ** -120

    def test_parse_expression(self):
        beta = parse_real("(1+sqrt2)/2")
        assert beta.minpoly == (4, -4, -1)
        assert parse_real("cbrt4").minpoly == (1, 0, 0, -4)

    def test_parse_rational(self):
        assert parse_real("3/4") == Fraction(3, 4)
        assert parse_real("sqrt4") == Fraction(2)

    def test_parse_root_index(self):
        root = parse_real("root(t^3-3*t-1, 0)")
        assert root.minpoly == (1, 0, -3, -1)
        value = root.evaluate(128)
        assert abs(value**3 - 3 * value - 1) < mp.mpf(2) ** -100

    def test_invalid_expression(self):
        with pytest.raises(ValueError):
            parse_real("x + 1")

    def test_enclosure_is_certified(self):
        sqrt2 = parse_real("sqrt2")
        lower, upper = enclosure(sqrt2, 200)
        assert lower * lower < 2 < upper * upper
        assert upper - lower < Fraction(1, 2**190)

    def test_negation(self):
        sqrt2 = parse_real("sqrt2")
        assert abs((-sqrt2).evaluate(128) + mp.sqrt(2)) < mp.mpf(2) ** -120

    def test_equality(self):
        assert parse_real("sqrt2") == parse_real("2/sqrt2")
        assert parse_real("sqrt2") != -parse_real("sqrt2")

    def test_split_top_level(self):
        assert split_top_level("root(t^3-3t-1, 0),sqrt2") == ["root(t^3-3t-1, 0)", "sqrt2"]


class TestPolyRoots:
    def test_cubic_signature(self):
        roots = poly_roots([1, 0, 0, -2], 128)
        assert roots.signature == (1, 1)
        assert abs(roots.roots[0] ** 3 - 2) < mp.mpf(2) ** -100
        assert mp.im(roots.roots[1]) > 0

    def test_totally_complex(self):
        assert poly_roots([1, 0, 0, 0, 1], 128).signature == (0, 2)

    def test_not_squarefree(self):
        with pytest.raises(NotSquarefree):
            poly_roots([1, 0, -2, 0, 1])

    def test_rational_root(self):
        with pytest.raises(RationalRootFound):
            poly_roots([1, 0, -1])

    def test_discriminant(self):
        assert discriminant([1, 0, 0, -2]) == -108


class TestNumberFieldArithmetic:
    MINPOLY = (1, 0, 0, -2)

    def test_multiplication_reduces(self):
        theta = (0, 1, 0)
        theta_sq = (0, 0, 1)
        assert nf_arith(self.MINPOLY, "mul", theta, theta_sq) == (2, 0, 0)

    def test_inverse(self):
        x = (Fraction(1), Fraction(1), Fraction(0))
        inverse = nf_arith(self.MINPOLY, "inv", x)
        assert nf_arith(self.MINPOLY, "mul", x, inverse) == (1, 0, 0)

    def test_inverse_of_zero(self):
        with pytest.raises(DivisionByZeroElement):
            nf_arith(self.MINPOLY, "inv", (0, 0, 0))

    def test_norm_and_trace(self):
        assert abs(nf_arith(self.MINPOLY, "norm", (0, 1, 0))) == 2
        assert nf_arith(self.MINPOLY, "trace", (0, 1, 0)) == 0
        assert nf_arith(self.MINPOLY, "trace", (1, 0, 0)) == 3

    def test_unknown_operation(self):
        with pytest.raises(ValueError, match="Unsupported"):
            nf_arith(self.MINPOLY, "sqrt", (1, 0, 0))


class TestContinuedFractions:
    def test_rational_terminates(self):
        expansion = cf_expand(Fraction(415, 93), 10)
        assert expansion.partial_quotients == (4, 2, 6, 7)
        assert expansion.terminated
        assert expansion.convergents[-1] == Fraction(415, 93)

    def test_sqrt2(self):
        expansion = cf_expand(parse_real("sqrt2"), 10)
        assert expansion.partial_quotients == (1,) + (2,) * 9
        assert not expansion.terminated

    def test_golden_ratio(self):
        expansion = cf_expand(parse_real("(1+sqrt5)/2"), 12)
        assert set(expansion.partial_quotients) == {1}

    def test_convergent_pairs(self):
        pairs = convergent_pairs(cf_expand(parse_real("sqrt2"), 4))
        assert pairs == [(1, 1), (3, 2), (7, 5), (17, 12)]

    def test_frozen_value_exhausts(self):
        with mp.workprec(64):
            value = +mp.sqrt(2)
        expansion = cf_expand(value, 200, 64)
        assert expansion.precision_exhausted
        assert len(expansion.partial_quotients) < 200

    def test_best_rational(self):
        with mp.workprec(128):
            pi = +mp.pi
        assert best_rational(pi, 1000, 128) == Fraction(355, 113)

    def test_invalid_terms(self):
        with pytest.raises(ValueError):
            cf_expand(Fraction(1, 2), 0)


class TestIntegerKernel:
    def test_exact_kernel(self):
        kernel = integer_kernel([[1, 1, -2]])
        assert len(kernel) == 2
        for vector in kernel:
            assert vector[0] + vector[1] - 2 * vector[2] == 0
        minors = [
            kernel[0][i] * kernel[1][j] - kernel[0][j] * kernel[1][i]
            for i, j in itertools.combinations(range(3), 2)
        ]
        assert math.gcd(*minors) == 1

    def test_full_rank(self):
        assert integer_kernel([[1, 0], [0, 1]]) == []

    def test_rational_entries(self):
        assert integer_kernel([[Fraction(1, 2), Fraction(-1, 3)]]) == [(2, 3)]

    def test_approximate_kernel(self):
        with mp.workprec(256):
            rational = mp.matrix([[1, 2]])
            irrational = mp.matrix([[1, mp.sqrt(2)]])
        kernel = approximate_integer_kernel(rational, 256)
        assert len(kernel) == 1
        assert tuple(abs(c) for c in kernel[0]) == (2, 1)
        assert approximate_integer_kernel(irrational, 256) == []
