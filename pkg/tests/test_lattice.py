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

import pickle

import numpy as np
import pytest
from mpmath import mp

from diagorbit.errors import DimensionTooLarge, EnumerationBudgetExceeded, SingularBasis
from diagorbit.lattice import (
    LatticeBasis,
    brute_force_minimum,
    dual,
    frobenius_distance,
    gram_determinant,
    hermite_bound,
    lattice_point,
    normalize_covolume,
    reduce,
    shift_log_diag,
    shortest_vector,
    sign_normalize,
    successive_minima,
)


def _random_integer_bases(count: int, seed: int = 7) -> list[list[list[int]]]:
    rng = np.random.default_rng(seed)
    bases = []
    while len(bases) < count:
        rows = rng.integers(-5, 6, size=(3, 3))
        if abs(round(np.linalg.det(rows))) >= 70:
            bases.append(rows.tolist())
    return bases


class TestLatticeBasis:
    def test_standard(self):
        x = LatticeBasis.standard(3)
        assert x.dimension == 3
        assert x.determinant() == 1
        assert x.column(1) == [0, 1, 0]

    def test_from_columns_transposes(self):
        x = LatticeBasis.from_columns([[1, 2], [3, 4]])
        assert x.column(0) == [1, 2]
        assert x.matrix[0, 1] == 3

    def test_dimension_one_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            LatticeBasis.from_rows([[1]])

    def test_matrix_is_a_copy(self):
        x = LatticeBasis.standard(2)
        matrix = x.matrix
        matrix[0, 0] = 5
        assert x.matrix[0, 0] == 1

    def test_point(self):
        x = LatticeBasis.from_rows([[1, 1], [0, 2]])
        assert x.point([1, 1]) == [2, 2]
        with pytest.raises(ValueError):
            x.point([1])

    def test_lattice_point(self):
        x = LatticeBasis.from_rows([[1, 1], [0, 2]]).with_transform([[1, 1], [0, 1]])
        assert lattice_point(x, [1, 0]) == [1, 0]
        assert lattice_point(x, [0, 1]) == [2, 2]

    def test_with_precision(self):
        x = LatticeBasis.from_rows([[1, 2], [0, 3]])
        y = x.with_precision(128)
        assert y.precision == 128
        assert y.column(1) == [2, 3]

    def test_with_transform(self):
        x = LatticeBasis.standard(2).with_transform([[1, 1], [0, 1]])
        assert x.column(1) == [1, 1]
        with pytest.raises(ValueError, match="unimodular"):
            LatticeBasis.standard(2).with_transform([[2, 0], [0, 1]])

    def test_pickle(self):
        x = shift_log_diag(LatticeBasis.from_rows([[1, 2], [0, 3]]), [1, -1])
        restored = pickle.loads(pickle.dumps(x))
        assert restored.precision == x.precision
        assert frobenius_distance(x, restored) == 0


class TestLatticeOperations:
    @pytest.mark.parametrize("rows", _random_integer_bases(20, seed=11))
    def test_dual_of_dual(self, rows):
        x = LatticeBasis.from_rows(rows)
        assert frobenius_distance(dual(dual(x)), x) < mp.mpf(2) ** -200

    def test_dual_pairing(self):
        x = LatticeBasis.from_rows([[2, 1], [0, 3]])
        y = dual(x)
        with mp.workprec(x.precision):
            product = x.matrix.T * y.matrix
        assert mp.mnorm(product - mp.eye(2), "F") < mp.mpf(2) ** -200

    def test_dual_of_singular(self):
        with pytest.raises(SingularBasis):
            dual(LatticeBasis.from_rows([[1, 2], [2, 4]]))

    def test_shift_log_diag(self):
        x = shift_log_diag(LatticeBasis.standard(2), [1, -1])
        with mp.workprec(x.precision):
            assert abs(x.matrix[0, 0] - mp.e) < mp.mpf(2) ** -200
            assert abs(x.matrix[1, 1] - 1 / mp.e) < mp.mpf(2) ** -200

    def test_normalize_covolume(self):
        x = normalize_covolume(LatticeBasis.from_rows([[2, 0], [0, 3]]))
        assert abs(abs(x.determinant()) - 1) < mp.mpf(2) ** -200

    def test_reduce_keeps_lattice(self):
        x = LatticeBasis.from_rows([[1, 100], [0, 1]])
        reduced, transform = reduce(x)
        assert abs(abs(reduced.determinant()) - 1) < mp.mpf(2) ** -200
        assert abs(int(np.round(np.linalg.det(np.array(transform, dtype=float))))) == 1
        with mp.workprec(x.precision):
            assert max(mp.norm(reduced.column(j)) for j in range(2)) < 2

    def test_gram_determinant(self):
        assert gram_determinant(LatticeBasis.from_rows([[2, 1], [0, 3]])) == 36

    def test_hermite_bound(self):
        assert abs(hermite_bound(2) - mp.root(mp.mpf(4) / 3, 4)) < mp.mpf(2) ** -100
        with pytest.raises(DimensionTooLarge):
            hermite_bound(7)

    def test_sign_normalize(self):
        assert sign_normalize([0, -1, 2]) == (0, 1, -2)
        assert sign_normalize([3, -1]) == (3, -1)


class TestShortestVector:
    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    def test_standard_lattice(self, d):
        report = shortest_vector(LatticeBasis.standard(d))
        assert report.systole == 1
        assert sum(abs(c) for c in report.witnesses[0]) == 1

    def test_tie_break_prefers_largest(self):
        report = shortest_vector(LatticeBasis.standard(3))
        assert report.witnesses[0] == (1, 0, 0)

    def test_witness_in_input_basis(self):
        x = LatticeBasis.from_rows([[1, 100], [0, 1]])
        report = shortest_vector(x)
        assert report.systole == 1
        with mp.workprec(x.precision):
            assert mp.norm(x.point(report.witnesses[0])) == 1

    def test_enclosure_contains_minimum(self):
        x = shift_log_diag(LatticeBasis.standard(3), [mp.mpf("0.3"), 0, mp.mpf("-0.3")])
        report = shortest_vector(x)
        lower, upper = report.enclosures[0]
        assert lower <= report.systole <= upper

    @pytest.mark.parametrize("rows", _random_integer_bases(50))
    def test_agrees_with_brute_force(self, rows):
        x = LatticeBasis.from_rows(rows)
        expected, _ = brute_force_minimum(x, box=20)
        assert abs(shortest_vector(x).systole - expected) < mp.mpf(2) ** -100

    def test_too_large(self):
        with pytest.raises(DimensionTooLarge):
            shortest_vector(LatticeBasis.standard(7))

    def test_budget(self):
        with pytest.raises(EnumerationBudgetExceeded):
            shortest_vector(LatticeBasis.standard(6), node_budget=3)


class TestSuccessiveMinima:
    def test_planar(self):
        report = successive_minima(LatticeBasis.from_rows([[1, 0], [0, 3]]))
        assert report.minima == (1, 3)

    def test_independent_witnesses(self):
        x = LatticeBasis.from_rows([[2, 0, 0], [0, 3, 0], [0, 0, 5]])
        report = successive_minima(x)
        assert report.minima == (2, 3, 5)
        assert np.linalg.matrix_rank(np.array(report.witnesses)) == 3
