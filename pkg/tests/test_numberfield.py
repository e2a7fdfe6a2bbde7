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

from fractions import Fraction

import pytest
from mpmath import mp

from diagorbit.errors import DependentBasis, PreconditionViolated, RationalRootFound, ShapeViolation
from diagorbit.numberfield import (
    CMVerdict,
    Compactness,
    KLattice,
    NumberField,
    discriminant_check,
    embedding_matrix,
    geometric_embedding,
    is_cm,
    lattice_from_basis,
    log_embedding,
    order_basis,
    order_elements_check,
    psi_matrix,
    real_unit_rank,
    stabilizer_matrices,
    theorem5_factor,
    torus_orbit_compactness,
    trace_form_discriminant,
    unit_search,
)

TOLERANCE = mp.mpf(2) ** -100


class TestNumberField:
    def test_signatures(self, cbrt2_field, totally_real_field, cyclotomic_field):
        assert cbrt2_field.signature == (1, 1)
        assert totally_real_field.signature == (3, 0)
        assert cyclotomic_field.signature == (0, 2)

    def test_reducible_polynomial(self):
        with pytest.raises(RationalRootFound):
            NumberField([1, 0, -1])

    def test_generator_arithmetic(self, cbrt2_field):
        theta = cbrt2_field.generator()
        assert theta**3 == cbrt2_field.element([2, 0, 0])
        assert theta * theta.inverse() == cbrt2_field.one()
        assert theta ** -1 == cbrt2_field.element([0, 0, Fraction(1, 2)])

    def test_norm_and_trace(self, cbrt2_field):
        theta = cbrt2_field.generator()
        assert theta.norm() == 2
        assert (theta - 1).norm() == 1
        assert cbrt2_field.one().trace() == 3

    def test_different_fields(self, cbrt2_field, totally_real_field):
        with pytest.raises(ValueError, match="different fields"):
            cbrt2_field.generator() + totally_real_field.generator()

    def test_str(self, cbrt2_field):
        assert str(cbrt2_field.element([1, 0, 2])) == "1 + 2*t^2"
        assert str(cbrt2_field.element([0, 0, 0])) == "0"


class TestKLattice:
    def test_dependent_basis(self, cbrt2_field):
        with pytest.raises(DependentBasis):
            KLattice.from_rows(cbrt2_field, [[1, 0, 0], [2, 0, 0], [0, 0, 1]])

    def test_coordinates(self, cbrt2_field):
        kl = KLattice.from_rows(cbrt2_field, [[1, 0, 0], [1, 1, 0], [0, 0, 1]])
        assert kl.coordinates(cbrt2_field.generator()) == (-1, 1, 0)

    def test_order_elements(self, cbrt2_field, cbrt2_lattice):
        assert order_elements_check(cbrt2_field, cbrt2_lattice, cbrt2_field.generator())
        half = cbrt2_field.element([Fraction(1, 2), 0, 0])
        assert not order_elements_check(cbrt2_field, cbrt2_lattice, half)

    def test_order_basis_of_maximal_order(self, cbrt2_field, cbrt2_lattice):
        assert order_basis(cbrt2_field, cbrt2_lattice) == cbrt2_lattice.basis


class TestEmbeddings:
    def test_geometric_embedding(self, cbrt2_field):
        values = geometric_embedding(cbrt2_field, cbrt2_field.generator())
        assert abs(values[0] - mp.cbrt(2)) < TOLERANCE
        assert abs(values[1] + mp.cbrt(2) / 2) < TOLERANCE
        assert values[2] > 0

    def test_trace_form_discriminant(self, cbrt2_lattice):
        assert trace_form_discriminant(cbrt2_lattice) == -108

    def test_discriminant_check(self, cbrt2_field, cbrt2_lattice, totally_real_field):
        assert discriminant_check(cbrt2_field, cbrt2_lattice)
        assert discriminant_check(totally_real_field, KLattice.power_basis(totally_real_field))

    def test_lattice_has_unit_covolume(self, cbrt2_field, cbrt2_lattice):
        x = lattice_from_basis(cbrt2_field, cbrt2_lattice)
        assert abs(abs(x.determinant()) - 1) < TOLERANCE

    def test_psi_is_multiplicative(self, cbrt2_field):
        a = cbrt2_field.element([1, 2, 0])
        b = cbrt2_field.element([0, -1, 3])
        with mp.workprec(256):
            product = psi_matrix(cbrt2_field, a) * psi_matrix(cbrt2_field, b)
            difference = product - psi_matrix(cbrt2_field, a * b)
            assert mp.mnorm(difference, "F") < TOLERANCE

    def test_psi_acts_on_embedding(self, cbrt2_field, cbrt2_lattice):
        x = cbrt2_field.element([1, 1, 0])
        phi = embedding_matrix(cbrt2_field, cbrt2_lattice)
        with mp.workprec(256):
            moved = psi_matrix(cbrt2_field, x) * phi
        for j, b in enumerate(cbrt2_lattice.basis):
            expected = geometric_embedding(cbrt2_field, x * b)
            assert max(abs(moved[i, j] - expected[i]) for i in range(3)) < TOLERANCE

    def test_log_embedding(self, cbrt2_field):
        logs = log_embedding(cbrt2_field.generator())
        assert abs(logs[0] - mp.log(2) / 3) < TOLERANCE
        assert abs(logs[0] - logs[1]) < TOLERANCE


class TestUnits:
    def test_cubic_unit_rank(self, cbrt2_field, cbrt2_lattice):
        units = unit_search(cbrt2_field, cbrt2_lattice, 10)
        assert units.rank == 1
        assert units.complete
        for u in units.generators:
            assert abs(u.norm()) == 1

    def test_totally_real_unit_rank(self, totally_real_field):
        units = unit_search(totally_real_field, KLattice.power_basis(totally_real_field), 5)
        assert units.rank == 2
        for u in units.generators:
            assert abs(u.norm()) == 1
            assert all(v > 0 for v in u.embeddings(64))

    def test_cyclotomic_unit_rank(self, cyclotomic_field):
        units = unit_search(cyclotomic_field, KLattice.power_basis(cyclotomic_field), 3)
        assert units.rank == 1

    def test_imaginary_quadratic_has_no_units(self):
        field = NumberField([1, 1, 1])
        units = unit_search(field, KLattice.power_basis(field), 3)
        assert units.rank == 0
        assert units.complete

    def test_rank_below_expected(self):
        field = NumberField([1, 0, -94])
        kl = KLattice.power_basis(field)
        with pytest.warns(UserWarning, match="increase the bound"):
            units = unit_search(field, kl, 2)
        assert units.rank == 0
        assert not units.complete
        with pytest.raises(PreconditionViolated, match="increase the bound"):
            unit_search(field, kl, 2, strict=True)

    def test_invalid_height(self, cbrt2_field, cbrt2_lattice):
        with pytest.raises(ValueError):
            unit_search(cbrt2_field, cbrt2_lattice, 0)

    def test_stabilizer_matrices(self, cbrt2_field, cbrt2_lattice):
        units = unit_search(cbrt2_field, cbrt2_lattice, 10)
        (matrix,) = stabilizer_matrices(cbrt2_field, cbrt2_lattice, units)
        assert all(isinstance(c, int) for row in matrix for c in row)

    def test_compactness(self, totally_real_field):
        kl = KLattice.power_basis(totally_real_field)
        units = unit_search(totally_real_field, kl, 5)
        assert torus_orbit_compactness(totally_real_field, kl, units) == Compactness.CERTIFIED_COMPACT

    def test_cm(self, cbrt2_field, cbrt2_lattice, cyclotomic_field):
        units = unit_search(cyclotomic_field, KLattice.power_basis(cyclotomic_field), 3)
        assert is_cm(cyclotomic_field, units) == CMVerdict.YES
        cubic_units = unit_search(cbrt2_field, cbrt2_lattice, 10)
        assert is_cm(cbrt2_field, cubic_units) == CMVerdict.NO

    def test_cm_with_unit_index_two(self):
        field = NumberField([1, 0, -1, 0, 1])
        units = unit_search(field, KLattice.power_basis(field), 3)
        assert units.rank == 1
        assert real_unit_rank(units, 120) == 1
        assert is_cm(field, units) == CMVerdict.YES

    def test_totally_complex_without_real_units(self):
        field = NumberField([1, 0, 0, 1, 1])
        units = unit_search(field, KLattice.power_basis(field), 2)
        assert tuple(field.signature) == (0, 2)
        assert units.rank == 1
        assert real_unit_rank(units, 120) == 0
        assert is_cm(field, units) == CMVerdict.NO


class TestFactorization:
    def test_cube_root_of_two(self, cbrt2_field, cbrt2_lattice):
        result = theorem5_factor(cbrt2_field, cbrt2_lattice)
        assert abs(abs(result.c) - 1 / mp.sqrt(3)) < TOLERANCE
        with mp.workprec(256):
            rebuilt = result.p * result.phi * result.c
            assert mp.mnorm(rebuilt - result.g_v, "F") < TOLERANCE
            assert abs(mp.det(result.p) - 1) < TOLERANCE

    def test_totally_complex(self, cyclotomic_field):
        with pytest.raises(PreconditionViolated):
            theorem5_factor(cyclotomic_field, KLattice.power_basis(cyclotomic_field))

    def test_first_basis_element(self, cbrt2_field):
        kl = KLattice.from_rows(cbrt2_field, [[0, 1, 0], [1, 0, 0], [0, 0, 1]])
        with pytest.raises(ShapeViolation):
            theorem5_factor(cbrt2_field, kl)
