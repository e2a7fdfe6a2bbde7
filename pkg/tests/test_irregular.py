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

import numpy as np
import pytest
from mpmath import mp

from diagorbit.arith import parse_real
from diagorbit.errors import (
    DimensionMismatch,
    NotInSOrbit,
    ToleranceAmbiguous,
    UncertifiedInput,
)
from diagorbit.flows import TracelessDiag
from diagorbit.irregular import (
    RationalRelation,
    RecurrenceVerdict,
    VParams,
    dirichlet_pair,
    exact_disjointness,
    is_certified_irrational,
    m_membership,
    make_xv,
    make_zv,
    offray_grid,
    project_pi,
    rational_relation,
    relation_pair,
    shorty_witness,
)
from diagorbit.lattice import LatticeBasis, dual, frobenius_distance, shift_log_diag

TOLERANCE = mp.mpf(2) ** -100


def _random_v(count: int, seed: int = 13) -> list[VParams]:
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(count):
        size = int(rng.integers(1, 4))
        values = [Fraction(int(rng.integers(-50, 51)), int(rng.integers(1, 20))) for _ in range(size)]
        samples.append(VParams(tuple(values)))
    return samples


class TestVParams:
    def test_parse(self):
        v = VParams.parse(["sqrt2", "1/3"])
        assert v.dimension == 3
        assert v.beta == Fraction(1, 3)

    def test_beta_needs_dimension_three(self):
        with pytest.raises(DimensionMismatch):
            VParams((parse_real("sqrt2"),)).beta

    def test_empty(self):
        with pytest.raises(ValueError):
            VParams(())

    def test_lattices(self, irregular_v):
        x = make_xv(irregular_v)
        z = make_zv(irregular_v)
        with mp.workprec(x.precision):
            assert abs(x.column(0)[1] - mp.sqrt(2)) < TOLERANCE
            assert abs(z.column(1)[0] - mp.sqrt(2)) < TOLERANCE
        assert x.column(2) == [0, 0, 1]

    def test_dual_of_xv(self, irregular_v):
        assert frobenius_distance(dual(make_xv(irregular_v)), make_zv(-irregular_v)) < TOLERANCE

    @pytest.mark.parametrize("v", _random_v(20))
    def test_dual_of_random_xv(self, v):
        assert frobenius_distance(dual(make_xv(v)), make_zv(-v)) < mp.mpf(2) ** -128


class TestRationalRelation:
    def test_affine_relation(self, irregular_v):
        relation = rational_relation(irregular_v.alpha, irregular_v.beta)
        assert relation == RationalRelation(1, 1, 2)

    def test_reverse_relation(self, irregular_v):
        forward, reverse = relation_pair(irregular_v.alpha, irregular_v.beta)
        assert forward == RationalRelation(1, 1, 2)
        assert reverse == RationalRelation(2, -1, 1)

    def test_independent(self):
        assert rational_relation(parse_real("sqrt2"), parse_real("sqrt3")) is None

    def test_rational_beta(self):
        assert rational_relation(parse_real("sqrt2"), Fraction(2, 6)) == RationalRelation(0, 1, 3)
        assert rational_relation(parse_real("sqrt2"), Fraction(1, 7), q_max=5) is None

    def test_invalid_relation(self):
        with pytest.raises(ValueError):
            RationalRelation(2, 4, 2)
        with pytest.raises(ValueError):
            RationalRelation(1, 1, 0)

    def test_irrationality(self):
        assert not is_certified_irrational(Fraction(1, 2))
        assert is_certified_irrational(parse_real("sqrt2"))
        with mp.workprec(256):
            assert is_certified_irrational(+mp.pi)

    def test_exact_disjointness(self, irregular_v):
        assert exact_disjointness(irregular_v, family=1)
        assert exact_disjointness(irregular_v, family=2)
        with pytest.raises(UncertifiedInput):
            exact_disjointness(VParams.parse(["sqrt2", "1/3"]), family=1)


class TestDirichlet:
    def test_convergent_pair(self):
        pair = dirichlet_pair(parse_real("sqrt2"), 10)
        assert (pair.k, pair.m) == (5, -7)
        assert pair.value <= 1 / pair.window

    def test_small_window(self):
        with pytest.raises(ValueError):
            dirichlet_pair(parse_real("sqrt2"), Fraction(1, 2))

    def test_shorty_witness_at_origin(self, irregular_v):
        witness = shorty_witness(irregular_v, RationalRelation(1, 1, 2), 0, 0)
        assert witness.vector == (2, -2, -2)
        assert abs(witness.sup_norm - 2) < TOLERANCE
        assert witness.sup_norm <= witness.bound * (1 + TOLERANCE)

    def test_shorty_witness_off_ray(self, irregular_v):
        witness = shorty_witness(irregular_v, RationalRelation(1, 1, 2), 2, 1)
        assert witness.vector == (24, -34, -29)
        assert witness.sup_norm <= witness.bound

    def test_negative_time(self, irregular_v):
        with pytest.raises(ValueError):
            shorty_witness(irregular_v, RationalRelation(1, 1, 2), -1, 0)

    def test_offray_grid(self, irregular_v):
        samples = offray_grid(irregular_v, RationalRelation(1, 1, 2), [(0, 0), (2, 1), (1, 3)])
        assert len(samples) == 3
        assert all(sample.holds for sample in samples)


class TestMembership:
    def test_half_integral_lattice(self):
        x = LatticeBasis.from_rows([[1, 0, 0], [0, 1, 0], [Fraction(1, 2), 0, 1]])
        verdict = m_membership(x, 2, family=1)
        assert verdict.member
        assert verdict.residual < 1e-30
        assert 1 in verdict.residues

    def test_standard_lattice(self, z3):
        assert not m_membership(z3, 2, family=1).member

    def test_irregular_lattice(self, irregular_v):
        assert not m_membership(make_xv(irregular_v), 2, family=1).member

    def test_flowed_lattice_within_drift(self, irregular_v):
        t = 12
        y = shift_log_diag(make_xv(irregular_v), TracelessDiag((-1, 1, 0)).scale(t).entries)
        envelope = 200 * mp.exp(-t)
        verdict = m_membership(y, 2, family=1, tol=float(envelope))
        assert verdict.member
        assert 0 < verdict.residual <= envelope
        assert 1 in verdict.residues

    def test_relation_free_lattice_is_not_member(self):
        t = 18
        v = VParams.parse(["sqrt2", "sqrt3"])
        y = shift_log_diag(make_xv(v), TracelessDiag((-1, 1, 0)).scale(t).entries)
        verdict = m_membership(y, 2, family=1, tol=float(200 * mp.exp(-t)))
        assert not verdict.member
        assert verdict.residues is None

    def test_informative_threshold(self):
        verdict = m_membership(
            LatticeBasis.from_rows([[1, 0, 0], [0, 1, 0], [Fraction(1, 2), 0, 1]]), 2, family=1
        )
        early = RecurrenceVerdict(mp.mpf(1), mp.mpf(1), mp.mpf("0.5"), mp.mpf("0.5"), verdict)
        late = RecurrenceVerdict(mp.mpf(15), mp.mpf(1), mp.mpf("1e-5"), mp.mpf("1e-5"), verdict)
        assert not early.informative
        assert late.informative

    def test_ambiguous_residual(self):
        offset = Fraction(1, 2) + Fraction(2, 10**8)
        x = LatticeBasis.from_rows([[1, 0, 0], [0, 1, 0], [offset, 0, 1]])
        with pytest.raises(ToleranceAmbiguous):
            m_membership(x, 2, family=1, tol=1e-8)

    def test_invalid_arguments(self, z3):
        with pytest.raises(ValueError):
            m_membership(z3, 2, family=3)
        with pytest.raises(ValueError):
            m_membership(z3, 0)
        with pytest.raises(DimensionMismatch):
            m_membership(LatticeBasis.standard(2), 2)


class TestProjection:
    def test_projects_xv(self, irregular_v):
        plane = project_pi(make_xv(irregular_v))
        assert plane.dimension == 2
        assert abs(abs(plane.determinant()) - 1) < TOLERANCE

    def test_not_in_orbit(self, irregular_v):
        with pytest.raises(NotInSOrbit):
            project_pi(make_zv(irregular_v))
