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

"""Contains pytest fixtures that are accessible from all
files present in the same directory."""

from __future__ import annotations

import pytest

from diagorbit.arith import parse_real
from diagorbit.irregular import VParams
from diagorbit.lattice import LatticeBasis
from diagorbit.numberfield import KLattice, NumberField


@pytest.fixture(scope="session")
def cbrt2_field() -> NumberField:
    return NumberField([1, 0, 0, -2])


@pytest.fixture(scope="session")
def cbrt2_lattice(cbrt2_field: NumberField) -> KLattice:
    return KLattice.power_basis(cbrt2_field)


@pytest.fixture(scope="session")
def totally_real_field() -> NumberField:
    return NumberField([1, 0, -3, -1])


@pytest.fixture(scope="session")
def cyclotomic_field() -> NumberField:
    return NumberField([1, 0, 0, 0, 1])


@pytest.fixture
def z3() -> LatticeBasis:
    return LatticeBasis.standard(3)


@pytest.fixture(scope="session")
def irregular_v() -> VParams:
    return VParams((parse_real("sqrt2"), parse_real("(1+sqrt2)/2")))


@pytest.fixture(scope="session")
def cubic_v() -> VParams:
    return VParams((parse_real("cbrt2"), parse_real("cbrt4")))
