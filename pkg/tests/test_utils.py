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

import json
from fractions import Fraction

import pytest
from mpmath import mp

from diagorbit.irregular import OmegaResult, RationalRelation, VParams
from diagorbit.lattice import LatticeBasis, shift_log_diag
from diagorbit.utils import (
    PRECISION_ENV,
    FieldSpecSchema,
    Report,
    Settings,
    _dump_lattice,
    _dumps,
    _field_from_schema,
    _load_field_spec,
    _load_lattice,
    _load_settings,
    _omega_report,
)
from diagorbit.version import __version__


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv(PRECISION_ENV, raising=False)


class TestSettings:
    def test_defaults(self):
        settings = _load_settings()
        assert settings == Settings()
        assert settings.precision_bits == 256
        assert settings.workers == 1

    def test_file(self, tmp_path):
        path = tmp_path / "settings.yaml"
        path.write_text("precision_bits: 128\nseed: 3\n")
        settings = _load_settings(str(path))
        assert settings.precision_bits == 128
        assert settings.seed == 3

    def test_json_file(self, tmp_path):
        path = tmp_path / "settings.json"
        path.write_text(json.dumps({"workers": 4}))
        assert _load_settings(str(path)).workers == 4

    def test_precedence(self, tmp_path, monkeypatch):
        path = tmp_path / "settings.yaml"
        path.write_text("precision_bits: 128\nseed: 3\n")
        monkeypatch.setenv(PRECISION_ENV, "192")
        assert _load_settings(str(path)).precision_bits == 192
        settings = _load_settings(str(path), {"precision_bits": 320, "seed": None})
        assert settings.precision_bits == 320
        assert settings.seed == 3

    def test_invalid_value(self):
        with pytest.raises(ValueError, match="Invalid settings from defaults"):
            _load_settings(overrides={"precision_bits": 32})

    def test_invalid_env(self, monkeypatch):
        monkeypatch.setenv(PRECISION_ENV, "many")
        with pytest.raises(ValueError, match=PRECISION_ENV):
            _load_settings()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValueError, match="Failed to parse settings from"):
            _load_settings(str(tmp_path / "missing.yaml"))

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "settings.yaml"
        path.write_text("precision_bits: [128\n")
        with pytest.raises(ValueError, match="Failed to parse settings from"):
            _load_settings(str(path))

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "settings.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ValueError, match="expected a mapping"):
            _load_settings(str(path))


class TestLatticeFiles:
    def test_dump_and_load(self, tmp_path):
        x = shift_log_diag(LatticeBasis.from_rows([[1, 2], [0, 1]]), [Fraction(1, 2), Fraction(-1, 2)])
        path = tmp_path / "lattice.json"
        path.write_text(_dump_lattice(x).model_dump_json())
        y = _load_lattice(str(path))
        assert y.precision == x.precision
        with mp.workprec(x.precision):
            assert mp.mnorm(x.matrix - y.matrix, "F") < mp.mpf(10) ** -70

    def test_precision_override(self, tmp_path):
        path = tmp_path / "lattice.yaml"
        path.write_text("d: 2\nbasis_columns: [['1', '0'], ['0', '1']]\nprecision_bits: 128\n")
        assert _load_lattice(str(path), 512).precision == 512

    def test_wrong_shape(self, tmp_path):
        path = tmp_path / "lattice.yaml"
        path.write_text("d: 2\nbasis_columns: [['1', '0']]\nprecision_bits: 128\n")
        with pytest.raises(ValueError, match="expected 2 columns"):
            _load_lattice(str(path))

    def test_bad_entry(self, tmp_path):
        path = tmp_path / "lattice.yaml"
        path.write_text("d: 2\nbasis_columns: [['1', 'x'], ['0', '1']]\nprecision_bits: 128\n")
        with pytest.raises(ValueError, match="Invalid data from"):
            _load_lattice(str(path))

    def test_missing_field(self, tmp_path):
        path = tmp_path / "lattice.yaml"
        path.write_text("d: 2\n")
        with pytest.raises(ValueError, match="Invalid data from"):
            _load_lattice(str(path))


class TestFieldSpec:
    def test_power_basis(self, tmp_path):
        path = tmp_path / "field.yaml"
        path.write_text("minpoly: [1, 0, 0, -2]\n")
        field, kl = _load_field_spec(str(path))
        assert field.signature == (1, 1)
        assert kl.basis[1] == field.generator()

    def test_explicit_basis(self):
        spec = FieldSpecSchema(minpoly=[1, 0, -2], basis=[["1", "0"], ["1/2", "1/2"]])
        field, kl = _field_from_schema(spec)
        assert kl.basis[1].coords == (Fraction(1, 2), Fraction(1, 2))

    def test_invalid_basis(self):
        spec = FieldSpecSchema(minpoly=[1, 0, -2], basis=[["1", "0"], ["x", "1"]])
        with pytest.raises(ValueError, match="Invalid basis entry"):
            _field_from_schema(spec)


class TestReports:
    def test_dumps_is_stable(self):
        report = Report(subcommand="embed", inputs={"b": 1, "a": 2}, results={}, precision_bits=128)
        text = _dumps(report)
        assert text.endswith("}\n")
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text)["version"] == __version__

    def test_reverse_relation_for_second_family(self):
        v = VParams.parse(["sqrt2", "(1+sqrt2)/2"])
        result = OmegaResult(
            v, RationalRelation(1, 1, 2), RationalRelation(2, -1, 1), 2, 1, (), ()
        )
        report = _omega_report(result, 128)
        assert report.relation.p1 == 2
        assert report.relation.q == 1
        assert report.v == ["sqrt2", "(1+sqrt2)/2"]
