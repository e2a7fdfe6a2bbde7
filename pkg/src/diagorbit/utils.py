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
import os
from fractions import Fraction
from typing import Any, Optional, Union

import yaml
from mpmath import mp
from pydantic import BaseModel, Field, ValidationError

from .arith import DEFAULT_PRECISION, format_decimal
from .irregular import OmegaResult
from .lattice import LatticeBasis
from .numberfield import KLattice, NumberField
from .version import __version__

PRECISION_ENV = "DIAGORBIT_PRECISION"


class Settings(BaseModel):
    """
    Settings shared by every experiment.
    """

    precision_bits: int = Field(default=DEFAULT_PRECISION, ge=64)
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    membership_tol: float = Field(default=1e-8, gt=0)
    recurrence_threshold: float = Field(default=0.1, gt=0)
    enumeration_node_budget: int = Field(default=2_000_000, ge=1)
    unit_height: int = Field(default=5, ge=1)


class LatticeSchema(BaseModel):
    """
    Schema for a lattice file.
    """

    d: int = Field(ge=2)
    basis_columns: list[list[str]]
    precision_bits: int = Field(ge=64)


class FieldSpecSchema(BaseModel):
    """
    Schema for a number field and a lattice in it.

    `basis` rows are coordinates in the power basis, as rational strings. A
    missing basis means the power basis.
    """

    minpoly: list[int]
    basis: Optional[list[list[str]]] = None


class Report(BaseModel):
    """
    Schema for the JSON report of a command.
    """

    subcommand: str
    inputs: dict[str, Any]
    results: dict[str, Any]
    version: str = __version__
    precision_bits: int


class RelationSchema(BaseModel):
    p1: int
    p2: int
    q: int


class RecurrenceSchema(BaseModel):
    t: str
    systole: str
    member: bool
    informative: bool
    drift: str
    threshold: str
    l1: Optional[int] = None
    l2: Optional[int] = None
    residual: Optional[str] = None


class OffRaySchema(BaseModel):
    t: str
    s: str
    bound: str
    witness_length: str
    systole: str
    holds: bool


class OmegaReport(BaseModel):
    """
    Schema for the results of an irregular-orbit experiment.
    """

    v: list[str]
    relation: RelationSchema
    family: int
    q: int
    recurrences: list[RecurrenceSchema]
    offray_grid: list[OffRaySchema]


def _read_document(path: str) -> Any:
    """
    Reads a JSON or YAML file.

    Raises:
        ValueError: If the file cannot be read or parsed.
    """
    try:
        with open(path, encoding="utf-8") as f:
            return yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ValueError(f"Failed to parse settings from {path}: {e}") from e


def _load_settings(path: Optional[str] = None, overrides: Optional[dict[str, Any]] = None) -> Settings:
    """
    Builds the settings from defaults, an optional file, the environment and
    explicit overrides, in increasing priority.

    Args:
        path: A YAML or JSON settings file.
        overrides: Values given on the command line; None values are ignored.

    Returns:
        The validated settings.

    Raises:
        ValueError: If the file cannot be parsed or a value is invalid.
    """
    values: dict[str, Any] = {}
    source = path or "defaults"
    if path is not None:
        document = _read_document(path) or {}
        if not isinstance(document, dict):
            raise ValueError(f"Failed to parse settings from {path}: expected a mapping.")
        values.update(document)
    if PRECISION_ENV in os.environ:
        values["precision_bits"] = os.environ[PRECISION_ENV]
        source = f"{source} and ${PRECISION_ENV}"
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return Settings(**values)
    except ValidationError as e:
        raise ValueError(f"Invalid settings from {source}: {e}") from e


def _parse_document(path: str, schema: type[BaseModel]) -> Any:
    try:
        with open(path, encoding="utf-8") as f:
            document = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ValueError(f"Failed to parse {path}: {e}") from e
    try:
        return schema(**(document or {}))
    except (TypeError, ValidationError) as e:
        raise ValueError(f"Invalid data from {path}: {e}") from e


def _load_lattice(path: str, precision: Optional[int] = None) -> LatticeBasis:
    """
    Loads a lattice file.

    The decimal entries are read at the file's precision and frozen; the
    lattice works at `precision` if given.
    """
    spec: LatticeSchema = _parse_document(path, LatticeSchema)
    columns = spec.basis_columns
    if len(columns) != spec.d or any(len(c) != spec.d for c in columns):
        raise ValueError(f"Invalid data from {path}: expected {spec.d} columns of length {spec.d}.")
    with mp.workprec(spec.precision_bits):
        try:
            values = [[mp.mpf(entry) for entry in column] for column in columns]
        except ValueError as e:
            raise ValueError(f"Invalid data from {path}: {e}") from e
    return LatticeBasis.from_columns(values, precision or spec.precision_bits)


def _dump_lattice(x: LatticeBasis) -> LatticeSchema:
    d = x.dimension
    return LatticeSchema(
        d=d,
        basis_columns=[[format_decimal(c, x.precision) for c in x.column(j)] for j in range(d)],
        precision_bits=x.precision,
    )


def _load_field_spec(path: str) -> tuple[NumberField, KLattice]:
    """Loads a number field and a lattice from a field spec file."""
    spec: FieldSpecSchema = _parse_document(path, FieldSpecSchema)
    return _field_from_schema(spec)


def _field_from_schema(spec: FieldSpecSchema) -> tuple[NumberField, KLattice]:
    field = NumberField(spec.minpoly)
    if spec.basis is None:
        return field, KLattice.power_basis(field)
    try:
        rows = [[Fraction(c) for c in row] for row in spec.basis]
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"Invalid basis entry: {e}") from e
    return field, KLattice.from_rows(field, rows)


def _omega_report(result: OmegaResult, precision: int) -> OmegaReport:
    recurrences = []
    for r in result.recurrences:
        residues = r.verdict.residues
        recurrences.append(
            RecurrenceSchema(
                t=format_decimal(r.t, precision, 15),
                systole=format_decimal(r.systole, precision, 15),
                member=r.verdict.member,
                informative=r.informative,
                drift=format_decimal(r.drift, precision, 6),
                threshold=format_decimal(r.threshold, precision, 6),
                l1=residues[0] if residues else None,
                l2=residues[1] if residues else None,
                residual=(
                    None if r.verdict.residual is None else format_decimal(r.verdict.residual, precision, 6)
                ),
            )
        )
    offray = [
        OffRaySchema(
            t=str(sample.t),
            s=str(sample.s),
            bound=format_decimal(sample.bound, precision, 15),
            witness_length=format_decimal(sample.witness_length, precision, 15),
            systole=format_decimal(sample.systole, precision, 15),
            holds=sample.holds,
        )
        for sample in result.offray
    ]
    relation = result.relation if result.family == 1 else result.reverse
    return OmegaReport(
        v=[str(c) for c in result.v.values],
        relation=RelationSchema(p1=relation.p1, p2=relation.p2, q=relation.q),
        family=result.family,
        q=result.q,
        recurrences=recurrences,
        offray_grid=offray,
    )


def _dumps(report: Union[Report, BaseModel]) -> str:
    """Serializes a report with sorted keys so equal reports give equal bytes."""
    return json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
