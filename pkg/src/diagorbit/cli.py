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

"""Command line front end: one subcommand per experiment."""

import csv
import json
import logging
import sys
from contextlib import contextmanager
from fractions import Fraction
from typing import Any, Callable, Iterator, Optional, Sequence

import click
import numpy as np
from mpmath import mp, mpf

from .arith import format_decimal, parse_real, split_top_level
from .dioph import gdp_probe, propC1_search, propC2_search, write_records_csv
from .errors import PrecisionError, PreconditionError
from .flows import (
    LieElement,
    TracelessDiag,
    cone_construct,
    torus_orbit_closure,
    trajectory,
    write_trajectory_csv,
)
from .irregular import VParams, make_xv, make_zv, omega_experiment
from .lattice import LatticeBasis
from .numberfield import (
    Compactness,
    KLattice,
    NumberField,
    discriminant_check,
    is_cm,
    lattice_from_basis,
    theorem5_factor,
    torus_orbit_compactness,
    trace_form_discriminant,
    unit_search,
)
from .runner import ExperimentRunner
from .utils import (
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
from .version import __version__

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_PRECISION = 3
EXIT_USAGE = 64


class _ExperimentGroup(click.Group):
    """A group whose exit codes follow the error families of the package."""

    def main(  # type: ignore[override]
        self,
        args: Optional[Sequence[str]] = None,
        *posargs: Any,
        standalone_mode: bool = True,
        **extra: Any,
    ) -> Any:
        try:
            code = super().main(args, *posargs, standalone_mode=False, **extra)
            code = EXIT_OK if code is None else code
        except click.UsageError as e:
            e.show()
            code = EXIT_USAGE
        except click.ClickException as e:
            e.show()
            code = e.exit_code
        except PreconditionError as e:
            click.echo(f"Error: {e}", err=True)
            code = EXIT_PRECONDITION
        except PrecisionError as e:
            click.echo(f"Error: {e}", err=True)
            code = EXIT_PRECISION
        except ValueError as e:
            click.echo(f"Error: {e}", err=True)
            code = EXIT_USAGE
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = 1
        if standalone_mode:
            sys.exit(code)
        return code


def _common_options(fn: Callable) -> Callable:
    options = [
        click.option("--precision", type=int, default=None, help="Working precision in bits (>= 64)."),
        click.option("--seed", type=int, default=None, help="Seed for randomized grids."),
        click.option(
            "--output", type=click.Path(dir_okay=False), default=None, help="Report JSON path; stdout by default."
        ),
        click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="CSV series path."),
        click.option(
            "--config", type=click.Path(exists=True, dir_okay=False), default=None, help="YAML or JSON settings file."
        ),
        click.option("--workers", type=int, default=None, help="Number of worker processes."),
        click.option("--verbose", is_flag=True, default=False, help="Log progress to stderr."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


class _Session:
    def __init__(
        self,
        settings: Settings,
        runner: Optional[ExperimentRunner],
        output: Optional[str],
        csv_path: Optional[str],
    ) -> None:
        self.settings = settings
        self.runner = runner
        self.output = output
        self.csv_path = csv_path

    @property
    def precision(self) -> int:
        return self.settings.precision_bits

    def emit(self, subcommand: str, inputs: dict[str, Any], results: dict[str, Any]) -> Report:
        report = Report(
            subcommand=subcommand,
            inputs=inputs,
            results=results,
            version=__version__,
            precision_bits=self.precision,
        )
        text = _dumps(report)
        if self.output is None:
            click.echo(text, nl=False)
        else:
            with open(self.output, "w", encoding="utf-8") as f:
                f.write(text)
        return report

    def write_csv(self, write: Callable[[Any], None]) -> None:
        if self.csv_path is None:
            return
        with open(self.csv_path, "w", encoding="utf-8", newline="") as f:
            write(f)


@contextmanager
def _session(
    precision: Optional[int],
    seed: Optional[int],
    output: Optional[str],
    csv_path: Optional[str],
    config: Optional[str],
    workers: Optional[int],
    verbose: bool,
) -> Iterator[_Session]:
    settings = _load_settings(config, {"precision_bits": precision, "seed": seed, "workers": workers})
    if verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(levelname)s %(name)s: %(message)s")
    runner = ExperimentRunner(settings.workers) if settings.workers > 1 else None
    try:
        yield _Session(settings, runner, output, csv_path)
    finally:
        if runner is not None:
            runner.close()


def _reals(text: str) -> list[Any]:
    try:
        return [parse_real(part) for part in split_top_level(text)]
    except ValueError as e:
        raise click.BadParameter(str(e)) from e


def _ints(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",")]
    except ValueError as e:
        raise click.BadParameter(f"Expected comma separated integers, got {text!r}.") from e


def _field(minpoly: Optional[str], basis: str, spec: Optional[str]) -> tuple[NumberField, KLattice]:
    if spec is not None:
        return _load_field_spec(spec)
    if minpoly is None:
        raise click.UsageError("Either --minpoly or --spec is required.")
    rows = None if basis == "identity" else [row.split(",") for row in basis.split(";")]
    return _field_from_schema(FieldSpecSchema(minpoly=_ints(minpoly), basis=rows))


def _text(value: Any, precision: int, digits: Optional[int] = None) -> Optional[str]:
    if value is None:
        return None
    if isinstance(value, (int, Fraction)):
        return str(value)
    return format_decimal(value, precision, digits)


def _matrix_rows(matrix: Any, precision: int) -> list[list[str]]:
    return [[format_decimal(matrix[i, j], precision) for j in range(matrix.cols)] for i in range(matrix.rows)]


def _field_options(fn: Callable) -> Callable:
    fn = click.option("--spec", type=click.Path(exists=True, dir_okay=False), default=None, help="Field spec file.")(fn)
    fn = click.option(
        "--basis", default="identity", show_default=True, help='"identity" or rows "a,b,c;d,e,f" of rationals.'
    )(fn)
    fn = click.option("--minpoly", default=None, help="Minimal polynomial coefficients, leading first.")(fn)
    return fn


@click.group(cls=_ExperimentGroup)
@click.version_option(__version__, prog_name="diagorbit")
def cli() -> None:
    """Experiments on diagonal group orbits in the space of lattices."""


@cli.command()
@_field_options
@_common_options
def embed(minpoly: Optional[str], basis: str, spec: Optional[str], **common: Any) -> None:
    """Build the unit-covolume lattice x_Lambda of a lattice in a number field."""
    with _session(**common) as session:
        field, kl = _field(minpoly, basis, spec)
        x = lattice_from_basis(field, kl, session.precision)
        session.emit(
            "embed",
            {"minpoly": list(field.minpoly), "basis": [[str(c) for c in b.coords] for b in kl.basis]},
            {
                "signature": list(field.signature),
                "lattice": _dump_lattice(x).model_dump(),
                "determinant": format_decimal(abs(x.determinant()), session.precision, 30),
                "trace_form_discriminant": str(trace_form_discriminant(kl)),
                "discriminant_check": discriminant_check(field, kl, session.precision),
            },
        )


def _units_results(field: NumberField, kl: KLattice, height: Optional[int], session: _Session) -> tuple[Any, dict[str, Any]]:
    units = unit_search(field, kl, height or session.settings.unit_height, session.precision, session.runner)
    return units, {
        "rank": units.rank,
        "expected_rank": units.expected_rank,
        "complete": units.complete,
        "height_bound": units.height_bound,
        "generators": [str(u) for u in units.generators],
        "torsion": [str(u) for u in units.torsion],
        "norms": [str(u.norm()) for u in units.generators],
        "log_embeddings": [[format_decimal(c, session.precision, 30) for c in row] for row in units.log_matrix],
    }


@cli.command()
@_field_options
@click.option("--height", type=int, default=None, help="Coefficient bound of the unit search.")
@_common_options
def units(minpoly: Optional[str], basis: str, spec: Optional[str], height: Optional[int], **common: Any) -> None:
    """Search units of the order of a lattice and run the CM test."""
    with _session(**common) as session:
        field, kl = _field(minpoly, basis, spec)
        found, results = _units_results(field, kl, height, session)
        results["cm"] = is_cm(field, found).value
        session.emit("units", {"minpoly": list(field.minpoly), "height": found.height_bound}, results)


@cli.command("torus-orbit")
@_field_options
@click.option("--height", type=int, default=None, help="Coefficient bound of the unit search.")
@click.option("--direction", default=None, help="Traceless one-parameter direction, comma separated.")
@_common_options
def torus_orbit(
    minpoly: Optional[str], basis: str, spec: Optional[str], height: Optional[int], direction: Optional[str], **common: Any
) -> None:
    """Certify compactness of the torus orbit of x_Lambda and compute its closure."""
    with _session(**common) as session:
        field, kl = _field(minpoly, basis, spec)
        found, results = _units_results(field, kl, height, session)
        compactness = torus_orbit_compactness(field, kl, found)
        results["compactness"] = compactness.value
        results["closure"] = None
        if compactness is Compactness.CERTIFIED_COMPACT and found.expected_rank > 0:
            diag = None if direction is None else TracelessDiag(tuple(_reals(direction)))
            closure = torus_orbit_closure(field, kl, found, diag, session.precision)
            results["closure"] = {
                "dimension": closure.dimension,
                "kernel_roots": [str(root) for root in closure.kernel_roots],
                "certificates": [list(c) for c in closure.certificates],
            }
        session.emit(
            "torus-orbit", {"minpoly": list(field.minpoly), "direction": direction}, results
        )


@cli.command()
@click.option("--matrices", required=True, help="JSON list of traceless matrices spanning the subalgebra.")
@_common_options
def cone(matrices: str, **common: Any) -> None:
    """Construct the cone direction v0 for a subalgebra."""
    try:
        rows = json.loads(matrices)
        basis = [LieElement([[Fraction(str(c)) for c in row] for row in m]) for m in rows]
    except (json.JSONDecodeError, TypeError, ValueError) as e:
        raise click.BadParameter(f"Invalid matrices: {e}", param_hint="--matrices") from e
    with _session(**common) as session:
        cert = cone_construct(basis, session.precision)
        session.emit(
            "cone",
            {"matrices": [[[str(c) for c in row] for row in X.rows] for X in basis]},
            {
                "root": str(cert.root),
                "v0": [_text(c, session.precision) for c in cert.v0.entries],
                "margin": _text(cert.margin, session.precision),
                "normalized_margin": format_decimal(cert.normalized_margin, session.precision, 30),
                "nilpotent": _text(cert.nilpotent, session.precision),
                "element_index": cert.element_index,
                "decay_slope": _text(cert.decay_slope, session.precision, 15),
                "residuals": [format_decimal(r, session.precision, 15) for r in cert.residuals],
                "weyl_reversed": cert.weyl_reversed,
            },
        )


def _random_directions(d: int, count: int, seed: int) -> list[TracelessDiag]:
    rng = np.random.default_rng(seed)
    directions = []
    for _ in range(count):
        values = [Fraction(float(c)).limit_denominator(1000) for c in rng.standard_normal(d)]
        directions.append(TracelessDiag.project(values))
    return directions


@cli.command()
@_field_options
@click.option("--lattice", "lattice_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Lattice file.")
@click.option("--dimension", type=int, default=None, help="Use Z^d when no lattice or field is given.")
@click.option("--direction", default=None, help="Flow direction, projected to trace zero.")
@click.option("--random-directions", type=int, default=0, help="Number of seeded random directions.")
@click.option("--tmax", type=str, default="10", show_default=True, help="Final time.")
@click.option("--steps", type=int, default=100, show_default=True, help="Number of time steps.")
@_common_options
def flow(
    minpoly: Optional[str],
    basis: str,
    spec: Optional[str],
    lattice_path: Optional[str],
    dimension: Optional[int],
    direction: Optional[str],
    random_directions: int,
    tmax: str,
    steps: int,
    **common: Any,
) -> None:
    """Follow diagonal flows and record systoles; the CSV holds the first trajectory."""
    with _session(**common) as session:
        precision = session.precision
        if lattice_path is not None:
            x = _load_lattice(lattice_path, precision)
        elif minpoly is not None or spec is not None:
            x = lattice_from_basis(*_field(minpoly, basis, spec), precision)
        elif dimension is not None:
            x = LatticeBasis.standard(dimension, precision)
        else:
            raise click.UsageError("One of --lattice, --minpoly, --spec or --dimension is required.")
        directions = [] if direction is None else [TracelessDiag.project(_reals(direction))]
        directions += _random_directions(x.dimension, random_directions, session.settings.seed)
        if not directions:
            raise click.UsageError("Give --direction or --random-directions.")
        t_max = parse_real(tmax)
        rho = Fraction(session.settings.recurrence_threshold).limit_denominator(10**6)
        results = []
        first = None
        for v in directions:
            samples = trajectory(x, v, t_max, steps, rho, session.runner, session.settings.enumeration_node_budget)
            first = first or samples
            results.append(
                {
                    "direction": [_text(c, precision) for c in v.entries],
                    "min_systole": format_decimal(min(s.systole for s in samples), precision, 30),
                    "final_systole": format_decimal(samples[-1].systole, precision, 30),
                    "recurrences": sum(s.recurrence for s in samples),
                }
            )
        session.write_csv(lambda f: write_trajectory_csv(first, f, precision))
        session.emit(
            "flow",
            {"dimension": x.dimension, "tmax": tmax, "steps": steps, "seed": session.settings.seed},
            {"trajectories": results},
        )


@cli.command()
@click.option("--alpha", required=True, help="alpha as an algebraic literal.")
@click.option("--beta", required=True, help="beta as an algebraic literal.")
@click.option("--family", type=click.IntRange(1, 2), default=1, show_default=True)
@click.option("--tmax", type=str, default="20", show_default=True, help="Final time of the ray.")
@click.option("--steps", type=int, default=200, show_default=True, help="Number of time steps.")
@click.option("--q-max", type=int, default=10**6, show_default=True, help="Largest relation coefficient.")
@_common_options
def irregular(alpha: str, beta: str, family: int, tmax: str, steps: int, q_max: int, **common: Any) -> None:
    """Follow x_v along a ray and test its recurrences for membership in M_q."""
    v = VParams(tuple(_reals(alpha) + _reals(beta)))
    with _session(**common) as session:
        settings = session.settings
        result = omega_experiment(
            v,
            family=family,
            t_max=parse_real(tmax),
            rho=Fraction(settings.recurrence_threshold).limit_denominator(10**6),
            tol=settings.membership_tol,
            steps=steps,
            q_max=q_max,
            precision=session.precision,
            runner=session.runner,
        )
        report = _omega_report(result, session.precision)

        def write(f: Any) -> None:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["t", "systole", "member", "informative", "l1", "l2", "residual", "threshold"])
            for r in report.recurrences:
                writer.writerow(
                    [r.t, r.systole, int(r.member), int(r.informative), r.l1, r.l2, r.residual, r.threshold]
                )

        session.write_csv(write)
        session.emit(
            "irregular",
            {"alpha": alpha, "beta": beta, "family": family, "tmax": tmax, "steps": steps},
            report.model_dump(mode="json"),
        )


@cli.command()
@click.option("--mode", type=click.Choice(["c1", "c2"]), required=True)
@click.option("--v", "v_text", required=True, help="The vector v, comma separated literals.")
@click.option("--gamma", required=True, help="The shift: one value per entry of v (c1) or one value (c2).")
@click.option("--N", "bound", type=click.IntRange(min=1), required=True, help="Scan bound.")
@_common_options
def dioph(mode: str, v_text: str, gamma: str, bound: int, **common: Any) -> None:
    """Scan multiplicative approximation records."""
    v = _reals(v_text)
    shifts = _reals(gamma)
    with _session(**common) as session:
        precision = session.precision
        if mode == "c1":
            trace = propC1_search(v, shifts, bound, precision, session.runner)
        else:
            if len(shifts) != 1:
                raise click.BadParameter("c2 takes a single shift.", param_hint="--gamma")
            trace = propC2_search(v, shifts[0], bound, precision, session.runner)
        session.write_csv(lambda f: write_records_csv(trace, f, precision))
        session.emit(
            "dioph",
            {"mode": mode, "v": v_text, "gamma": gamma, "N": bound},
            {
                "records": [
                    {
                        "witness": r.witness if isinstance(r.witness, int) else list(r.witness),
                        "value": format_decimal(r.value, precision, 30),
                    }
                    for r in trace.records
                ],
                "count": len(trace.records),
            },
        )


@cli.command()
@click.option(
    "--lattice",
    "kind",
    type=click.Choice(["standard", "xv", "zv"]),
    default="standard",
    show_default=True,
)
@click.option("--lattice-file", type=click.Path(exists=True, dir_okay=False), default=None, help="Lattice file.")
@click.option("--v", "v_text", default=None, help="v for the xv and zv lattices.")
@click.option("--dimension", type=int, default=3, show_default=True, help="d for the standard lattice.")
@click.option("--shift", required=True, help="The grid shift w, comma separated.")
@click.option("--target", required=True, help="The target product.")
@click.option("--eps", required=True, help="The tolerance.")
@click.option("--bound", type=click.IntRange(min=1), default=1000, show_default=True, help="Coefficient bound.")
@_common_options
def gdp(
    kind: str,
    lattice_file: Optional[str],
    v_text: Optional[str],
    dimension: int,
    shift: str,
    target: str,
    eps: str,
    bound: int,
    **common: Any,
) -> None:
    """Probe the coordinate products of a grid near a target."""
    with _session(**common) as session:
        precision = session.precision
        if lattice_file is not None:
            x = _load_lattice(lattice_file, precision)
        elif kind == "standard":
            x = LatticeBasis.standard(dimension, precision)
        else:
            if v_text is None:
                raise click.UsageError(f"--v is required for the {kind} lattice.")
            v = VParams(tuple(_reals(v_text)))
            x = make_xv(v, precision) if kind == "xv" else make_zv(v, precision)
        witness = gdp_probe(x, _reals(shift), parse_real(target), parse_real(eps), bound, precision)
        results: dict[str, Any] = {"witness": None}
        if witness is not None:
            results["witness"] = {
                "coefficients": list(witness.coefficients),
                "point": [format_decimal(c, precision, 30) for c in witness.point],
                "product": format_decimal(witness.product, precision, 30),
                "error": format_decimal(witness.error, precision, 15),
            }
        session.emit(
            "gdp",
            {"lattice": lattice_file or kind, "v": v_text, "shift": shift, "target": target, "eps": eps, "bound": bound},
            results,
        )


@cli.command()
@_field_options
@_common_options
def factor(minpoly: Optional[str], basis: str, spec: Optional[str], **common: Any) -> None:
    """Factor the shear of a basis through the embedding matrix."""
    with _session(**common) as session:
        precision = session.precision
        field, kl = _field(minpoly, basis, spec)
        result = theorem5_factor(field, kl, precision)
        with mp.workprec(precision):
            det_p: mpf = mp.det(result.p)
        session.emit(
            "factor",
            {"minpoly": list(field.minpoly), "basis": [[str(c) for c in b.coords] for b in kl.basis]},
            {
                "c": format_decimal(result.c, precision, 30),
                "p": _matrix_rows(result.p, precision),
                "det_p": format_decimal(det_p, precision, 30),
            },
        )


def run(argv: Sequence[str]) -> int:
    """Runs the command line and returns its exit code."""
    return cli.main(args=list(argv), prog_name="diagorbit", standalone_mode=False)


def main() -> None:
    sys.exit(run(sys.argv[1:]))
