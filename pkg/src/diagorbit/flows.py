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

import csv
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, TYPE_CHECKING, Any, Mapping, NamedTuple, Optional, Sequence, Union

import sympy
from flint import fmpz_mat
from mpmath import mp, mpc, mpf

from .arith import (
    DEFAULT_PRECISION,
    evaluate_scalar,
    format_decimal,
    approximate_integer_kernel,
    integer_kernel,
    to_fraction,
)
from .errors import (
    BadIndex,
    DeterminantViolation,
    DiagonalSubalgebra,
    DimensionMismatch,
    PreconditionViolated,
)
from .lattice import (
    DEFAULT_NODE_BUDGET,
    LatticeBasis,
    left_multiply,
    reduce,
    shift_log_diag,
    shortest_vector,
)
from .numberfield import FieldElement, KLattice, NumberField, UnitGroupData, root_of_unity_exponent

if TYPE_CHECKING:
    from .runner import ExperimentRunner

logger = logging.getLogger(__name__)

Scalar = Union[int, Fraction, mpf]


def _exact(values: Sequence[Any]) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in values)


@dataclass(frozen=True)
class TracelessDiag:
    """A point t = (t_1, ..., t_d) of the traceless diagonal algebra."""

    entries: tuple[Scalar, ...]

    def __post_init__(self) -> None:
        if len(self.entries) < 2:
            raise ValueError("A diagonal element needs at least two entries.")
        if _exact(self.entries):
            if sum(Fraction(v) for v in self.entries) != 0:
                raise ValueError(f"Entries {self.entries} do not sum to zero.")
            return
        with mp.workprec(DEFAULT_PRECISION):
            entries = tuple(evaluate_scalar(v, DEFAULT_PRECISION + 16) for v in self.entries)
            object.__setattr__(self, "entries", entries)
            total = abs(mp.fsum(entries))
            size = max(abs(v) for v in entries)
            if total > mp.ldexp(size + 1, -(DEFAULT_PRECISION // 2)):
                raise ValueError(f"Entries do not sum to zero (sum {mp.nstr(total, 5)}).")

    @classmethod
    def project(cls, values: Sequence[Any]) -> "TracelessDiag":
        """Projects an arbitrary diagonal onto the traceless part."""
        if _exact(values):
            values = [Fraction(v) for v in values]
            mean = sum(values, Fraction(0)) / len(values)
            return cls(tuple(v - mean for v in values))
        with mp.workprec(DEFAULT_PRECISION + 16):
            values = [evaluate_scalar(v, DEFAULT_PRECISION + 16) for v in values]
            mean = mp.fsum(values) / len(values)
            return cls(tuple(v - mean for v in values))

    @property
    def dimension(self) -> int:
        return len(self.entries)

    def scale(self, t: Scalar) -> "TracelessDiag":
        if _exact(self.entries) and isinstance(t, (int, Fraction)):
            return TracelessDiag(tuple(Fraction(v) * t for v in self.entries))
        with mp.workprec(DEFAULT_PRECISION + 16):
            factor = evaluate_scalar(t, DEFAULT_PRECISION + 16)
            return TracelessDiag(
                tuple(evaluate_scalar(v, DEFAULT_PRECISION + 16) * factor for v in self.entries)
            )

    def __add__(self, other: "TracelessDiag") -> "TracelessDiag":
        if other.dimension != self.dimension:
            raise DimensionMismatch(f"Cannot add dimensions {self.dimension} and {other.dimension}.")
        if _exact(self.entries + other.entries):
            return TracelessDiag(tuple(a + b for a, b in zip(self.entries, other.entries)))
        with mp.workprec(DEFAULT_PRECISION + 16):
            return TracelessDiag(
                tuple(
                    evaluate_scalar(a, DEFAULT_PRECISION + 16) + evaluate_scalar(b, DEFAULT_PRECISION + 16)
                    for a, b in zip(self.entries, other.entries)
                )
            )

    def root_value(self, root: "RootIndex") -> Scalar:
        """Returns lambda_ij(t) = t_i - t_j."""
        return self.entries[root.i - 1] - self.entries[root.j - 1]


def a_k_flow(k: int, t: Scalar, d: int) -> TracelessDiag:
    """
    Returns the log of a_k(t): (d - k) t on the first k entries, -k t on the rest.

    Raises:
        BadIndex: If k is not in [1, d - 1].
    """
    if not 1 <= k <= d - 1:
        raise BadIndex(f"k must lie in [1, {d - 1}], got {k}.")
    return TracelessDiag(tuple([(d - k) * t] * k + [-k * t] * (d - k)))


def apply_diag(v: TracelessDiag, x: LatticeBasis) -> LatticeBasis:
    """
    Applies exp(v) to the lattice: row i of the basis is scaled by e^{t_i}.

    Raises:
        DimensionMismatch: If v and x have different dimensions.
    """
    if v.dimension != x.dimension:
        raise DimensionMismatch(
            f"Diagonal of dimension {v.dimension} cannot act on a lattice of dimension {x.dimension}."
        )
    return shift_log_diag(x, v.entries)


@dataclass(frozen=True)
class TorusParam:
    """
    A point of the torus T^(r,s): positive reals a_1..a_r and nonzero complex
    numbers w_1..w_s acting as rotation-scaling blocks.
    """

    signature: tuple[int, int]
    moduli: tuple[Any, ...]
    omegas: tuple[Any, ...]

    def __post_init__(self) -> None:
        r, s = self.signature
        if len(self.moduli) != r or len(self.omegas) != s:
            raise ValueError(
                f"Signature {self.signature} needs {r} moduli and {s} complex parameters."
            )
        if any(evaluate_scalar(a, 64) <= 0 for a in self.moduli):
            raise ValueError(f"Moduli must be positive, got {self.moduli}.")
        if any(w == 0 for w in self.omegas):
            raise ValueError("Complex parameters must be nonzero.")

    @property
    def dimension(self) -> int:
        r, s = self.signature
        return r + 2 * s

    def determinant(self, precision: int = DEFAULT_PRECISION) -> mpf:
        with mp.workprec(precision):
            det = mp.mpf(1)
            for a in self.moduli:
                det *= evaluate_scalar(a, precision)
            for w in self.omegas:
                det *= abs(mp.mpc(w)) ** 2
            return det

    def check(self, precision: int = DEFAULT_PRECISION) -> None:
        """
        Raises:
            DeterminantViolation: If the determinant differs from one.
        """
        det = self.determinant(precision)
        with mp.workprec(precision):
            if abs(det - 1) > mp.ldexp(1, -(precision // 2)):
                raise DeterminantViolation(
                    f"Torus element has determinant {mp.nstr(det, 15)}, expected 1."
                )

    def matrix(self, precision: int = DEFAULT_PRECISION) -> mp.matrix:
        r, _ = self.signature
        d = self.dimension
        with mp.workprec(precision):
            m = mp.matrix(d, d)
            for i, a in enumerate(self.moduli):
                m[i, i] = evaluate_scalar(a, precision)
            for k, w in enumerate(self.omegas):
                w = mp.mpc(w)
                i = r + 2 * k
                m[i, i], m[i, i + 1] = w.real, -w.imag
                m[i + 1, i], m[i + 1, i + 1] = w.imag, w.real
            return m

    def tilde(self, precision: int = DEFAULT_PRECISION) -> list[mpc]:
        """Returns the diagonal (a_1, ..., a_r, w_1, conj(w_1), ...)."""
        with mp.workprec(precision):
            entries = [mp.mpc(evaluate_scalar(a, precision)) for a in self.moduli]
            for w in self.omegas:
                w = mp.mpc(w)
                entries.extend([w, mp.conj(w)])
            return entries


def torus_apply(T: TorusParam, x: LatticeBasis) -> LatticeBasis:
    """
    Applies the block matrix of T to x.

    Raises:
        DeterminantViolation: If det T differs from one.
        DimensionMismatch: If the dimensions differ.
    """
    T.check(x.precision)
    if T.dimension != x.dimension:
        raise DimensionMismatch(f"Torus of dimension {T.dimension} cannot act on d = {x.dimension}.")
    return left_multiply(x, T.matrix(x.precision + 32))


def character(i: int, j: int, diagonal: Sequence[Any]) -> Any:
    """Returns chi_ij(t) = t_i / t_j for a diagonal given by its entries."""
    d = len(diagonal)
    if not (1 <= i <= d and 1 <= j <= d) or i == j:
        raise BadIndex(f"Invalid root index ({i}, {j}) for d = {d}.")
    a, b = diagonal[i - 1], diagonal[j - 1]
    if _exact([a, b]):
        return Fraction(a) / Fraction(b)
    with mp.workprec(DEFAULT_PRECISION):
        return evaluate_scalar(a, DEFAULT_PRECISION) / evaluate_scalar(b, DEFAULT_PRECISION)


class RootIndex(NamedTuple):
    """The root lambda_ij (1-based indices)."""

    i: int
    j: int

    @property
    def positive(self) -> bool:
        return self.i < self.j

    def __str__(self) -> str:
        return f"({self.i},{self.j})"


def root_order(d: int) -> list[RootIndex]:
    """
    Returns all roots from largest to smallest: lambda_ij > lambda_kl iff
    j - i > l - k, ties broken by smaller i first.
    """
    if d < 2:
        raise BadIndex(f"d must be at least 2, got {d}.")
    roots = [RootIndex(i, j) for i in range(1, d + 1) for j in range(1, d + 1) if i != j]
    return sorted(roots, key=lambda root: (-(root.j - root.i), root.i))


class LieElement:
    """A traceless d x d matrix with its root space decomposition."""

    def __init__(self, rows: Sequence[Sequence[Any]]) -> None:
        rows = [list(row) for row in rows]
        d = len(rows)
        if d < 2 or any(len(row) != d for row in rows):
            raise ValueError("A Lie algebra element must be a square matrix of size >= 2.")
        values = [c for row in rows for c in row]
        if _exact(values):
            rows = [[Fraction(c) for c in row] for row in rows]
            if sum(rows[i][i] for i in range(d)) != 0:
                raise ValueError("Lie algebra element must have trace zero.")
        else:
            with mp.workprec(DEFAULT_PRECISION):
                rows = [[evaluate_scalar(c, DEFAULT_PRECISION) for c in row] for row in rows]
                trace = mp.fsum(rows[i][i] for i in range(d))
                if abs(trace) > mp.ldexp(1, -(DEFAULT_PRECISION // 2)):
                    raise ValueError("Lie algebra element must have trace zero.")
        self.__rows = tuple(tuple(row) for row in rows)

    @classmethod
    def elementary(cls, d: int, i: int, j: int) -> "LieElement":
        """Returns E_ij (1-based)."""
        return cls([[int(a == i - 1 and b == j - 1) for b in range(d)] for a in range(d)])

    @property
    def rows(self) -> tuple[tuple[Scalar, ...], ...]:
        return self.__rows

    @property
    def dimension(self) -> int:
        return len(self.__rows)

    @property
    def exact(self) -> bool:
        return _exact([c for row in self.__rows for c in row])

    def diagonal(self) -> tuple[Scalar, ...]:
        return tuple(self.__rows[i][i] for i in range(self.dimension))

    def component(self, root: RootIndex) -> Scalar:
        return self.__rows[root.i - 1][root.j - 1]

    def components(self) -> dict[RootIndex, Scalar]:
        return {root: self.component(root) for root in root_order(self.dimension) if self.component(root) != 0}

    def frobenius_squared(self) -> Scalar:
        return sum((c * c for row in self.__rows for c in row), Fraction(0) if self.exact else mp.mpf(0))

    def reversed(self) -> "LieElement":
        """Conjugates by the order-reversing permutation matrix."""
        d = self.dimension
        return LieElement([[self.__rows[d - 1 - i][d - 1 - j] for j in range(d)] for i in range(d)])

    def __add__(self, other: "LieElement") -> "LieElement":
        if self.exact and other.exact:
            return LieElement([[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.__rows, other.rows)])
        return LieElement((self.matrix() + other.matrix()).tolist())

    def matrix(self, precision: int = DEFAULT_PRECISION) -> mp.matrix:
        with mp.workprec(precision):
            return mp.matrix([[evaluate_scalar(c, precision) for c in row] for row in self.__rows])


def adjoint_components(v: TracelessDiag, X: LieElement, precision: int = DEFAULT_PRECISION) -> mp.matrix:
    """Returns Ad_{exp(v)} X by scaling each root component X_ij by e^{lambda_ij(v)}."""
    d = X.dimension
    if v.dimension != d:
        raise DimensionMismatch(f"Dimensions {v.dimension} and {d} differ.")
    with mp.workprec(precision):
        result = X.matrix(precision)
        for root in root_order(d):
            result[root.i - 1, root.j - 1] *= mp.exp(evaluate_scalar(v.root_value(root), precision))
        return result


def adjoint_conjugation(v: TracelessDiag, X: LieElement, precision: int = DEFAULT_PRECISION) -> mp.matrix:
    """Returns exp(v) X exp(-v) by matrix multiplication."""
    with mp.workprec(precision):
        values = [evaluate_scalar(t, precision) for t in v.entries]
        forward = mp.diag([mp.exp(t) for t in values])
        backward = mp.diag([mp.exp(-t) for t in values])
        return forward * X.matrix(precision) * backward


@dataclass(frozen=True)
class ConeCertificate:
    """The data of the cone construction around the dominant root."""

    root: RootIndex
    v0: TracelessDiag
    margin: Scalar
    normalized_margin: mpf
    nilpotent: Scalar
    element_index: int
    decay_slope: Optional[mpf]
    residuals: tuple[mpf, ...]
    weyl_reversed: bool


def _cone_direction(d: int, j0: int) -> TracelessDiag:
    values = [Fraction(j0 - i) for i in range(j0 - 1)] + [Fraction(0)] * (d - j0 + 1)
    return TracelessDiag.project(values)


def _fit_slope(times: Sequence[int], values: Sequence[mpf]) -> Optional[mpf]:
    if any(v == 0 for v in values):
        return None
    logs = [mp.log(v) for v in values]
    n = len(times)
    mean_t = mp.mpf(sum(times)) / n
    mean_l = mp.fsum(logs) / n
    numerator = mp.fsum((t - mean_t) * (l - mean_l) for t, l in zip(times, logs))
    denominator = mp.fsum((t - mean_t) ** 2 for t in times)
    return numerator / denominator


def cone_construct(
    h_basis: Sequence[LieElement], precision: int = DEFAULT_PRECISION
) -> ConeCertificate:
    """
    Builds the cone direction v0 for a subalgebra spanned by h_basis.

    Finds the largest positive root with a nonzero component in the span,
    picks the basis element with the largest normalized component on it,
    verifies that this root beats every other active root on v0 by at least
    one, and measures the decay of Ad_{exp(t v0)}(e^{-lambda t} X) towards
    the nilpotent component for t = 1..10.

    Raises:
        DiagonalSubalgebra: If every element of the span is diagonal.
    """
    if not h_basis:
        raise DiagonalSubalgebra("The subalgebra basis is empty.")
    d = h_basis[0].dimension
    basis = list(h_basis)
    projecting = [root for root in root_order(d) if any(X.component(root) != 0 for X in basis)]
    if not projecting:
        raise DiagonalSubalgebra("The subalgebra lies in the diagonal subalgebra.")
    weyl_reversed = not any(root.positive for root in projecting)
    if weyl_reversed:
        basis = [X.reversed() for X in basis]
        projecting = [root for root in root_order(d) if any(X.component(root) != 0 for X in basis)]
    dominant = next(root for root in projecting if root.positive)

    best_index, best_score = -1, None
    for index, X in enumerate(basis):
        value = X.component(dominant)
        if value == 0:
            continue
        score = evaluate_scalar(value * value / X.frobenius_squared(), precision)
        if best_score is None or score > best_score:
            best_index, best_score = index, score
    X = basis[best_index]

    v0 = _cone_direction(d, dominant.j)
    top = v0.root_value(dominant)
    gaps = [top - v0.root_value(root) for root in X.components() if root != dominant]
    if any(c != 0 for c in X.diagonal()):
        gaps.append(top)
    for gap in gaps:
        if gap < 1:
            raise PreconditionViolated(f"Root {dominant} does not dominate on v0 (gap {gap}).")
    margin = min(gaps) if gaps else top

    times = list(range(1, 11))
    residuals = []
    with mp.workprec(precision):
        for t in times:
            flowed = adjoint_components(v0.scale(t), X, precision) * mp.exp(-evaluate_scalar(top, precision) * t)
            flowed[dominant.i - 1, dominant.j - 1] -= evaluate_scalar(X.component(dominant), precision)
            residuals.append(mp.mnorm(flowed, "F"))
        slope = _fit_slope(times, residuals)
        norm_v0 = mp.sqrt(mp.fsum(evaluate_scalar(c, precision) ** 2 for c in v0.entries))
        normalized = evaluate_scalar(margin, precision) / norm_v0

    nilpotent = X.component(dominant)
    if weyl_reversed:
        dominant = RootIndex(d + 1 - dominant.i, d + 1 - dominant.j)
        v0 = TracelessDiag(tuple(reversed(v0.entries)))
    logger.debug("Cone root %s, v0 %s, slope %s.", dominant, v0.entries, slope)
    return ConeCertificate(
        root=dominant,
        v0=v0,
        margin=margin,
        normalized_margin=normalized,
        nilpotent=nilpotent,
        element_index=best_index,
        decay_slope=slope,
        residuals=tuple(residuals),
        weyl_reversed=weyl_reversed,
    )


@dataclass(frozen=True)
class TrajectorySample:
    t: mpf
    systole: mpf
    reduced_basis: tuple[tuple[mpf, ...], ...]
    witness: tuple[int, ...]
    recurrence: bool


def _sample_times(t_max: Any, steps: int, precision: int) -> list[mpf]:
    with mp.workprec(precision):
        t_max = evaluate_scalar(t_max, precision)
        if t_max == 0:
            return [mp.mpf(0)]
        return [t_max * k / steps for k in range(steps + 1)]


def _trajectory_window(
    task: tuple[LatticeBasis, TracelessDiag, list[mpf], Any, int]
) -> list[TrajectorySample]:
    x, v, times, rho, node_budget = task
    samples = []
    for t in times:
        y = apply_diag(v.scale(t), x)
        reduced, _ = reduce(y)
        report = shortest_vector(y, node_budget)
        samples.append(
            TrajectorySample(
                t,
                report.systole,
                tuple(tuple(row) for row in reduced.matrix.tolist()),
                report.witnesses[0],
                report.systole >= rho,
            )
        )
    return samples


def trajectory(
    x: LatticeBasis,
    v: TracelessDiag,
    t_max: Any,
    steps: int,
    rho: Any = Fraction(1, 10),
    runner: Optional["ExperimentRunner"] = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> list[TrajectorySample]:
    """
    Samples the orbit exp(t v) x at t_k = t_max * k / steps, k = 0..steps.

    Every sample is recomputed from the provenance of x; a sample is flagged
    as a recurrence when its systole is at least rho.

    Args:
        x: The starting lattice.
        v: The flow direction.
        t_max: The final time (t_max = 0 gives the single sample x).
        steps: The number of time steps, at least one.
        rho: The recurrence threshold, positive.
        runner: Optional runner that samples time windows in parallel.
        node_budget: The enumeration budget per sample.

    Returns:
        The samples in time order.
    """
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}.")
    with mp.workprec(x.precision):
        rho = evaluate_scalar(rho, x.precision)
    if rho <= 0:
        raise ValueError(f"The recurrence threshold must be positive, got {rho}.")
    times = _sample_times(t_max, steps, x.precision)
    workers = runner.workers if runner is not None else 1
    size = -(-len(times) // workers)
    tasks = [
        (x, v, times[k : k + size], rho, node_budget) for k in range(0, len(times), size)
    ]
    if runner is not None:
        windows = runner.map(_trajectory_window, tasks)
    else:
        windows = [_trajectory_window(task) for task in tasks]
    return [sample for window in windows for sample in window]


def write_trajectory_csv(samples: Sequence[TrajectorySample], stream: IO[str], precision: int) -> None:
    """Writes t, systole, recurrence_flag and the reduced basis entries as CSV."""
    if not samples:
        return
    d = len(samples[0].reduced_basis)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(
        ["t", "systole", "recurrence_flag"] + [f"b{i}{j}" for i in range(d) for j in range(d)]
    )
    for sample in samples:
        writer.writerow(
            [format_decimal(sample.t, precision), format_decimal(sample.systole, precision), int(sample.recurrence)]
            + [format_decimal(sample.reduced_basis[i][j], precision) for i in range(d) for j in range(d)]
        )


@dataclass(frozen=True)
class ClosureResult:
    """The closure of a subgroup orbit on a torus R^m / Lambda."""

    dimension: int
    kernel_roots: tuple[RootIndex, ...]
    certificates: tuple[tuple[int, ...], ...]
    lattice_rows: tuple[tuple[Any, ...], ...] = ()


def _in_span(vectors: Sequence[Sequence[mpf]], target: Sequence[Any], precision: int) -> bool:
    with mp.workprec(precision):
        target = [evaluate_scalar(c, precision) for c in target]
        size = mp.norm(target)
        if size == 0:
            return True
        if not vectors:
            return False
        m = len(target)
        system = mp.matrix([[vectors[c][i] for c in range(len(vectors))] for i in range(m)])
        _, residual = mp.qr_solve(system, mp.matrix(target))
        return residual <= mp.ldexp(size, -(precision // 4))


def _rational_matrix(rows: Sequence[Sequence[Any]]) -> sympy.Matrix:
    return sympy.Matrix(
        [[sympy.Rational(Fraction(c).numerator, Fraction(c).denominator) for c in row] for row in rows]
    )


def subspace_closure(
    lattice_rows: Sequence[Sequence[Any]],
    subspace: Sequence[Sequence[Any]],
    root_functionals: Optional[Mapping[RootIndex, Sequence[Sequence[Any]]]] = None,
    precision: int = DEFAULT_PRECISION,
) -> ClosureResult:
    """
    Computes the closure of the image of a subspace W in the torus R^m / Lambda.

    In coordinates relative to the rows of Lambda, the closure is cut out by
    the integer vectors n annihilating W; the closure dimension is m minus
    the rank of those certificates. Rational inputs are handled exactly,
    other inputs through LLL with a certified decision band.

    Args:
        lattice_rows: A basis of Lambda (rows).
        subspace: Spanning vectors of W.
        root_functionals: Optional labels: for each root, the functionals
            whose common kernel is the kernel of its character.
        precision: The working precision in bits.

    Returns:
        The closure dimension, the roots whose characters vanish on the
        closure and the integer certificates.

    Raises:
        UncertifiedInput: If a candidate certificate cannot be decided.
    """
    m = len(lattice_rows)
    if not subspace:
        raise ValueError("The subspace must have dimension at least one.")
    if any(len(row) != m for row in list(lattice_rows) + list(subspace)):
        raise DimensionMismatch(f"Expected vectors of length {m}.")

    values = [c for row in list(lattice_rows) + list(subspace) for c in row]
    if all(isinstance(c, (int, Fraction)) for c in values):
        lattice, span = _rational_matrix(lattice_rows), _rational_matrix(subspace)
        inverse = lattice.inv()
        relative = span * inverse
        rows = [[to_fraction(relative[a, i]) for i in range(m)] for a in range(relative.rows)]
        certificates = integer_kernel(rows, m)
        annihilators = [
            [evaluate_scalar(to_fraction(c), precision) for c in inverse * sympy.Matrix(n)]
            for n in certificates
        ]
    else:
        with mp.workprec(precision + 32):
            lattice = mp.matrix([[evaluate_scalar(c, precision + 32) for c in row] for row in lattice_rows])
            span = mp.matrix([[evaluate_scalar(c, precision + 32) for c in row] for row in subspace])
            inverse = mp.inverse(lattice)
            relative = span * inverse
        certificates = approximate_integer_kernel(relative, precision)
        with mp.workprec(precision):
            annihilators = [(inverse * mp.matrix(list(n))).T.tolist()[0] for n in certificates]

    kernel_roots = []
    for root, functionals in (root_functionals or {}).items():
        if all(_in_span(annihilators, f, precision) for f in functionals):
            kernel_roots.append(root)
    return ClosureResult(
        m - len(certificates),
        tuple(kernel_roots),
        tuple(certificates),
        tuple(tuple(row) for row in lattice_rows),
    )


def _place_functionals(field: NumberField) -> tuple[list[list[Fraction]], list[list[int]]]:
    """
    Returns, for each entry of the complex diagonal, the functionals giving
    log|t_i| and arg t_i (in turns) in log/angle coordinates.
    """
    r, s = field.signature
    k = r + s - 1
    m = k + s
    weights = [1] * r + [2] * s
    logs = []
    for place in range(r + s):
        if place < k:
            logs.append([Fraction(int(c == place)) for c in range(m)])
        else:
            logs.append(
                [Fraction(-weights[c], weights[place]) if c < k else Fraction(0) for c in range(m)]
            )
    entry_logs, entry_angles = [], []
    for place in range(r):
        entry_logs.append(logs[place])
        entry_angles.append([0] * m)
    for j in range(s):
        for sign in (1, -1):
            entry_logs.append(logs[r + j])
            entry_angles.append([sign * int(c == k + j) for c in range(m)])
    return entry_logs, entry_angles


def _angle_basis(
    torsion: Sequence[FieldElement], r: int, s: int, d: int, precision: int
) -> list[list[Fraction]]:
    """
    Returns a basis of the angle lattice Z^s + sum_zeta Z * arg(zeta) / 2 pi
    over the roots of unity zeta, in turns.
    """
    if not torsion:
        return [[Fraction(int(i == j)) for j in range(s)] for i in range(s)]
    order = root_of_unity_exponent(d)
    generators = [[order * int(i == j) for j in range(s)] for i in range(s)]
    with mp.workprec(precision):
        for zeta in torsion:
            turns = [mp.arg(z) / (2 * mp.pi) for z in zeta.embeddings(precision)[r:]]
            generators.append([int(mp.nint(order * t)) % order for t in turns])
    hnf = fmpz_mat(generators).hnf().tolist()
    return [[Fraction(int(c), order) for c in row] for row in hnf if any(int(c) for c in row)]


def torus_orbit_closure(
    field: NumberField,
    kl: KLattice,
    units: UnitGroupData,
    direction: Optional[TracelessDiag] = None,
    precision: int = DEFAULT_PRECISION,
) -> ClosureResult:
    """
    Computes the closure of A_{r,s} x_Lambda (or of a one-parameter
    direction) inside the compact torus orbit.

    The torus orbit is R^{r+s-1} x T^s modulo the log/angle lattice of the
    units and the roots of unity; coordinates are labeled by the roots of
    the complex diagonal so the result reports which characters are
    trivial on the closure.

    Raises:
        PreconditionViolated: If the unit rank is below r + s - 1 or the
            split group is trivial.
    """
    r, s = field.signature
    k = r + s - 1
    m = k + s
    if k == 0:
        raise PreconditionViolated("The split torus is trivial for this signature.")
    if units.rank < k:
        raise PreconditionViolated(f"Unit rank {units.rank} < {k}; the torus orbit is not certified.")

    rows = []
    with mp.workprec(precision):
        for g in units.generators:
            values = g.embeddings(precision)
            logs = [mp.log(abs(z)) for z in values]
            angles = [mp.frac(mp.arg(z) / (2 * mp.pi)) for z in values[r:]]
            rows.append(logs[:k] + angles)
    for angles in _angle_basis(units.torsion, r, s, field.degree, precision):
        rows.append([0] * k + angles)

    if direction is None:
        subspace = [[int(c == i) for c in range(m)] for i in range(k)]
    else:
        if direction.dimension != field.degree:
            raise DimensionMismatch(f"Direction must have {field.degree} entries.")
        entries = list(direction.entries)
        places = entries[:r] + [entries[r + 2 * j] for j in range(s)]
        for j in range(s):
            if entries[r + 2 * j] != entries[r + 2 * j + 1]:
                raise PreconditionViolated("A split direction has equal entries on each complex block.")
        subspace = [places[:k] + [0] * s]

    entry_logs, entry_angles = _place_functionals(field)
    d = field.degree
    functionals = {}
    for root in root_order(d):
        a, b = root.i - 1, root.j - 1
        functionals[root] = [
            [x - y for x, y in zip(entry_logs[a], entry_logs[b])],
            [x - y for x, y in zip(entry_angles[a], entry_angles[b])],
        ]
    return subspace_closure(rows, subspace, functionals, precision)


def parabolic_check(g: Any, k: int, sign: str, precision: int = DEFAULT_PRECISION) -> bool:
    """
    Tests membership in the parabolic subgroup P_k^+ (lower-left block zero)
    or P_k^- (upper-right block zero).
    """
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}.")
    with mp.workprec(precision):
        matrix = g if isinstance(g, mp.matrix) else mp.matrix(
            [[evaluate_scalar(c, precision) for c in row] for row in g]
        )
        d = matrix.rows
        if not 1 <= k <= d - 1:
            raise BadIndex(f"k must lie in [1, {d - 1}], got {k}.")
        size = max(mp.mpf(1), max(abs(matrix[i, j]) for i in range(d) for j in range(d)))
        tolerance = mp.ldexp(size, -(precision // 2))
        if sign == "+":
            block = [matrix[i, j] for i in range(k, d) for j in range(k)]
        else:
            block = [matrix[i, j] for i in range(k) for j in range(k, d)]
        return all(abs(c) <= tolerance for c in block)
