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

import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import TYPE_CHECKING, Any, Optional, Sequence, Union
from warnings import warn

import numpy as np
import sympy
from flint import fmpz_mat
from mpmath import mp, mpc, mpf

from .arith import (
    DEFAULT_PRECISION,
    AlgebraicNumber,
    IntPoly,
    nf_arith,
    poly_roots,
    primitive_poly,
    to_fraction,
)
from .errors import DependentBasis, PreconditionViolated, ShapeViolation
from .lattice import ExactMatrix, LatticeBasis, Provenance, normalize_covolume

if TYPE_CHECKING:
    from .runner import ExperimentRunner

logger = logging.getLogger(__name__)

MAX_UNITS_FOR_REDUCTION = 32


@lru_cache(maxsize=None)
def _real_handles(minpoly: IntPoly) -> tuple[AlgebraicNumber, ...]:
    roots = poly_roots(minpoly, 64)
    return tuple(AlgebraicNumber(minpoly, lo, hi) for lo, hi in roots.real_intervals)


@lru_cache(maxsize=128)
def _roots_at(minpoly: IntPoly, precision: int) -> tuple[Union[mpf, mpc], ...]:
    reals = tuple(h.evaluate(precision) for h in _real_handles(minpoly))
    if len(reals) == len(minpoly) - 1:
        return reals
    complexes = poly_roots(minpoly, precision).roots[len(reals):]
    return reals + tuple(complexes)


@lru_cache(maxsize=4096)
def _embed(minpoly: IntPoly, coords: tuple[Fraction, ...], precision: int) -> tuple:
    roots = _roots_at(minpoly, precision)
    with mp.workprec(precision + 16):
        descending = [mp.mpf(c.numerator) / c.denominator for c in reversed(coords)]
        values = [mp.polyval(descending, root) for root in roots]
    with mp.workprec(precision):
        return tuple(+v for v in values)


class NumberField:
    """
    A number field Q(theta) given by the minimal polynomial of theta.

    The embeddings are fixed once: the r real roots in ascending order, then
    one root with positive imaginary part from each of the s complex pairs.
    """

    def __init__(self, minpoly: Sequence[int]) -> None:
        """
        Initializes the field.

        Args:
            minpoly: Integer coefficients of an irreducible polynomial,
                leading coefficient first.

        Raises:
            NotSquarefree: If the polynomial has repeated roots.
            RationalRootFound: If the polynomial has a rational root.
        """
        self.__minpoly = primitive_poly(minpoly)
        r = len(_real_handles(self.__minpoly))
        self.__signature = (r, (self.degree - r) // 2)

    @property
    def minpoly(self) -> IntPoly:
        return self.__minpoly

    @property
    def degree(self) -> int:
        return len(self.__minpoly) - 1

    @property
    def signature(self) -> tuple[int, int]:
        return self.__signature

    def roots(self, precision: int = DEFAULT_PRECISION) -> tuple[Union[mpf, mpc], ...]:
        """Returns the roots of the minimal polynomial in embedding order."""
        return _roots_at(self.__minpoly, precision)

    def element(self, coords: Sequence[Any]) -> "FieldElement":
        return FieldElement(self, tuple(to_fraction(c) for c in coords))

    def one(self) -> "FieldElement":
        return self.element([1] + [0] * (self.degree - 1))

    def generator(self) -> "FieldElement":
        return self.element([0, 1] + [0] * (self.degree - 2))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NumberField):
            return NotImplemented
        return self.__minpoly == other.minpoly

    def __hash__(self) -> int:
        return hash(self.__minpoly)

    def __repr__(self) -> str:
        return f"NumberField({list(self.__minpoly)})"


@dataclass(frozen=True)
class FieldElement:
    """An element of a number field in power-basis coordinates (constant first)."""

    field: NumberField
    coords: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if len(self.coords) != self.field.degree:
            raise ValueError(
                f"Expected {self.field.degree} coordinates, got {len(self.coords)}."
            )

    def _coerce(self, other: Any) -> "FieldElement":
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise ValueError("Elements belong to different fields.")
            return other
        return self.field.one() * to_fraction(other)

    def __add__(self, other: Any) -> "FieldElement":
        other = self._coerce(other)
        return FieldElement(self.field, tuple(a + b for a, b in zip(self.coords, other.coords)))

    __radd__ = __add__

    def __neg__(self) -> "FieldElement":
        return FieldElement(self.field, tuple(-a for a in self.coords))

    def __sub__(self, other: Any) -> "FieldElement":
        return self + (-self._coerce(other))

    def __mul__(self, other: Any) -> "FieldElement":
        if isinstance(other, (int, Fraction)):
            return FieldElement(self.field, tuple(a * other for a in self.coords))
        other = self._coerce(other)
        product = nf_arith(self.field.minpoly, "mul", self.coords, other.coords)
        return FieldElement(self.field, product)  # type: ignore[arg-type]

    __rmul__ = __mul__

    def inverse(self) -> "FieldElement":
        inverse = nf_arith(self.field.minpoly, "inv", self.coords)
        return FieldElement(self.field, inverse)  # type: ignore[arg-type]

    def __pow__(self, exponent: int) -> "FieldElement":
        base = self if exponent >= 0 else self.inverse()
        result = self.field.one()
        for _ in range(abs(exponent)):
            result = result * base
        return result

    def norm(self) -> Fraction:
        return nf_arith(self.field.minpoly, "norm", self.coords)  # type: ignore[return-value]

    def trace(self) -> Fraction:
        return nf_arith(self.field.minpoly, "trace", self.coords)  # type: ignore[return-value]

    def is_zero(self) -> bool:
        return not any(self.coords)

    def embeddings(self, precision: int = DEFAULT_PRECISION) -> tuple[Union[mpf, mpc], ...]:
        """Returns sigma_1(x), ..., sigma_{r+s}(x) in embedding order."""
        return _embed(self.field.minpoly, self.coords, precision)

    def __str__(self) -> str:
        terms = []
        for i, c in enumerate(self.coords):
            if c:
                terms.append(f"{c}" if i == 0 else f"{c}*t^{i}")
        return " + ".join(terms) or "0"


def _to_sympy(values: Sequence[Sequence[Fraction]]) -> sympy.Matrix:
    return sympy.Matrix(
        [[sympy.Rational(c.numerator, c.denominator) for c in row] for row in values]
    )


@dataclass(frozen=True)
class KLattice:
    """A full-rank Z-module in K spanned by `basis`."""

    field: NumberField
    basis: tuple[FieldElement, ...]

    def __post_init__(self) -> None:
        d = self.field.degree
        if len(self.basis) != d:
            raise DependentBasis(f"Expected {d} basis elements, got {len(self.basis)}.")
        if _to_sympy([b.coords for b in self.basis]).rank() < d:
            raise DependentBasis("Basis elements are linearly dependent over Q.")

    @classmethod
    def power_basis(cls, field: NumberField) -> "KLattice":
        """Returns Z[theta] with basis 1, theta, ..., theta^(d-1)."""
        d = field.degree
        return cls.from_rows(field, [[int(i == j) for j in range(d)] for i in range(d)])

    @classmethod
    def from_rows(cls, field: NumberField, rows: Sequence[Sequence[Any]]) -> "KLattice":
        return cls(field, tuple(field.element(row) for row in rows))

    def coordinate_matrix(self) -> sympy.Matrix:
        return _to_sympy([b.coords for b in self.basis])

    def coordinates(self, x: FieldElement) -> tuple[Fraction, ...]:
        """Returns the coordinates of x with respect to the lattice basis."""
        solution = _to_sympy([x.coords]) * self.coordinate_matrix().inv()
        return tuple(to_fraction(c) for c in solution)


class EmbeddingCoordinate:
    """One coordinate of the geometric embedding of an element."""

    def __init__(self, element: FieldElement, row: int) -> None:
        self.__element = element
        self.__row = row

    def evaluate(self, precision: int) -> mpf:
        return geometric_embedding(self.__element.field, self.__element, precision)[self.__row]


def geometric_embedding(
    field: NumberField, x: FieldElement, precision: int = DEFAULT_PRECISION
) -> list[mpf]:
    """
    Returns (sigma_1(x), ..., sigma_r(x), Re sigma_{r+1}(x), Im sigma_{r+1}(x), ...).
    """
    r, _ = field.signature
    values = x.embeddings(precision)
    result = [mp.mpf(v) for v in values[:r]]
    for z in values[r:]:
        result.extend([mp.re(z), mp.im(z)])
    return result


def psi_matrix(field: NumberField, x: FieldElement, precision: int = DEFAULT_PRECISION) -> mp.matrix:
    """
    Returns the block diagonal matrix of multiplication by x in embedding
    coordinates: real embeddings on the diagonal, 2 x 2 rotation-scaling
    blocks [[a, -b], [b, a]] for the complex ones.
    """
    r, _ = field.signature
    d = field.degree
    values = x.embeddings(precision)
    with mp.workprec(precision):
        matrix = mp.matrix(d, d)
        for i in range(r):
            matrix[i, i] = values[i]
        for k, z in enumerate(values[r:]):
            i = r + 2 * k
            matrix[i, i] = mp.re(z)
            matrix[i, i + 1] = -mp.im(z)
            matrix[i + 1, i] = mp.im(z)
            matrix[i + 1, i + 1] = mp.re(z)
        return matrix


def log_embedding(x: FieldElement, precision: int = DEFAULT_PRECISION) -> list[mpf]:
    """Returns (log|sigma_1(x)|, ..., log|sigma_{r+s}(x)|)."""
    with mp.workprec(precision):
        return [mp.log(abs(v)) for v in x.embeddings(precision)]


def embedding_matrix(
    field: NumberField, kl: KLattice, precision: int = DEFAULT_PRECISION
) -> mp.matrix:
    """Returns the matrix whose columns are the embeddings of the basis of kl."""
    columns = [geometric_embedding(field, b, precision) for b in kl.basis]
    d = field.degree
    with mp.workprec(precision):
        return mp.matrix([[columns[j][i] for j in range(d)] for i in range(d)])


def trace_form_discriminant(kl: KLattice) -> Fraction:
    """Returns det(Tr(a_i a_j)) for the basis a_i of kl."""
    basis = kl.basis
    gram = [[(a * b).trace() for b in basis] for a in basis]
    return to_fraction(_to_sympy(gram).det())


def discriminant_check(field: NumberField, kl: KLattice, precision: int = DEFAULT_PRECISION) -> bool:
    """Checks |det Phi| = 2^(-s) sqrt(|disc(kl)|) to 2^(-precision/2)."""
    _, s = field.signature
    disc = trace_form_discriminant(kl)
    with mp.workprec(precision):
        det = abs(mp.det(embedding_matrix(field, kl, precision)))
        expected = mp.sqrt(abs(mp.mpf(disc.numerator) / disc.denominator)) / 2**s
        return abs(det - expected) <= mp.ldexp(expected, -(precision // 2))


def lattice_from_basis(
    field: NumberField, kl: KLattice, precision: int = DEFAULT_PRECISION
) -> LatticeBasis:
    """
    Builds the unit-covolume lattice x_Lambda from the embeddings of kl.

    The lattice keeps the embedding coordinates as exact generators, so its
    points can be re-evaluated at any precision.
    """
    d = field.degree
    generators = ExactMatrix(
        [[EmbeddingCoordinate(kl.basis[j], i) for j in range(d)] for i in range(d)]
    )
    return normalize_covolume(LatticeBasis(Provenance(generators), precision))


def order_elements_check(field: NumberField, kl: KLattice, x: FieldElement) -> bool:
    """True iff x * kl is contained in kl, decided exactly."""
    for b in kl.basis:
        if any(c.denominator != 1 for c in kl.coordinates(x * b)):
            return False
    return True


def order_basis(field: NumberField, kl: KLattice) -> tuple[FieldElement, ...]:
    """
    Returns a Z-basis of the multiplier ring {x in K : x * kl in kl}.

    The ring is the dual of the lattice spanned by the columns of the
    multiplication matrices written in the basis of kl, computed through a
    Hermite normal form.
    """
    d = field.degree
    coords_inverse = kl.coordinate_matrix().inv()
    powers = [field.element([int(i == j) for j in range(d)]) for i in range(d)]
    blocks = []
    for beta in kl.basis:
        multiplication = _to_sympy([(p * beta).coords for p in powers])
        blocks.append(multiplication * coords_inverse)
    combined = sympy.Matrix.hstack(*blocks)
    denominator = 1
    for c in combined:
        denominator = math.lcm(denominator, int(sympy.Rational(c).q))
    integral = (combined * denominator).T
    hnf = fmpz_mat([[int(c) for c in integral.row(i)] for i in range(integral.rows)]).hnf()
    rows = [[int(c) for c in row] for row in hnf.tolist() if any(int(c) for c in row)]
    spanning = sympy.Matrix(rows) / denominator
    dual_rows = spanning.inv().T

    change = dual_rows * coords_inverse
    if all(c.is_integer for c in change) and abs(change.det()) == 1:
        return kl.basis
    return tuple(
        field.element([to_fraction(c) for c in dual_rows.row(i)]) for i in range(d)
    )


@dataclass(frozen=True)
class UnitGroupData:
    """
    Independent generators of the units found by a bounded search, and the
    roots of unity other than 1 met by the same search.
    """

    generators: tuple[FieldElement, ...]
    log_matrix: tuple[tuple[mpf, ...], ...]
    rank: int
    height_bound: int
    expected_rank: int
    precision: int
    torsion: tuple[FieldElement, ...] = ()

    @property
    def complete(self) -> bool:
        return self.rank == self.expected_rank


def _scan_unit_box(task: tuple[np.ndarray, np.ndarray, list[int], int]) -> list[tuple[int, ...]]:
    """
    Scans coefficient vectors with the given first coordinates and keeps
    those whose double precision norm is close to one.
    """
    values, weights, firsts, height = task
    d = values.shape[0]
    axis = np.arange(-height, height + 1, dtype=np.int64)
    if d > 1:
        rest = np.stack(np.meshgrid(*([axis] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
    else:
        rest = np.zeros((1, 0), dtype=np.int64)
    found = set()
    for first in firsts:
        coeffs = np.column_stack([np.full(len(rest), first, dtype=np.int64), rest])
        images = coeffs.astype(np.float64) @ values
        with np.errstate(divide="ignore"):
            logs = np.log(np.abs(images))
        log_norm = (logs * weights).sum(axis=1)
        mask = np.isfinite(log_norm) & (np.abs(log_norm) < 1e-6)
        mask &= ~np.all(np.abs(logs) < 1e-9, axis=1)
        for row in coeffs[mask]:
            row = [int(c) for c in row]
            lead = next(c for c in row if c != 0)
            found.add(tuple(c if lead > 0 else -c for c in row))
    return sorted(found)


def _combine(basis: Sequence[FieldElement], coeffs: Sequence[int]) -> FieldElement:
    total = basis[0] * 0
    for c, b in zip(coeffs, basis):
        if c:
            total = total + b * c
    return total


def unit_search(
    field: NumberField,
    kl: KLattice,
    height_bound: int,
    precision: int = DEFAULT_PRECISION,
    runner: Optional["ExperimentRunner"] = None,
    strict: bool = False,
) -> UnitGroupData:
    """
    Finds units of the order of kl with coefficients bounded by height_bound.

    Candidates come from a double precision scan of the box [-H, H]^d in the
    order basis and are confirmed by an exact norm computation. Units with a
    negative real embedding are squared. An LLL reduction of the log vectors
    then extracts independent generators of the subgroup found.

    Args:
        field: The number field.
        kl: The lattice whose order is searched.
        height_bound: The coefficient bound H >= 1.
        precision: The working precision in bits.
        runner: Optional runner that scans slices of the box in parallel.
        strict: If True, raises PreconditionViolated instead of warning when
            the rank found is below r + s - 1.

    Returns:
        The generators, their log embeddings and the rank found.
    """
    if height_bound < 1:
        raise ValueError(f"height_bound must be at least 1, got {height_bound}.")
    r, s = field.signature
    expected = r + s - 1
    if expected == 0:
        return UnitGroupData((), (), 0, height_bound, 0, precision)

    omega = order_basis(field, kl)
    values = np.array([[complex(z) for z in w.embeddings(64)] for w in omega])
    weights = np.array([1.0] * r + [2.0] * s)
    firsts = list(range(-height_bound, height_bound + 1))
    workers = runner.workers if runner is not None else 1
    tasks = [
        (values, weights, [int(c) for c in chunk], height_bound)
        for chunk in np.array_split(np.array(firsts), max(1, workers))
        if len(chunk)
    ]
    if runner is not None:
        results = runner.map(_scan_unit_box, tasks)
    else:
        results = [_scan_unit_box(task) for task in tasks]
    candidates = sorted(set().union(*[set(result) for result in results]))
    logger.debug("Unit scan of height %d found %d candidates.", height_bound, len(candidates))

    units = []
    torsion: dict[tuple[Fraction, ...], FieldElement] = {}
    torsion_floor = mp.ldexp(1, -(precision // 4))
    for coeffs in candidates:
        u = _combine(omega, coeffs)
        if abs(u.norm()) != 1:
            continue
        if r and any(v < 0 for v in u.embeddings(64)[:r]):
            u = u * u
        logs = log_embedding(u, precision)
        if max(abs(l) for l in logs) < torsion_floor:
            if u != field.one():
                torsion.setdefault(u.coords, u)
            continue
        units.append((float(sum(abs(l) for l in logs)), coeffs, u, logs))
    units.sort(key=lambda item: (item[0], item[1]))
    units = units[:MAX_UNITS_FOR_REDUCTION]

    generators = _independent_generators([(u, logs) for _, _, u, logs in units], expected, precision)
    log_matrix = tuple(tuple(log_embedding(g, precision)) for g in generators)
    rank = len(generators)
    if rank < expected:
        message = (
            f"Unit search with height bound {height_bound} found rank {rank} < "
            f"r + s - 1 = {expected}; increase the bound."
        )
        if strict:
            raise PreconditionViolated(message)
        warn(message)
    return UnitGroupData(
        generators, log_matrix, rank, height_bound, expected, precision, tuple(torsion[c] for c in sorted(torsion))
    )


def _independent_generators(
    units: Sequence[tuple[FieldElement, list[mpf]]], columns: int, precision: int
) -> tuple[FieldElement, ...]:
    if not units:
        return ()
    m = len(units)
    scale_bits = precision // 2
    with mp.workprec(precision):
        rows = [
            [int(i == j) for j in range(m)]
            + [int(mp.nint(mp.ldexp(logs[k], scale_bits))) for k in range(columns)]
            for i, (_, logs) in enumerate(units)
        ]
    reduced = fmpz_mat(rows).lll().tolist()
    threshold = 1 << (precision // 4)
    generators = []
    for row in reduced:
        row = [int(c) for c in row]
        if max(abs(c) for c in row[m:]) <= threshold:
            continue
        element = units[0][0].field.one()
        for exponent, (u, _) in zip(row[:m], units):
            if exponent:
                element = element * u**exponent
        generators.append(element)
    return tuple(generators[:columns])


def stabilizer_matrices(
    field: NumberField, kl: KLattice, units: UnitGroupData
) -> list[tuple[tuple[int, ...], ...]]:
    """
    Returns, for each generator u, the integer matrix M with
    psi(u) * Phi = Phi * M, where Phi is the embedding matrix of kl.

    Raises:
        PreconditionViolated: If a generator does not preserve kl.
    """
    d = field.degree
    matrices = []
    for u in units.generators:
        rows = [kl.coordinates(u * b) for b in kl.basis]
        if any(c.denominator != 1 for row in rows for c in row):
            raise PreconditionViolated(f"Unit {u} does not preserve the lattice.")
        matrices.append(tuple(tuple(int(rows[j][i]) for j in range(d)) for i in range(d)))
    return matrices


class Compactness(str, Enum):
    CERTIFIED_COMPACT = "certified_compact"
    INCONCLUSIVE = "inconclusive"


class CMVerdict(str, Enum):
    YES = "yes"
    NO = "no"
    INCONCLUSIVE = "inconclusive"


def torus_orbit_compactness(
    field: NumberField, kl: KLattice, units: UnitGroupData
) -> Compactness:
    """
    Certifies that the torus orbit of x_Lambda is compact.

    The log matrix (last column dropped) is replaced by a dyadic rational
    approximation; its exact determinant is compared with a perturbation
    bound covering the approximation error.
    """
    k = units.expected_rank
    if k == 0:
        return Compactness.CERTIFIED_COMPACT
    if units.rank < k:
        return Compactness.INCONCLUSIVE
    precision = units.precision
    bits = precision // 2
    with mp.workprec(precision):
        rows = [[int(mp.nint(mp.ldexp(row[j], bits))) for j in range(k)] for row in units.log_matrix]
        largest = max(abs(row[j]) for row in units.log_matrix for j in range(k))
    det = Fraction(int(fmpz_mat(rows).det()), 2 ** (bits * k))
    delta = Fraction(1, 2**bits)
    size = to_fraction(mp.mpf(largest)) + delta + 1
    bound = math.factorial(k) * k * delta * size ** (k - 1)
    logger.debug("Regulator approximation %s against bound %s.", float(det), float(bound))
    if abs(det) > bound:
        return Compactness.CERTIFIED_COMPACT
    return Compactness.INCONCLUSIVE


def root_of_unity_exponent(d: int) -> int:
    orders = [n for n in range(1, 2 * d * d + 3) if d % int(sympy.totient(n)) == 0]
    result = 1
    for n in orders:
        result = math.lcm(result, n)
    return result


def is_cm(field: NumberField, units: UnitGroupData) -> CMVerdict:
    """
    Decides whether the field is CM from the units found.

    A totally complex field is CM iff its totally real units have rank
    s - 1. The W-th powers of the generators span a subgroup of full rank,
    where W is the lcm of the orders n with phi(n) | d, so the real rank is
    the number of generators u with u^W totally real, i.e. with
    W * arg(sigma_j(u)) / pi an integer for every embedding. In a CM field
    u^2 is a root of unity times a real unit, and W is even, so every
    generator counts.
    """
    r, s = field.signature
    d = field.degree
    if r > 0 or d % 2:
        return CMVerdict.NO
    if s == 1:
        return CMVerdict.YES
    if units.rank < s - 1:
        warn(
            f"CM test inconclusive: unit rank {units.rank} < {s - 1} at height "
            f"{units.height_bound}."
        )
        return CMVerdict.INCONCLUSIVE
    real_rank = real_unit_rank(units, root_of_unity_exponent(d))
    if real_rank is None:
        warn("CM test inconclusive: unit arguments are too close to call.")
        return CMVerdict.INCONCLUSIVE
    return CMVerdict.YES if real_rank == s - 1 else CMVerdict.NO


def real_unit_rank(units: UnitGroupData, exponent: int) -> Optional[int]:
    """
    Counts the generators whose exponent-th power is totally real.

    Returns:
        The count, or None when some argument is neither clearly a multiple
        of pi / exponent nor clearly away from one.
    """
    precision = units.precision
    count = 0
    with mp.workprec(precision):
        close = mp.ldexp(1, -(precision // 4))
        far = mp.ldexp(1, -(precision // 8))
        for u in units.generators:
            values = [exponent * mp.arg(z) / mp.pi for z in u.embeddings(precision)]
            worst = max(abs(value - mp.nint(value)) for value in values)
            if close < worst <= far:
                return None
            count += worst <= close
    logger.debug("Real unit rank %d of %d generators.", count, len(units.generators))
    return count


@dataclass(frozen=True)
class Factorization:
    """g_v = c * p * Phi with p in the weak-stable parabolic subgroup."""

    c: mpf
    p: mp.matrix
    phi: mp.matrix
    g_v: mp.matrix


def theorem5_factor(
    field: NumberField, kl: KLattice, precision: int = DEFAULT_PRECISION
) -> Factorization:
    """
    Factors the shear g_v built from the first embedding of the basis as
    g_v = c * p * Phi.

    Args:
        field: A field with at least one real embedding.
        kl: A lattice whose first basis element is 1.
        precision: The working precision in bits.

    Raises:
        PreconditionViolated: If the field is totally complex.
        ShapeViolation: If the first basis element is not 1, or p fails the
            block shape or determinant checks.
    """
    r, _ = field.signature
    d = field.degree
    if r == 0:
        raise PreconditionViolated("The factorization needs a real embedding.")
    if kl.basis[0] != field.one():
        raise ShapeViolation("The first basis element must be 1.")
    phi = embedding_matrix(field, kl, precision + 32)
    with mp.workprec(precision + 32):
        g_v = mp.eye(d)
        for j in range(1, d):
            g_v[0, j] = phi[0, j]
        m = g_v * mp.inverse(phi)
        det = mp.det(m)
        if d % 2 == 0 and det < 0:
            raise ShapeViolation(
                f"det(g_v Phi^-1) = {mp.nstr(det, 10)} < 0 has no real root of even degree {d}."
            )
        c = mp.sign(det) * mp.root(abs(det), d)
        p = m / c
        tolerance = mp.ldexp(1, -(precision // 2))
        for j in range(1, d):
            if abs(p[0, j]) > tolerance:
                raise ShapeViolation(f"Entry p[0, {j}] = {mp.nstr(p[0, j], 10)} is not zero.")
        if abs(mp.det(p) - 1) > tolerance:
            raise ShapeViolation(f"det p = {mp.nstr(mp.det(p), 10)} is not one.")
    with mp.workprec(precision):
        return Factorization(
            +c, p.apply(lambda v: +v), phi.apply(lambda v: +v), g_v.apply(lambda v: +v)
        )
