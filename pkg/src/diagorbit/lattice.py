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
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np
import sympy
from flint import fmpz_mat
from mpmath import iv, mp, mpf

from .arith import DEFAULT_PRECISION, evaluate_scalar, to_fraction
from .errors import DimensionMismatch, DimensionTooLarge, EnumerationBudgetExceeded, SingularBasis

logger = logging.getLogger(__name__)

MAX_ENUMERATION_DIMENSION = 6
DEFAULT_NODE_BUDGET = 2_000_000

# gamma_d^d for the Hermite constants gamma_d, d <= 6.
HERMITE_POWERS = {
    1: Fraction(1),
    2: Fraction(4, 3),
    3: Fraction(2),
    4: Fraction(4),
    5: Fraction(8),
    6: Fraction(64, 3),
}

IntMatrix = tuple[tuple[int, ...], ...]


def _identity(d: int) -> IntMatrix:
    return tuple(tuple(int(i == j) for j in range(d)) for i in range(d))


def _int_matmul(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    n, m, k = len(a), len(b), len(b[0])
    return tuple(
        tuple(sum(a[i][t] * b[t][j] for t in range(m)) for j in range(k)) for i in range(n)
    )


def _int_inverse_transpose(a: IntMatrix) -> IntMatrix:
    inverse = sympy.Matrix(a).inv()
    d = len(a)
    return tuple(tuple(int(inverse[j, i]) for j in range(d)) for i in range(d))


def _bits(matrix: Sequence[Sequence[int]]) -> int:
    return max((abs(c) for row in matrix for c in row), default=1).bit_length()


class ExactMatrix:
    """
    A square matrix whose entries can be re-evaluated at any precision.

    Entries may be ints, Fractions, frozen mpf values, or any object with an
    `evaluate(precision)` method such as an AlgebraicNumber.
    """

    def __init__(self, rows: Sequence[Sequence[Any]]) -> None:
        rows = tuple(tuple(row) for row in rows)
        if not rows or any(len(row) != len(rows) for row in rows):
            raise ValueError(f"Expected a square matrix, got {len(rows)} rows.")
        self.__rows = rows

    @property
    def rows(self) -> tuple[tuple[Any, ...], ...]:
        return self.__rows

    @property
    def dimension(self) -> int:
        return len(self.__rows)

    def is_rational(self) -> bool:
        return all(isinstance(c, (int, Fraction)) for row in self.__rows for c in row)

    def evaluate(self, precision: int) -> mp.matrix:
        with mp.workprec(precision):
            return mp.matrix(
                [[evaluate_scalar(c, precision) for c in row] for row in self.__rows]
            )

    def dual(self) -> "ExactMatrix":
        """Returns the inverse transpose, exactly when all entries are rational."""
        if self.is_rational():
            inverse = sympy.Matrix(
                [[sympy.Rational(c.numerator, c.denominator) if isinstance(c, Fraction) else c
                  for c in row] for row in self.__rows]
            )
            if inverse.det() == 0:
                raise SingularBasis("Generator matrix is singular.")
            inverse = inverse.inv()
            d = self.dimension
            return ExactMatrix(
                [[to_fraction(inverse[j, i]) for j in range(d)] for i in range(d)]
            )
        return DualMatrix(self)


class DualMatrix(ExactMatrix):
    """The inverse transpose of an ExactMatrix, evaluated on demand."""

    def __init__(self, base: ExactMatrix) -> None:
        super().__init__(base.rows)
        self.__base = base

    def evaluate(self, precision: int) -> mp.matrix:
        with mp.workprec(precision + 32):
            matrix = self.__base.evaluate(precision + 32)
            if mp.det(matrix) == 0:
                raise SingularBasis("Generator matrix is singular.")
            result = mp.inverse(matrix).T
        with mp.workprec(precision):
            return result.apply(lambda v: +v)

    def dual(self) -> ExactMatrix:
        return self.__base


@dataclass(frozen=True, eq=False)
class Provenance:
    """
    How a basis was built: diag(e^log_diag) * left * generators * transform.

    `transform` is an exact unimodular integer matrix, so lattice points can
    be recomputed from the generators at any precision.
    """

    generators: ExactMatrix
    left: Optional[mp.matrix] = None
    log_diag: Optional[tuple[mpf, ...]] = None
    transform: Optional[IntMatrix] = None

    @property
    def dimension(self) -> int:
        return self.generators.dimension

    def __reduce__(self) -> tuple:
        left = None if self.left is None else self.left.tolist()
        return (_restore_provenance, (self.generators, left, self.log_diag, self.transform))

    def unimodular(self) -> IntMatrix:
        return self.transform or _identity(self.dimension)

    def _apply_outer(self, vectors: mp.matrix, precision: int) -> mp.matrix:
        with mp.workprec(precision):
            if self.left is not None:
                vectors = self.left * vectors
            if self.log_diag is not None:
                for i, t in enumerate(self.log_diag):
                    factor = mp.exp(t)
                    for j in range(vectors.cols):
                        vectors[i, j] *= factor
            return vectors

    def evaluate(self, precision: int) -> mp.matrix:
        transform = self.unimodular()
        guard = _bits(transform) + self.dimension.bit_length() + 16
        with mp.workprec(precision + guard):
            product = self.generators.evaluate(precision + guard)
            if self.transform is not None:
                product = product * mp.matrix([list(row) for row in transform])
            product = self._apply_outer(product, precision + guard)
        with mp.workprec(precision):
            return product.apply(lambda v: +v)

    def point(self, coeffs: Sequence[int], precision: int) -> list[mpf]:
        transform = self.unimodular()
        d = self.dimension
        n = [sum(transform[i][j] * int(coeffs[j]) for j in range(d)) for i in range(d)]
        guard = max(abs(c) for c in n).bit_length() + d.bit_length() + 16
        with mp.workprec(precision + guard):
            vector = self.generators.evaluate(precision + guard) * mp.matrix(n)
            vector = self._apply_outer(vector, precision + guard)
        with mp.workprec(precision):
            return [+vector[i] for i in range(d)]


def _restore_provenance(
    generators: ExactMatrix,
    left: Optional[list[list[mpf]]],
    log_diag: Optional[tuple[mpf, ...]],
    transform: Optional[IntMatrix],
) -> "Provenance":
    return Provenance(generators, None if left is None else mp.matrix(left), log_diag, transform)


class LatticeBasis:
    """
    A lattice in R^d spanned by the columns of a d x d basis matrix.

    The matrix is always derived from a Provenance, so every lattice point can
    be recomputed exactly from integer coefficients.
    """

    def __init__(self, provenance: Provenance, precision: int = DEFAULT_PRECISION) -> None:
        """
        Initializes the basis from its provenance.

        Args:
            provenance: The exact description of the basis.
            precision: The working precision in bits.
        """
        if provenance.dimension < 2:
            raise ValueError(f"Lattice dimension must be at least 2, got {provenance.dimension}.")
        self.__provenance = provenance
        self.__precision = precision
        self.__matrix = provenance.evaluate(precision)

    @classmethod
    def from_rows(
        cls, rows: Sequence[Sequence[Any]], precision: int = DEFAULT_PRECISION
    ) -> "LatticeBasis":
        """Builds a lattice from the rows of its basis matrix."""
        return cls(Provenance(ExactMatrix(rows)), precision)

    @classmethod
    def from_columns(
        cls, columns: Sequence[Sequence[Any]], precision: int = DEFAULT_PRECISION
    ) -> "LatticeBasis":
        """Builds a lattice from its basis vectors."""
        d = len(columns)
        return cls.from_rows([[columns[j][i] for j in range(d)] for i in range(d)], precision)

    @classmethod
    def standard(cls, d: int, precision: int = DEFAULT_PRECISION) -> "LatticeBasis":
        """Returns Z^d."""
        return cls.from_rows(_identity(d), precision)

    @property
    def dimension(self) -> int:
        return self.__provenance.dimension

    @property
    def precision(self) -> int:
        return self.__precision

    @property
    def provenance(self) -> Provenance:
        return self.__provenance

    @property
    def matrix(self) -> mp.matrix:
        return self.__matrix.copy()

    def column(self, j: int) -> list[mpf]:
        return [self.__matrix[i, j] for i in range(self.dimension)]

    def point(self, coeffs: Sequence[int]) -> list[mpf]:
        """Recomputes sum_j coeffs[j] * b_j from the provenance."""
        if len(coeffs) != self.dimension:
            raise ValueError(f"Expected {self.dimension} coefficients, got {len(coeffs)}.")
        return self.__provenance.point(coeffs, self.__precision)

    def with_transform(self, transform: Sequence[Sequence[int]]) -> "LatticeBasis":
        """Returns the same lattice with basis B * transform."""
        transform = tuple(tuple(int(c) for c in row) for row in transform)
        if abs(int(fmpz_mat([list(r) for r in transform]).det())) != 1:
            raise ValueError(f"Transform {transform} is not unimodular.")
        combined = _int_matmul(self.__provenance.unimodular(), transform)
        return LatticeBasis(replace(self.__provenance, transform=combined), self.__precision)

    def with_precision(self, precision: int) -> "LatticeBasis":
        return LatticeBasis(self.__provenance, precision)

    def determinant(self) -> mpf:
        with mp.workprec(self.__precision):
            return mp.det(self.__matrix)

    def __reduce__(self) -> tuple:
        return (LatticeBasis, (self.__provenance, self.__precision))

    def __repr__(self) -> str:
        return f"LatticeBasis(d={self.dimension}, precision={self.__precision})"


def lattice_point(x: LatticeBasis, coeffs: Sequence[int]) -> list[mpf]:
    """Returns the lattice point with the given coefficients in x's basis."""
    return x.point(coeffs)


def _check_nonsingular(x: LatticeBasis) -> mpf:
    with mp.workprec(x.precision):
        det = x.determinant()
        size = mp.mpf(1)
        for j in range(x.dimension):
            size *= mp.norm(x.column(j))
        if det == 0 or abs(det) <= mp.ldexp(size, -(x.precision // 2)):
            raise SingularBasis(f"Basis is singular (det = {mp.nstr(det, 10)}).")
        return det


def dual(x: LatticeBasis) -> LatticeBasis:
    """
    Returns the dual lattice, spanned by the columns of the inverse transpose.

    Args:
        x: A nonsingular lattice.

    Returns:
        The dual lattice with the inverse-transpose provenance.

    Raises:
        SingularBasis: If x is singular.
    """
    _check_nonsingular(x)
    prov = x.provenance
    left = None
    if prov.left is not None:
        with mp.workprec(x.precision + 32):
            left = mp.inverse(prov.left).T
    log_diag = None
    if prov.log_diag is not None:
        log_diag = tuple(-t for t in prov.log_diag)
    transform = None
    if prov.transform is not None:
        transform = _int_inverse_transpose(prov.transform)
    return LatticeBasis(
        Provenance(prov.generators.dual(), left, log_diag, transform), x.precision
    )


def shift_log_diag(x: LatticeBasis, shifts: Sequence[Any]) -> LatticeBasis:
    """Multiplies row i of the basis by e^shifts[i], keeping the provenance."""
    prov = x.provenance
    with mp.workprec(x.precision + 32):
        current = prov.log_diag or tuple(mp.mpf(0) for _ in range(x.dimension))
        updated = tuple(
            a + evaluate_scalar(b, x.precision + 32) for a, b in zip(current, shifts)
        )
    return LatticeBasis(replace(prov, log_diag=updated), x.precision)


def left_multiply(x: LatticeBasis, g: mp.matrix) -> LatticeBasis:
    """Returns the lattice g x, folding any pending diagonal into the left factor."""
    prov = x.provenance
    d = x.dimension
    if g.rows != d or g.cols != d:
        raise DimensionMismatch(f"Expected a {d} x {d} matrix, got {g.rows} x {g.cols}.")
    with mp.workprec(x.precision + 32):
        left = g.copy()
        if prov.log_diag is not None:
            for j, t in enumerate(prov.log_diag):
                factor = mp.exp(t)
                for i in range(d):
                    left[i, j] *= factor
        if prov.left is not None:
            left = left * prov.left
    return LatticeBasis(replace(prov, left=left, log_diag=None), x.precision)


def normalize_covolume(x: LatticeBasis) -> LatticeBasis:
    """
    Scales the lattice to covolume one.

    Raises:
        SingularBasis: If x is singular.
    """
    det = _check_nonsingular(x)
    with mp.workprec(x.precision + 32):
        shift = -mp.log(abs(det)) / x.dimension
    return shift_log_diag(x, [shift] * x.dimension)


def _scaled_integer_rows(matrix: mp.matrix, precision: int) -> list[list[int]]:
    d = matrix.rows
    with mp.workprec(precision):
        largest = max(abs(matrix[i, j]) for i in range(d) for j in range(d))
        shift = precision - 32 - int(mp.mag(largest))
        return [
            [int(mp.nint(mp.ldexp(matrix[i, j], shift))) for i in range(d)] for j in range(d)
        ]


def reduce(x: LatticeBasis) -> tuple[LatticeBasis, IntMatrix]:
    """
    LLL-reduces the basis with parameter 0.99.

    The columns are scaled to integers, reduced with python-flint, and the
    exact unimodular transform is applied to the provenance. This repeats
    until the transform is the identity.

    Returns:
        The reduced basis and the transform V with reduced = x * V.
    """
    d = x.dimension
    total = _identity(d)
    current = x
    for _ in range(10):
        rows = _scaled_integer_rows(current.matrix, current.precision)
        _, step = fmpz_mat(rows).lll(transform=True, delta=0.99)
        step_rows = [[int(c) for c in row] for row in step.tolist()]
        # Row j of the flint transform combines the old columns into column j.
        v = tuple(tuple(step_rows[j][i] for j in range(d)) for i in range(d))
        if v == _identity(d):
            break
        total = _int_matmul(total, v)
        current = x.with_transform(total)
    logger.debug("Reduced %r with transform %s.", x, total)
    return current, total


@dataclass(frozen=True)
class MinimaReport:
    """Successive minima with integer witnesses in the input basis."""

    minima: tuple[mpf, ...]
    witnesses: tuple[tuple[int, ...], ...]
    radius: mpf
    enclosures: tuple[tuple[mpf, mpf], ...]

    @property
    def systole(self) -> mpf:
        return self.minima[0]


def _gram_schmidt(matrix: mp.matrix) -> tuple[list[list[mpf]], list[mpf]]:
    d = matrix.rows
    columns = [[matrix[i, j] for i in range(d)] for j in range(d)]
    stars: list[list[mpf]] = []
    mu = [[mp.mpf(0)] * d for _ in range(d)]
    squares: list[mpf] = []
    for i in range(d):
        vector = list(columns[i])
        for j in range(i):
            mu[i][j] = mp.fdot(columns[i], stars[j]) / squares[j]
            vector = [a - mu[i][j] * b for a, b in zip(vector, stars[j])]
        stars.append(vector)
        squares.append(mp.fdot(vector, vector))
    return mu, squares


def _enumerate(
    matrix: mp.matrix, radius_sq: mpf, budget: int
) -> list[tuple[mpf, tuple[int, ...]]]:
    """Fincke-Pohst enumeration of all nonzero points of norm^2 <= radius_sq."""
    d = matrix.rows
    mu, squares = _gram_schmidt(matrix)
    coeffs = [0] * d
    found: list[tuple[mpf, tuple[int, ...]]] = []
    nodes = 0

    def _visit(level: int, partial: mpf) -> None:
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise EnumerationBudgetExceeded(
                f"Enumeration exceeded {budget} nodes in dimension {d}."
            )
        center = -mp.fsum(mu[j][level] * coeffs[j] for j in range(level + 1, d))
        room = radius_sq - partial
        if room < 0:
            return
        width = mp.sqrt(room / squares[level])
        for c in range(int(mp.ceil(center - width)), int(mp.floor(center + width)) + 1):
            coeffs[level] = c
            value = partial + (c - center) ** 2 * squares[level]
            if value > radius_sq:
                continue
            if level == 0:
                if any(coeffs):
                    found.append((value, tuple(coeffs)))
            else:
                _visit(level - 1, value)
        coeffs[level] = 0

    _visit(d - 1, mp.mpf(0))
    if nodes > budget // 2:
        logger.debug("Enumeration used %d of %d nodes.", nodes, budget)
    return found


def sign_normalize(coeffs: Sequence[int]) -> tuple[int, ...]:
    """Flips the sign so the first nonzero coefficient is positive."""
    for c in coeffs:
        if c != 0:
            return tuple(coeffs) if c > 0 else tuple(-a for a in coeffs)
    return tuple(coeffs)


def _apply(transform: IntMatrix, coeffs: Sequence[int]) -> tuple[int, ...]:
    return tuple(sum(row[j] * coeffs[j] for j in range(len(coeffs))) for row in transform)


def _length_enclosure(vector: Sequence[mpf], precision: int) -> tuple[mpf, mpf]:
    old = iv.prec
    iv.prec = precision
    try:
        total = iv.mpf(0)
        for c in vector:
            error = mp.ldexp(abs(c) + 1, -(precision - 8))
            total += iv.mpf((c - error, c + error)) ** 2
        root = iv.sqrt(total)
        lower, upper = root._mpi_
    finally:
        iv.prec = old
    with mp.workprec(precision):
        return mp.make_mpf(lower), mp.make_mpf(upper)


def _candidates(
    x: LatticeBasis, budget: int, use_max: bool
) -> tuple[list[tuple[int, tuple[int, ...]]], mpf]:
    reduced, transform = reduce(x)
    matrix = reduced.matrix
    d = x.dimension
    with mp.workprec(x.precision):
        norms = [mp.fdot(reduced.column(j), reduced.column(j)) for j in range(d)]
        bound = max(norms) if use_max else min(norms)
        radius_sq = bound * (1 + mp.ldexp(1, -(x.precision // 2)))
        found = _enumerate(matrix, radius_sq, budget)
        keyed = {}
        for value, coeffs in found:
            original = sign_normalize(_apply(transform, coeffs))
            quantized = int(mp.nint(mp.ldexp(value, x.precision // 2)))
            keyed[original] = quantized
        ordered = sorted(
            ((q, c) for c, q in keyed.items()), key=lambda item: (item[0], tuple(-a for a in item[1]))
        )
        return ordered, mp.sqrt(radius_sq)


def _report(
    x: LatticeBasis, witnesses: Sequence[tuple[int, ...]], radius: mpf
) -> MinimaReport:
    minima, enclosures = [], []
    for coeffs in witnesses:
        vector = x.point(coeffs)
        with mp.workprec(x.precision):
            minima.append(mp.norm(vector))
        enclosures.append(_length_enclosure(vector, x.precision))
    return MinimaReport(tuple(minima), tuple(witnesses), radius, tuple(enclosures))


def _check_dimension(x: LatticeBasis) -> None:
    if x.dimension > MAX_ENUMERATION_DIMENSION:
        raise DimensionTooLarge(
            f"Enumeration supports d <= {MAX_ENUMERATION_DIMENSION}, got {x.dimension}."
        )


def shortest_vector(x: LatticeBasis, node_budget: int = DEFAULT_NODE_BUDGET) -> MinimaReport:
    """
    Computes the systole of x by enumeration over an LLL-reduced basis.

    Among vectors of minimal length the witness is the one whose
    sign-normalized coefficients are lexicographically largest.

    Args:
        x: The lattice, d <= 6.
        node_budget: The maximum number of enumeration nodes.

    Returns:
        A MinimaReport holding lambda_1 only.

    Raises:
        DimensionTooLarge: If d > 6.
        EnumerationBudgetExceeded: If the enumeration tree is too large.
    """
    _check_dimension(x)
    ordered, radius = _candidates(x, node_budget, use_max=False)
    return _report(x, [ordered[0][1]], radius)


def _lagrange_gauss(x: LatticeBasis) -> list[tuple[int, ...]]:
    with mp.workprec(x.precision):
        b1, b2 = x.column(0), x.column(1)
        c1, c2 = [1, 0], [0, 1]
        while True:
            if mp.fdot(b1, b1) > mp.fdot(b2, b2):
                b1, b2, c1, c2 = b2, b1, c2, c1
            mu = int(mp.nint(mp.fdot(b1, b2) / mp.fdot(b1, b1)))
            if mu == 0:
                break
            b2 = [a - mu * b for a, b in zip(b2, b1)]
            c2 = [a - mu * b for a, b in zip(c2, c1)]
    return [sign_normalize(c1), sign_normalize(c2)]


def successive_minima(x: LatticeBasis, node_budget: int = DEFAULT_NODE_BUDGET) -> MinimaReport:
    """
    Computes all d successive minima with linearly independent witnesses.

    In dimension two the Lagrange-Gauss reduction is used, so the two
    witnesses always form a basis.

    Raises:
        DimensionTooLarge: If d > 6.
        EnumerationBudgetExceeded: If the enumeration tree is too large.
    """
    _check_dimension(x)
    if x.dimension == 2:
        witnesses = _lagrange_gauss(x)
        with mp.workprec(x.precision):
            radius = max(mp.norm(x.point(c)) for c in witnesses)
        return _report(x, witnesses, radius)

    ordered, radius = _candidates(x, node_budget, use_max=True)
    chosen: list[tuple[int, ...]] = []
    for _, coeffs in ordered:
        if fmpz_mat([list(c) for c in chosen + [coeffs]]).rank() == len(chosen) + 1:
            chosen.append(coeffs)
            if len(chosen) == x.dimension:
                break
    return _report(x, chosen, radius)


def hermite_bound(d: int) -> mpf:
    """Returns sqrt(gamma_d), the sharp bound on lambda_1 of a covolume-one lattice."""
    if d not in HERMITE_POWERS:
        raise DimensionTooLarge(f"Hermite constants are known for d <= 6, got {d}.")
    power = HERMITE_POWERS[d]
    return mp.root(mp.mpf(power.numerator) / power.denominator, 2 * d)


def gram_determinant(x: LatticeBasis) -> Fraction:
    """Returns det(B^T B) computed exactly from the binary basis entries."""
    d = x.dimension
    matrix = x.matrix
    values = [[to_fraction(matrix[i, j]) for j in range(d)] for i in range(d)]
    entries = sympy.Matrix(
        [[sympy.Rational(v.numerator, v.denominator) for v in row] for row in values]
    )
    return to_fraction(sympy.Rational((entries.T * entries).det()))


def frobenius_distance(x: LatticeBasis, y: LatticeBasis) -> mpf:
    """Returns the Frobenius distance between the two basis matrices."""
    with mp.workprec(min(x.precision, y.precision)):
        return mp.mnorm(x.matrix - y.matrix, "F")


def brute_force_minimum(x: LatticeBasis, box: int = 20) -> tuple[mpf, tuple[int, ...]]:
    """
    Finds the systole by exhaustive search over |c_i| <= box.

    Uses numpy integer arithmetic for integral bases and doubles otherwise,
    then recomputes the shortest candidates at full precision.
    """
    d = x.dimension
    matrix = x.matrix
    integral = all(mp.isint(matrix[i, j]) for i in range(d) for j in range(d))
    dtype = np.int64 if integral else np.float64
    basis = np.array(
        [[int(matrix[i, j]) if integral else float(matrix[i, j]) for j in range(d)] for i in range(d)],
        dtype=dtype,
    )
    axis = np.arange(-box, box + 1, dtype=dtype)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    grid = grid[np.any(grid != 0, axis=1)]
    norms = ((grid @ basis.T) ** 2).sum(axis=1)
    best = norms.min()
    slack = 0 if integral else best * 1e-9
    shortlist = grid[norms <= best + slack]
    candidates = []
    for row in shortlist:
        coeffs = sign_normalize([int(c) for c in row])
        with mp.workprec(x.precision):
            candidates.append((mp.norm(x.point(coeffs)), coeffs))
    length = min(c[0] for c in candidates)
    with mp.workprec(x.precision):
        tied = [c for l, c in candidates if l <= length * (1 + mp.ldexp(1, -(x.precision // 2)))]
    return length, max(tied)
