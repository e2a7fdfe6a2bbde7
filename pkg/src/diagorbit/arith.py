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
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional, Sequence, Union

import sympy
from flint import fmpz_mat
from mpmath import libmp, mp, mpc, mpf
from sympy import QQ, CRootOf, Poly, minimal_polynomial
from sympy.parsing.sympy_parser import (
    convert_xor,
    implicit_multiplication_application,
    parse_expr,
    standard_transformations,
)

from .errors import (
    DivisionByZeroElement,
    NotSquarefree,
    PrecisionExhausted,
    RationalRootFound,
    UncertifiedInput,
)

logger = logging.getLogger(__name__)

DEFAULT_PRECISION = 256

IntPoly = tuple[int, ...]
Coords = tuple[Fraction, ...]

_T = sympy.Symbol("t")


def to_fraction(value: Any) -> Fraction:
    """
    Converts an exactly representable number to a Fraction.

    Binary floats and mpf values are converted exactly (no decimal rounding).

    Args:
        value: An int, Fraction, sympy Rational, decimal string or mpf.

    Returns:
        The exact rational value.

    Raises:
        ValueError: If the value has no exact rational representation.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, sympy.Rational):
        return Fraction(int(value.p), int(value.q))
    if isinstance(value, mpf):
        if not mp.isfinite(value):
            raise ValueError(f"Cannot convert non-finite value {value} to a rational.")
        man, exp = value.man_exp
        man, exp = int(man), int(exp)
        if value < 0:
            man = -man
        return Fraction(man) * Fraction(2) ** exp
    if isinstance(value, float):
        return Fraction(value)
    raise ValueError(f"Unsupported rational value: {value!r}")


def fraction_to_mpf(value: Fraction) -> mpf:
    """Rounds a Fraction to the current mpmath precision."""
    return mp.mpf(value.numerator) / value.denominator


def evaluate_scalar(value: Any, precision: int) -> Union[mpf, mpc]:
    """
    Evaluates an exact or frozen scalar at the given precision.

    Args:
        value: An int, Fraction, mpf, mpc, or any object exposing
            `evaluate(precision)` (e.g. an AlgebraicNumber).
        precision: The working precision in bits.

    Returns:
        The value rounded to `precision` bits.
    """
    with mp.workprec(precision):
        if isinstance(value, int):
            return mp.mpf(value)
        if isinstance(value, Fraction):
            return fraction_to_mpf(value)
        if isinstance(value, (mpf, mpc)):
            return +value
        if hasattr(value, "evaluate"):
            return +value.evaluate(precision)
        if isinstance(value, sympy.Rational):
            return mp.mpf(int(value.p)) / int(value.q)
        raise ValueError(f"Unsupported scalar: {value!r}")


def distance_to_integer(value: mpf) -> mpf:
    """Returns the distance from `value` to the nearest integer."""
    return abs(value - mp.nint(value))


def primitive_poly(coeffs: Sequence[int]) -> IntPoly:
    coeffs = [int(c) for c in coeffs]
    while coeffs and coeffs[0] == 0:
        coeffs.pop(0)
    if not coeffs:
        raise ValueError("The zero polynomial has no roots.")
    g = 0
    for c in coeffs:
        g = math.gcd(g, c)
    sign = -1 if coeffs[0] < 0 else 1
    return tuple(sign * c // g for c in coeffs)


def _poly_eval_exact(coeffs: Sequence[int], x: Fraction) -> Fraction:
    value = Fraction(0)
    for c in coeffs:
        value = value * x + c
    return value


def _sign(value: Fraction) -> int:
    return (value > 0) - (value < 0)


def _refine_real_root(
    coeffs: IntPoly, lower: Fraction, upper: Fraction, precision: int
) -> tuple[Fraction, Fraction]:
    """
    Shrinks an isolating interval of a simple real root to relative width
    2^(-precision).

    Newton's method in mpmath proposes a root; an exact sign change of the
    polynomial certifies it. Bisection over the rationals is the fallback.
    """
    s_lower = _sign(_poly_eval_exact(coeffs, lower))
    s_upper = _sign(_poly_eval_exact(coeffs, upper))
    if s_lower == 0 or s_upper == 0 or s_lower == s_upper:
        raise ValueError(
            f"Interval [{lower}, {upper}] does not isolate a simple irrational root."
        )
    scale = max(Fraction(1), abs(lower), abs(upper))
    width = scale / Fraction(2) ** (precision + 4)

    with mp.workprec(precision + 32):
        x = fraction_to_mpf((lower + upper) / 2)
        for _ in range(4 * precision.bit_length() + 16):
            y, dy = mp.polyval(list(coeffs), x, derivative=True)
            if dy == 0:
                break
            step = y / dy
            x -= step
            if abs(step) < mp.ldexp(abs(x) + 1, -(precision + 12)):
                break
        if mp.isfinite(x):
            center = to_fraction(x)
            a, b = center - width / 2, center + width / 2
            if lower <= a and b <= upper:
                s_a = _sign(_poly_eval_exact(coeffs, a))
                s_b = _sign(_poly_eval_exact(coeffs, b))
                if s_a != 0 and s_b != 0 and s_a != s_b:
                    return a, b

    logger.debug("Newton certification failed on [%s, %s]; bisecting.", lower, upper)
    while upper - lower > width:
        mid = (lower + upper) / 2
        s_mid = _sign(_poly_eval_exact(coeffs, mid))
        if s_mid == 0:
            raise RationalRootFound(f"Polynomial {list(coeffs)} has rational root {mid}.")
        if s_mid == s_lower:
            lower = mid
        else:
            upper = mid
    return lower, upper


class AlgebraicNumber:
    """
    An exact real algebraic number: a minimal polynomial together with an
    isolating interval of one of its real roots.

    The value can be re-evaluated at any precision on demand, so flow
    coordinates never inherit the rounding of an earlier computation.
    """

    def __init__(
        self,
        minpoly: Sequence[int],
        lower: Fraction,
        upper: Fraction,
        expression: Optional[str] = None,
    ) -> None:
        """
        Initializes the number from its minimal polynomial and an isolating
        interval.

        Args:
            minpoly: Integer coefficients, leading coefficient first.
            lower: Lower end of an interval containing exactly one root.
            upper: Upper end of that interval.
            expression: An optional human readable form, e.g. "sqrt(2)".

        Raises:
            ValueError: If the interval does not isolate exactly one root.
        """
        self.__minpoly = primitive_poly(minpoly)
        lower, upper = to_fraction(lower), to_fraction(upper)
        if lower > upper:
            raise ValueError(f"Empty isolating interval [{lower}, {upper}].")
        poly = Poly(list(self.__minpoly), _T, domain=QQ)
        if poly.count_roots(sympy.Rational(lower), sympy.Rational(upper)) != 1:
            raise ValueError(
                f"Interval [{lower}, {upper}] does not isolate a root of {list(self.__minpoly)}."
            )
        self.__lower = lower
        self.__upper = upper
        self.__expression = expression
        self.__enclosures: dict[int, tuple[Fraction, Fraction]] = {}

    @classmethod
    def from_expression(
        cls, expression: sympy.Expr, text: Optional[str] = None
    ) -> "AlgebraicNumber":
        """
        Builds an exact handle from a real algebraic sympy expression.

        Args:
            expression: A sympy expression such as `(1 + sqrt(2)) / 2`.
            text: The source text, kept for display.

        Returns:
            The exact handle.

        Raises:
            ValueError: If the expression is not a real algebraic number.
        """
        approx = expression.evalf(80)
        if abs(sympy.im(approx)) > sympy.Float("1e-60"):
            raise ValueError(f"Expression {text or expression} is not real.")
        try:
            minpoly = minimal_polynomial(expression, _T, polys=True)
        except (NotImplementedError, ValueError) as e:
            raise ValueError(f"Expression {text or expression} is not algebraic: {e}") from e
        coeffs = [int(c) for c in minpoly.all_coeffs()]
        target = Fraction(str(sympy.re(approx)))
        eps = None
        for _ in range(4):
            intervals = Poly(coeffs, _T).intervals(eps=eps)
            hits = [
                (Fraction(str(a)), Fraction(str(b)))
                for (a, b), _ in intervals
                if Fraction(str(a)) <= target <= Fraction(str(b))
            ]
            if len(hits) == 1:
                lower, upper = hits[0]
                return cls(coeffs, lower, upper, text or str(expression))
            eps = sympy.Rational(1, 10**40) if eps is None else eps / 10**20
        raise ValueError(f"Could not isolate the root {text or expression}.")

    @property
    def minpoly(self) -> IntPoly:
        return self.__minpoly

    @property
    def degree(self) -> int:
        return len(self.__minpoly) - 1

    @property
    def interval(self) -> tuple[Fraction, Fraction]:
        return self.__lower, self.__upper

    @property
    def expression(self) -> Optional[str]:
        return self.__expression

    def enclosure(self, precision: int) -> tuple[Fraction, Fraction]:
        """
        Returns a certified rational enclosure of relative width at most
        2^(-precision).
        """
        if self.degree == 1:
            root = Fraction(-self.__minpoly[1], self.__minpoly[0])
            return root, root
        if precision not in self.__enclosures:
            self.__enclosures[precision] = _refine_real_root(
                self.__minpoly, self.__lower, self.__upper, precision
            )
        return self.__enclosures[precision]

    def evaluate(self, precision: int) -> mpf:
        """Evaluates the number at the given precision."""
        lower, upper = self.enclosure(precision + 8)
        with mp.workprec(precision):
            return fraction_to_mpf((lower + upper) / 2)

    def sympy(self) -> sympy.Expr:
        """Returns the number as a sympy CRootOf (or Rational for degree one)."""
        poly = Poly(list(self.__minpoly), _T)
        if self.degree == 1:
            return sympy.Rational(-self.__minpoly[1], self.__minpoly[0])
        below = poly.count_roots(None, sympy.Rational(self.__lower))
        return CRootOf(poly, below)

    def __neg__(self) -> "AlgebraicNumber":
        d = self.degree
        coeffs = [c * (-1) ** (d - i) for i, c in enumerate(self.__minpoly)]
        expression = f"-({self.__expression})" if self.__expression else None
        return AlgebraicNumber(coeffs, -self.__upper, -self.__lower, expression)

    def __float__(self) -> float:
        return float(self.evaluate(64))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AlgebraicNumber):
            return NotImplemented
        if self.__minpoly != other.minpoly:
            return False
        lower = max(self.__lower, other.interval[0])
        upper = min(self.__upper, other.interval[1])
        if lower > upper:
            return False
        poly = Poly(list(self.__minpoly), _T, domain=QQ)
        return poly.count_roots(sympy.Rational(lower), sympy.Rational(upper)) == 1

    def __hash__(self) -> int:
        return hash(self.__minpoly)

    def __repr__(self) -> str:
        return f"AlgebraicNumber({list(self.__minpoly)}, [{self.__lower}, {self.__upper}])"

    def __str__(self) -> str:
        return self.__expression or repr(self)


RealScalar = Union[int, Fraction, AlgebraicNumber, mpf]


def enclosure(value: Any, precision: int) -> tuple[Fraction, Fraction]:
    """
    Returns a rational interval containing `value`.

    Exact inputs give exact or certified intervals; a frozen mpf is widened by
    one unit in the last place at `precision`.
    """
    if isinstance(value, (int, Fraction)):
        value = Fraction(value)
        return value, value
    if isinstance(value, AlgebraicNumber):
        return value.enclosure(precision)
    if isinstance(value, mpf):
        center = to_fraction(value)
        if value == 0:
            ulp = Fraction(1, 2**precision)
        else:
            ulp = Fraction(2) ** (int(mp.mag(value)) - precision)
        return center - ulp, center + ulp
    raise ValueError(f"Unsupported real value: {value!r}")


@dataclass(frozen=True)
class RootSet:
    """Certified roots of an integer polynomial."""

    roots: tuple[Union[mpf, mpc], ...]
    signature: tuple[int, int]
    real_intervals: tuple[tuple[Fraction, Fraction], ...]
    precision: int


def _check_squarefree_irrational(poly: Poly, coeffs: IntPoly) -> None:
    if poly.degree() < 1:
        raise ValueError(f"Polynomial {list(coeffs)} is constant.")
    if poly.gcd(poly.diff(_T)).degree() > 0:
        raise NotSquarefree(f"Polynomial {list(coeffs)} is not squarefree.")
    rational_roots = poly.ground_roots()
    if rational_roots:
        root = next(iter(rational_roots))
        raise RationalRootFound(f"Polynomial {list(coeffs)} has rational root {root}.")


def poly_roots(coeffs: Sequence[int], precision: int = DEFAULT_PRECISION) -> RootSet:
    """
    Computes all roots of a squarefree integer polynomial without rational
    roots.

    Real roots are isolated exactly and refined with certified sign changes;
    complex roots come from mpmath's Durand-Kerner solver followed by Newton
    polishing.

    Args:
        coeffs: Integer coefficients, leading coefficient first.
        precision: The working precision in bits.

    Returns:
        The r real roots in ascending order followed by the s complex roots
        with positive imaginary part, and the signature (r, s).

    Raises:
        NotSquarefree: If gcd(p, p') is not constant.
        RationalRootFound: If the polynomial has a rational root.
        PrecisionExhausted: If the complex roots cannot be certified.
    """
    coeffs = primitive_poly(coeffs)
    poly = Poly(list(coeffs), _T, domain=QQ)
    _check_squarefree_irrational(poly, coeffs)
    d = len(coeffs) - 1

    intervals = []
    reals: list[mpf] = []
    for (a, b), _ in Poly(list(coeffs), _T).intervals():
        lower, upper = _refine_real_root(coeffs, to_fraction(a), to_fraction(b), precision)
        intervals.append((lower, upper))
        with mp.workprec(precision):
            reals.append(fraction_to_mpf((lower + upper) / 2))
    r = len(reals)
    s = (d - r) // 2

    complexes: list[mpc] = []
    if s:
        complexes = _complex_roots(coeffs, s, precision)

    with mp.workprec(precision):
        roots = tuple(+x for x in reals) + tuple(+z for z in complexes)
    return RootSet(roots, (r, s), tuple(intervals), precision)


def _complex_roots(coeffs: IntPoly, s: int, precision: int) -> list[mpc]:
    scale = sum(abs(c) for c in coeffs)
    with mp.workprec(precision + 32):
        found = mp.polyroots(list(coeffs), maxsteps=200, extraprec=precision, cleanup=True)
        threshold = mp.ldexp(1, -(precision // 4))
        upper = [mp.mpc(z) for z in found if mp.im(z) > threshold]
        if len(upper) != s:
            raise PrecisionExhausted(
                f"Found {len(upper)} complex roots of {list(coeffs)} in the upper "
                f"half plane, expected {s}."
            )
        polished = []
        for z in upper:
            for _ in range(8):
                y, dy = mp.polyval(list(coeffs), z, derivative=True)
                if dy == 0:
                    break
                z = z - y / dy
            size = max(mp.mpf(1), abs(z)) ** (len(coeffs) - 1)
            if abs(mp.polyval(list(coeffs), z)) > mp.ldexp(scale * size, -(precision // 2)):
                raise PrecisionExhausted(f"Complex root {z} of {list(coeffs)} is not certified.")
            polished.append(mp.mpc(mp.re(z), abs(mp.im(z))))
    polished.sort(key=lambda z: (round(float(z.real), 12), float(z.imag)))
    return polished


def _to_poly(coords: Sequence[Fraction]) -> Poly:
    rev = [sympy.Rational(c.numerator, c.denominator) for c in reversed(list(coords))]
    return Poly(rev or [0], _T, domain=QQ)


def _from_poly(poly: Poly, d: int) -> Coords:
    values = [to_fraction(c) for c in reversed(poly.all_coeffs())]
    values += [Fraction(0)] * (d - len(values))
    return tuple(values[:d])


def power_sums(coeffs: Sequence[int], count: int) -> list[Fraction]:
    """
    Returns the power sums p_0, ..., p_{count-1} of the roots of a polynomial
    via Newton's identities.
    """
    a = [Fraction(c) for c in coeffs]
    d = len(a) - 1
    e = [c / a[0] for c in a]
    p = [Fraction(d)]
    for k in range(1, count):
        total = Fraction(0)
        for i in range(1, min(k, d + 1)):
            total += e[i] * p[k - i]
        if k <= d:
            total += k * e[k]
        p.append(-total)
    return p


def nf_arith(
    minpoly: Sequence[int],
    op: str,
    x: Sequence[Fraction],
    y: Optional[Sequence[Fraction]] = None,
) -> Union[Coords, Fraction]:
    """
    Exact arithmetic in Q[t]/(minpoly) on power-basis coordinates.

    Coordinates are listed from the constant term up: coords[i] is the
    coefficient of theta^i.

    Args:
        minpoly: Integer coefficients of the defining polynomial, leading first.
        op: One of "mul", "inv", "norm", "trace".
        x: The first operand.
        y: The second operand, required for "mul".

    Returns:
        Coordinates for "mul" and "inv", a Fraction for "norm" and "trace".

    Raises:
        DivisionByZeroElement: If "inv" is applied to zero.
        ValueError: If the operation or the coordinate lengths are invalid.
    """
    d = len(minpoly) - 1
    x = [to_fraction(c) for c in x]
    if len(x) != d:
        raise ValueError(f"Expected {d} coordinates, got {len(x)}.")
    f = Poly([int(c) for c in minpoly], _T, domain=QQ)
    g = _to_poly(x)

    if op == "mul":
        if y is None:
            raise ValueError("Operation 'mul' needs two operands.")
        y = [to_fraction(c) for c in y]
        if len(y) != d:
            raise ValueError(f"Expected {d} coordinates, got {len(y)}.")
        return _from_poly((g * _to_poly(y)).rem(f), d)
    if op == "inv":
        if g.is_zero:
            raise DivisionByZeroElement("Cannot invert the zero element.")
        return _from_poly(g.invert(f), d)
    if op == "norm":
        if g.is_zero:
            return Fraction(0)
        res = to_fraction(sympy.Rational(f.resultant(g)))
        return res / Fraction(int(minpoly[0])) ** g.degree()
    if op == "trace":
        sums = power_sums(minpoly, d)
        return sum((c * p for c, p in zip(x, sums)), Fraction(0))
    raise ValueError(f"Unsupported number field operation: {op}")


def discriminant(minpoly: Sequence[int]) -> int:
    """Returns the discriminant of an integer polynomial."""
    return int(Poly([int(c) for c in minpoly], _T).discriminant())


@dataclass(frozen=True)
class CFExpansion:
    """A continued fraction [a0; a1, a2, ...] and its convergents."""

    partial_quotients: tuple[int, ...]
    convergents: tuple[Fraction, ...]
    terminated: bool
    precision_exhausted: bool


def _convergents(quotients: Sequence[int]) -> tuple[Fraction, ...]:
    p_prev, p = 1, quotients[0]
    q_prev, q = 0, 1
    result = [Fraction(p, q)]
    for a in quotients[1:]:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        result.append(Fraction(p, q))
    return tuple(result)


def convergent_pairs(expansion: CFExpansion) -> list[tuple[int, int]]:
    """Returns the convergents as (p, q) pairs without reducing them."""
    quotients = expansion.partial_quotients
    p_prev, p = 1, quotients[0]
    q_prev, q = 0, 1
    pairs = [(p, q)]
    for a in quotients[1:]:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        pairs.append((p, q))
    return pairs


def cf_expand(value: Any, n_terms: int, precision: int = DEFAULT_PRECISION) -> CFExpansion:
    """
    Expands a real number into a continued fraction.

    The expansion is carried out on a rational enclosure of the value and a
    partial quotient is emitted only when both ends of the enclosure agree on
    it. Expansion stops early, with `precision_exhausted` set, as soon as the
    next quotient is uncertain.

    Args:
        value: A Fraction, AlgebraicNumber or mpf.
        n_terms: The maximum number of partial quotients.
        precision: The precision of the enclosure in bits.

    Returns:
        The certified prefix of the expansion.
    """
    if n_terms < 1:
        raise ValueError(f"n_terms must be at least 1, got {n_terms}.")
    lower, upper = enclosure(value, precision)
    quotients: list[int] = []
    terminated = False
    exhausted = False
    while len(quotients) < n_terms:
        a, b = math.floor(lower), math.floor(upper)
        if a != b:
            exhausted = True
            break
        quotients.append(a)
        frac_lower, frac_upper = lower - a, upper - a
        if frac_upper == 0:
            terminated = True
            break
        if frac_lower == 0:
            exhausted = True
            break
        lower, upper = 1 / frac_upper, 1 / frac_lower
    if not quotients:
        return CFExpansion((), (), False, True)
    return CFExpansion(tuple(quotients), _convergents(quotients), terminated, exhausted)


def best_rational(value: Any, q_max: int, precision: int = DEFAULT_PRECISION) -> Fraction:
    """Returns the closest rational with denominator at most `q_max`."""
    lower, upper = enclosure(value, precision)
    return ((lower + upper) / 2).limit_denominator(q_max)


def _clear_denominators(rows: Sequence[Sequence[Any]]) -> list[list[int]]:
    result = []
    for row in rows:
        values = [to_fraction(c) for c in row]
        lcm = 1
        for c in values:
            lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
        result.append([int(c * lcm) for c in values])
    return result


def integer_kernel(rows: Sequence[Sequence[Any]], n_cols: Optional[int] = None) -> list[tuple[int, ...]]:
    """
    Computes a basis of {n in Z^m : A n = 0} for a rational matrix A.

    The kernel is found with LLL on [I | K A^T], increasing K until the number
    of vectors with vanishing tail equals the nullity, and is returned in
    Hermite normal form.

    Args:
        rows: The rows of A (rationals).
        n_cols: The number of columns m, required when `rows` is empty.

    Returns:
        The kernel basis as rows of the Hermite normal form.
    """
    if n_cols is None:
        if not rows:
            raise ValueError("n_cols is required for an empty matrix.")
        n_cols = len(rows[0])
    matrix = [r for r in _clear_denominators(rows) if any(r)]
    if not matrix:
        return [tuple(int(i == j) for j in range(n_cols)) for i in range(n_cols)]

    rank = fmpz_mat(matrix).rank()
    nullity = n_cols - rank
    if nullity == 0:
        return []

    height = max(abs(c) for row in matrix for c in row)
    bits = n_cols + rank * (n_cols * height + 1).bit_length() + 8
    for _ in range(8):
        scale = 1 << bits
        lifted = [
            [int(i == j) for j in range(n_cols)] + [scale * row[i] for row in matrix]
            for i in range(n_cols)
        ]
        reduced = fmpz_mat(lifted).lll().tolist()
        kernel = [
            [int(c) for c in row[:n_cols]]
            for row in reduced
            if all(int(c) == 0 for c in row[n_cols:])
        ]
        if len(kernel) == nullity:
            hnf = fmpz_mat(kernel).hnf().tolist()
            basis = [tuple(int(c) for c in row) for row in hnf if any(int(c) for c in row)]
            for vector in basis:
                for row in matrix:
                    if sum(a * b for a, b in zip(row, vector)) != 0:
                        raise ArithmeticError(f"Kernel vector {vector} is not exact.")
            return basis
        bits *= 2
    raise ArithmeticError("Integer kernel computation did not converge.")


def approximate_integer_kernel(matrix: mp.matrix, precision: int) -> list[tuple[int, ...]]:
    """
    Computes the integer vectors n with A n = 0 for a real matrix A known to
    `precision` bits.

    LLL on [I | 2^(P/2) A^T] proposes candidates. A candidate is accepted when
    its residual is below 2^(-3P/4) relative to its size, rejected above
    2^(-5P/8), and anything in between is reported as undecidable. Accepted
    vectors must have height at most 2^(P/8).

    Returns:
        The kernel basis in Hermite normal form (possibly empty).

    Raises:
        UncertifiedInput: If a candidate falls in the undecided band or
            exceeds the height bound.
    """
    k, m = matrix.rows, matrix.cols
    scale_bits = precision // 2
    with mp.workprec(precision):
        rows = [
            [int(i == j) for j in range(m)]
            + [int(mp.nint(mp.ldexp(matrix[a, i], scale_bits))) for a in range(k)]
            for i in range(m)
        ]
    reduced = fmpz_mat(rows).lll().tolist()
    zero_bits = (3 * precision) // 4
    nonzero_bits = (5 * precision) // 8
    height_cap = 1 << (precision // 8)
    kernel = []
    with mp.workprec(precision):
        size = max(mp.mpf(1), mp.mnorm(matrix, "F"))
        for row in reduced:
            n = [int(c) for c in row[:m]]
            length = mp.sqrt(sum(c * c for c in n))
            residual = mp.sqrt(
                mp.fsum(mp.fsum(matrix[a, i] * n[i] for i in range(m)) ** 2 for a in range(k))
            )
            if residual <= mp.ldexp(length * size, -zero_bits):
                if length > height_cap:
                    raise UncertifiedInput(f"Kernel vector {n} exceeds the certified height.")
                kernel.append(n)
            elif residual < mp.ldexp(length * size, -nonzero_bits):
                raise UncertifiedInput(
                    f"Cannot decide whether {n} is a kernel vector (residual {mp.nstr(residual, 5)})."
                )
    if not kernel:
        return []
    hnf = fmpz_mat(kernel).hnf().tolist()
    return [tuple(int(c) for c in row) for row in hnf if any(int(c) for c in row)]


_RADICAL = re.compile(r"\b(sqrt|cbrt)(\d+)")
_ROOT = re.compile(r"root\(\s*([^,()]+)\s*,\s*(\d+)\s*\)")


def split_top_level(text: str, separator: str = ",") -> list[str]:
    """Splits `text` at separators that are not nested in parentheses."""
    parts, depth, current = [], 0, []
    for char in text:
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
        if char == separator and depth == 0:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(char)
    parts.append("".join(current).strip())
    return [p for p in parts if p]


def parse_expression(text: str) -> sympy.Expr:
    """
    Parses the small algebraic-number grammar used on the command line.

    Supported are integers, decimals, + - * / ^, parentheses, sqrtN, cbrtN,
    sqrt(...), cbrt(...) and root(poly, index) for the index-th root (0-based,
    real roots first) of a polynomial in t.
    """
    local: dict[str, Any] = {"sqrt": sympy.sqrt, "cbrt": sympy.cbrt}
    transformations = standard_transformations + (convert_xor,)

    def _root(match: re.Match) -> str:
        name = f"rootvalue{len(local)}"
        try:
            poly_expr = parse_expr(
                match.group(1),
                local_dict={"t": _T},
                transformations=transformations + (implicit_multiplication_application,),
            )
        except (SyntaxError, TypeError) as e:
            raise ValueError(f"Invalid polynomial {match.group(1)}: {e}") from e
        local[name] = CRootOf(Poly(poly_expr, _T), int(match.group(2)))
        return name

    source = _ROOT.sub(_root, text)
    source = _RADICAL.sub(r"\1(\2)", source)
    try:
        expr = parse_expr(source, local_dict=local, transformations=transformations)
    except (SyntaxError, TypeError, sympy.SympifyError) as e:
        raise ValueError(f"Failed to parse expression {text}: {e}") from e
    if getattr(expr, "free_symbols", None):
        raise ValueError(f"Unsupported expression: {text}")
    return sympy.sympify(expr)


def parse_real(text: str) -> Union[Fraction, AlgebraicNumber]:
    """
    Parses a real number literal into an exact value.

    Args:
        text: A rational ("3", "-1/2", "0.3") or an algebraic expression
            ("sqrt2", "(1+sqrt2)/2", "cbrt4", "root(t^3-3t-1, 0)").

    Returns:
        A Fraction for rational values, else an AlgebraicNumber.

    Raises:
        ValueError: If the text is not a real algebraic number.
    """
    text = text.strip()
    try:
        return Fraction(text)
    except ValueError:
        pass
    expr = parse_expression(text)
    if expr.is_Rational:
        return Fraction(int(expr.p), int(expr.q))
    return AlgebraicNumber.from_expression(expr, text)


def format_decimal(value: Any, precision: int, digits: Optional[int] = None) -> str:
    """Formats a number as a decimal string with digits matching `precision`."""
    with mp.workprec(precision):
        x = evaluate_scalar(value, precision) if not isinstance(value, (mpf, mpc)) else value
        return mp.nstr(x, digits or libmp.prec_to_dps(precision), strip_zeros=False)
