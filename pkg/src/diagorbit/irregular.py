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
from fractions import Fraction
from typing import TYPE_CHECKING, Any, Optional, Sequence
from warnings import warn

import sympy
from mpmath import mp, mpf

try:
    from sympy.core.intfunc import igcdex
except ImportError:  # sympy < 1.13
    from sympy.core.numbers import igcdex

from .arith import (
    DEFAULT_PRECISION,
    AlgebraicNumber,
    RealScalar,
    approximate_integer_kernel,
    cf_expand,
    convergent_pairs,
    evaluate_scalar,
    parse_real,
)
from .errors import (
    BoundViolated,
    DimensionMismatch,
    NotInSOrbit,
    PrecisionExhausted,
    PreconditionViolated,
    ToleranceAmbiguous,
    UncertifiedInput,
)
from .flows import TracelessDiag, trajectory
from .lattice import (
    IntMatrix,
    LatticeBasis,
    dual,
    reduce,
    shift_log_diag,
    shortest_vector,
)

if TYPE_CHECKING:
    from .runner import ExperimentRunner

logger = logging.getLogger(__name__)

DEFAULT_MEMBERSHIP_TOL = 1e-8
DEFAULT_RECURRENCE_THRESHOLD = Fraction(1, 10)
DEFAULT_OFFRAY_GRID = tuple((t, s) for t in (0, 4, 8, 12) for s in (0, 4, 8, 12))


@dataclass(frozen=True)
class VParams:
    """The vector v in R^(d-1) defining h_v and g_v."""

    values: tuple[RealScalar, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("v must have at least one coordinate.")

    @classmethod
    def parse(cls, texts: Sequence[str]) -> "VParams":
        return cls(tuple(parse_real(text) for text in texts))

    @property
    def dimension(self) -> int:
        return len(self.values) + 1

    @property
    def alpha(self) -> RealScalar:
        return self.values[0]

    @property
    def beta(self) -> RealScalar:
        if len(self.values) != 2:
            raise DimensionMismatch(f"beta needs d = 3, got d = {self.dimension}.")
        return self.values[1]

    def __neg__(self) -> "VParams":
        return VParams(tuple(-c for c in self.values))

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.values) + ")"


def make_xv(v: VParams, precision: int = DEFAULT_PRECISION) -> LatticeBasis:
    """Returns x_v, spanned by the columns of h_v = [[1, 0], [v, I]]."""
    d = v.dimension
    rows: list[list[Any]] = [[int(j == 0) for j in range(d)]]
    for i in range(1, d):
        rows.append([v.values[i - 1]] + [int(j == i) for j in range(1, d)])
    return LatticeBasis.from_rows(rows, precision)


def make_zv(v: VParams, precision: int = DEFAULT_PRECISION) -> LatticeBasis:
    """Returns z_v, spanned by the columns of g_v = [[1, v^t], [0, I]]."""
    d = v.dimension
    rows: list[list[Any]] = [[1] + list(v.values)]
    for i in range(1, d):
        rows.append([int(j == i) for j in range(d)])
    return LatticeBasis.from_rows(rows, precision)


@dataclass(frozen=True)
class RationalRelation:
    """q * beta = p1 * alpha + p2 with gcd(p1, p2, q) = 1 and q > 0."""

    p1: int
    p2: int
    q: int

    def __post_init__(self) -> None:
        if self.q < 1:
            raise ValueError(f"q must be positive, got {self.q}.")
        if math.gcd(math.gcd(self.p1, self.p2), self.q) != 1:
            raise ValueError(f"({self.p1}, {self.p2}) does not generate Z/{self.q}Z.")


def _sympy_value(value: RealScalar) -> sympy.Expr:
    if isinstance(value, int):
        return sympy.Integer(value)
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    return value.sympy()


def _vanishes_exactly(coeffs: Sequence[int], values: Sequence[RealScalar]) -> bool:
    expr = sum((c * _sympy_value(x) for c, x in zip(coeffs, values)), sympy.Integer(0))
    if expr == 0:
        return True
    x = sympy.Symbol("x")
    return sympy.minimal_polynomial(expr, x) == x


def rational_relation(
    alpha: RealScalar, beta: RealScalar, q_max: int = 10**6, precision: int = DEFAULT_PRECISION
) -> Optional[RationalRelation]:
    """
    Finds q * beta = p1 * alpha + p2 in reduced form, with q <= q_max.

    Exact inputs (Fractions and AlgebraicNumbers) are decided by an integer
    relation search on [1, alpha, beta] confirmed with exact algebra; frozen
    mpf inputs are accepted when the relation holds to 2^(-3P/4).

    Returns:
        The relation, or None when beta is not a rational affine function of
        alpha with denominator at most q_max.
    """
    if q_max < 1:
        raise ValueError(f"q_max must be at least 1, got {q_max}.")
    if isinstance(beta, (int, Fraction)):
        beta = Fraction(beta)
        if beta.denominator > q_max:
            return None
        return RationalRelation(0, beta.numerator, beta.denominator)
    if isinstance(alpha, (int, Fraction)):
        return None

    with mp.workprec(precision):
        values = [mp.mpf(1), evaluate_scalar(alpha, precision), evaluate_scalar(beta, precision)]
        found = mp.pslq(values, maxcoeff=max(q_max, 2 ** (precision // 8)), maxsteps=10**5)
    if found is None:
        return None
    c0, c1, c2 = (int(c) for c in found)
    if c2 == 0:
        return None
    sign = 1 if c2 > 0 else -1
    q, p1, p2 = sign * c2, -sign * c1, -sign * c0
    g = math.gcd(math.gcd(p1, p2), q)
    q, p1, p2 = q // g, p1 // g, p2 // g
    if q > q_max:
        return None

    exact = all(isinstance(c, (int, Fraction, AlgebraicNumber)) for c in (alpha, beta))
    if exact:
        if not _vanishes_exactly([-p2, -p1, q], [1, alpha, beta]):
            return None
    else:
        with mp.workprec(precision):
            residual = abs(q * values[2] - p1 * values[1] - p2)
            if residual > mp.ldexp(max(abs(p1), q, 1), -((3 * precision) // 4)):
                return None
    logger.debug("Found relation %d * beta = %d * alpha + %d.", q, p1, p2)
    return RationalRelation(p1, p2, q)


def relation_pair(
    alpha: RealScalar, beta: RealScalar, q_max: int = 10**6, precision: int = DEFAULT_PRECISION
) -> tuple[Optional[RationalRelation], Optional[RationalRelation]]:
    """Returns the relation of beta over alpha and of alpha over beta."""
    return (
        rational_relation(alpha, beta, q_max, precision),
        rational_relation(beta, alpha, q_max, precision),
    )


def is_certified_irrational(value: RealScalar, precision: int = DEFAULT_PRECISION) -> bool:
    """
    True when the value is provably irrational: an algebraic handle of
    degree at least two, or a number whose certified continued fraction does
    not terminate.
    """
    if isinstance(value, (int, Fraction)):
        return False
    if isinstance(value, AlgebraicNumber):
        return value.degree >= 2
    expansion = cf_expand(value, 64, precision)
    return not expansion.terminated


@dataclass(frozen=True)
class DirichletPair:
    """Integers (k, m) with 0 < |k| <= T and |k theta + m| <= 1 / T."""

    k: int
    m: int
    value: mpf
    window: mpf


def dirichlet_pair(theta: RealScalar, T: Any, precision: int = DEFAULT_PRECISION) -> DirichletPair:
    """
    Picks the convergent p/k of theta with the largest denominator k <= T and
    returns (k, -p), so that |k theta + m| < 1 / q_next <= 1 / T.

    Raises:
        PrecisionExhausted: If the certified continued fraction ends before
            a denominator above T is reached.
    """
    with mp.workprec(precision):
        window = evaluate_scalar(T, precision)
    if window < 1:
        raise ValueError(f"T must be at least 1, got {window}.")
    n_terms = 16
    while True:
        expansion = cf_expand(theta, n_terms, precision)
        pairs = convergent_pairs(expansion)
        if expansion.terminated or any(q > window for _, q in pairs):
            break
        if expansion.precision_exhausted or not pairs:
            raise PrecisionExhausted(
                f"Continued fraction of {theta} is uncertain before denominators exceed T = "
                f"{mp.nstr(window, 10)}."
            )
        n_terms *= 2
    p, k = [(p, q) for p, q in pairs if q <= window][-1]
    with mp.workprec(precision):
        value = abs(k * evaluate_scalar(theta, precision) - p)
    return DirichletPair(k, -p, value, window)


@dataclass(frozen=True)
class ShortyWitness:
    """A short vector of a_(t,s) x_v built from a Dirichlet pair."""

    vector: tuple[int, int, int]
    image: tuple[mpf, ...]
    length: mpf
    sup_norm: mpf
    bound: mpf
    pair: DirichletPair


def _flow_shifts(t: Any, s: Any, precision: int) -> tuple[mpf, mpf, mpf]:
    with mp.workprec(precision):
        t, s = evaluate_scalar(t, precision), evaluate_scalar(s, precision)
        return (-t - s, s, t)


def shorty_witness(
    v: VParams, relation: RationalRelation, t: Any, s: Any, precision: int = DEFAULT_PRECISION
) -> ShortyWitness:
    """
    Builds the vector (qk, qm, p1 m - p2 k) of x_v and its image under
    diag(e^(-t-s), e^s, e^t).

    T is e^(t + s/2) when t >= s and e^(s + t/2) otherwise; (k, m) is the
    Dirichlet pair of alpha for T. Each coordinate of the image is at most
    max(|p1|, q) e^(-min(s, t)/2), which is certified on the sup norm.

    Raises:
        BoundViolated: If the certified bound fails.
    """
    if v.dimension != 3:
        raise DimensionMismatch(f"The witness needs d = 3, got d = {v.dimension}.")
    with mp.workprec(precision):
        t_val, s_val = evaluate_scalar(t, precision), evaluate_scalar(s, precision)
        if t_val < 0 or s_val < 0:
            raise ValueError("t and s must be nonnegative.")
        T = mp.exp(t_val + s_val / 2) if t_val >= s_val else mp.exp(s_val + t_val / 2)
    pair = dirichlet_pair(v.alpha, T, precision)
    k, m = pair.k, pair.m
    vector = (relation.q * k, relation.q * m, relation.p1 * m - relation.p2 * k)
    y = shift_log_diag(make_xv(v, precision), _flow_shifts(t, s, precision))
    image = tuple(y.point(vector))
    with mp.workprec(precision):
        length = mp.norm(list(image))
        sup_norm = max(abs(c) for c in image)
        bound = max(abs(relation.p1), relation.q) * mp.exp(-min(t_val, s_val) / 2)
        if sup_norm > bound * (1 + mp.ldexp(1, -(precision // 2))):
            raise BoundViolated(
                f"Witness {vector} has sup norm {mp.nstr(sup_norm, 10)} above {mp.nstr(bound, 10)}."
            )
    return ShortyWitness(vector, image, length, sup_norm, bound, pair)


@dataclass(frozen=True)
class MMembershipVerdict:
    """The outcome of the M_q membership test for one family."""

    member: bool
    family: int
    q: int
    residues: Optional[tuple[int, int]]
    residual: Optional[mpf]
    axis: Optional[tuple[int, ...]]


def _complete_basis(n: Sequence[int]) -> IntMatrix:
    """Returns a unimodular matrix whose last column is the primitive vector n."""
    d = len(n)
    w = [int(c) for c in n]
    ops = sympy.eye(d)
    for i in range(d - 1):
        a, b = w[i], w[d - 1]
        if a == 0:
            continue
        x, y, g = igcdex(b, a)
        step = sympy.eye(d)
        step[i, i], step[i, d - 1] = b // g, -(a // g)
        step[d - 1, i], step[d - 1, d - 1] = y, x
        ops = step * ops
        w[i], w[d - 1] = 0, int(g)
    if abs(w[d - 1]) != 1:
        raise ValueError(f"Vector {tuple(n)} is not primitive.")
    basis = ops.inv()
    sign = 1 if all(int(basis[i, d - 1]) == n[i] for i in range(d)) else -1
    return tuple(
        tuple(int(basis[i, j]) * (sign if j == d - 1 else 1) for j in range(d)) for i in range(d)
    )


def _axis_vector(x: LatticeBasis, axis: int) -> Optional[tuple[int, ...]]:
    """Finds the primitive lattice vector on the coordinate axis, if any."""
    d = x.dimension
    others = [i for i in range(d) if i != axis]
    matrix = x.matrix
    with mp.workprec(x.precision):
        rows = mp.matrix([[matrix[i, j] for j in range(d)] for i in others])
    kernel = approximate_integer_kernel(rows, x.precision)
    if len(kernel) != 1:
        return None
    return kernel[0]


def m_membership(
    x: LatticeBasis,
    q: int,
    family: int = 1,
    tol: float = DEFAULT_MEMBERSHIP_TOL,
    transposed: bool = False,
) -> MMembershipVerdict:
    """
    Tests whether x lies in A M_q for family 1 (third coordinate) or
    family 2 (second coordinate).

    The test is A-invariant: it finds the primitive lattice vector a on the
    distinguished axis, checks that the distinguished coordinate of every
    reduced basis vector lies within tol of (a/q)Z, and that the residues of
    a basis completing a generate Z/qZ.

    Args:
        x: A lattice in R^3.
        q: The positive integer q.
        family: 1 or 2.
        tol: The decision threshold on residuals.
        transposed: Test the dual lattice, i.e. membership in the
            transposed family.

    Returns:
        The verdict with residues and the maximal residual.

    Raises:
        ToleranceAmbiguous: If the residual lies in (tol, 10 tol].
    """
    if family not in (1, 2):
        raise ValueError(f"family must be 1 or 2, got {family}.")
    if q < 1:
        raise ValueError(f"q must be positive, got {q}.")
    if x.dimension != 3:
        raise DimensionMismatch(f"Membership is defined for d = 3, got d = {x.dimension}.")
    if transposed:
        x = dual(x)
    axis = 2 if family == 1 else 1
    reduced, _ = reduce(x)
    try:
        n = _axis_vector(reduced, axis)
    except UncertifiedInput:
        n = None
    if n is None:
        return MMembershipVerdict(False, family, q, None, None, None)

    completed = reduced.with_transform(_complete_basis(n))
    precision = x.precision
    with mp.workprec(precision):
        height = completed.column(2)[axis]
        scaled = [q * reduced.column(j)[axis] / height for j in range(3)]
        residual = max(abs(c - mp.nint(c)) for c in scaled) / q
        residues = tuple(
            int(mp.nint(q * completed.column(j)[axis] / height)) % q for j in range(2)
        )
    if residual > tol:
        if residual <= 10 * tol:
            raise ToleranceAmbiguous(
                f"Residual {mp.nstr(residual, 5)} is within a factor 10 of tol = {tol}."
            )
        return MMembershipVerdict(False, family, q, None, residual, n)
    generated = math.gcd(math.gcd(residues[0], residues[1]), q) == 1
    residues = tuple(sorted(residues, reverse=True))
    return MMembershipVerdict(generated, family, q, residues, residual, n)


def exact_disjointness(v: VParams, family: int = 1, precision: int = DEFAULT_PRECISION) -> bool:
    """
    Decides that A x_v misses M_q for the family: this holds as soon as beta
    (family 1) or alpha (family 2) is irrational.

    Raises:
        UncertifiedInput: If irrationality cannot be certified.
    """
    value = v.beta if family == 1 else v.alpha
    if is_certified_irrational(value, precision):
        return True
    raise UncertifiedInput(f"Cannot certify that {value} is irrational.")


def project_pi(x: LatticeBasis) -> LatticeBasis:
    """
    Projects a lattice x = s e_Gamma with s in S (last column e_3) to the
    plane lattice spanned by the upper-left block of s.

    Raises:
        NotInSOrbit: If x has no primitive vector equal to +-e_3.
    """
    if x.dimension != 3:
        raise DimensionMismatch(f"Projection is defined for d = 3, got d = {x.dimension}.")
    try:
        n = _axis_vector(x, 2)
    except UncertifiedInput as e:
        raise NotInSOrbit(f"Cannot certify an axis vector: {e}") from e
    if n is None:
        raise NotInSOrbit("The lattice has no vector on the third axis.")
    completed = x.with_transform(_complete_basis(n))
    matrix = completed.matrix
    with mp.workprec(x.precision):
        if abs(abs(matrix[2, 2]) - 1) > mp.ldexp(1, -(x.precision // 2)):
            raise NotInSOrbit(f"The axis vector has height {mp.nstr(matrix[2, 2], 10)}, not 1.")
    return LatticeBasis.from_rows(
        [[matrix[i, j] for j in range(2)] for i in range(2)], x.precision
    )


@dataclass(frozen=True)
class OffRaySample:
    t: Any
    s: Any
    bound: mpf
    witness_length: mpf
    systole: mpf

    @property
    def holds(self) -> bool:
        return self.systole <= self.witness_length


def offray_grid(
    v: VParams,
    relation: RationalRelation,
    grid: Sequence[tuple[Any, Any]] = DEFAULT_OFFRAY_GRID,
    precision: int = DEFAULT_PRECISION,
) -> list[OffRaySample]:
    """Compares shorty bounds with measured systoles on a (t, s) grid."""
    x = make_xv(v, precision)
    samples = []
    for t, s in grid:
        witness = shorty_witness(v, relation, t, s, precision)
        systole = shortest_vector(shift_log_diag(x, _flow_shifts(t, s, precision))).systole
        samples.append(OffRaySample(t, s, witness.bound, witness.length, systole))
    return samples


@dataclass(frozen=True)
class RecurrenceVerdict:
    """
    The membership test at one recurrence time.

    The verdict decides with threshold tol + drift. It is informative once
    ten times the threshold stays below 1/(2q), the largest possible
    residual.
    """

    t: mpf
    systole: mpf
    drift: mpf
    threshold: mpf
    verdict: MMembershipVerdict

    @property
    def informative(self) -> bool:
        return 10 * self.threshold < mp.mpf(1) / (2 * self.verdict.q)


@dataclass(frozen=True)
class OmegaResult:
    v: VParams
    relation: RationalRelation
    reverse: RationalRelation
    family: int
    q: int
    recurrences: tuple[RecurrenceVerdict, ...]
    offray: tuple[OffRaySample, ...]

    @property
    def informative(self) -> list[RecurrenceVerdict]:
        return [r for r in self.recurrences if r.informative]

    @property
    def residuals(self) -> list[mpf]:
        return [r.verdict.residual for r in self.informative if r.verdict.residual is not None]


def _ray_direction(family: int) -> TracelessDiag:
    return TracelessDiag((-1, 1, 0) if family == 1 else (-1, 0, 1))


def _drift_envelope(coefficient: Fraction, rho: Any, t: mpf, precision: int) -> mpf:
    """
    Bounds the distance of the distinguished coordinates of a reduced basis
    from (1/q)Z at time t.

    Along the ray that distance is |p1/q| e^(-t) times the transverse
    coordinate, and a reduced basis of a lattice with systole at least rho
    has no vector longer than 4 / rho^2.
    """
    with mp.workprec(precision):
        rho_value = evaluate_scalar(rho, precision)
        return abs(evaluate_scalar(coefficient, precision)) * 4 / rho_value**2 * mp.exp(-t)


def _refine_maximum(x: LatticeBasis, direction: TracelessDiag, t: mpf, width: mpf) -> tuple[mpf, mpf]:
    def systole(time: mpf) -> mpf:
        return shortest_vector(shift_log_diag(x, direction.scale(time).entries)).systole

    lower, upper = max(t - width, mp.mpf(0)), t + width
    for _ in range(12):
        left = lower + (upper - lower) / 3
        right = upper - (upper - lower) / 3
        if systole(left) < systole(right):
            lower = left
        else:
            upper = right
    best = (lower + upper) / 2
    return best, systole(best)


def _membership_task(task: tuple[LatticeBasis, int, int, float]) -> MMembershipVerdict:
    y, q, family, tol = task
    return m_membership(y, q, family, tol)


def omega_experiment(
    v: VParams,
    family: int = 1,
    t_max: Any = 20,
    rho: Any = DEFAULT_RECURRENCE_THRESHOLD,
    tol: float = DEFAULT_MEMBERSHIP_TOL,
    steps: int = 200,
    q_max: int = 10**6,
    grid: Sequence[tuple[Any, Any]] = DEFAULT_OFFRAY_GRID,
    precision: int = DEFAULT_PRECISION,
    runner: Optional["ExperimentRunner"] = None,
    min_recurrences: int = 3,
) -> OmegaResult:
    """
    Follows x_v along the ray a^(i)(t) and tests the accumulation points.

    Recurrences are sampled local maxima of the systole at least rho,
    refined by ternary search. At each one the lattice itself is tested for
    membership in M_q (family 1) or M_q' (family 2), with the threshold
    widened by the drift envelope |p1/q| (4/rho^2) e^(-t), so residuals of
    informative verdicts shrink like e^(-t). The off-ray grid records shorty
    bounds against the measured systoles.

    Raises:
        PreconditionViolated: If alpha or beta is rational or the rational
            relations are missing.
    """
    if v.dimension != 3:
        raise DimensionMismatch(f"The experiment needs d = 3, got d = {v.dimension}.")
    if family not in (1, 2):
        raise ValueError(f"family must be 1 or 2, got {family}.")
    if not (is_certified_irrational(v.alpha, precision) and is_certified_irrational(v.beta, precision)):
        raise PreconditionViolated(f"alpha and beta must be irrational, got v = {v}.")
    relation, reverse = relation_pair(v.alpha, v.beta, q_max, precision)
    if relation is None or reverse is None:
        raise PreconditionViolated(f"1, alpha, beta are not rationally dependent for v = {v}.")
    chosen = relation if family == 1 else reverse
    coefficient = Fraction(chosen.p1, chosen.q)

    x = make_xv(v, precision)
    direction = _ray_direction(family)
    samples = trajectory(x, direction, t_max, steps, rho, runner)
    with mp.workprec(precision):
        width = evaluate_scalar(t_max, precision) / steps
    peaks = []
    for index, sample in enumerate(samples):
        if not sample.recurrence or sample.t == 0:
            continue
        before = samples[index - 1].systole if index > 0 else mp.mpf(0)
        after = samples[index + 1].systole if index + 1 < len(samples) else mp.mpf(0)
        if sample.systole > before and sample.systole >= after:
            peaks.append(_refine_maximum(x, direction, sample.t, width))

    tasks, envelopes = [], []
    for t, _ in peaks:
        y = shift_log_diag(x, direction.scale(t).entries)
        drift = _drift_envelope(coefficient, rho, t, precision)
        with mp.workprec(precision):
            threshold = tol + drift
        envelopes.append((drift, threshold))
        tasks.append((y, chosen.q, family, float(threshold)))
    if runner is not None:
        verdicts = runner.map(_membership_task, tasks)
    else:
        verdicts = [_membership_task(task) for task in tasks]
    recurrences = tuple(
        RecurrenceVerdict(t, systole, drift, threshold, verdict)
        for (t, systole), (drift, threshold), verdict in zip(peaks, envelopes, verdicts)
    )
    if len(recurrences) < min_recurrences:
        warn(
            f"Only {len(recurrences)} recurrences observed up to t = {t_max}; "
            f"expected at least {min_recurrences}."
        )
    offray = tuple(offray_grid(v, relation, grid, precision))
    logger.info(
        "Family %d: %d recurrences, %d informative members.",
        family,
        len(recurrences),
        sum(r.verdict.member for r in recurrences if r.informative),
    )
    return OmegaResult(v, relation, reverse, family, chosen.q, recurrences, offray)
