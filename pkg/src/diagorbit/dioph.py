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

"""Multiplicative Diophantine scans: Littlewood products, property C and GDP."""

import csv
import itertools
import logging
import math
from dataclasses import dataclass
from typing import IO, TYPE_CHECKING, Any, Iterable, Iterator, Optional, Sequence, Union

import numpy as np
from mpmath import mp, mpf

from .arith import DEFAULT_PRECISION, distance_to_integer, evaluate_scalar, format_decimal
from .lattice import LatticeBasis, reduce

if TYPE_CHECKING:
    from .runner import ExperimentRunner

logger = logging.getLogger(__name__)

Witness = Union[int, tuple[int, ...]]

_CHUNKS_PER_WORKER = 4


def littlewood_product(
    alpha: Any, beta: Any, n: int, gamma: Any = 0, delta: Any = 0, precision: int = DEFAULT_PRECISION
) -> mpf:
    """Returns |n| <n alpha - gamma> <n beta - delta>, <.> the distance to Z."""
    if n == 0:
        raise ValueError("n must be nonzero.")
    return _c1_value(n, [alpha, beta], [gamma, delta], precision)


def _guard(n: int) -> int:
    return abs(n).bit_length() + 16


def _c1_value(n: int, v: Sequence[Any], gamma: Sequence[Any], precision: int) -> mpf:
    working = precision + _guard(n)
    with mp.workprec(working):
        value = mp.mpf(abs(n))
        for vi, gi in zip(v, gamma):
            value *= distance_to_integer(n * evaluate_scalar(vi, working) - evaluate_scalar(gi, working))
    with mp.workprec(precision):
        return +value


def _c2_value(n: Sequence[int], v: Sequence[Any], gamma: Any, precision: int) -> mpf:
    working = precision + _guard(max(abs(c) for c in n)) + len(n).bit_length()
    with mp.workprec(working):
        total = mp.fsum(c * evaluate_scalar(vi, working) for c, vi in zip(n, v))
        value = math.prod(abs(c) for c in n) * distance_to_integer(total - evaluate_scalar(gamma, working))
    with mp.workprec(precision):
        return +value


@dataclass(frozen=True)
class SearchRecord:
    """A record of a scan: the witness, its certified value and the shift."""

    witness: Witness
    value: mpf
    target: tuple[Any, ...]

    @property
    def order(self) -> tuple:
        if isinstance(self.witness, int):
            return (abs(self.witness), self.witness < 0)
        return (math.prod(abs(c) for c in self.witness), self.witness)


@dataclass(frozen=True)
class RecordTrace:
    """Strictly decreasing records in scan order, up to the scan bound."""

    records: tuple[SearchRecord, ...]
    bound: int

    @property
    def first(self) -> Optional[SearchRecord]:
        return self.records[0] if self.records else None

    @property
    def final(self) -> Optional[SearchRecord]:
        return self.records[-1] if self.records else None


def _improves(value: mpf, best: Optional[mpf], precision: int) -> bool:
    if best is None:
        return True
    with mp.workprec(precision):
        return value < best * (1 - mp.ldexp(1, -(precision // 2)))


def merge_traces(traces: Iterable[RecordTrace], precision: int = DEFAULT_PRECISION) -> RecordTrace:
    """
    Merges traces of disjoint scan ranges: all records are put in scan order
    and only strict improvements are kept, so the merge does not depend on
    the order of the inputs.
    """
    traces = list(traces)
    candidates = sorted((r for t in traces for r in t.records), key=lambda r: r.order)
    records: list[SearchRecord] = []
    best = None
    for record in candidates:
        if _improves(record.value, best, precision):
            records.append(record)
            best = record.value
    return RecordTrace(tuple(records), max((t.bound for t in traces), default=0))


def _float_values(v: Sequence[Any], gamma: Sequence[Any]) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.array([float(evaluate_scalar(c, 64)) for c in v]),
        np.array([float(evaluate_scalar(c, 64)) for c in gamma]),
    )


def _frac_distance(values: np.ndarray) -> np.ndarray:
    return np.abs(values - np.rint(values))


def _local_candidates(values: np.ndarray, slack: float) -> np.ndarray:
    """Indices whose filtered value may beat every earlier value of the chunk."""
    before = np.minimum.accumulate(np.concatenate([[np.inf], values[:-1]]))
    return np.nonzero(values <= before + slack)[0]


def _scan_c1(task: tuple[list[int], list[Any], list[Any], int]) -> RecordTrace:
    ns, v, gamma, precision = task
    if not ns:
        return RecordTrace((), 0)
    v_float, g_float = _float_values(v, gamma)
    n = np.array(ns, dtype=np.int64)
    products = np.abs(n).astype(np.float64)
    for vi, gi in zip(v_float, g_float):
        products = products * _frac_distance(n * vi - gi)
    largest = float(np.max(np.abs(n)))
    error = largest * len(v) * (largest * float(np.max(np.abs(v_float)) + 1) * 4 * np.finfo(float).eps + 1e-15)
    records: list[SearchRecord] = []
    best = None
    for index in _local_candidates(products, 2 * error):
        witness = int(ns[index])
        value = _c1_value(witness, v, gamma, precision)
        if _improves(value, best, precision):
            records.append(SearchRecord(witness, value, tuple(gamma)))
            best = value
    return RecordTrace(tuple(records), max(abs(c) for c in ns))


def _scan_c2(task: tuple[list[tuple[int, ...]], list[Any], Any, int]) -> RecordTrace:
    vectors, v, gamma, precision = task
    if not vectors:
        return RecordTrace((), 0)
    v_float, g_float = _float_values(v, [gamma])
    n = np.array(vectors, dtype=np.int64)
    weights = np.prod(np.abs(n), axis=1).astype(np.float64)
    values = weights * _frac_distance(n.astype(np.float64) @ v_float - g_float[0])
    largest = float(np.max(np.abs(n)))
    error = float(np.max(weights)) * (
        len(v) * largest * (float(np.max(np.abs(v_float))) + 1) * 4 * np.finfo(float).eps + 1e-15
    )
    records: list[SearchRecord] = []
    best = None
    for index in _local_candidates(values, 2 * error):
        witness = tuple(int(c) for c in vectors[index])
        value = _c2_value(witness, v, gamma, precision)
        if _improves(value, best, precision):
            records.append(SearchRecord(witness, value, (gamma,)))
            best = value
    return RecordTrace(tuple(records), int(np.max(weights)))


def _partition(items: list, runner: Optional["ExperimentRunner"]) -> list[list]:
    workers = runner.workers if runner is not None else 1
    count = max(1, workers * _CHUNKS_PER_WORKER) if workers > 1 else 1
    size = max(1, -(-len(items) // count))
    return [items[k : k + size] for k in range(0, len(items), size)] or [[]]


def _run(fn: Any, tasks: list, runner: Optional["ExperimentRunner"]) -> list[RecordTrace]:
    if runner is not None:
        return runner.map(fn, tasks)
    return [fn(task) for task in tasks]


def _c1_order(N: int, sign: int) -> list[int]:
    if sign > 0:
        return list(range(1, N + 1))
    if sign < 0:
        return [-k for k in range(1, N + 1)]
    return [n for k in range(1, N + 1) for n in (k, -k)]


def propC1_search(
    v: Sequence[Any],
    gamma: Sequence[Any],
    N: int,
    precision: int = DEFAULT_PRECISION,
    runner: Optional["ExperimentRunner"] = None,
    sign: int = 0,
) -> RecordTrace:
    """
    Scans 0 < |n| <= N for records of |n| prod_i <n v_i - gamma_i>.

    Candidates are found with a double precision filter and certified at
    `precision` bits; a record must beat its predecessor by a relative
    margin of 2^(-P/2). The scan order is n = 1, -1, 2, -2, ..., so each
    record sits at the smallest |n| reaching its value.

    Args:
        v: The vector (v_1, ..., v_m).
        gamma: The shift (gamma_1, ..., gamma_m).
        N: The scan bound, at least 1.
        precision: The certification precision in bits.
        runner: Optional runner that scans contiguous ranges in parallel.
        sign: 0 scans both signs of n, 1 only n > 0, -1 only n < 0.

    Returns:
        The record trace.
    """
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}.")
    if len(v) != len(gamma):
        raise ValueError(f"v and gamma must have the same length, got {len(v)} and {len(gamma)}.")
    chunks = _partition(_c1_order(N, sign), runner)
    traces = _run(_scan_c1, [(chunk, list(v), list(gamma), precision) for chunk in chunks], runner)
    trace = merge_traces(traces, precision)
    logger.info("Property C1 scan up to %d: %d records.", N, len(trace.records))
    return RecordTrace(trace.records, N)


def _positive_tuples(m: int, N: int) -> list[tuple[int, ...]]:
    if m == 1:
        return [(a,) for a in range(1, N + 1)]
    return [(a,) + rest for a in range(1, N + 1) for rest in _positive_tuples(m - 1, N // a)]


def c2_order(m: int, N: int) -> list[tuple[int, ...]]:
    """All n in Z^m without zero entries and prod |n_i| <= N, in scan order."""
    vectors = []
    for magnitudes in _positive_tuples(m, N):
        for signs in itertools.product((1, -1), repeat=m):
            vectors.append(tuple(s * a for s, a in zip(signs, magnitudes)))
    return sorted(vectors, key=lambda n: (math.prod(abs(c) for c in n), n))


def propC2_search(
    v: Sequence[Any],
    gamma: Any,
    N: int,
    precision: int = DEFAULT_PRECISION,
    runner: Optional["ExperimentRunner"] = None,
) -> RecordTrace:
    """
    Scans n in Z^m with nonzero entries and 0 < prod |n_i| <= N for records
    of (prod |n_i|) <sum n_i v_i - gamma>, in order of increasing product
    and then lexicographically.
    """
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}.")
    chunks = _partition(c2_order(len(v), N), runner)
    traces = _run(_scan_c2, [(chunk, list(v), gamma, precision) for chunk in chunks], runner)
    trace = merge_traces(traces, precision)
    logger.info("Property C2 scan up to %d: %d records.", N, len(trace.records))
    return RecordTrace(trace.records, N)


def brute_force_records(
    kind: str, v: Sequence[Any], gamma: Any, N: int, precision: int = DEFAULT_PRECISION
) -> RecordTrace:
    """Computes the record trace by evaluating every candidate at full precision."""
    if kind == "c1":
        witnesses: list[Witness] = _c1_order(N, 0)
    elif kind == "c2":
        witnesses = list(c2_order(len(v), N))
    else:
        raise ValueError(f"kind must be 'c1' or 'c2', got {kind!r}.")
    records: list[SearchRecord] = []
    best = None
    for witness in witnesses:
        if kind == "c1":
            value = _c1_value(witness, v, gamma, precision)
            target = tuple(gamma)
        else:
            value = _c2_value(witness, v, gamma, precision)
            target = (gamma,)
        if _improves(value, best, precision):
            records.append(SearchRecord(witness, value, target))
            best = value
    return RecordTrace(tuple(records), N)


def write_records_csv(trace: RecordTrace, stream: IO[str], precision: int) -> None:
    """Writes rank, witness, value and target columns."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["rank", "witness", "value", "target"])
    for rank, record in enumerate(trace.records, start=1):
        witness = record.witness if isinstance(record.witness, int) else ";".join(map(str, record.witness))
        target = ";".join(format_decimal(c, precision) for c in record.target)
        writer.writerow([rank, witness, format_decimal(record.value, precision), target])


@dataclass(frozen=True)
class GDPWitness:
    """A lattice point u with |prod(u_i + w_i) - target| below the tolerance."""

    coefficients: tuple[int, ...]
    point: tuple[mpf, ...]
    shift: tuple[Any, ...]
    product: mpf
    target: Any
    error: mpf


def _real_breakpoints(poly: np.ndarray) -> np.ndarray:
    """Real parts of the roots of monic polynomials given row-wise in ascending order."""
    k = poly.shape[1] - 1
    if k == 1:
        return -poly[:, :1]
    companion = np.zeros((len(poly), k, k))
    companion[:, np.arange(1, k), np.arange(k - 1)] = 1.0
    companion[:, :, -1] = -poly[:, :k]
    return np.linalg.eigvals(companion).real


def _line_hits(
    a: np.ndarray, b: np.ndarray, target: float, tol: float, lo: int, hi: int
) -> tuple[np.ndarray, np.ndarray]:
    """
    Solves |prod(a_i + c b_i) - target| < tol for integers c in [lo, hi],
    one line per row of a.

    The product is a polynomial in c; the roots of product = target +- tol
    cut [lo, hi] into segments on which the inequality holds or fails
    throughout. Each segment that holds contributes its ends and its integer
    nearest to zero.

    Returns:
        Row indices into a and the matching values of c.
    """
    moving = np.abs(b) > 1e-12 * np.max(np.abs(b))
    scale = np.prod(a[:, ~moving], axis=1) * np.prod(b[moving])
    flat = np.abs(scale) < 1e-150
    safe = np.where(flat, 1.0, scale)
    poly = np.ones((len(a), 1))
    for root in (a[:, moving] / b[moving]).T:
        grown = np.zeros((len(a), poly.shape[1] + 1))
        grown[:, 1:] += poly
        grown[:, :-1] += poly * root[:, None]
        poly = grown

    cuts = [np.full((len(a), 1), float(lo)), np.full((len(a), 1), float(hi))]
    for sign in (1.0, -1.0):
        level = poly.copy()
        level[:, 0] -= (target + sign * tol) / safe
        cuts.append(_real_breakpoints(level))
    cuts = np.sort(np.clip(np.concatenate(cuts, axis=1), lo, hi), axis=1)
    cuts[flat, 1:] = hi

    middles = (cuts[:, :-1] + cuts[:, 1:]) / 2
    values = np.prod(a[:, None, :] + middles[:, :, None] * b, axis=2)
    margin = 1e-6 * (1 + np.abs(cuts))
    first = np.maximum(np.ceil(cuts[:, :-1] - margin[:, :-1]), lo)
    last = np.minimum(np.floor(cuts[:, 1:] + margin[:, 1:]), hi)
    holds = (np.abs(values - target) < tol) & (first <= last)
    rows, segments = np.nonzero(holds)
    first, last = first[rows, segments], last[rows, segments]
    nearest = np.clip(0, first, last)
    return np.tile(rows, 3), np.concatenate([nearest, first, last]).astype(np.int64)


def _shell_lines(bound: int, d: int) -> Iterator[np.ndarray]:
    """Yields the first d - 1 coefficients of the box, one value of the first at a time."""
    axis = np.arange(-bound, bound + 1, dtype=np.int64)
    if d == 2:
        yield axis[:, None]
        return
    tail = np.stack(np.meshgrid(*([axis] * (d - 2)), indexing="ij"), axis=-1).reshape(-1, d - 2)
    for head in axis:
        yield np.column_stack([np.full(len(tail), head), tail])


def _shell_candidates(
    basis: np.ndarray, w: np.ndarray, target: float, tol: float, bound: int, inner: int
) -> np.ndarray:
    """
    Filters the nonzero coefficient vectors c with inner < max|c_i| <= bound.

    The last coefficient is solved for along each line rather than
    enumerated, so memory stays at one slab of lines.
    """
    d = len(w)
    direction, others = basis[:, d - 1], basis[:, : d - 1]
    found = []
    for lines in _shell_lines(bound, d):
        a = lines.astype(np.float64) @ others.T + w
        outer = np.max(np.abs(lines), axis=1) > inner
        for mask, lo, hi in ((outer, -bound, bound), (~outer, inner + 1, bound), (~outer, -bound, -inner - 1)):
            if lo > hi or not mask.any():
                continue
            rows, values = _line_hits(a[mask], direction, target, tol, lo, hi)
            if len(rows):
                found.append(np.column_stack([lines[mask][rows], values]))
    if not found:
        return np.zeros((0, d), dtype=np.int64)
    return np.unique(np.concatenate(found), axis=0)


def gdp_probe(
    x: LatticeBasis,
    w: Sequence[Any],
    target: Any,
    eps: Any,
    coeff_bound: int,
    precision: Optional[int] = None,
) -> Optional[GDPWitness]:
    """
    Searches nonzero lattice points u of x for |prod(u_i + w_i) - target| < eps.

    Coefficients are taken against the reduced basis in shells of doubling
    size up to coeff_bound. Within a shell the last coefficient is solved for
    in double precision along each line of the others, and the candidates
    are certified from the provenance in order of smallest coefficient norm,
    then lexicographically largest coefficients. The first certified
    candidate of the first shell that has one is returned.

    Returns:
        The witness, or None if the box holds none.
    """
    precision = precision or x.precision
    d = x.dimension
    if len(w) != d:
        raise ValueError(f"The shift must have {d} entries, got {len(w)}.")
    with mp.workprec(precision):
        eps_value = evaluate_scalar(eps, precision)
        target_value = evaluate_scalar(target, precision)
        shift = [evaluate_scalar(c, precision) for c in w]
    if eps_value <= 0:
        raise ValueError(f"eps must be positive, got {eps}.")
    reduced, transform = reduce(x)
    basis = np.array([[float(reduced.matrix[i, j]) for j in range(d)] for i in range(d)])
    w_float = np.array([float(c) for c in shift])
    target_float, eps_float = float(target_value), float(eps_value)

    inner, bound = 0, 1
    while inner < coeff_bound:
        bound = min(bound, coeff_bound)
        reach = bound * np.max(np.sum(np.abs(basis), axis=1)) + np.max(np.abs(w_float))
        slack = 1e-12 * (1 + reach) ** d
        candidates = _shell_candidates(basis, w_float, target_float, eps_float + slack, bound, inner)
        if len(candidates):
            keys = [-candidates[:, j] for j in reversed(range(d))]
            order = np.lexsort(keys + [np.sum(candidates * candidates, axis=1)])
            for row in candidates[order]:
                coeffs = tuple(int(c) for c in row)
                u = reduced.point(coeffs)
                with mp.workprec(precision):
                    product = mp.mpf(1)
                    for ui, wi in zip(u, shift):
                        product *= ui + wi
                    error = abs(product - target_value)
                if error < eps_value:
                    original = tuple(sum(transform[i][j] * coeffs[j] for j in range(d)) for i in range(d))
                    logger.debug("GDP witness %s with error %s.", original, mp.nstr(error, 5))
                    return GDPWitness(original, tuple(u), tuple(w), product, target, error)
        logger.debug("No GDP witness with coefficients up to %d.", bound)
        inner, bound = bound, bound * 2
    return None
