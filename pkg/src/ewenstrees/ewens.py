"""The Ewens(m, theta) partition distribution: pmf, samplers and moments.

A partition of the integer m is stored as a count vector (c_1, ..., c_m)
with sum_j j*c_j = m, where c_j is the number of blocks of size j.  The
distribution weights a partition by theta^(#blocks) over the product of
block sizes and multiplicities:

    P(c) = m! / theta^(m-rising) * prod_j theta^(c_j) / (j^(c_j) * c_j!)

Samplers take an explicit numpy Generator and are otherwise pure; callers
own parallelism by supplying independent streams.

Besides the sequential Chinese-restaurant sampler there are two law-equal
samplers used on hot paths:

* ``sample_block_sizes`` with ``method="sb"`` peels off the block containing
  a marked element (whose size has an explicit pmf) and recurses on the
  rest; cost is one O(block) scan per block.
* ``method="founder"`` first draws the new-table times of the restaurant
  process (independent Bernoullis, inverted in O(log m) per table) and then
  fills table sizes backwards with beta-binomials; cost is O(#blocks log m)
  independent of m.

Both are validated against the exact pmf in the test suite.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from ewenstrees.constants import log_gamma

__all__ = [
    "CountVector",
    "BlockSizes",
    "StickWeights",
    "ewens_pmf",
    "sample_ewens_crp",
    "sample_block_sizes",
    "mixed_factorial_moment",
    "sample_gem",
    "all_count_vectors",
]


class InfeasiblePartitionError(ValueError):
    """Count vector does not sum to its declared total mass."""


@dataclass(frozen=True)
class CountVector:
    """Integer partition of m in count-vector form: counts[j] blocks of size j."""

    m: int
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError(f"m must be >= 0, got {self.m}")
        if len(self.counts) != self.m:
            raise InfeasiblePartitionError(
                f"count vector must have length m={self.m}, got {len(self.counts)}"
            )
        total = sum((j + 1) * c for j, c in enumerate(self.counts))
        if total != self.m:
            raise InfeasiblePartitionError(
                f"sum of j*c_j is {total}, expected m={self.m}"
            )
        if any(c < 0 for c in self.counts):
            raise InfeasiblePartitionError("counts must be nonnegative")

    @staticmethod
    def from_blocks(blocks: Iterable[int]) -> "CountVector":
        blocks = list(blocks)
        m = sum(blocks)
        counts = [0] * m
        for b in blocks:
            counts[b - 1] += 1
        return CountVector(m=m, counts=tuple(counts))

    @staticmethod
    def from_sparse(m: int, sparse: dict[int, int]) -> "CountVector":
        counts = [0] * m
        for j, c in sparse.items():
            counts[j - 1] = c
        return CountVector(m=m, counts=tuple(counts))

    def blocks(self) -> "BlockSizes":
        sizes = []
        for j in range(self.m, 0, -1):
            sizes.extend([j] * self.counts[j - 1])
        return BlockSizes(sizes=tuple(sizes))

    def num_blocks(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class BlockSizes:
    """Block sizes of a partition, in nonincreasing order."""

    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(s <= 0 for s in self.sizes):
            raise ValueError("block sizes must be positive")
        if any(self.sizes[i] < self.sizes[i + 1] for i in range(len(self.sizes) - 1)):
            raise ValueError("block sizes must be nonincreasing")

    @property
    def m(self) -> int:
        return sum(self.sizes)

    def count_vector(self) -> CountVector:
        return CountVector.from_blocks(self.sizes)


@dataclass(frozen=True)
class StickWeights:
    """Finite truncation of GEM(theta) stick-breaking weights (unsorted)."""

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(not (0.0 < w < 1.0) for w in self.weights):
            raise ValueError("stick weights must lie in (0, 1)")

    def total(self) -> float:
        return sum(self.weights)


def _as_fraction_theta(theta) -> Fraction:
    if isinstance(theta, Fraction):
        return theta
    if isinstance(theta, int):
        return Fraction(theta)
    if isinstance(theta, tuple) and len(theta) == 2:
        return Fraction(theta[0], theta[1])
    raise TypeError(
        "exact mode requires a rational theta: int, Fraction or (num, den) tuple"
    )


def _rising_factorial_fraction(x: Fraction, m: int) -> Fraction:
    out = Fraction(1)
    for i in range(m):
        out *= x + i
    return out


def ewens_pmf(cv: CountVector, theta, exact: bool = False):
    """Probability of a count vector under Ewens(m, theta).

    In exact mode the result is a Fraction and theta must be rational
    (int, Fraction, or a (num, den) tuple); floats are rejected there.
    """
    m = cv.m
    if m == 0:
        return Fraction(1) if exact else 1.0
    if exact:
        th = _as_fraction_theta(theta)
        if th <= 0:
            raise ValueError("theta must be > 0")
        prob = Fraction(math.factorial(m)) / _rising_factorial_fraction(th, m)
        for j, c in enumerate(cv.counts, start=1):
            if c:
                prob *= th**c / (Fraction(j) ** c * math.factorial(c))
        return prob
    theta = float(theta)
    if not theta > 0:
        raise ValueError("theta must be > 0")
    # log m! - log theta^(m) + sum_j [c_j log theta - c_j log j - log c_j!]
    logp = math.lgamma(m + 1) - (log_gamma(theta + m) - log_gamma(theta))
    for j, c in enumerate(cv.counts, start=1):
        if c:
            logp += c * math.log(theta) - c * math.log(j) - math.lgamma(c + 1)
    return math.exp(logp)


def sample_ewens_crp(m: int, theta: float, rng: np.random.Generator) -> CountVector:
    """Sample Ewens(m, theta) by seating m customers sequentially.

    Customer i starts a new table with probability theta / (theta + i - 1),
    otherwise joins an existing table with probability proportional to its
    size.  Table lookup is a linear scan while there are at most 64 tables
    and a Fenwick tree beyond that.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    if not theta > 0:
        raise ValueError("theta must be > 0")
    if m == 0:
        return CountVector(m=0, counts=())
    tables: list[int] = [1]
    fenwick: _Fenwick | None = None
    uniforms = rng.random(m - 1)
    for i in range(2, m + 1):
        u = uniforms[i - 2] * (theta + i - 1)
        if u < theta:
            tables.append(1)
            if fenwick is not None:
                fenwick.append(1)
            continue
        target = u - theta
        if fenwick is None and len(tables) > 64:
            fenwick = _Fenwick(tables)
        if fenwick is None:
            acc = 0.0
            for k, size in enumerate(tables):
                acc += size
                if target < acc:
                    tables[k] += 1
                    break
            else:  # numerical edge: join the last table
                tables[-1] += 1
        else:
            k = fenwick.find(target)
            tables[k] += 1
            fenwick.add(k, 1)
    return CountVector.from_blocks(tables)


class _Fenwick:
    """Binary-indexed tree over table sizes, supporting prefix-sum search."""

    def __init__(self, sizes: Sequence[int]) -> None:
        self.n = len(sizes)
        self.cap = 1
        while self.cap < self.n + 1:
            self.cap *= 2
        self.tree = [0] * (self.cap + 1)
        for i, s in enumerate(sizes):
            self.add(i, s)

    def add(self, idx: int, delta: int) -> None:
        i = idx + 1
        while i <= self.cap:
            self.tree[i] += delta
            i += i & (-i)

    def append(self, size: int) -> None:
        if self.n + 1 >= self.cap:
            sizes = self.sizes()
            sizes.append(size)
            self.__init__(sizes)
        else:
            self.n += 1
            self.add(self.n - 1, size)

    def sizes(self) -> list[int]:
        out = []
        prev = 0
        for i in range(self.n):
            cur = self._prefix(i + 1)
            out.append(cur - prev)
            prev = cur
        return out

    def _prefix(self, i: int) -> int:
        acc = 0
        while i > 0:
            acc += self.tree[i]
            i -= i & (-i)
        return acc

    def find(self, target: float) -> int:
        """Smallest index k with prefix_sum(k+1) > target."""
        pos = 0
        half = self.cap // 2
        while half:
            nxt = pos + half
            if self.tree[nxt] <= target:
                target -= self.tree[nxt]
                pos = nxt
            half //= 2
        return min(pos, self.n - 1)


# -- fast, law-equal block-size samplers -------------------------------------

_SMALL_TABLE_MAX = 24
_SB_SCAN_MAX = 700
_SB_VECTOR_MAX = 20000


@lru_cache(maxsize=256)
def _small_mass_table(m: int, theta: float):
    """Cumulative pmf over all partitions of m, as parallel tuples."""
    cvs = all_count_vectors(m)
    probs = np.array([ewens_pmf(cv, theta) for cv in cvs])
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    blocks = tuple(cv.blocks().sizes for cv in cvs)
    return cum, blocks


@lru_cache(maxsize=256)
def _small_mass_table_list(m: int, theta: float):
    cum, blocks = _small_mass_table(m, theta)
    return list(cum), blocks


def _sample_blocks_table(m: int, theta: float, rng: np.random.Generator) -> list[int]:
    cum, blocks = _small_mass_table_list(m, theta)
    idx = bisect.bisect_right(cum, rng.random())
    return list(blocks[min(idx, len(blocks) - 1)])


def _marked_block_scan(rem: int, theta: float, u: float) -> int:
    """Size of the block containing a marked element, by pmf scan.

    P(B = j) = (theta/rem) (rem)_j theta^(rem-j) / theta^(rem), with ratio
    p_{j+1}/p_j = (rem-j)/(theta+rem-j-1).
    """
    p = theta / (theta + rem - 1)
    acc = p
    j = 1
    while acc < u and j < rem:
        p *= (rem - j) / (theta + rem - j - 1)
        acc += p
        j += 1
    return j


def _marked_block_vector(rem: int, theta: float, rng: np.random.Generator) -> int:
    """Same law as _marked_block_scan, via a vectorized cumulative pmf."""
    j = np.arange(1, rem, dtype=float)
    ratios = (rem - j) / (theta + rem - j - 1.0)
    pmf = np.empty(rem)
    pmf[0] = theta / (theta + rem - 1)
    pmf[1:] = pmf[0] * np.cumprod(ratios)
    cum = np.cumsum(pmf)
    idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(idx + 1, rem)


def _sample_blocks_sb(m: int, theta: float, rng: np.random.Generator) -> list[int]:
    """Size-biased deletion: peel off the block containing a marked element;
    the remaining partition is Ewens(m - B, theta), finished from the exact
    small-mass table once the remainder is small."""
    blocks: list[int] = []
    rem = m
    while rem > 0:
        if rem <= _SMALL_TABLE_MAX:
            blocks.extend(_sample_blocks_table(rem, theta, rng))
            break
        if rem > _SB_SCAN_MAX:
            j = _marked_block_vector(rem, theta, rng)
        else:
            j = _marked_block_scan(rem, theta, rng.random())
        blocks.append(j)
        rem -= j
    blocks.sort(reverse=True)
    return blocks


def _next_founder(after: int, m: int, theta: float, log_u: float) -> int | None:
    """Smallest j > after with P(no new table in (after, j]) < exp(log_u)."""
    lg = math.lgamma
    base = lg(after) - lg(theta + after)

    def log_surv(j: int) -> float:
        return lg(j) - lg(theta + j) - base

    if log_surv(m) >= log_u:
        return None
    # survival is approximately (after/j)^theta: analytic guess brackets the
    # root so the bisection usually needs only a few refinements
    guess = int(after * math.exp(-log_u / theta))
    lo, hi = after, m
    if after < guess < m:
        if log_surv(guess) < log_u:
            hi = guess
            lo = max(lo, int(guess * 0.7))
            while log_surv(lo) < log_u:
                lo = max(after, int(lo * 0.7) - 1)
                if lo == after:
                    break
        else:
            lo = guess
            hi_try = min(m, max(int(guess * 1.4), guess + 2))
            while log_surv(hi_try) >= log_u and hi_try < m:
                hi_try = min(m, hi_try * 2)
            hi = hi_try
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if log_surv(mid) < log_u:
            hi = mid
        else:
            lo = mid
    return hi


def _sample_blocks_founder(m: int, theta: float, rng: np.random.Generator) -> list[int]:
    """Founder-time representation: O(#blocks log m) per draw.

    Customer i founds a new table independently with probability
    theta/(theta+i-1); conditionally on the founder times, the last-founded
    table receives 1 + BetaBinomial(remaining; 1, founder_time - 1)
    customers, and removing it leaves the same scheme on the earlier
    founders.
    """
    founders = [1]
    cur = 1
    while True:
        nxt = _next_founder(cur, m, theta, math.log(rng.random()))
        if nxt is None:
            break
        founders.append(nxt)
        cur = nxt
    sizes = []
    rem = m
    for t in reversed(founders[1:]):
        free = rem - t
        if free > 0:
            p = rng.beta(1.0, t - 1)
            extra = int(rng.binomial(free, p))
        else:
            extra = 0
        sizes.append(1 + extra)
        rem -= 1 + extra
    sizes.append(rem)
    sizes.sort(reverse=True)
    return sizes


def sample_block_sizes(
    m: int,
    theta: float,
    rng: np.random.Generator,
    method: str = "auto",
) -> list[int]:
    """Block sizes (nonincreasing) of an Ewens(m, theta) partition.

    method: "auto" picks by m; "crp", "table", "sb", "founder" force one
    sampler.  All methods target the same law.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    if m == 0:
        return []
    if m == 1:
        return [1]
    if method == "auto":
        if m <= _SMALL_TABLE_MAX:
            method = "table"
        elif m <= _SB_VECTOR_MAX:
            method = "sb"
        else:
            method = "founder"
    if method == "crp":
        return list(sample_ewens_crp(m, theta, rng).blocks().sizes)
    if method == "table":
        return _sample_blocks_table(m, theta, rng)
    if method == "sb":
        return _sample_blocks_sb(m, theta, rng)
    if method == "founder":
        return _sample_blocks_founder(m, theta, rng)
    raise ValueError(f"unknown method {method!r}")


def mixed_factorial_moment(
    m: int, theta: float, spec: Sequence[tuple[int, int]]
) -> float:
    """E[ prod (C_j)_a ] for distinct block sizes j under Ewens(m, theta).

    Returns 0 when sum a*j exceeds m.  Computed in log space.
    """
    if not theta > 0:
        raise ValueError("theta must be > 0")
    js = [j for j, _ in spec]
    if len(set(js)) != len(js):
        raise ValueError("block sizes j in spec must be distinct")
    if any(j < 1 or a < 0 for j, a in spec):
        raise ValueError("spec entries must have j >= 1 and a >= 0")
    L = sum(a * j for j, a in spec)
    if L > m:
        return 0.0
    logval = 0.0
    for j, a in spec:
        logval += a * (math.log(theta) - math.log(j))
    logval += math.lgamma(m + 1) - math.lgamma(m - L + 1)
    logval += log_gamma(theta + m - L) - log_gamma(theta + m)
    return math.exp(logval)


def sample_gem(theta: float, trunc: int, rng: np.random.Generator) -> StickWeights:
    """First `trunc` GEM(theta) stick-breaking weights, in stick order.

    V_k ~ Beta(1, theta) iid (sampled as 1 - U^(1/theta)), and
    P_k = V_k * prod_{i<k} (1 - V_i).
    """
    if trunc < 1:
        raise ValueError("trunc must be >= 1")
    if not theta > 0:
        raise ValueError("theta must be > 0")
    u = rng.random(trunc)
    v = 1.0 - u ** (1.0 / theta)
    residual = np.concatenate(([1.0], np.cumprod(1.0 - v)[:-1]))
    return StickWeights(weights=tuple(v * residual))


def all_count_vectors(m: int) -> list[CountVector]:
    """Every partition of m as a CountVector, in a deterministic order."""
    if m < 0:
        raise ValueError("m must be >= 0")
    out: list[CountVector] = []

    def rec(remaining: int, max_part: int, parts: list[int]) -> None:
        if remaining == 0:
            out.append(CountVector.from_blocks(parts))
            return
        for j in range(min(remaining, max_part), 0, -1):
            parts.append(j)
            rec(remaining - j, j, parts)
            parts.pop()

    rec(m, m, [])
    return out
