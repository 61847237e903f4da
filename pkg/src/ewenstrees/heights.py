"""Exact height distributions of Ewens fragmentation trees, and tree statistics.

Let q_n(h) = P(height of the mass-n tree <= h).  Conditioning on the root
split turns the height recursion into one exponential of a power series per
level:

    F_h(z) = sum_m theta^(m) / m! * q_{m+1}(h) z^m
           = exp( theta * sum_j q_j(h-1) z^j / j ),

so a full table of q_n(h) for n <= N costs one degree-N series exponential
per height row.  The same table feeds the identity

    (1 - z)^theta F_h(z) = exp(-theta * Phi_{h-1}(z)),
    Phi_h(z) = sum_j p_j(h) z^j / j,  p = 1 - q,

whose coefficient-wise residual is a stringent cross-check, and the
de-Poissonization bridge E[q_{M_r + 1}(h)] = exp(-theta * Phi_{h-1}(r))
where M_r is negative binomial (theta, r).

Tree statistics (height, level sums of falling factorials, count of
macroscopic root children) operate on sampled mass trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ewenstrees.constants import log_gamma
from ewenstrees.ewens import _as_fraction_theta

__all__ = [
    "Series",
    "HeightCdfTable",
    "SMassProfile",
    "ThresholdDiagnostic",
    "series_exp",
    "series_mul",
    "exact_height_cdf",
    "key_identity_residual",
    "neg_binomial_pmf",
    "neg_binomial_mean",
    "neg_binomial_var",
    "poissonization_radius",
    "threshold_diagnostic",
    "height",
    "s_mass_profile",
    "macroscopic_count",
]


class BudgetError(ValueError):
    """Requested table size exceeds the configured budget."""


@dataclass(frozen=True)
class Series:
    """Truncated power series; coeffs[k] is the z^k coefficient, k <= N."""

    coeffs: tuple

    @property
    def N(self) -> int:
        return len(self.coeffs) - 1

    @staticmethod
    def zero(N: int) -> "Series":
        return Series(coeffs=(0.0,) * (N + 1))


def series_exp(g: Series) -> Series:
    """exp of a series with zero constant term, to the same degree.

    Uses the quadratic recurrence k e_k = sum_{i=1..k} i g_i e_{k-i} coming
    from e' = g' e.  Works for float and Fraction coefficients alike.
    """
    if g.coeffs[0] != 0:
        raise ValueError("series_exp requires a zero constant term")
    exact = isinstance(g.coeffs[0], Fraction) or (
        len(g.coeffs) > 1 and isinstance(g.coeffs[1], Fraction)
    )
    if exact:
        return Series(coeffs=tuple(_exp_exact(list(g.coeffs))))
    c = np.asarray(g.coeffs, dtype=float)
    N = len(c) - 1
    ig = c * np.arange(N + 1)
    e = np.empty(N + 1)
    e[0] = 1.0
    for k in range(1, N + 1):
        e[k] = np.dot(ig[1 : k + 1], e[k - 1 :: -1][:k]) / k
    return Series(coeffs=tuple(float(x) for x in e))


def _exp_exact(g: list) -> list:
    N = len(g) - 1
    e = [Fraction(1)] + [Fraction(0)] * N
    for k in range(1, N + 1):
        acc = Fraction(0)
        for i in range(1, k + 1):
            if g[i]:
                acc += i * g[i] * e[k - i]
        e[k] = acc / k
    return e


def series_mul(a: Series, b: Series) -> Series:
    """Product of two truncated series, truncated to min degree."""
    N = min(a.N, b.N)
    if isinstance(a.coeffs[0], Fraction) or isinstance(b.coeffs[0], Fraction):
        out = [Fraction(0)] * (N + 1)
        for i in range(N + 1):
            ai = a.coeffs[i]
            if not ai:
                continue
            for j in range(N + 1 - i):
                out[i + j] += ai * b.coeffs[j]
        return Series(coeffs=tuple(out))
    full = np.convolve(
        np.asarray(a.coeffs[: N + 1], dtype=float),
        np.asarray(b.coeffs[: N + 1], dtype=float),
    )
    return Series(coeffs=tuple(float(x) for x in full[: N + 1]))


_DEFAULT_N_BUDGET = 4000
_DEFAULT_H_BUDGET = 64
_ADAPTIVE_TAIL = 1e-12


@dataclass
class HeightCdfTable:
    """q[n][h] = P(H_n <= h) for 1 <= n <= N, 0 <= h <= H.

    q is an (N+1, H+1) array with row 0 unused.  In exact mode the parallel
    ``q_exact`` holds Fractions for the same index range.
    """

    theta: float
    N: int
    H: int
    q: np.ndarray
    q_exact: list | None = None

    def prob_le(self, n: int, h: int):
        if not (1 <= n <= self.N):
            raise ValueError(f"n must be in [1, {self.N}]")
        if h < 0:
            return 0.0
        h = min(h, self.H)
        return self.q[n, h]

    def prob_gt(self, n: int, h: int):
        return 1.0 - self.prob_le(n, h)

    def pmf_row(self, n: int) -> np.ndarray:
        """P(H_n = h) for h = 0..H."""
        row = self.q[n, :]
        return np.diff(row, prepend=0.0)

    def mean_height(self, n: int) -> float:
        pmf = self.pmf_row(n)
        tail = 1.0 - self.q[n, self.H]
        return float(np.dot(np.arange(self.H + 1), pmf)) + tail * (self.H + 1)

    def rows_csv(self):
        """Yield (n, h, q, p) tuples for CSV output."""
        for n in range(1, self.N + 1):
            for h in range(self.H + 1):
                q = float(self.q[n, h])
                yield n, h, q, 1.0 - q


def exact_height_cdf(
    N: int,
    H: int | None,
    theta,
    exact: bool = False,
    n_budget: int = _DEFAULT_N_BUDGET,
    h_budget: int = _DEFAULT_H_BUDGET,
) -> HeightCdfTable:
    """Exact height-CDF table via the per-level series exponential.

    Base row: q_1(0) = 1 and q_n(0) = 0 for n >= 2.  Each subsequent row is
    extracted from exp(theta * sum_j q_j(h-1) z^j / j) by renormalizing the
    z^m coefficient with m! / theta^(m).  With H=None the table grows until
    1 - q_N(h) < 1e-12 (or the h budget).

    Exact mode keeps a parallel Fraction table; it requires N <= 64 and a
    rational theta.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > n_budget:
        raise BudgetError(f"N={N} exceeds budget {n_budget}")
    if H is not None and H > h_budget:
        raise BudgetError(f"H={H} exceeds budget {h_budget}")
    if exact:
        if N > 64:
            raise BudgetError("exact mode requires N <= 64")
        theta_frac = _as_fraction_theta(theta)
        theta_f = float(theta_frac)
    else:
        theta_f = float(theta)
        theta_frac = None
    if not theta_f > 0:
        raise ValueError("theta must be > 0")

    h_cap = h_budget if H is None else H
    rows: list[np.ndarray] = []
    base = np.zeros(N + 1)
    base[1] = 1.0
    rows.append(base)
    exact_rows = None
    if exact:
        ex0 = [Fraction(0)] * (N + 1)
        ex0[1] = Fraction(1)
        exact_rows = [ex0]

    # normalizers m! / theta^(m) in log space, m = 0..N-1
    ms = np.arange(N, dtype=float)
    log_norm = log_gamma(ms + 1.0) - (log_gamma(theta_f + ms) - log_gamma(theta_f))

    h = 0
    while h < h_cap:
        prev = rows[-1]
        g = np.zeros(N)
        js = np.arange(1, N)
        g[1:] = theta_f * prev[1:N] / js
        e = series_exp(Series(coeffs=tuple(g)))
        row = np.zeros(N + 1)
        row[1:] = np.exp(np.log(np.maximum(np.asarray(e.coeffs), 1e-300)) + log_norm)
        np.clip(row, 0.0, 1.0, out=row)
        row[1] = 1.0
        rows.append(row)
        if exact:
            prev_ex = exact_rows[-1]
            g_ex = [Fraction(0)] * N
            for j in range(1, N):
                if prev_ex[j]:
                    g_ex[j] = theta_frac * prev_ex[j] / j
            e_ex = _exp_exact(g_ex)
            norm = Fraction(1)
            row_ex = [Fraction(0)] * (N + 1)
            row_ex[1] = Fraction(1)
            for m in range(1, N):
                norm *= Fraction(m) / (theta_frac + m - 1)
                row_ex[m + 1] = e_ex[m] * norm
            exact_rows.append(row_ex)
        h += 1
        if H is None and 1.0 - rows[-1][N] < _ADAPTIVE_TAIL:
            break

    q = np.vstack([r for r in rows]).T  # shape (N+1, H+1)
    table = HeightCdfTable(
        theta=theta_f,
        N=N,
        H=q.shape[1] - 1,
        q=q,
        q_exact=exact_rows if exact else None,
    )
    return table


def _binomial_series(theta: float, N: int) -> np.ndarray:
    """Coefficients of (1 - z)^theta up to degree N."""
    b = np.empty(N + 1)
    b[0] = 1.0
    for k in range(1, N + 1):
        b[k] = b[k - 1] * (k - 1 - theta) / k
    return b


def key_identity_residual(
    h: int,
    theta: float,
    N: int,
    table: HeightCdfTable | None = None,
) -> float:
    """Max abs coefficient difference of (1-z)^theta F_h vs exp(-theta Phi_{h-1}).

    Both sides are built to degree N from the same q-table, which must cover
    n <= N + 1 and the height h.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    if table is None:
        table = exact_height_cdf(N + 1, h, theta)
    if table.N < N + 1 or table.H < h:
        raise ValueError("table does not cover the requested degree/height")
    theta = float(theta)
    ms = np.arange(N + 1, dtype=float)
    log_w = log_gamma(theta + ms) - log_gamma(theta) - log_gamma(ms + 1.0)
    f = np.exp(log_w) * table.q[1 : N + 2, h]
    lhs = np.convolve(_binomial_series(theta, N), f)[: N + 1]

    js = np.arange(1, N + 1, dtype=float)
    phi = np.zeros(N + 1)
    phi[1:] = -theta * (1.0 - table.q[1 : N + 1, h - 1]) / js
    rhs = np.asarray(series_exp(Series(coeffs=tuple(phi))).coeffs)
    return float(np.max(np.abs(lhs - rhs)))


def neg_binomial_pmf(m: int, r: float, theta: float) -> float:
    """P(M = m) = (1 - r)^theta * theta^(m) / m! * r^m."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if not (0.0 < r < 1.0):
        raise ValueError("r must be in (0, 1)")
    if not theta > 0:
        raise ValueError("theta must be > 0")
    if m == 0:
        return (1.0 - r) ** theta
    logp = (
        theta * math.log1p(-r)
        + log_gamma(theta + m)
        - log_gamma(theta)
        - math.lgamma(m + 1)
        + m * math.log(r)
    )
    return math.exp(logp)


def neg_binomial_mean(r: float, theta: float) -> float:
    if not (0.0 < r < 1.0):
        raise ValueError("r must be in (0, 1)")
    return theta * r / (1.0 - r)


def neg_binomial_var(r: float, theta: float) -> float:
    if not (0.0 < r < 1.0):
        raise ValueError("r must be in (0, 1)")
    return theta * r / (1.0 - r) ** 2


def poissonization_radius(n: int, theta: float) -> float:
    """r_n = (n - 1) / (n - 1 + theta): the radius centering M_r at n - 1."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return (n - 1.0) / (n - 1.0 + theta)


@dataclass(frozen=True)
class ThresholdDiagnostic:
    """Truncated Phi_{h-1}(r_n) with a rigorous truncation certificate."""

    n: int
    h: int
    theta: float
    r: float
    J: int
    value: float
    tail_bound: float


class CoverageError(ValueError):
    """The q-table does not extend far enough for the requested tail bound."""


def threshold_diagnostic(
    n: int,
    h: int,
    theta: float,
    table: HeightCdfTable,
    min_coverage: int = 20,
) -> ThresholdDiagnostic:
    """Partial sum of Phi_{h-1}(r_n) = sum_j p_j(h-1) r_n^j / j over j <= J.

    J is the table's N; the discarded tail is at most
    r^(J+1) / ((J+1)(1-r)) since every p_j <= 1.  Requires J >= min_coverage
    * n so the certificate is meaningful.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    J = table.N
    if J < min_coverage * n:
        raise CoverageError(
            f"table covers j <= {J}; need at least {min_coverage * n} for n={n}"
        )
    if table.H < h - 1:
        raise CoverageError("table height does not cover h-1")
    r = poissonization_radius(n, theta)
    js = np.arange(1, J + 1, dtype=float)
    p = 1.0 - table.q[1 : J + 1, h - 1]
    # r^j computed in log space to avoid underflow warnings at large j
    log_rj = js * math.log(r)
    value = float(np.sum(p * np.exp(log_rj) / js))
    tail = math.exp((J + 1) * math.log(r)) / ((J + 1) * (1.0 - r))
    return ThresholdDiagnostic(
        n=n, h=h, theta=float(theta), r=r, J=J, value=value, tail_bound=tail
    )


# -- statistics of sampled mass trees ----------------------------------------


def height(tree) -> int:
    """Maximal depth over the nodes of a MassTree."""
    return max(tree.depth) if tree.size() else 0


def _falling(k: int, s: int) -> int:
    out = 1
    for i in range(s):
        out *= k - i
        if out == 0:
            return 0
    return out


@dataclass(frozen=True)
class SMassProfile:
    """Level sums of falling factorials: values[l] = sum_{|u|=l} (K(u)-1)_s."""

    s: int
    values: tuple[int, ...]


def s_mass_profile(tree, s: int, max_level: int | None = None) -> SMassProfile:
    """Per-level s-mass of a sampled tree, as exact integers.

    values[l] = sum over depth-l nodes of (mass - 1)(mass - 2)...(mass - s).
    The level-0 value is (n - 1)_s.
    """
    if s < 2:
        raise ValueError("s must be >= 2")
    top = height(tree) if max_level is None else max_level
    values = [0] * (top + 1)
    for idx in range(tree.size()):
        d = tree.depth[idx]
        if d <= top:
            k = tree.mass[idx]
            if k > s:  # (k-1)_s vanishes for k <= s
                values[d] += _falling(k - 1, s)
    return SMassProfile(s=s, values=tuple(values))


def macroscopic_count(tree, delta: float) -> int:
    """Number of root children with mass >= ceil((n-1)^(1-delta))."""
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must be in (0, 1)")
    n = tree.root_mass
    if n <= 1:
        return 0
    threshold = math.ceil((n - 1) ** (1.0 - delta))
    return sum(1 for c in tree.children[0] if tree.mass[c] >= threshold)
