"""Reproducible Monte Carlo harness for the tree-height experiments.

Experiments are described by a config (kind, theta, sizes, replica count,
master seed, kind-specific params) and produce one record per replica plus
an order-independent aggregate summary.  Replica i of size-index j draws its
randomness from an independent stream seeded by (master_seed, j, i), so the
output is byte-identical across runs and insensitive to execution order.

Two streaming samplers avoid materializing large trees when only scalar
statistics are requested:

* ``sample_height_streaming`` walks the fragmentation tree depth-first with
  an explicit stack and prunes branches that provably cannot exceed the
  best depth found so far (a node of mass k at depth d reaches at most
  depth d + k - 1).
* ``sample_smass_levels`` expands the tree level by level down to a fixed
  depth, skipping nodes whose whole subtree contributes zero to the
  falling-factorial level sums.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ewenstrees.constants import brw_exponents
from ewenstrees.ewens import sample_block_sizes
from ewenstrees.fragmentation import sample_spine
from ewenstrees.heights import neg_binomial_var, poissonization_radius

__all__ = [
    "ExperimentConfig",
    "ReplicaRecord",
    "ExperimentResult",
    "run_experiment",
    "height_ratio_trend",
    "gamma_mixture_check",
    "barrier_diagnostic",
    "sample_height_streaming",
    "sample_smass_levels",
    "sample_root_macroscopic_count",
    "records_to_csv",
]

_KINDS = (
    "height_ratio",
    "smass",
    "macroscopic",
    "many_to_one",
    "spine_beta_limit",
    "barrier",
)

_DEFAULT_NODE_CAP = 200_000_000


class ConfigError(ValueError):
    """Experiment configuration is invalid."""


class ResourceBudgetError(RuntimeError):
    """Estimated sampling cost exceeds the configured cap."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    theta: float
    ns: tuple[int, ...]
    reps: int
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {_KINDS}")
        if not self.theta > 0:
            raise ConfigError("theta must be > 0")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if not self.ns:
            raise ConfigError("ns must be nonempty")
        if any(n < 1 for n in self.ns):
            raise ConfigError("all ns must be >= 1")
        needed = {
            "smass": ("s", "max_level"),
            "macroscopic": ("delta",),
            "many_to_one": ("t", "h"),
            "spine_beta_limit": ("t",),
            "barrier": ("t", "hs", "omega"),
        }.get(self.kind, ())
        for key in needed:
            if key not in self.params:
                raise ConfigError(f"kind {self.kind!r} requires params[{key!r}]")

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        obj = json.loads(text)
        try:
            return ExperimentConfig(
                kind=obj["kind"],
                theta=float(obj["theta"]),
                ns=tuple(int(n) for n in obj["ns"]),
                reps=int(obj["reps"]),
                seed=int(obj["seed"]),
                params=dict(obj.get("params", {})),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "theta": self.theta,
                "ns": list(self.ns),
                "reps": self.reps,
                "seed": self.seed,
                "params": self.params,
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class ReplicaRecord:
    kind: str
    theta: float
    n: int
    replica_index: int
    seed_stream_id: tuple[int, int, int]
    metrics: dict[str, float]


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    records: list[ReplicaRecord]
    summary: dict


def _stream(seed: int, n_index: int, replica: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, n_index, replica))))


# -- streaming samplers -------------------------------------------------------


def sample_height_streaming(n: int, theta: float, rng: np.random.Generator) -> int:
    """Height of a fragmentation tree without materializing it.

    Depth-first with an explicit stack; a node of mass k at depth d is
    expanded only if d + k - 1 can exceed the best depth seen (masses drop
    by at least one per generation, so that is a hard bound).
    """
    best = 0
    stack = [(n, 0)]
    while stack:
        k, d = stack.pop()
        if d > best:
            best = d
        if k < 2 or d + k - 1 <= best:
            continue
        blocks = sample_block_sizes(k - 1, theta, rng, method="auto")
        # push small masses first so large ones are expanded first
        for b in reversed(blocks):
            if d + b > best:  # child at depth d+1 reaches at most d + b
                stack.append((b, d + 1))
    return best


def sample_smass_levels(
    n: int,
    theta: float,
    s_values: tuple[int, ...],
    max_level: int,
    rng: np.random.Generator,
) -> dict[int, list[int]]:
    """Level sums of (mass - 1)_s for each s, down to max_level, exactly.

    Only nodes whose descendants can still contribute (mass > min(s) + 1)
    are expanded; small masses are split in one batched draw per distinct
    mass value.  Contributions are exact integers.
    """
    from ewenstrees.ewens import _SMALL_TABLE_MAX, _small_mass_table

    s_min = min(s_values)
    s_max = max(s_values)
    out = {s: [0] * (max_level + 1) for s in s_values}
    level = [n]
    for lvl in range(max_level + 1):
        if level and float(max(level)) ** s_max < 2.0**62:
            arr = np.asarray(level, dtype=np.int64) - 1
            for s in s_values:
                prod = arr.copy()
                for i in range(1, s):
                    prod *= arr - i
                out[s][lvl] = int(prod[arr >= s].sum())
        else:  # exact big-integer fallback for huge masses
            for s in s_values:
                out[s][lvl] = sum(
                    math.prod(range(k - 1, k - 1 - s, -1)) for k in level if k > s
                )
        if lvl == max_level:
            break
        nxt: list[int] = []
        small_counts: dict[int, int] = {}
        for k in level:
            m = k - 1
            if m <= s_min:
                continue
            if m <= _SMALL_TABLE_MAX:
                small_counts[m] = small_counts.get(m, 0) + 1
            else:
                nxt.extend(sample_block_sizes(m, theta, rng, method="auto"))
        for m, count in small_counts.items():
            cum, blocks = _small_mass_table(m, theta)
            idx = np.searchsorted(cum, rng.random(count), side="right")
            for i in idx:
                nxt.extend(blocks[min(int(i), len(blocks) - 1)])
        level = nxt
    return out


def sample_root_macroscopic_count(
    n: int, theta: float, delta: float, rng: np.random.Generator
) -> int:
    """Number of root blocks with mass >= ceil((n-1)^(1-delta)); O(#blocks)."""
    if n < 2:
        return 0
    threshold = math.ceil((n - 1) ** (1.0 - delta))
    blocks = sample_block_sizes(n - 1, theta, rng, method="auto")
    return sum(1 for b in blocks if b >= threshold)


# -- experiment kinds ----------------------------------------------------------


def _metrics_height(cfg: ExperimentConfig, n: int, rng) -> dict[str, float]:
    h = sample_height_streaming(n, cfg.theta, rng)
    metrics = {"height": float(h)}
    if n > 1:
        metrics["height_over_log_n"] = h / math.log(n)
    return metrics


def _metrics_smass(cfg: ExperimentConfig, n: int, rng) -> dict[str, float]:
    s_values = tuple(int(s) for s in _as_list(cfg.params["s"]))
    max_level = int(cfg.params["max_level"])
    levels = sample_smass_levels(n, cfg.theta, s_values, max_level, rng)
    out = {}
    for s, vals in levels.items():
        for lvl, v in enumerate(vals):
            out[f"V{lvl}_s{s}"] = float(v)
    return out


def _metrics_macroscopic(cfg: ExperimentConfig, n: int, rng) -> dict[str, float]:
    delta = float(cfg.params["delta"])
    return {"N0": float(sample_root_macroscopic_count(n, cfg.theta, delta, rng))}


def _metrics_many_to_one(cfg: ExperimentConfig, n: int, rng) -> dict[str, float]:
    from ewenstrees.fragmentation import (
        _level_weight_sum_exact_t1,
        _level_weight_sum_float,
    )

    t = float(cfg.params["t"])
    h = int(cfg.params["h"])
    if t == 1.0:
        z = float(_level_weight_sum_exact_t1(n, cfg.theta, h, rng))
    else:
        z = _level_weight_sum_float(n, cfg.theta, t, h, rng)
    return {"Z_tilde": z}


def _metrics_spine_beta(cfg: ExperimentConfig, n: int, rng) -> dict[str, float]:
    t = float(cfg.params["t"])
    path, _ = sample_spine(n, cfg.theta, t, 1, rng)
    x = path.masses[1] / (n - 1) if n > 1 else 1.0
    return {"spine_ratio": x}


def _barrier_root_mass(a: float, h_max: int, slack: float = 0.7) -> int:
    return int(math.ceil(math.exp(a * h_max / slack))) + 1


def _metrics_barrier(cfg: ExperimentConfig, n: int, rng) -> dict[str, float]:
    t = float(cfg.params["t"])
    hs = [int(h) for h in _as_list(cfg.params["hs"])]
    omega = float(cfg.params["omega"])
    exps = brw_exponents(t, cfg.theta)
    a = -exps.kappa_prime
    h_max = max(hs)
    if a * h_max > 0.9 * math.log(n):
        raise ConfigError(
            f"slack violated: a*h = {a * h_max:.3f} > 0.9 log n = {0.9 * math.log(n):.3f}"
        )
    if min(hs) < 1:
        raise ConfigError("all barrier horizons must be >= 1")
    path, _ = sample_spine(n, cfg.theta, t, h_max, rng)
    metrics: dict[str, float] = {}
    below = True
    hs_sorted = sorted(hs)
    hi = 0
    for r in range(1, h_max + 1):
        y = path.S[r] - a * r
        if y > 0:
            below = False
        while hi < len(hs_sorted) and hs_sorted[hi] == r:
            hit = below and (-omega - 1.0 <= y <= -omega)
            metrics[f"barrier_hit_h{r}"] = 1.0 if hit else 0.0
            hi += 1
    return metrics


def _as_list(v):
    if isinstance(v, (list, tuple)):
        return list(v)
    return [v]


_KIND_METRICS: dict[str, Callable] = {
    "height_ratio": _metrics_height,
    "smass": _metrics_smass,
    "macroscopic": _metrics_macroscopic,
    "many_to_one": _metrics_many_to_one,
    "spine_beta_limit": _metrics_spine_beta,
    "barrier": _metrics_barrier,
}


def run_experiment(
    cfg: ExperimentConfig, node_cap: int = _DEFAULT_NODE_CAP
) -> ExperimentResult:
    """Run all replicas of an experiment and aggregate.

    Aggregation uses means, standard errors and quantiles, all of which are
    order-independent; identical configs produce identical results.
    """
    est_nodes = cfg.reps * sum(cfg.ns)
    if cfg.kind in ("height_ratio", "smass") and est_nodes > node_cap:
        raise ResourceBudgetError(
            f"estimated node count {est_nodes:.3g} exceeds cap {node_cap:.3g}"
        )
    ns = cfg.ns
    if cfg.kind == "barrier":
        # root mass is derived from (t, max h) by the slack rule
        exps = brw_exponents(float(cfg.params["t"]), cfg.theta)
        a = -exps.kappa_prime
        hs = [int(h) for h in _as_list(cfg.params["hs"])]
        ns = (_barrier_root_mass(a, max(hs)),)
    metric_fn = _KIND_METRICS[cfg.kind]
    records: list[ReplicaRecord] = []
    for j, n in enumerate(ns):
        if cfg.kind == "height_ratio" and n == 1:
            continue  # ratio undefined at n = 1
        for i in range(cfg.reps):
            rng = _stream(cfg.seed, j, i)
            metrics = metric_fn(cfg, n, rng)
            records.append(
                ReplicaRecord(
                    kind=cfg.kind,
                    theta=cfg.theta,
                    n=n,
                    replica_index=i,
                    seed_stream_id=(cfg.seed, j, i),
                    metrics=metrics,
                )
            )
    return ExperimentResult(config=cfg, records=records, summary=_summarize(records))


def _summarize(records: list[ReplicaRecord]) -> dict:
    groups: dict[tuple[int, str], list[float]] = {}
    for rec in records:
        for name, value in rec.metrics.items():
            groups.setdefault((rec.n, name), []).append(value)
    summary: dict = {}
    for (n, name), values in sorted(groups.items()):
        arr = np.asarray(values)
        entry = {
            "count": int(arr.size),
            "mean": float(arr.mean()),
            "se": float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0,
            "median": float(np.median(arr)),
            "q25": float(np.quantile(arr, 0.25)),
            "q75": float(np.quantile(arr, 0.75)),
        }
        summary.setdefault(str(n), {})[name] = entry
    return summary


def records_to_csv(records: list[ReplicaRecord], path) -> None:
    """CSV with header kind,theta,n,replica,metric,value; fixed row order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "theta", "n", "replica", "metric", "value"])
        for rec in records:
            for name in sorted(rec.metrics):
                writer.writerow(
                    [
                        rec.kind,
                        repr(rec.theta),
                        rec.n,
                        rec.replica_index,
                        name,
                        repr(rec.metrics[name]),
                    ]
                )


def height_ratio_trend(
    theta: float, ns: tuple[int, ...], reps: int, seed: int
) -> list[dict]:
    """Median height and height/log(n) per size; rows for n = 1 are omitted."""
    if list(ns) != sorted(ns):
        raise ConfigError("ns must be increasing")
    cfg = ExperimentConfig(
        kind="height_ratio", theta=theta, ns=tuple(ns), reps=reps, seed=seed
    )
    result = run_experiment(cfg)
    rows = []
    for n in ns:
        if n == 1:
            continue
        stats = result.summary[str(n)]
        rows.append(
            {
                "n": n,
                "median_height": stats["height"]["median"],
                "median_ratio": stats["height_over_log_n"]["median"],
                "iqr_ratio": stats["height_over_log_n"]["q75"]
                - stats["height_over_log_n"]["q25"],
            }
        )
    return rows


@dataclass(frozen=True)
class GammaMixtureCheck:
    n: int
    theta: float
    mean: float
    mean_se: float
    var: float
    var_se: float
    exact_mean: float
    exact_var: float
    limit_var: float


def gamma_mixture_check(
    theta: float, n: int, reps: int, seed: int
) -> GammaMixtureCheck:
    """Empirical moments of M_{r_n} / (n-1) vs exact and limiting values.

    M_r is negative binomial (theta, r), sampled via its Gamma-Poisson
    mixture; at r = r_n the mean of M/(n-1) is exactly 1, its variance is
    (n - 1 + theta) / (theta (n - 1)), and the large-n limit is 1/theta.
    """
    if n < 10:
        raise ValueError("n must be >= 10")
    rng = _stream(seed, 0, 0)
    r = poissonization_radius(n, theta)
    lam = rng.gamma(shape=theta, scale=r / (1.0 - r), size=reps)
    m = rng.poisson(lam).astype(float) / (n - 1.0)
    mean = float(m.mean())
    var = float(m.var(ddof=1))
    centered = (m - mean) ** 2
    var_se = float(centered.std(ddof=1) / math.sqrt(reps))
    return GammaMixtureCheck(
        n=n,
        theta=theta,
        mean=mean,
        mean_se=float(m.std(ddof=1) / math.sqrt(reps)),
        var=var,
        var_se=var_se,
        exact_mean=1.0,
        exact_var=neg_binomial_var(r, theta) / (n - 1.0) ** 2,
        limit_var=1.0 / theta,
    )


@dataclass(frozen=True)
class BarrierEstimate:
    h: int
    estimate: float
    se: float
    n: int


def barrier_diagnostic(
    theta: float,
    t: float,
    hs: list[int],
    omega: float,
    reps: int,
    seed: int,
) -> list[BarrierEstimate]:
    """Estimate the probability of staying below the linear spine barrier.

    For Y_r = S_r - a*r with a = -kappa'(t), the event at horizon h is
    {Y_r <= 0 for all r <= h and Y_h in [-omega - 1, -omega]}.  The root
    mass is chosen so that a * max(h) <= 0.7 * log n, keeping the walk in
    its large-mass regime.  Estimates carry Monte Carlo standard errors;
    the theoretical decay (1 + omega) h^(-3/2) is asymptotic and is not an
    acceptance target.
    """
    if t <= 1:
        raise ValueError("t must be > 1")
    if list(hs) != sorted(hs):
        raise ValueError("hs must be increasing")
    cfg = ExperimentConfig(
        kind="barrier",
        theta=theta,
        ns=(1,),
        reps=reps,
        seed=seed,
        params={"t": t, "hs": list(hs), "omega": omega},
    )
    result = run_experiment(cfg)
    n_used = result.records[0].n if result.records else 0
    out = []
    for h in hs:
        stats = result.summary[str(n_used)][f"barrier_hit_h{h}"]
        p = stats["mean"]
        se = math.sqrt(max(p * (1.0 - p), 1e-300) / stats["count"])
        out.append(BarrierEstimate(h=h, estimate=p, se=se, n=n_used))
    return out
