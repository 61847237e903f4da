"""Samplers for Ewens fragmentation trees, their labelled variant, and spines.

A mass tree starts from a root of mass n; every node of mass k >= 2 splits
off an independent Ewens(k - 1, theta) partition as children masses, and
mass-1 nodes are leaves.  At theta = 2 the induced isomorphism class follows
the Plancherel tree measure d(t) u(t) / prod C(k, 2).

The labelled variant partitions an explicit label set at each split, which
makes the tree a recursive tree (labels increase along root-to-leaf paths);
``grow_recursive_tree`` builds the same laws incrementally by the
descend-or-attach coupling, giving nested snapshots.

The spine sampler follows a distinguished path under the tilted measure at
parameter t: at mass k the next spine mass j has pmf proportional to
j^(t-1) * Gamma(m+1)Gamma(m-j+theta) / (Gamma(m-j+1)Gamma(m+theta)) with
m = k - 1, and the off-spine blocks are an untilted Ewens(m - j, theta)
partition (deletion property).  Mass-1 spine nodes take deterministic
cemetery steps with zero displacement.  ``many_to_one_check`` verifies that
the additive weights sum to expectation one under the plain measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ewenstrees.constants import log_gamma
from ewenstrees.ewens import sample_block_sizes, sample_ewens_crp

__all__ = [
    "MassTree",
    "LabelledMassTree",
    "SpinePath",
    "ManyToOneResult",
    "sample_fragmentation",
    "sample_labelled_fragmentation",
    "grow_recursive_tree",
    "spine_step_pmf",
    "spine_step_log_norm",
    "sample_spine",
    "many_to_one_check",
]

_NODE_GUARD = 2**31


@dataclass
class MassTree:
    """Arena-backed rooted tree of integer masses.

    parent[i] is the index of node i's parent (root: -1); children masses
    appear in nonincreasing order as emitted by the split sampler; for every
    node of mass k >= 2 the children masses sum to k - 1.
    """

    parent: list[int] = field(default_factory=lambda: [-1])
    children: list[list[int]] = field(default_factory=lambda: [[]])
    mass: list[int] = field(default_factory=lambda: [1])
    depth: list[int] = field(default_factory=lambda: [0])

    @property
    def root_mass(self) -> int:
        return self.mass[0]

    def size(self) -> int:
        return len(self.mass)

    def add_child(self, parent_idx: int, mass: int) -> int:
        if self.size() >= _NODE_GUARD:
            raise MemoryError("node arena exceeds 2^31 entries")
        idx = self.size()
        self.parent.append(parent_idx)
        self.children.append([])
        self.mass.append(mass)
        self.depth.append(self.depth[parent_idx] + 1)
        self.children[parent_idx].append(idx)
        return idx

    def shape(self):
        """Isomorphism class of the underlying rooted tree."""
        from ewenstrees.trees import canonicalize

        return canonicalize(self.children, root=0)

    def check_mass_conservation(self) -> bool:
        for i in range(self.size()):
            k = self.mass[i]
            kids = self.children[i]
            if k >= 2:
                if sum(self.mass[c] for c in kids) != k - 1:
                    return False
            elif kids:
                return False
        return True

    def to_json_obj(self) -> list[dict]:
        return [
            {
                "id": i,
                "parent": None if self.parent[i] < 0 else self.parent[i],
                "mass": self.mass[i],
                "depth": self.depth[i],
            }
            for i in range(self.size())
        ]

    @staticmethod
    def from_json_obj(items: list[dict]) -> "MassTree":
        n = len(items)
        tree = MassTree(
            parent=[-1] * n,
            children=[[] for _ in range(n)],
            mass=[0] * n,
            depth=[0] * n,
        )
        for it in items:
            i = int(it["id"])
            p = it.get("parent")
            tree.parent[i] = -1 if p is None else int(p)
            tree.mass[i] = int(it["mass"])
            tree.depth[i] = int(it["depth"])
            if tree.parent[i] >= 0:
                tree.children[tree.parent[i]].append(i)
        return tree


def sample_fragmentation(
    n: int,
    theta: float,
    rng: np.random.Generator,
    split_method: str = "crp",
) -> MassTree:
    """Sample a mass tree of total mass n under the Ewens(theta) split rule.

    split_method selects the Ewens block-size sampler ("crp" is the
    sequential restaurant construction; "auto" switches to the faster
    law-equal samplers for big masses).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not theta > 0:
        raise ValueError("theta must be > 0")
    tree = MassTree(mass=[n])
    stack = [0]
    while stack:
        idx = stack.pop()
        k = tree.mass[idx]
        if k < 2:
            continue
        if split_method == "crp":
            blocks = sample_ewens_crp(k - 1, theta, rng).blocks().sizes
        else:
            blocks = sample_block_sizes(k - 1, theta, rng, method=split_method)
        for b in blocks:
            child = tree.add_child(idx, b)
            if b >= 2:
                stack.append(child)
    return tree


@dataclass
class LabelledMassTree:
    """Mass tree whose nodes carry the minimum of their label set.

    Labels 0..n-1 form a standard labelling: they strictly increase along
    every root-to-leaf path.  label_sets is retained only when requested.
    """

    tree: MassTree
    label: list[int]
    label_sets: list[tuple[int, ...]] | None = None

    @property
    def n(self) -> int:
        return self.tree.root_mass

    def labelled_key(self):
        """Hashable labelled-isomorphism-class key (labels identify nodes)."""

        def rec(idx: int):
            kids = sorted(self.label[c] for c in self.tree.children[idx])
            return (
                self.label[idx],
                tuple(rec(c) for c in sorted(self.tree.children[idx], key=lambda j: self.label[j])),
            )

        return rec(0)

    def is_standard_labelling(self) -> bool:
        t = self.tree
        if sorted(self.label) != list(range(t.root_mass)):
            return False
        for i in range(t.size()):
            for c in t.children[i]:
                if self.label[c] <= self.label[i]:
                    return False
        return True


def _crp_set_partition(
    labels: list[int], theta: float, rng: np.random.Generator
) -> list[list[int]]:
    """Ewens(S, theta) set partition by seating the labels in sorted order."""
    blocks: list[list[int]] = []
    for i, lab in enumerate(labels, start=1):
        u = rng.random() * (theta + i - 1)
        if u < theta or not blocks:
            blocks.append([lab])
            continue
        target = u - theta
        acc = 0.0
        for blk in blocks:
            acc += len(blk)
            if target < acc:
                blk.append(lab)
                break
        else:
            blocks[-1].append(lab)
    return blocks


def sample_labelled_fragmentation(
    n: int,
    theta: float,
    rng: np.random.Generator,
    keep_sets: bool = False,
) -> LabelledMassTree:
    """Labelled fragmentation tree: the root holds labels {0..n-1}.

    At a node holding set S, the minimum of S labels the node and the rest
    is partitioned by a restaurant process on the actual labels; children
    are ordered by decreasing size, then by minimal label.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tree = MassTree(mass=[n])
    label = [0]
    sets: list[tuple[int, ...]] | None = [tuple(range(n))] if keep_sets else None
    stack = [(0, list(range(n)))]
    while stack:
        idx, labels = stack.pop()
        if len(labels) < 2:
            continue
        rest = labels[1:]  # labels sorted ascending; labels[0] is the minimum
        blocks = _crp_set_partition(rest, theta, rng)
        blocks.sort(key=lambda blk: (-len(blk), blk[0]))
        for blk in blocks:
            child = tree.add_child(idx, len(blk))
            label.append(blk[0])
            if sets is not None:
                sets.append(tuple(blk))
            if len(blk) >= 2:
                stack.append((child, blk))
    return LabelledMassTree(tree=tree, label=label, label_sets=sets)


def grow_recursive_tree(
    n: int,
    theta: float,
    rng: np.random.Generator,
    snapshots: bool = True,
) -> list[LabelledMassTree]:
    """Consistent coupling: grow the labelled tree one vertex at a time.

    To insert the vertex labelled k, walk down from the root; at node v
    with subtree size s, attach the new leaf to v with probability
    theta / (theta + s - 1), else descend to a child picked proportionally
    to its subtree size.  Snapshot k has the same law as the direct
    labelled sampler at size k, and the snapshots are nested.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    parent = [-1]
    children: list[list[int]] = [[]]
    size = [1]
    depth = [0]
    label = [0]
    out: list[LabelledMassTree] = []

    def snapshot(upto: int) -> LabelledMassTree:
        t = MassTree(
            parent=parent[: upto + 1].copy(),
            children=[c.copy() for c in children[: upto + 1]],
            mass=size[: upto + 1].copy(),
            depth=depth[: upto + 1].copy(),
        )
        return LabelledMassTree(tree=t, label=label[: upto + 1].copy())

    if snapshots:
        out.append(snapshot(0))
    for k in range(1, n):
        v = 0
        while True:
            s = size[v]
            u = rng.random() * (theta + s - 1)
            if u < theta:
                break
            target = u - theta
            acc = 0.0
            for c in children[v]:
                acc += size[c]
                if target < acc:
                    v = c
                    break
            else:
                break  # numerical edge: attach here
        idx = len(size)
        parent.append(v)
        children.append([])
        children[v].append(idx)
        size.append(1)
        depth.append(depth[v] + 1)
        label.append(k)
        w = v
        while w != -1:
            size[w] += 1
            w = parent[w]
        if snapshots:
            out.append(snapshot(idx))
    if not snapshots:
        out.append(snapshot(len(size) - 1))
    return out


# -- spine (tilted path) sampling ---------------------------------------------


def _spine_log_weights(k: int, t: float, theta: float) -> np.ndarray:
    m = k - 1
    j = np.arange(1, m + 1, dtype=float)
    return (
        math.log(theta)
        + (t - 1.0) * np.log(j)
        - t * math.log(m)
        + log_gamma(float(m + 1))
        - log_gamma(m - j + 1.0)
        + log_gamma(m - j + theta)
        - log_gamma(float(m) + theta)
    )


def spine_step_pmf(k: int, t: float, theta: float) -> np.ndarray:
    """Pmf of the next spine mass j in {1..k-1} given current mass k >= 2.

    Entry [j-1] is the tilted probability of descending into a block of
    size j.  Computed in log space and normalized to sum to one.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    logw = _spine_log_weights(k, t, theta)
    shift = logw.max()
    w = np.exp(logw - shift)
    return w / w.sum()


def spine_step_log_norm(k: int, t: float, theta: float) -> float:
    """log of the one-step exponent: kappa_k(t) = log E[sum (A_i/(k-1))^t].

    The normalizer of the tilted step pmf is exactly exp(kappa_k(t)).
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    logw = _spine_log_weights(k, t, theta)
    shift = logw.max()
    return float(shift + math.log(np.exp(logw - shift).sum()))


_SPINE_CACHE_MAX_K = 100_000


@lru_cache(maxsize=4096)
def _spine_cdf_cached(k: int, t: float, theta: float) -> np.ndarray:
    return np.cumsum(spine_step_pmf(k, t, theta))


def _spine_cdf(k: int, t: float, theta: float) -> np.ndarray:
    if k <= _SPINE_CACHE_MAX_K:
        return _spine_cdf_cached(k, t, theta)
    return np.cumsum(spine_step_pmf(k, t, theta))


@lru_cache(maxsize=65536)
def _kappa_cached(k: int, t: float, theta: float) -> float:
    return spine_step_log_norm(k, t, theta)


@dataclass
class SpinePath:
    """Distinguished root path of a tilted fragmentation tree.

    masses[l] is the spine mass at depth l (masses[0] = n); displacements[l]
    = -log(masses[l+1] / (masses[l] - 1)) on genuine steps and 0 on cemetery
    steps; S is the running displacement sum and kappa_sum accumulates the
    one-step exponents kappa_{masses[l]}(t).
    """

    t: float
    theta: float
    masses: list[int]
    displacements: list[float]
    S: list[float]
    kappa_sum: float


def sample_spine(
    n: int,
    theta: float,
    t: float,
    h: int,
    rng: np.random.Generator,
    collect_siblings: bool = False,
) -> tuple[SpinePath, list[tuple[int, ...]]]:
    """Sample h tilted spine steps from root mass n.

    Two-stage step at mass k >= 2: draw the spine child mass j from the
    tilted one-step pmf, then the off-spine blocks as an untilted
    Ewens(k - 1 - j, theta) partition; at mass 1, a deterministic cemetery
    step.  Returns the path and, per level, the off-spine sibling masses
    (empty tuples unless collect_siblings).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if t < 1:
        raise ValueError("t must be >= 1")
    if h < 0:
        raise ValueError("h must be >= 0")
    masses = [n]
    displacements: list[float] = []
    S: list[float] = [0.0]
    kappa_sum = 0.0
    siblings: list[tuple[int, ...]] = []
    cur = n
    for _ in range(h):
        if cur == 1:
            displacements.append(0.0)
            S.append(S[-1])
            masses.append(1)
            siblings.append(())
            continue
        m = cur - 1
        cdf = _spine_cdf(cur, t, theta)
        j = 1 + int(np.searchsorted(cdf, rng.random(), side="right"))
        j = min(j, m)
        kappa_sum += _kappa_cached(cur, t, theta)
        x = -math.log(j / m)
        displacements.append(x)
        S.append(S[-1] + x)
        masses.append(j)
        if collect_siblings and m - j > 0:
            siblings.append(tuple(sample_block_sizes(m - j, theta, rng)))
        else:
            siblings.append(())
        cur = j
    return (
        SpinePath(
            t=t,
            theta=theta,
            masses=masses,
            displacements=displacements,
            S=S,
            kappa_sum=kappa_sum,
        ),
        siblings,
    )


@dataclass(frozen=True)
class ManyToOneResult:
    lhs_mean: float
    lhs_se: float
    rhs_mean: float
    rhs_se: float
    reps: int


def _level_weight_sum_float(
    n: int, theta: float, t: float, h: int, rng: np.random.Generator
) -> float:
    """One realization of sum over extended depth-h vertices of exp(-tS - sum kappa).

    Mass-1 vertices continue along cemetery rays with zero displacement and
    zero exponent, so a genuine mass-1 vertex reached at depth d <= h
    contributes its weight directly.
    """
    total = 0.0
    stack = [(n, 0, 0.0, 0.0)]  # mass, depth, S, kappa_sum
    while stack:
        k, d, S, ks = stack.pop()
        if d == h or k == 1:
            total += math.exp(-t * S - ks)
            continue
        kappa = _kappa_cached(k, t, theta)
        m = k - 1
        for b in sample_block_sizes(m, theta, rng):
            stack.append((b, d + 1, S + math.log(m / b), ks + kappa))
    return total


def _level_weight_sum_exact_t1(
    n: int, theta: float, h: int, rng: np.random.Generator
) -> Fraction:
    """Same sum at t = 1, in exact rational arithmetic (kappa_k(1) = 0)."""
    total = Fraction(0)
    stack = [(n, 0, Fraction(1))]
    while stack:
        k, d, w = stack.pop()
        if d == h or k == 1:
            total += w
            continue
        m = k - 1
        for b in sample_block_sizes(m, theta, rng):
            stack.append((b, d + 1, w * Fraction(b, m)))
    return total


def many_to_one_check(
    n: int,
    theta: float,
    t: float,
    h: int,
    reps: int,
    rng: np.random.Generator,
) -> ManyToOneResult:
    """Monte Carlo check that the additive weight sum has mean one.

    lhs: under the plain fragmentation law, the average over replicas of
    sum_{|u|=h} exp(-t S_h(u) - sum_l kappa_{K(u_l)}(t)) on the
    cemetery-extended tree.  rhs: under the tilted spine measure, the
    importance weight times the summand, which is identically one.  At
    t = 1 the lhs is evaluated in exact rational arithmetic and equals one
    on every replica.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if t < 1:
        raise ValueError("t must be >= 1")
    lhs = np.empty(reps)
    for i in range(reps):
        if t == 1.0:
            lhs[i] = float(_level_weight_sum_exact_t1(n, theta, h, rng))
        else:
            lhs[i] = _level_weight_sum_float(n, theta, t, h, rng)
    rhs = np.empty(reps)
    for i in range(reps):
        path, _ = sample_spine(n, theta, t, h, rng)
        weight = math.exp(t * path.S[-1] + path.kappa_sum)
        rhs[i] = weight * math.exp(-t * path.S[-1] - path.kappa_sum)
    return ManyToOneResult(
        lhs_mean=float(lhs.mean()),
        lhs_se=float(lhs.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
        rhs_mean=float(rhs.mean()),
        rhs_se=float(rhs.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
        reps=reps,
    )
