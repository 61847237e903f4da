"""Rooted trees up to isomorphism: canonical forms, counting, leaf removal.

A rooted tree's isomorphism class is encoded as a balanced parenthesis
string: a leaf is "()", and an internal node wraps the concatenation of its
children's encodings sorted in nondecreasing lexicographic order.  Equal
strings correspond exactly to isomorphic rooted trees, and the string is the
interchange format used by the CLI.

The counting side computes, exactly in big integers,

    d(t)   = n! / prod_v |t_v|      (standard labellings, hook rule)
    aut(t) = |Aut(t)|
    u(t)   = d(t) / aut(t)          (labellings up to symmetry)

and verifies the identity  prod_{i=1}^{n-1} C(i+1, 2) = sum_t d(t) u(t).

``random_leaf_removal`` implements the descend-by-uniform-vertex walk whose
transition law is m_t(t') g(t') / g(t); ``leaf_removal_distribution`` returns
that law exactly for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

__all__ = [
    "CanonicalTree",
    "HookData",
    "canonicalize",
    "canonical_from_children",
    "parse_canonical",
    "enumerate_trees",
    "hook_counts",
    "fundamental_identity",
    "random_leaf_removal",
    "leaf_removal_distribution",
]


class MalformedTreeError(ValueError):
    """Input does not describe a connected rooted tree."""


@dataclass(frozen=True, order=True)
class CanonicalTree:
    """Isomorphism class of a rooted tree, as its canonical encoding."""

    canon: str

    def __post_init__(self) -> None:
        _validate_balanced(self.canon)

    @property
    def n(self) -> int:
        return len(self.canon) // 2

    @staticmethod
    def leaf() -> "CanonicalTree":
        return CanonicalTree("()")

    @staticmethod
    def from_string(s: str) -> "CanonicalTree":
        """Parse any balanced encoding and return its canonical class."""
        children = parse_canonical(s)
        return canonicalize(children, root=0)


def _validate_balanced(s: str) -> None:
    if not s:
        raise MalformedTreeError("empty encoding")
    depth = 0
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        else:
            raise MalformedTreeError(f"invalid character {ch!r} in encoding")
        if depth < 0:
            raise MalformedTreeError("unbalanced encoding")
    if depth != 0:
        raise MalformedTreeError("unbalanced encoding")
    # the encoding must be a single tree, not a forest
    depth = 0
    for i, ch in enumerate(s[:-1]):
        depth += 1 if ch == "(" else -1
        if depth == 0:
            raise MalformedTreeError("encoding is a forest, not a single tree")


def parse_canonical(s: str) -> list[list[int]]:
    """Children lists (root = node 0) of a parenthesis-encoded tree."""
    _validate_balanced(s)
    children: list[list[int]] = []
    stack: list[int] = []
    for ch in s:
        if ch == "(":
            node = len(children)
            children.append([])
            if stack:
                children[stack[-1]].append(node)
            stack.append(node)
        else:
            stack.pop()
    return children


def canonicalize(children, root: int = 0) -> CanonicalTree:
    """Canonical form of a rooted tree given as children lists.

    The input must be connected and acyclic when explored from the root;
    otherwise MalformedTreeError is raised.
    """
    n = len(children)
    if n == 0:
        raise MalformedTreeError("tree must have at least one vertex")
    seen = [False] * n
    order: list[int] = []
    stack = [root]
    seen[root] = True
    while stack:
        v = stack.pop()
        order.append(v)
        for c in children[v]:
            if c < 0 or c >= n:
                raise MalformedTreeError(f"child index {c} out of range")
            if seen[c]:
                raise MalformedTreeError("cycle or repeated vertex detected")
            seen[c] = True
            stack.append(c)
    if len(order) != n:
        raise MalformedTreeError("tree is disconnected")
    canon: list[str] = [""] * n
    for v in reversed(order):
        if not children[v]:
            canon[v] = "()"
        else:
            canon[v] = "(" + "".join(sorted(canon[c] for c in children[v])) + ")"
    return CanonicalTree(canon[root])


def canonical_from_children(child_canons) -> CanonicalTree:
    """Canonical tree whose root children have the given canonical forms."""
    return CanonicalTree("(" + "".join(sorted(c.canon for c in child_canons)) + ")")


@dataclass(frozen=True)
class HookData:
    """Exact labelling counts of a rooted tree."""

    d: int
    aut: int
    u: int
    subtree_sizes: tuple[int, ...]


def _subtree_sizes(children: list[list[int]], order: list[int]) -> list[int]:
    sizes = [1] * len(children)
    for v in reversed(order):
        for c in children[v]:
            sizes[v] += sizes[c]
    return sizes


def _dfs_order(children: list[list[int]], root: int = 0) -> list[int]:
    order = []
    stack = [root]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(children[v])
    return order


def hook_counts(t: CanonicalTree) -> HookData:
    """d, |Aut| and u of a rooted tree, exactly.

    d comes from the hook rule n! / prod |t_v|; the automorphism count is
    the product over nodes of (multiplicity factorials of identical child
    subtrees) times the children's own automorphism counts; u = d / aut.
    """
    children = parse_canonical(t.canon)
    order = _dfs_order(children)
    sizes = _subtree_sizes(children, order)
    n = len(children)
    denom = 1
    for s in sizes:
        denom *= s
    d, rem = divmod(math.factorial(n), denom)
    if rem != 0:
        raise RuntimeError("hook product does not divide n!; internal error")
    # canonical substring of each node, for grouping identical child subtrees
    canon: list[str] = [""] * n
    aut_below: list[int] = [1] * n
    for v in reversed(order):
        if not children[v]:
            canon[v] = "()"
            aut_below[v] = 1
            continue
        subs = sorted(canon[c] for c in children[v])
        canon[v] = "(" + "".join(subs) + ")"
        a = 1
        for c in children[v]:
            a *= aut_below[c]
        run = 1
        for i in range(1, len(subs)):
            if subs[i] == subs[i - 1]:
                run += 1
            else:
                a *= math.factorial(run)
                run = 1
        a *= math.factorial(run)
        aut_below[v] = a
    aut = aut_below[order[0]]
    u, rem = divmod(d, aut)
    if rem != 0:
        raise RuntimeError("|Aut| does not divide d; internal error")
    return HookData(d=d, aut=aut, u=u, subtree_sizes=tuple(sorted(sizes)))


_ENUM_GUARD = 16


@lru_cache(maxsize=None)
def enumerate_trees(n: int) -> tuple[CanonicalTree, ...]:
    """All rooted-tree isomorphism classes with n vertices, sorted.

    Recursive multiset construction: a tree of size n is a root plus a
    multiset of subtrees with sizes summing to n - 1.  Guarded at n <= 16.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > _ENUM_GUARD:
        raise ValueError(f"enumeration is guarded at n <= {_ENUM_GUARD}")
    if n == 1:
        return (CanonicalTree.leaf(),)
    results: set[str] = set()

    def forests(total: int, max_size: int) -> list[str]:
        # all multisets of trees with sizes summing to `total`, each size
        # <= max_size, returned as concatenated sorted encodings
        if total == 0:
            return [""]
        out: list[str] = []
        for size in range(min(total, max_size), 0, -1):
            pool = enumerate_trees(size)
            for count in range(1, total // size + 1):
                rest = forests(total - count * size, size - 1)
                for combo in combinations_with_replacement(pool, count):
                    head = "".join(sorted(t.canon for t in combo))
                    for tail in rest:
                        out.append(head + tail)
        return out

    for body in forests(n - 1, n - 1):
        results.add("(" + body + ")")
    return tuple(CanonicalTree(s) for s in sorted(results))


def fundamental_identity(n: int) -> tuple[int, int]:
    """Both sides of  prod_{i=1}^{n-1} C(i+1,2) = sum_t d(t) u(t),  exactly."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > 12:
        raise ValueError("fundamental_identity is guarded at n <= 12")
    lhs = 1
    for i in range(1, n):
        lhs *= math.comb(i + 1, 2)
    rhs = 0
    for t in enumerate_trees(n):
        hd = hook_counts(t)
        rhs += hd.d * hd.u
    return lhs, rhs


def random_leaf_removal(t: CanonicalTree, rng: np.random.Generator) -> CanonicalTree:
    """One step of the descend-by-uniform-vertex leaf-removal walk.

    Pick a uniform vertex; if it is a leaf remove it, otherwise recurse
    uniformly inside its subtree excluding the vertex itself.  The result is
    the isomorphism class of the reduced tree; requires n >= 2.
    """
    if t.n < 2:
        raise ValueError("leaf removal requires n >= 2")
    children = parse_canonical(t.canon)
    # re-index so each subtree is a contiguous DFS-preorder range
    order = _preorder(children)
    pos = {v: i for i, v in enumerate(order)}
    kids = [[pos[c] for c in children[v]] for v in order]
    sizes = [1] * len(kids)
    for i in range(len(kids) - 1, -1, -1):
        for c in kids[i]:
            sizes[i] += sizes[c]
    v = int(rng.integers(0, sizes[0]))
    while kids[v]:
        # uniform vertex in subtree(v) excluding v: preorder range (v, v+size)
        v = v + 1 + int(rng.integers(0, sizes[v] - 1))
    return _remove_leaf(kids, v)


def _preorder(children: list[list[int]], root: int = 0) -> list[int]:
    order = []
    stack = [root]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(reversed(children[v]))
    return order


def _remove_leaf(children: list[list[int]], leaf: int) -> CanonicalTree:
    n = len(children)
    remap = {}
    k = 0
    for v in range(n):
        if v != leaf:
            remap[v] = k
            k += 1
    new_children = [
        [remap[c] for c in children[v] if c != leaf] for v in range(n) if v != leaf
    ]
    return canonicalize(new_children, root=0)


def leaf_removal_distribution(t: CanonicalTree) -> dict[CanonicalTree, Fraction]:
    """Exact transition law of the leaf-removal walk from t.

    Returns {t': m_t(t') * g(t') / g(t)} over all t' obtained by deleting a
    leaf, where g is the hook-rule count.  The values sum to 1 exactly.
    """
    if t.n < 2:
        raise ValueError("leaf removal requires n >= 2")
    children = parse_canonical(t.canon)
    n = len(children)
    g_t = hook_counts(t).d
    multiplicities: dict[CanonicalTree, int] = {}
    for v in range(n):
        if not children[v]:
            reduced = _remove_leaf(children, v)
            multiplicities[reduced] = multiplicities.get(reduced, 0) + 1
    law = {}
    for reduced, mult in multiplicities.items():
        law[reduced] = Fraction(mult * hook_counts(reduced).d, g_t)
    return law
