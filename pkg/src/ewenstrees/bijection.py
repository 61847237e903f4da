"""Bijection between chord-style pair sequences and bilabelled rooted trees.

A sequence ({u_1,v_1}, ..., {u_{n-1},v_{n-1}}) with 0 <= u_i < v_i <= i is
mapped to a rooted tree on n vertices carrying a pair of labels per vertex,
each of which is a standard labelling (strictly increasing along root-to-leaf
paths, root labelled (0, 0)).

Forward map: reading the i-th pair, shift every left label >= v_i up by one,
then graft a new vertex labelled (v_i, i) above the vertex whose left label
is u_i.  Inverse map: for i = n-1 down to 1, the unique vertex with right
label i yields v_i (its left label) and u_i (its parent's left label); delete
it and shift left labels > v_i back down.

The number of such sequences is prod_{i=1}^{n-1} C(i+1, 2), and pushing the
bijection to unlabelled shapes recovers the d(t) * u(t) counting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ewenstrees.trees import CanonicalTree, canonicalize

__all__ = [
    "ChordSequence",
    "BilabelledTree",
    "BitreeNode",
    "sequence_to_bitree",
    "bitree_to_sequence",
]


class ChordSequenceError(ValueError):
    """A pair violates 0 <= u_i < v_i <= i."""

    def __init__(self, index: int, pair: tuple[int, int], message: str):
        self.index = index
        self.pair = pair
        super().__init__(f"pair #{index} = {pair}: {message}")


class BitreeStructureError(ValueError):
    """Bilabelled tree violates a structural invariant."""


@dataclass(frozen=True)
class ChordSequence:
    """Sequence of pairs (u_i, v_i), i = 1..n-1, with 0 <= u_i < v_i <= i."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        for i, (u, v) in enumerate(self.pairs, start=1):
            if not (0 <= u < v <= i):
                raise ChordSequenceError(i, (u, v), f"requires 0 <= u < v <= {i}")

    @property
    def n(self) -> int:
        return len(self.pairs) + 1


@dataclass
class BitreeNode:
    left: int
    right: int
    parent: int | None = None
    children: list[int] = field(default_factory=list)


@dataclass
class BilabelledTree:
    """Rooted tree whose vertices carry a (left, right) label pair.

    Node identities are arena indices, stable under label shifts; labels are
    data, not indices.
    """

    nodes: list[BitreeNode]
    root: int = 0

    @property
    def n(self) -> int:
        return len(self.nodes)

    def validate(self) -> None:
        n = self.n
        for which in ("left", "right"):
            labels = sorted(getattr(nd, which) for nd in self.nodes)
            if labels != list(range(n)):
                raise BitreeStructureError(
                    f"{which} labels are not a bijection onto 0..{n - 1}"
                )
        root = self.nodes[self.root]
        if root.left != 0 or root.right != 0:
            raise BitreeStructureError("root must carry (0, 0)")
        for idx, nd in enumerate(self.nodes):
            for c in nd.children:
                child = self.nodes[c]
                if child.parent != idx:
                    raise BitreeStructureError("parent/child links inconsistent")
                if child.left <= nd.left or child.right <= nd.right:
                    raise BitreeStructureError(
                        "labels must increase along root-to-leaf paths"
                    )

    def shape(self) -> CanonicalTree:
        """Isomorphism class of the underlying unlabelled rooted tree."""
        return canonicalize([nd.children for nd in self.nodes], root=self.root)

    def key(self):
        """Hashable form identifying the bilabelled tree up to isomorphism.

        Children carry distinct left labels, so sorting by them is canonical.
        """

        def rec(idx: int):
            nd = self.nodes[idx]
            kids = sorted((self.nodes[c].left, c) for c in nd.children)
            return (nd.left, nd.right, tuple(rec(c) for _, c in kids))

        return rec(self.root)

    def to_json_obj(self) -> list[dict]:
        out = []
        for idx, nd in enumerate(self.nodes):
            out.append(
                {
                    "id": idx,
                    "parent": nd.parent,
                    "left": nd.left,
                    "right": nd.right,
                }
            )
        return out

    @staticmethod
    def from_json_obj(items: list[dict]) -> "BilabelledTree":
        nodes = [BitreeNode(left=0, right=0) for _ in items]
        root = None
        for it in items:
            idx = int(it["id"])
            nd = nodes[idx]
            nd.left = int(it["left"])
            nd.right = int(it["right"])
            parent = it.get("parent")
            nd.parent = None if parent is None else int(parent)
            if nd.parent is None:
                root = idx
            else:
                nodes[nd.parent].children.append(idx)
        if root is None:
            raise BitreeStructureError("no root (node with null parent) found")
        bt = BilabelledTree(nodes=nodes, root=root)
        bt.validate()
        return bt

    def render(self) -> str:
        """Indented text rendering, children sorted by left label."""
        lines: list[str] = []

        def rec(idx: int, depth: int) -> None:
            nd = self.nodes[idx]
            lines.append("  " * depth + f"({nd.left},{nd.right})")
            for _, c in sorted((self.nodes[c].left, c) for c in nd.children):
                rec(c, depth + 1)

        rec(self.root, 0)
        return "\n".join(lines)


def sequence_to_bitree(s: ChordSequence) -> BilabelledTree:
    """Forward map: build the bilabelled tree from a pair sequence."""
    nodes = [BitreeNode(left=0, right=0)]
    by_left: dict[int, int] = {0: 0}
    for i, (u, v) in enumerate(s.pairs, start=1):
        if u not in by_left:
            raise ChordSequenceError(i, (u, v), f"no vertex with left label {u}")
        # shift all left labels >= v up by one
        shifted: dict[int, int] = {}
        for lab, idx in by_left.items():
            if lab >= v:
                nodes[idx].left = lab + 1
                shifted[lab + 1] = idx
            else:
                shifted[lab] = idx
        parent = shifted[u]
        new_idx = len(nodes)
        nodes.append(BitreeNode(left=v, right=i, parent=parent))
        nodes[parent].children.append(new_idx)
        shifted[v] = new_idx
        by_left = shifted
    return BilabelledTree(nodes=nodes)


def bitree_to_sequence(bt: BilabelledTree) -> ChordSequence:
    """Inverse map: recover the pair sequence from a bilabelled tree."""
    bt.validate()
    n = bt.n
    # work on copies of the label/link data
    left = [nd.left for nd in bt.nodes]
    parent = [nd.parent for nd in bt.nodes]
    children = {i: set(nd.children) for i, nd in enumerate(bt.nodes)}
    by_right: dict[int, int] = {}
    for idx, nd in enumerate(bt.nodes):
        if nd.right in by_right:
            raise BitreeStructureError(f"duplicate right label {nd.right}")
        by_right[nd.right] = idx
    alive = set(range(n))
    pairs: list[tuple[int, int]] = []
    for i in range(n - 1, 0, -1):
        if i not in by_right:
            raise BitreeStructureError(f"no vertex with right label {i}")
        w = by_right[i]
        if children[w]:
            raise BitreeStructureError(
                f"vertex with right label {i} is not a leaf at its removal step"
            )
        p = parent[w]
        if p is None:
            raise BitreeStructureError("vertex to remove is the root")
        v = left[w]
        u = left[p]
        pairs.append((u, v))
        alive.discard(w)
        children[p].discard(w)
        for idx in alive:
            if left[idx] > v:
                left[idx] -= 1
    pairs.reverse()
    return ChordSequence(pairs=tuple(pairs))
