"""Stable trees with labelled tails and their two-partition calculus.

Labels are the integers 1..n.  A subset of labels is a bitmask in which bit
i-1 stands for label i.  A stable 2-partition of {1..n} (both sides of size
at least two) is stored in canonical form as the side containing label 1.
A tree is identified with the sorted tuple of the canonical sides of its
edge partitions; distinct pairwise-compatible partitions always assemble
into a unique stable tree, so this tuple is a faithful canonical key.  It
doubles as the monomial key of the divisor ring built on top.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Iterator, NamedTuple


def full_mask(n: int) -> int:
    return (1 << n) - 1


def mask_of(labels: Iterable[int], n: int) -> int:
    m = 0
    for x in labels:
        if not 1 <= x <= n:
            raise ValueError(f"label {x} outside 1..{n}")
        bit = 1 << (x - 1)
        if m & bit:
            raise ValueError(f"repeated label {x}")
        m |= bit
    return m


def labels_of(mask: int) -> tuple[int, ...]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def canonical_side(n: int, mask: int) -> int:
    """The side of a 2-partition that contains label 1."""
    return mask if mask & 1 else full_mask(n) ^ mask


def a_value_masks(n: int, s: int, t: int) -> int:
    """Number of nonempty regions cut out by two canonical sides.

    Returns 2 exactly when the partitions are equal, 3 when they are
    compatible but distinct (one side contains another, or two sides are
    disjoint), and 4 otherwise.  In the divisor ring, 4 means the two
    boundary divisors have empty intersection.
    """
    if s == t:
        return 2
    f = full_mask(n)
    count = 0
    if s & t:
        count += 1
    if s & ~t & f:
        count += 1
    if t & ~s & f:
        count += 1
    if ~(s | t) & f:
        count += 1
    return count


def compatible_masks(n: int, s: int, t: int) -> bool:
    """True unless the two partitions cross (a-value 4)."""
    f = full_mask(n)
    return not (s & t and s & ~t & f and t & ~s & f and ~(s | t) & f)


@dataclass(frozen=True, order=True)
class Split:
    """A stable 2-partition of {1..n}, canonicalized to the side with label 1."""

    n: int
    side: int

    @classmethod
    def of(cls, labels: Iterable[int], n: int) -> "Split":
        side = canonical_side(n, mask_of(labels, n))
        sp = cls(n, side)
        sp.validate()
        return sp

    @classmethod
    def parse(cls, text: str) -> "Split":
        sides = _parse_sides(text)
        if len(sides) != 2:
            raise ValueError(f"expected two sides in {text!r}")
        all_labels = sorted(sides[0] + sides[1])
        n = len(all_labels)
        if all_labels != list(range(1, n + 1)):
            raise ValueError(f"sides of {text!r} do not partition 1..n")
        return cls.of(sides[0], n)

    def validate(self) -> None:
        k = self.side.bit_count()
        if not (self.side & 1):
            raise ValueError("side must contain label 1")
        if self.side & ~full_mask(self.n):
            raise ValueError("side exceeds the label range")
        if k < 2 or self.n - k < 2:
            raise ValueError("both sides must have at least two labels")

    @property
    def other(self) -> int:
        return full_mask(self.n) ^ self.side

    def sides(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return labels_of(self.side), labels_of(self.other)

    def __str__(self) -> str:
        a, b = self.sides()
        return "{%s|%s}" % (_fmt_labels(a, self.n), _fmt_labels(b, self.n))


def a_value(sigma: Split, tau: Split) -> int:
    if sigma.n != tau.n:
        raise ValueError("partitions live on different label sets")
    return a_value_masks(sigma.n, sigma.side, tau.side)


class Flag(NamedTuple):
    """One (vertex, incident edge-or-tail) pair of a tree.

    ``branch`` is the set of labels sitting on the far side of the flag,
    viewed from its vertex; for a tail it is just that label.
    """

    vertex: int
    kind: str  # "tail" or "edge"
    ref: int  # tail label, or edge index into Tree.parts
    branch: int


class TreeModel(NamedTuple):
    flags: tuple[tuple[Flag, ...], ...]  # indexed by vertex
    edges: tuple[tuple[int, int], ...]  # (outer, inner) vertices per edge


@lru_cache(maxsize=None)
def _tree_model(n: int, parts: tuple[int, ...]) -> TreeModel:
    """Vertex/flag incidence of the tree with the given edge partitions.

    Vertex 0 is the component carrying label 1; vertex e+1 is the endpoint
    of edge e on the far side from label 1.  Raises if the partitions do
    not form a stable tree (a crossing pair, or a vertex of valency < 3).
    """
    f = full_mask(n)
    below = [f ^ p for p in parts]
    k = len(parts)
    parent = []
    for e in range(k):
        best = -1
        for g in range(k):
            if g == e:
                continue
            if below[e] & below[g] == below[e]:
                if below[e] == below[g]:
                    raise ValueError("repeated edge partition")
                if best < 0 or below[g] & below[best] == below[g]:
                    best = g
        parent.append(best + 1)
    vflags: list[list[Flag]] = [[] for _ in range(k + 1)]
    for e in range(k):
        vflags[parent[e]].append(Flag(parent[e], "edge", e, below[e]))
        vflags[e + 1].append(Flag(e + 1, "edge", e, f ^ below[e]))
    for label in range(1, n + 1):
        bit = 1 << (label - 1)
        home, size = 0, n + 1
        for e in range(k):
            if below[e] & bit and below[e].bit_count() < size:
                home, size = e + 1, below[e].bit_count()
        vflags[home].append(Flag(home, "tail", label, bit))
    for v, fl in enumerate(vflags):
        if len(fl) < 3:
            raise ValueError(f"vertex {v} has valency {len(fl)} < 3")
        cover = 0
        for fg in fl:
            if cover & fg.branch:
                raise ValueError("edge partitions cross; not a tree")
            cover |= fg.branch
    return TreeModel(
        tuple(tuple(fl) for fl in vflags),
        tuple((parent[e], e + 1) for e in range(k)),
    )


@dataclass(frozen=True, order=True)
class Tree:
    """A stable tree on labels 1..n, keyed by its sorted edge partitions."""

    n: int
    parts: tuple[int, ...]

    @classmethod
    def make(cls, n: int, sides: Iterable[int]) -> "Tree":
        parts = tuple(sorted(canonical_side(n, s) for s in sides))
        t = cls(n, parts)
        t.model  # validates stability and compatibility
        return t

    @classmethod
    def one_vertex(cls, n: int) -> "Tree":
        if n < 3:
            raise ValueError("need at least three labels")
        return cls(n, ())

    @classmethod
    def from_splits(cls, splits: Iterable[Split]) -> "Tree":
        splits = list(splits)
        if not splits:
            raise ValueError("no splits; use one_vertex(n)")
        n = splits[0].n
        if any(s.n != n for s in splits):
            raise ValueError("splits live on different label sets")
        return cls.make(n, (s.side for s in splits))

    @property
    def degree(self) -> int:
        return len(self.parts)

    @property
    def model(self) -> TreeModel:
        return _tree_model(self.n, self.parts)

    def splits(self) -> tuple[Split, ...]:
        return tuple(Split(self.n, p) for p in self.parts)

    def edge_partition(self, e: int) -> Split:
        return Split(self.n, self.parts[e])

    def valencies(self) -> tuple[int, ...]:
        return tuple(len(fl) for fl in self.model.flags)

    def flags_at(self, v: int) -> tuple[Flag, ...]:
        return self.model.flags[v]

    def edge_vertices(self, e: int) -> tuple[int, int]:
        return self.model.edges[e]

    def __str__(self) -> str:
        if not self.parts:
            return "{}"
        return "".join(str(Split(self.n, p)) for p in self.parts)

    @classmethod
    def parse(cls, text: str) -> "Tree":
        text = text.strip()
        if text in ("{}", "1", ""):
            raise ValueError("ambiguous label count; use one_vertex(n)")
        groups = re.findall(r"\{[^{}]*\}", text)
        leftover = re.sub(r"\{[^{}]*\}|[\s*]", "", text)
        if not groups or leftover:
            raise ValueError(f"cannot parse tree from {text!r}")
        splits = [Split.parse(g) for g in groups]
        return cls.from_splits(splits)

    def to_json(self) -> str:
        return json.dumps(tree_dict(self), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Tree":
        return tree_from_dict(json.loads(text))


def tree_dict(tree: Tree) -> dict:
    """JSON form: each edge listed by the sorted labels of its smaller side.

    On a tie the side containing label 1 is listed.
    """
    edges = []
    for p in tree.parts:
        k, n = p.bit_count(), tree.n
        side = p if (k < n - k or (2 * k == n)) else full_mask(n) ^ p
        edges.append(list(labels_of(side)))
    return {"n": tree.n, "edges": sorted(edges)}


def tree_from_dict(obj: dict) -> Tree:
    n = int(obj["n"])
    return Tree.make(n, (mask_of(side, n) for side in obj["edges"]))


def _fmt_labels(labels: tuple[int, ...], n: int) -> str:
    if n <= 9:
        return "".join(str(x) for x in labels)
    return ",".join(str(x) for x in labels)


def _parse_sides(text: str) -> list[tuple[int, ...]]:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise ValueError(f"expected braces around {text!r}")
    sides = []
    for chunk in text[1:-1].split("|"):
        chunk = chunk.strip()
        if "," in chunk:
            sides.append(tuple(int(x) for x in chunk.split(",")))
        else:
            sides.append(tuple(int(c) for c in chunk))
    return sides


# ---------------------------------------------------------------------------
# enumeration


@lru_cache(maxsize=None)
def stable_splits(n: int) -> tuple[int, ...]:
    """All canonical sides of stable 2-partitions of {1..n}, ascending."""
    out = []
    rest = list(range(2, n + 1))
    for k in range(1, n - 2):
        for extra in combinations(rest, k):
            out.append(1 | mask_of(extra, n))
    return tuple(sorted(out))


@lru_cache(maxsize=None)
def _compat_graph(n: int) -> tuple[int, ...]:
    """Adjacency bitsets of the compatibility graph on stable_splits(n)."""
    sp = stable_splits(n)
    adj = [0] * len(sp)
    for i in range(len(sp)):
        for j in range(i + 1, len(sp)):
            if compatible_masks(n, sp[i], sp[j]):
                adj[i] |= 1 << j
                adj[j] |= 1 << i
    return tuple(adj)


@lru_cache(maxsize=None)
def _families(n: int, r: int) -> tuple[tuple[int, ...], ...]:
    """Sorted part-tuples of all r-edge stable trees on {1..n}."""
    if r == 0:
        return ((),)
    if r > n - 3:
        return ()
    sp = stable_splits(n)
    adj = _compat_graph(n)
    out: list[tuple[int, ...]] = []
    stack: list[int] = []

    def grow(candidates: int, low: int) -> None:
        if len(stack) == r:
            out.append(tuple(sp[i] for i in stack))
            return
        c = candidates & ~((1 << (low + 1)) - 1)
        while c:
            i = (c & -c).bit_length() - 1
            c &= c - 1
            if len(sp) - i < r - len(stack):
                break
            stack.append(i)
            grow(candidates & adj[i], i)
            stack.pop()

    grow(full_mask(len(sp)), -1)
    return tuple(out)


def enumerate_stable_trees(n: int, r: int) -> tuple[Tree, ...]:
    """All r-edge stable trees on labels 1..n, in canonical order."""
    if n < 3 or r < 0:
        raise ValueError("need n >= 3 and r >= 0")
    return tuple(Tree(n, parts) for parts in _families(n, r))


# ---------------------------------------------------------------------------
# surgery


def tree_product(sigma: Tree, tau: Tree) -> Tree | None:
    """The tree carrying the union of both edge partition sets.

    This realizes the categorical product of trees: the result's edge
    partitions are exactly the union of the inputs' (so sigma * sigma is
    sigma itself).  Returns None when some pair of partitions crosses, in
    which case the corresponding strata are disjoint.
    """
    if sigma.n != tau.n:
        raise ValueError("trees live on different label sets")
    n = sigma.n
    for s in sigma.parts:
        for t in tau.parts:
            if not compatible_masks(n, s, t):
                return None
    merged = tuple(sorted(set(sigma.parts) | set(tau.parts)))
    return Tree(n, merged)


def transplant(tree: Tree, e: int, moved: Iterable[Flag]) -> Tree:
    """Subdivide edge e, moving the given branches to the new midpoint.

    ``moved`` is a nonempty set of flags at one endpoint of e, not
    containing the edge's own flag there; the endpoint must retain at
    least two other flags so both vertices of the new edge stay stable.
    Contracting the inserted edge recovers the input tree.
    """
    moved = list(moved)
    if not moved:
        raise ValueError("must move at least one branch")
    outer, inner = tree.edge_vertices(e)
    v = moved[0].vertex
    if v not in (outer, inner):
        raise ValueError("flags are not at an endpoint of the edge")
    branch_union = 0
    for fg in moved:
        if fg.vertex != v:
            raise ValueError("flags sit at different vertices")
        if fg.kind == "edge" and fg.ref == e:
            raise ValueError("cannot transplant the subdivided edge itself")
        branch_union |= fg.branch
    if len(tree.flags_at(v)) - len(moved) < 3:
        raise ValueError("endpoint would become unstable")
    far = tree.parts[e] if v == inner else full_mask(tree.n) ^ tree.parts[e]
    # the far side of e seen from v is unchanged except it absorbs the
    # moved branches; that union is the partition of the inserted edge
    new_part = canonical_side(tree.n, far | branch_union)
    return Tree.make(tree.n, tree.parts + (new_part,))


def insert_edge(tree: Tree, v: int, group: Iterable[Flag]) -> Tree:
    """Split vertex v in two, one side keeping the given flags.

    Needs 2 <= |group| <= valency(v) - 2 so both new vertices are stable.
    """
    group = list(group)
    if any(fg.vertex != v for fg in group):
        raise ValueError("flags sit at different vertices")
    if not 2 <= len(group) <= len(tree.flags_at(v)) - 2:
        raise ValueError("each side of the new edge needs two old flags")
    side = 0
    for fg in group:
        side |= fg.branch
    return Tree.make(tree.n, tree.parts + (canonical_side(tree.n, side),))


def contract_edge(tree: Tree, e: int) -> Tree:
    return Tree(tree.n, tree.parts[:e] + tree.parts[e + 1 :])


def forget_and_stabilize(tree: Tree, label: int) -> tuple[Tree, int]:
    """Remove one tail and contract whatever becomes unstable.

    Returns the stabilized tree on n-1 labels (the survivors renumbered,
    preserving order) and the number of contracted edges, which is 0 or 1:
    removing a single tail can only break the one vertex that carried it.
    """
    n = tree.n
    if n < 4:
        raise ValueError("cannot forget below three labels")
    if not 1 <= label <= n:
        raise ValueError(f"label {label} outside 1..{n}")
    low = (1 << (label - 1)) - 1
    f = full_mask(n - 1)
    kept = set()
    for p in tree.parts:
        q = (p & low) | ((p >> 1) & ~low)
        k = q.bit_count()
        if k < 2 or (n - 1) - k < 2:
            continue
        kept.add(q if q & 1 else f ^ q)
    return Tree(n - 1, tuple(sorted(kept))), len(tree.parts) - len(kept)


def canonicalize(tree: Tree) -> Tree:
    """Identity on well-formed trees; the stored key is already canonical."""
    return Tree.make(tree.n, tree.parts)


# ---------------------------------------------------------------------------
# symmetric group action


def apply_perm_mask(mask: int, perm: tuple[int, ...]) -> int:
    out = 0
    i = 1
    while mask:
        if mask & 1:
            out |= 1 << (perm[i - 1] - 1)
        mask >>= 1
        i += 1
    return out


def relabel(tree: Tree, perm: tuple[int, ...]) -> Tree:
    """Rename labels by i -> perm[i-1]; perm must be a bijection of 1..n."""
    if sorted(perm) != list(range(1, tree.n + 1)):
        raise ValueError("perm is not a bijection of 1..n")
    return Tree(
        tree.n,
        tuple(
            sorted(
                canonical_side(tree.n, apply_perm_mask(p, perm)) for p in tree.parts
            )
        ),
    )


@lru_cache(maxsize=None)
def _transpositions(n: int) -> tuple[tuple[int, ...], ...]:
    out = []
    for i in range(1, n):
        perm = list(range(1, n + 1))
        perm[i - 1], perm[i] = perm[i], perm[i - 1]
        out.append(tuple(perm))
    return tuple(out)


def orbit(tree: Tree) -> frozenset[Tree]:
    """The symmetric-group orbit, generated by adjacent transpositions."""
    seen = {tree}
    frontier = [tree]
    gens = _transpositions(tree.n)
    while frontier:
        t = frontier.pop()
        for perm in gens:
            u = relabel(t, perm)
            if u not in seen:
                seen.add(u)
                frontier.append(u)
    return frozenset(seen)


@lru_cache(maxsize=None)
def orbit_reps(n: int, r: int) -> tuple[tuple[Tree, int], ...]:
    """One representative per relabelling orbit of r-edge trees, with sizes."""
    reps = []
    seen: set[Tree] = set()
    for t in enumerate_stable_trees(n, r):
        if t in seen:
            continue
        orb = orbit(t)
        seen |= orb
        reps.append((min(orb), len(orb)))
    return tuple(reps)


def iter_all_trees(n: int) -> Iterator[Tree]:
    for r in range(n - 2):
        yield from enumerate_stable_trees(n, r)
