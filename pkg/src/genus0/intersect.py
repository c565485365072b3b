"""Integration and the Poincaré pairing on good monomials.

Two independent evaluations of the pairing are provided.  The oracle
multiplies the monomials out in the ring and reads off the top-degree
coefficient sum.  The production path is purely combinatorial: the pairing
of two strata classes is a signed product of factorials over the vertices
of the union tree, nonzero exactly when the doubled edges admit an
orientation giving every vertex as many incoming arrows as its valency
exceeds three.  Their agreement on every complementary pair is one of the
acceptance gates of the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product as iter_product
from math import factorial

import numpy as np

from .keelring import RingElement, ring
from .trees import Tree, a_value_masks, enumerate_stable_trees, orbit, orbit_reps


def integrate(x: RingElement) -> Fraction:
    """Evaluation against the fundamental class: top-degree coefficient sum.

    Every trivalent monomial is a point class of total integral 1; lower
    degrees integrate to zero.
    """
    top = x.n - 3
    return Fraction(sum((c for t, c in x.terms.items() if t.degree == top), 0))


def pair_oracle(m1: Tree, m2: Tree) -> Fraction:
    """Pairing by brute-force ring reduction; the slow reference method."""
    _check_complementary(m1, m2)
    terms = ring(m1.n).mul_monomials(m1, m2)
    return Fraction(sum(terms.values(), 0))


def good_orientation(tau: Tree, edges: tuple[int, ...]):
    """The unique orientation of the marked edges feeding every vertex
    exactly its excess valency, or None.

    Each vertex v must receive |v| - 3 incoming marked edges.  The marked
    edges form a forest inside the tree, so leaf peeling settles every
    edge without search: a vertex with one undecided edge has its count
    forced.  An exhaustive fallback guards the (never observed) case of
    the propagation stalling.

    Returns a dict edge index -> head vertex.
    """
    model = tau.model
    need = [len(fl) - 3 for fl in model.flags]
    undecided: dict[int, set[int]] = {v: set() for v in range(len(model.flags))}
    for e in edges:
        a, b = model.edges[e]
        undecided[a].add(e)
        undecided[b].add(e)
    orient: dict[int, int] = {}

    def settle(e: int, head: int) -> bool:
        orient[e] = head
        a, b = model.edges[e]
        undecided[a].discard(e)
        undecided[b].discard(e)
        need[head] -= 1
        return need[head] >= 0

    changed = True
    while changed:
        changed = False
        for v in range(len(model.flags)):
            u = len(undecided[v])
            if need[v] < 0 or need[v] > u:
                return None
            if u == 0:
                if need[v] != 0:
                    return None
                continue
            if need[v] == 0:
                for e in list(undecided[v]):
                    a, b = model.edges[e]
                    if not settle(e, b if a == v else a):
                        return None
                changed = True
            elif need[v] == u:
                for e in list(undecided[v]):
                    if not settle(e, v):
                        return None
                changed = True
    if len(orient) == len(edges):
        if any(need):
            return None
        return orient
    return _orientation_fallback(model, edges, tau)


def _orientation_fallback(model, edges, tau):
    # propagation never stalls on forests; kept as a correctness net
    base = [len(fl) - 3 for fl in model.flags]
    for heads in iter_product(*(model.edges[e] for e in edges)):
        need = list(base)
        for h in heads:
            need[h] -= 1
        if not any(need):
            return dict(zip(edges, heads))
    return None


def count_good_orientations(tau: Tree, edges: tuple[int, ...]) -> int:
    """Exhaustive count; exists to confirm uniqueness in tests."""
    model = tau.model
    base = [len(fl) - 3 for fl in model.flags]
    hits = 0
    for heads in iter_product(*(model.edges[e] for e in edges)):
        need = list(base)
        for h in heads:
            need[h] -= 1
        if not any(need):
            hits += 1
    return hits


@lru_cache(maxsize=None)
def _pair_parts(n: int, parts1: tuple, parts2: tuple) -> Fraction:
    for s in parts1:
        for t in parts2:
            if a_value_masks(n, s, t) == 4:
                return Fraction(0)
    union = tuple(sorted(set(parts1) | set(parts2)))
    tau = Tree(n, union)
    doubled = tuple(
        e for e, p in enumerate(union) if p in parts1 and p in parts2
    )
    if good_orientation(tau, doubled) is None:
        return Fraction(0)
    value = 1
    for k in tau.valencies():
        value *= (-1) ** (k - 3) * factorial(k - 3)
    return Fraction(value)


def pair_kaufmann(m1: Tree, m2: Tree) -> Fraction:
    """The closed-form pairing of two strata classes.

    Divisors never repeat inside one good monomial, so multiplicities in
    the product are at most two and the orientation rule covers every
    case; the value is a signed product of (|v|-3)! over the union tree.
    """
    _check_complementary(m1, m2)
    if m1.parts <= m2.parts:
        return _pair_parts(m1.n, m1.parts, m2.parts)
    return _pair_parts(m1.n, m2.parts, m1.parts)


def pair_trees(m1: Tree, m2: Tree) -> Fraction:
    return pair_kaufmann(m1, m2)


def pair_element(x: RingElement, m: Tree) -> Fraction:
    """Pairing of a (possibly mixed-degree) element against one monomial."""
    total = Fraction(0)
    comp = m.n - 3 - m.degree
    for t, c in x.terms.items():
        if t.degree == comp:
            total += c * pair_kaufmann(t, m)
    return total


def _check_complementary(m1: Tree, m2: Tree) -> None:
    if m1.n != m2.n:
        raise ValueError("monomials over different label sets")
    if m1.degree + m2.degree != m1.n - 3:
        raise ValueError(
            f"degrees {m1.degree}+{m2.degree} do not sum to {m1.n - 3}"
        )


@lru_cache(maxsize=None)
def pairing_matrix_int(n: int, r: int) -> np.ndarray:
    """Dense integer pairing matrix, degree r rows against n-3-r columns."""
    rows = enumerate_stable_trees(n, r)
    cols = enumerate_stable_trees(n, n - 3 - r)
    out = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for i, a in enumerate(rows):
        for j, b in enumerate(cols):
            out[i, j] = int(pair_kaufmann(a, b))
    return out


@dataclass(frozen=True)
class PairingMatrix:
    n: int
    r: int
    invariant: bool
    row_basis: tuple[Tree, ...]
    col_basis: tuple[Tree, ...]
    entries: tuple[tuple[Fraction, ...], ...]

    def to_dict(self) -> dict:
        from .keelring import _fmt_coeff
        from .trees import tree_dict

        return {
            "n": self.n,
            "r": self.r,
            "invariant": self.invariant,
            "row_basis": [tree_dict(t) for t in self.row_basis],
            "col_basis": [tree_dict(t) for t in self.col_basis],
            "entries": [[_fmt_coeff(v) for v in row] for row in self.entries],
        }


def pairing_matrix(n: int, r: int, invariant: bool = False) -> PairingMatrix:
    """Gram matrix of strata classes in complementary degrees.

    With ``invariant`` set, rows and columns are orbit sums under
    relabelling; the entry for orbits (O_i, O_j) is |O_i| times the sum of
    pairings of one O_i representative against all of O_j.
    """
    s = n - 3 - r
    if not invariant:
        rows = enumerate_stable_trees(n, r)
        cols = enumerate_stable_trees(n, s)
        entries = tuple(
            tuple(pair_kaufmann(a, b) for b in cols) for a in rows
        )
        return PairingMatrix(n, r, False, rows, cols, entries)
    row_reps = orbit_reps(n, r)
    col_reps = orbit_reps(n, s)
    entries = []
    for rep_r, size_r in row_reps:
        row = []
        for rep_c, _ in col_reps:
            total = sum(pair_kaufmann(rep_r, m) for m in orbit(rep_c))
            row.append(Fraction(size_r * total))
        entries.append(tuple(row))
    return PairingMatrix(
        n,
        r,
        True,
        tuple(t for t, _ in row_reps),
        tuple(t for t, _ in col_reps),
        tuple(entries),
    )
