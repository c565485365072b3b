"""Field-theory layer on top of the divisor ring.

A theory is handed to us as a potential: the generating function of its
n-point integrals over a finite-dimensional base with a nondegenerate
pairing.  This module checks the associativity constraints on such a
potential, reconstructs the underlying cohomology classes degree by
degree from their integrals against boundary strata, forms tensor
products, and specializes to the rank-one setting where the classes form
a group under cup product.  It also carries the volume recursions that
fall out of the rank-one theory: Weil-Petersson volumes, the equation
they satisfy as a power series, and the kappa-class generalization.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations, combinations_with_replacement, product
from math import comb, factorial

import numpy as np

from . import cache
from .intersect import _pair_parts, integrate, pair_kaufmann
from .keelring import (
    RingElement,
    _fmt_coeff,
    equal_mod_relations,
    mul,
    pullback_to_divisor,
    tensor_of_factors,
)
from .linalg import (
    PRIMES,
    BadPrime,
    FractionRREF,
    Inconsistent,
    ModEliminator,
    _certify_residual,
    crt_combine,
    mod_matmul,
    entry_mod,
    rational_reconstruct,
    solve_fraction,
)
from .taut import kappa, z
from .trees import (
    Split,
    Tree,
    a_value_masks,
    enumerate_stable_trees,
    iter_all_trees,
    orbit,
    orbit_reps,
    stable_splits,
)


# ---------------------------------------------------------------------------
# multi-indices over a graded basis


def _koszul_sort(idx: tuple[int, ...], parities: tuple[int, ...]):
    """Sort a multi-index, tracking the sign from moving odd entries.

    Returns (sorted tuple, sign); the sign is 0 when an odd-parity index
    repeats, since the corresponding insertion squares to zero.
    """
    arr = list(idx)
    sign = 1
    for i in range(1, len(arr)):
        j = i
        while j and arr[j - 1] > arr[j]:
            if parities[arr[j - 1]] and parities[arr[j]]:
                sign = -sign
            arr[j - 1], arr[j] = arr[j], arr[j - 1]
            j -= 1
    for k in range(1, len(arr)):
        if arr[k] == arr[k - 1] and parities[arr[k]]:
            return tuple(arr), 0
    return tuple(arr), sign


# ---------------------------------------------------------------------------
# the base of a theory: a graded vector space with a nondegenerate pairing


@dataclass(frozen=True)
class Metric:
    """Symmetric nondegenerate pairing on the basis gamma_0..gamma_{r-1}.

    ``gram[a][b]`` is the pairing of basis vectors a and b; ``parities``
    records the mod-2 degree of each vector.  The pairing must respect
    the grading: vectors of different parity pair to zero.
    """

    gram: tuple[tuple[Fraction, ...], ...]
    parities: tuple[int, ...]

    def __post_init__(self):
        gram = tuple(tuple(Fraction(x) for x in row) for row in self.gram)
        parities = tuple(int(p) % 2 for p in self.parities)
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "parities", parities)
        r = len(gram)
        if r == 0 or len(parities) != r:
            raise ValueError("parity list must match the matrix size")
        for row in gram:
            if len(row) != r:
                raise ValueError("pairing matrix must be square")
        for a in range(r):
            for b in range(r):
                if gram[a][b] != gram[b][a]:
                    raise ValueError("pairing matrix must be symmetric")
                if gram[a][b] and parities[a] != parities[b]:
                    raise ValueError("pairing must vanish across parities")
        self.inverse  # fail fast on a degenerate pairing

    @property
    def rank(self) -> int:
        return len(self.gram)

    @cached_property
    def inverse(self) -> tuple[tuple[Fraction, ...], ...]:
        r = self.rank
        work = [
            [Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(r)]
            for i, row in enumerate(self.gram)
        ]
        for col in range(r):
            piv = next((i for i in range(col, r) if work[i][col]), None)
            if piv is None:
                raise ValueError("pairing matrix is singular")
            work[col], work[piv] = work[piv], work[col]
            inv = 1 / work[col][col]
            work[col] = [x * inv for x in work[col]]
            for i in range(r):
                if i != col and work[i][col]:
                    f = work[i][col]
                    work[i] = [x - f * y for x, y in zip(work[i], work[col])]
        return tuple(tuple(row[r:]) for row in work)

    @cached_property
    def casimir(self) -> tuple[tuple[int, int, Fraction], ...]:
        """Nonzero entries (a, b, weight) of the inverse pairing."""
        inv = self.inverse
        return tuple(
            (a, b, inv[a][b])
            for a in range(self.rank)
            for b in range(self.rank)
            if inv[a][b]
        )

    @classmethod
    def standard(cls, rank: int) -> "Metric":
        gram = tuple(
            tuple(Fraction(int(a == b)) for b in range(rank)) for a in range(rank)
        )
        return cls(gram, (0,) * rank)

    @classmethod
    def hyperbolic(cls) -> "Metric":
        """The two-dimensional pairing with ones off the diagonal."""
        return cls(((Fraction(0), Fraction(1)), (Fraction(1), Fraction(0))), (0, 0))

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "parities": list(self.parities),
            "gram": [[_fmt_coeff(x) for x in row] for row in self.gram],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Metric":
        gram = tuple(tuple(Fraction(x) for x in row) for row in obj["gram"])
        return cls(gram, tuple(obj["parities"]))


def _require_even(metric: Metric, what: str) -> None:
    if any(metric.parities):
        raise ValueError(f"{what} supports even-parity bases only")


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Potential:
    """Truncated generating function of n-point values on a metric base.

    ``terms`` maps sorted multi-indices (a_1 <= ... <= a_n) to the value
    Y(gamma_{a_1}, ..., gamma_{a_n}); everything with more than ``order``
    insertions is treated as unknown rather than zero.
    """

    metric: Metric
    order: int
    terms: tuple[tuple[tuple[int, ...], Fraction], ...]

    @classmethod
    def build(cls, metric: Metric, coeffs, order: int) -> "Potential":
        if order < 3:
            raise ValueError("truncation order must be at least 3")
        norm: dict[tuple[int, ...], Fraction] = {}
        for key, val in coeffs.items():
            v = Fraction(val)
            k = tuple(int(i) for i in key)
            if len(k) < 3:
                raise ValueError("a term needs at least three insertions")
            if len(k) > order:
                raise ValueError("term reaches beyond the truncation order")
            if any(not 0 <= i < metric.rank for i in k):
                raise ValueError("multi-index outside the basis range")
            sk, sign = _koszul_sort(k, metric.parities)
            if sign == 0:
                if v:
                    raise ValueError("a repeated odd index forces a zero value")
                continue
            v = sign * v
            if sk in norm:
                if norm[sk] != v:
                    raise ValueError(f"conflicting values for index {sk}")
                continue
            if v:
                norm[sk] = v
        terms = tuple(sorted(norm.items(), key=lambda kv: (len(kv[0]), kv[0])))
        return cls(metric=metric, order=order, terms=terms)

    @cached_property
    def _map(self) -> dict[tuple[int, ...], Fraction]:
        return dict(self.terms)

    def y(self, idx) -> Fraction:
        """The n-point value at a multi-index, in any insertion order."""
        k = tuple(int(i) for i in idx)
        if len(k) > self.order:
            raise ValueError("index reaches beyond the truncation order")
        key, sign = _koszul_sort(k, self.metric.parities)
        if sign == 0:
            return Fraction(0)
        return sign * self._map.get(key, Fraction(0))

    def to_dict(self) -> dict:
        out = self.metric.to_dict()
        out["order"] = self.order
        out["terms"] = [
            {"multi_index": list(k), "coeff": _fmt_coeff(v)} for k, v in self.terms
        ]
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "Potential":
        metric = Metric.from_dict(obj)
        coeffs = {
            tuple(t["multi_index"]): Fraction(t["coeff"]) for t in obj["terms"]
        }
        return cls.build(metric, coeffs, int(obj["order"]))


def identity_potential(order: int = 10) -> Potential:
    """The trivial theory: a one-point base where only the triple counts."""
    return Potential.build(Metric.standard(1), {(0, 0, 0): 1}, order)


def potential_from_coordinates(coords, order: int | None = None) -> Potential:
    """Rank-one potential with prescribed full integrals C_3, C_4, ...

    The k-th entry of ``coords`` is the integral of the (k+3)-point
    class, which is exactly the coefficient Y(gamma_0^{k+3}).
    """
    vals = [Fraction(c) for c in coords]
    if not vals:
        raise ValueError("need at least the three-point value")
    if order is None:
        order = len(vals) + 2
    if order > len(vals) + 2:
        raise ValueError("not enough values for the requested order")
    coeffs = {(0,) * k: vals[k - 3] for k in range(3, order + 1) if vals[k - 3]}
    return Potential.build(Metric.standard(1), coeffs, order)


def p1_potential(order: int = 10) -> Potential:
    """The projective-line potential on the basis (unit, point).

    Classical part x^2 z / 2 plus one quantum correction z^k / k! at
    every k >= 3: each count of rational curves through prescribed
    points equals one in this geometry.
    """
    coeffs: dict[tuple[int, ...], Fraction] = {(0, 0, 1): Fraction(1)}
    for k in range(3, order + 1):
        coeffs[(1,) * k] = Fraction(1)
    return Potential.build(Metric.hyperbolic(), coeffs, order)


# ---------------------------------------------------------------------------
# the associativity constraints


@dataclass(frozen=True)
class WdvvReport:
    """Outcome of checking the quadratic constraints on a potential."""

    order: int
    checked: int
    failure: tuple | None

    @property
    def passed(self) -> bool:
        return self.failure is None

    def to_dict(self) -> dict:
        out = {"order": self.order, "checked": self.checked, "passed": self.passed}
        if self.failure is not None:
            quad, nu, lhs, rhs = self.failure
            out["failure"] = {
                "quadruple": list(quad),
                "spectators": list(nu),
                "lhs": _fmt_coeff(lhs),
                "rhs": _fmt_coeff(rhs),
            }
        else:
            out["failure"] = None
        return out


def _submultiset_splits(nu: tuple[int, ...]):
    """All ways to split a multiset in two, with multinomial weights."""
    counted = sorted(Counter(nu).items())
    vals = [v for v, _ in counted]
    mult = [m for _, m in counted]
    out = []
    for pick in product(*(range(m + 1) for m in mult)):
        coeff = 1
        mu1: list[int] = []
        mu2: list[int] = []
        for v, m, k in zip(vals, mult, pick):
            coeff *= comb(m, k)
            mu1.extend([v] * k)
            mu2.extend([v] * (m - k))
        out.append((tuple(mu1), tuple(mu2), coeff))
    return out


_WDVV_MEMO: dict = {}


def wdvv_check(phi: Potential, order: int | None = None) -> WdvvReport:
    """Check every quadratic associativity constraint up to the order.

    For each quadruple (a, b, c, d) and each spectator multiset, the sum
    over splittings of one-loop contractions through the inverse pairing
    must be invariant under swapping b and c (up to the parity sign).
    The report carries the first violated instance, if any.
    """
    if order is None:
        order = phi.order
    if not 4 <= order <= phi.order:
        raise ValueError("order must lie between 4 and the truncation order")
    memo_key = (phi, order)
    hit = _WDVV_MEMO.get(memo_key)
    if hit is not None:
        return hit
    _require_even(phi.metric, "constraint checking")
    rank = phi.metric.rank
    parities = phi.metric.parities
    cas = phi.metric.casimir

    table: dict[tuple[tuple[int, ...], tuple[int, ...]], Fraction] = {}
    for key, val in phi.terms:
        if len(key) >= order or len(key) < 3:
            continue
        for pos in combinations(range(len(key)), 3):
            triple = tuple(key[p] for p in pos)
            rest = tuple(key[p] for p in range(len(key)) if p not in pos)
            table[(triple, rest)] = val

    def contracted(pair1, pair2, splits, fcache):
        key = (pair1, pair2) if pair1 <= pair2 else (pair2, pair1)
        hit = fcache.get(key)
        if hit is not None:
            return hit
        a1, b1 = key[0]
        a2, b2 = key[1]
        tot = Fraction(0)
        for mu1, mu2, cf in splits:
            s = Fraction(0)
            for e, f, w in cas:
                y1 = table.get((tuple(sorted((a1, b1, e))), mu1))
                if not y1:
                    continue
                y2 = table.get((tuple(sorted((a2, b2, f))), mu2))
                if not y2:
                    continue
                s += w * y1 * y2
            if s:
                tot += cf * s
        fcache[key] = tot
        return tot

    checked = 0
    failure = None
    for size in range(0, order - 3):
        if failure is not None:
            break
        for nu in combinations_with_replacement(range(rank), size):
            splits = _submultiset_splits(nu)
            fcache: dict = {}
            for quad in product(range(rank), repeat=4):
                a, b, c, d = quad
                lhs = contracted(
                    tuple(sorted((a, b))), tuple(sorted((c, d))), splits, fcache
                )
                rhs = contracted(
                    tuple(sorted((a, c))), tuple(sorted((b, d))), splits, fcache
                )
                if parities[a] and (parities[b] + parities[c]) % 2:
                    rhs = -rhs
                checked += 1
                if lhs != rhs:
                    failure = (quad, nu, lhs, rhs)
                    break
            if failure is not None:
                break
    report = WdvvReport(order=order, checked=checked, failure=failure)
    _WDVV_MEMO[memo_key] = report
    return report


# ---------------------------------------------------------------------------
# integrals over boundary strata


_PLANS: dict[Tree, tuple] = {}


def _plan(tree: Tree):
    got = _PLANS.get(tree)
    if got is None:
        model = tree.model
        nv = len(model.flags)
        kids: list[list[int]] = [[] for _ in range(nv)]
        for outer, inner in model.edges:
            kids[outer].append(inner)
        tails = tuple(
            tuple(f.ref - 1 for f in fl if f.kind == "tail") for fl in model.flags
        )
        order = [0]
        i = 0
        while i < len(order):
            order.extend(kids[order[i]])
            i += 1
        got = (tuple(tuple(k) for k in kids), tails, tuple(reversed(order)))
        _PLANS[tree] = got
    return got


def _stratum_value(phi: Potential, tree: Tree, idx) -> Fraction:
    """One stratum's integral: vertex values contracted along the edges.

    Works up the tree from the leaves; each component sends its parent a
    vector obtained by closing its own value off with the inverse
    pairing, and the root contracts everything that reaches it.
    """
    kids, tails, topo = _plan(tree)
    ymap = phi._map
    cas = phi.metric.casimir
    rank = phi.metric.rank
    msg: dict[int, list[Fraction]] = {}
    for v in topo:
        base = tuple(idx[t] for t in tails[v])
        combos = [(base, Fraction(1))]
        for ch in kids[v]:
            vec = msg.pop(ch)
            nxt = []
            for part, w in combos:
                for slot in range(rank):
                    wv = vec[slot]
                    if wv:
                        nxt.append((part + (slot,), w * wv))
            combos = nxt
            if not combos:
                break
        if v == 0:
            tot = Fraction(0)
            for part, w in combos:
                yv = ymap.get(tuple(sorted(part)))
                if yv:
                    tot += w * yv
            return tot
        raw = [Fraction(0)] * rank
        for part, w in combos:
            for a in range(rank):
                yv = ymap.get(tuple(sorted(part + (a,))))
                if yv:
                    raw[a] += w * yv
        out = [Fraction(0)] * rank
        for a, b, w in cas:
            if raw[a]:
                out[b] += w * raw[a]
        msg[v] = out
    raise AssertionError("unreachable: the root always terminates the sweep")


def strata_integrals(phi: Potential, n: int, indices=None) -> dict[Tree, Fraction]:
    """Integral of the n-point class against every boundary stratum.

    ``indices`` fixes the basis vector inserted at each of the n labels;
    a one-dimensional base defaults to all zeros.  Keys run over all
    stable trees on n labels in degree order.
    """
    _require_even(phi.metric, "stratum integration")
    if not 3 <= n <= phi.order:
        raise ValueError("label count must lie between 3 and the order")
    if indices is None:
        if phi.metric.rank != 1:
            raise ValueError("indices are required on a base of rank > 1")
        indices = (0,) * n
    idx = tuple(int(i) for i in indices)
    if len(idx) != n:
        raise ValueError("need one basis index per label")
    if any(not 0 <= i < phi.metric.rank for i in idx):
        raise ValueError("basis index out of range")
    return {tree: _stratum_value(phi, tree, idx) for tree in iter_all_trees(n)}


# ---------------------------------------------------------------------------
# sparse pairing structures and monomial bases


_COMPAT_BITS: dict[int, list[int]] = {}
_SP: dict[tuple[int, int], list] = {}
_BASIS: dict[tuple[int, int, int], tuple[int, ...]] = {}


def _compat_bitmasks(n: int) -> list[int]:
    got = _COMPAT_BITS.get(n)
    if got is None:
        splits = stable_splits(n)
        got = []
        for s in splits:
            m = 0
            for j, t in enumerate(splits):
                if a_value_masks(n, s, t) != 4:
                    m |= 1 << j
            got.append(m)
        _COMPAT_BITS[n] = got
    return got


def _build_sp(n: int, lo: int, hi: int) -> list:
    rows_trees = enumerate_stable_trees(n, lo)
    cols_trees = enumerate_stable_trees(n, hi)
    splits = stable_splits(n)
    sid = {m: i for i, m in enumerate(splits)}
    nsplit = len(splits)
    lanes = (nsplit + 63) // 64
    full = (1 << nsplit) - 1
    lane_mask = (1 << 64) - 1
    colbits = np.zeros((len(cols_trees), lanes), dtype=np.uint64)
    for j, t in enumerate(cols_trees):
        m = 0
        for part in t.parts:
            m |= 1 << sid[part]
        for lane in range(lanes):
            colbits[j, lane] = (m >> (64 * lane)) & lane_mask
    compat = _compat_bitmasks(n)
    pair_raw = _pair_parts.__wrapped__
    out = []
    for t in rows_trees:
        sig = full
        for part in t.parts:
            sig &= compat[sid[part]]
        bad = sig ^ full
        ok = np.ones(len(cols_trees), dtype=bool)
        for lane in range(lanes):
            ok &= (colbits[:, lane] & np.uint64((bad >> (64 * lane)) & lane_mask)) == 0
        cs: list[int] = []
        vs: list[int] = []
        for j in np.nonzero(ok)[0].tolist():
            v = pair_raw(n, t.parts, cols_trees[j].parts)
            if v:
                cs.append(j)
                vs.append(int(v))
        out.append((np.asarray(cs, dtype=np.int64), np.asarray(vs, dtype=np.int64)))
    return out


def _sp_rows(n: int, d: int) -> list:
    """Sparse pairing rows: degree-d monomials against the complement.

    Row i lists the complementary-degree trees its tree pairs nonzero
    with, as (column indices, values).  Built once per complementary
    pair of degrees; the flipped orientation is a transpose.
    """
    c = n - 3 - d
    if d < 0 or c < 0:
        raise ValueError("degree out of range")
    got = _SP.get((n, d))
    if got is not None:
        return got
    lo, hi = min(d, c), max(d, c)
    if d != lo:
        base = _sp_rows(n, lo)
        acc: list[tuple[list[int], list[int]]] = [
            ([], []) for _ in range(len(enumerate_stable_trees(n, hi)))
        ]
        for i, (cols, vals) in enumerate(base):
            for j, v in zip(cols.tolist(), vals.tolist()):
                acc[j][0].append(i)
                acc[j][1].append(v)
        got = [
            (np.asarray(cs, dtype=np.int64), np.asarray(vs, dtype=np.int64))
            for cs, vs in acc
        ]
        _SP[(n, d)] = got
        return got
    disk = cache.load(n, "pairings", str(lo))
    if disk is not None:
        got = [
            (np.asarray(cl, dtype=np.int64), np.asarray(vl, dtype=np.int64))
            for cl, vl in disk
        ]
    else:
        got = _build_sp(n, lo, hi)
        cache.store(
            n, "pairings", str(lo), [[r[0].tolist(), r[1].tolist()] for r in got]
        )
    _SP[(n, lo)] = got
    return got


def _densify(rows: list, width: int) -> np.ndarray:
    block = np.zeros((len(rows), width))
    for i, (cols, vals) in enumerate(rows):
        if cols.size:
            block[i, cols] = vals
    return block


def _greedy_rows(rows: list, width: int, p: int, block: int = 512) -> tuple[int, ...]:
    """Indices of a maximal set of rows independent mod p, greedily.

    Mirrors the incremental echelon sweep, remembering which source row
    produced each pivot.  Independence mod p implies independence over
    the rationals, so the selection is always safe; completeness is
    certified downstream by the exact solvers that consume it.
    """
    store = np.zeros((0, width))
    piv: list[int] = []
    chosen: list[int] = []
    for lo in range(0, len(rows), block):
        chunk = rows[lo : lo + block]
        b = np.mod(_densify(chunk, width), p)
        if piv:
            coeff = b[:, piv]
            if np.any(coeff):
                b = np.mod(b - mod_matmul(coeff, store, p), p)
        new_rows: list[np.ndarray] = []
        new_cols: list[int] = []
        for i in range(b.shape[0]):
            row = b[i]
            for cpos, nr in zip(new_cols, new_rows):
                f = row[cpos]
                if f:
                    row = np.mod(row - f * nr, p)
            nz = np.nonzero(row)[0]
            if nz.size == 0:
                continue
            cpos = int(nz[0])
            inv = pow(int(row[cpos]), p - 2, p)
            new_rows.append(np.mod(row * inv, p))
            new_cols.append(cpos)
            chosen.append(lo + i)
        if new_rows:
            fresh = np.array(new_rows)
            for j in range(len(new_cols) - 1, 0, -1):
                cpos = new_cols[j]
                for i2 in range(j):
                    f = fresh[i2, cpos]
                    if f:
                        fresh[i2] = np.mod(fresh[i2] - f * fresh[j], p)
            if piv:
                coeff = store[:, new_cols]
                if np.any(coeff):
                    store = np.mod(store - mod_matmul(coeff, fresh, p), p)
            store = np.vstack([store, fresh])
            piv.extend(new_cols)
        if len(piv) == width:
            break
    return tuple(sorted(chosen))


def _monomial_basis(n: int, r: int, attempt: int = 0) -> tuple[int, ...]:
    """A degree-r monomial basis, as indices into the tree enumeration.

    Chosen greedily so that the selected trees have independent pairing
    rows against the complementary degree.
    """
    key = (n, r, attempt)
    got = _BASIS.get(key)
    if got is not None:
        return got
    if attempt == 0:
        disk = cache.load(n, "bases", str(r))
        if disk is not None:
            got = tuple(int(i) for i in disk)
            _BASIS[key] = got
            return got
    rows = _sp_rows(n, r)
    width = len(enumerate_stable_trees(n, n - 3 - r))
    got = _greedy_rows(rows, width, PRIMES[attempt])
    if attempt == 0:
        cache.store(n, "bases", str(r), list(got))
    _BASIS[key] = got
    return got


def _restricted_dense(n: int, r: int, basis: tuple[int, ...]) -> np.ndarray:
    """Dense pairing block: complementary-degree rows, basis columns."""
    c = n - 3 - r
    rows = _sp_rows(n, c)
    ncols = len(enumerate_stable_trees(n, r))
    posmap = np.full(ncols, -1, dtype=np.int64)
    posmap[list(basis)] = np.arange(len(basis))
    a = np.zeros((len(rows), len(basis)), dtype=np.int64)
    for i, (cols, vals) in enumerate(rows):
        if cols.size:
            pos = posmap[cols]
            keep = pos >= 0
            a[i, pos[keep]] = vals[keep]
    return a


def _solve_full_rank(a_int: np.ndarray, rhs_cols: list[list[Fraction]]):
    """Exact solutions of a full-column-rank system, fully certified.

    Feeds rows mod p only until the rank fills up, lifts by rational
    reconstruction across as many primes as needed, and accepts only
    once the integer residual over every row (fed or not) vanishes.
    """
    nrows, ncols = a_int.shape
    nrhs = len(rhs_cols)
    if nrhs == 0:
        return []
    acc = None
    modulus = 1
    inconsistent_seen = 0
    for p in PRIMES:
        try:
            amod = np.mod(a_int, p).astype(np.float64)
            rmod = np.empty((nrows, nrhs))
            for j, col in enumerate(rhs_cols):
                rmod[:, j] = [entry_mod(x, p) for x in col]
            elim = ModEliminator(ncols, p, nsolve=nrhs)
            block = np.hstack([amod, rmod])
            for lo in range(0, nrows, 1024):
                elim.feed(block[lo : lo + 1024])
                if elim.rank == ncols:
                    break
            if elim.rank < ncols:
                continue
            x_p, _ = elim.solutions()
        except BadPrime:
            continue
        except Inconsistent:
            inconsistent_seen += 1
            if inconsistent_seen >= 2:
                raise
            continue
        x_int = x_p.astype(np.int64).astype(object)
        if acc is None:
            acc, modulus = x_int, p
        else:
            lift = np.vectorize(
                lambda a1, a2: crt_combine(int(a1), modulus, int(a2), p),
                otypes=[object],
            )
            acc = lift(acc, x_int)
            modulus *= p
        sols = []
        for j in range(nrhs):
            col = []
            for v in acc[:, j]:
                f = rational_reconstruct(int(v), modulus)
                if f is None:
                    break
                col.append(f)
            else:
                sols.append(col)
                continue
            break
        else:
            if _certify_residual(a_int, sols, rhs_cols):
                return sols
    raise RuntimeError("prime pool exhausted without a certified solution")


# ---------------------------------------------------------------------------
# reconstruction of the n-point classes


_RECON_MEMO: dict = {}


def _reconstruct_all(phi: Potential, n: int) -> dict[tuple[int, ...], RingElement]:
    memo_key = (phi, n)
    got = _RECON_MEMO.get(memo_key)
    if got is not None:
        return got
    _require_even(phi.metric, "class reconstruction")
    if not 3 <= n <= phi.order:
        raise ValueError("label count must lie between 3 and the order")
    rank = phi.metric.rank
    midxs = list(combinations_with_replacement(range(rank), n))
    parts: dict[tuple[int, ...], dict[Tree, Fraction]] = {m: {} for m in midxs}
    for r in range(n - 2):
        c = n - 3 - r
        trees_c = enumerate_stable_trees(n, c)
        rhs_cols = [
            [_stratum_value(phi, t, m) for t in trees_c] for m in midxs
        ]
        attempt = 0
        while True:
            basis = _monomial_basis(n, r, attempt)
            a_int = _restricted_dense(n, r, basis)
            try:
                sols = _solve_full_rank(a_int, rhs_cols)
                break
            except (Inconsistent, RuntimeError):
                # a thin basis from an unlucky prime cannot span; retry
                # the selection with a fresh prime before giving up
                attempt += 1
                if attempt >= 3:
                    raise
        trees_r = enumerate_stable_trees(n, r)
        for mi, m in enumerate(midxs):
            for pos, tree_idx in enumerate(basis):
                v = sols[mi][pos]
                if v:
                    parts[m][trees_r[tree_idx]] = v
    got = {m: RingElement(n, terms) for m, terms in parts.items()}
    _RECON_MEMO[memo_key] = got
    return got


def reconstruct_classes(phi: Potential, n: int) -> dict[tuple[int, ...], RingElement]:
    """The n-point classes of a potential, one per sorted multi-index.

    Each class is the unique solution of the pairing equations against
    all complementary boundary monomials, with right-hand sides given by
    the stratum integrals; the potential must satisfy the associativity
    constraints for those equations to be consistent.
    """
    report = wdvv_check(phi)
    if not report.passed:
        quad, nu, _, _ = report.failure
        raise ValueError(
            f"potential violates associativity at quadruple {quad}, "
            f"spectators {nu}"
        )
    return dict(_reconstruct_all(phi, n))


# ---------------------------------------------------------------------------
# tensor products


def tensor_metric(m1: Metric, m2: Metric) -> Metric:
    """Pairing on the tensor base, flat index a * rank2 + b."""
    r1, r2 = m1.rank, m2.rank
    parities = tuple(
        (m1.parities[a] + m2.parities[b]) % 2 for a in range(r1) for b in range(r2)
    )
    gram = []
    for a in range(r1):
        for b in range(r2):
            row = []
            for c in range(r1):
                for d in range(r2):
                    v = m1.gram[a][c] * m2.gram[b][d]
                    if v and m2.parities[b] and m1.parities[c]:
                        v = -v
                    row.append(v)
            gram.append(tuple(row))
    return Metric(tuple(gram), parities)


def tensor_potential(
    phi1: Potential, phi2: Potential, order: int | None = None
) -> Potential:
    """Potential of the tensor theory, assembled degree by degree.

    The n-point value at a product insertion splits as an integral of a
    first-factor class against the second factor; expanding the first
    factor in boundary monomials reduces everything to stratum integrals
    of the second.  The output is checked against the associativity
    constraints before it is returned.
    """
    if order is None:
        order = min(phi1.order, phi2.order)
    if not 3 <= order <= min(phi1.order, phi2.order):
        raise ValueError("order must not exceed either truncation")
    _require_even(phi1.metric, "tensor assembly")
    _require_even(phi2.metric, "tensor assembly")
    met = tensor_metric(phi1.metric, phi2.metric)
    r2 = phi2.metric.rank
    coeffs: dict[tuple[int, ...], Fraction] = {}
    for n in range(3, order + 1):
        rec1 = reconstruct_classes(phi1, n)
        wdvv_check(phi2)
        dp_memo: dict = {}
        for midx in combinations_with_replacement(range(met.rank), n):
            aseq = tuple(b // r2 for b in midx)
            cseq = tuple(b % r2 for b in midx)
            x1 = rec1[aseq]
            tot = Fraction(0)
            for tree, cf in x1.terms.items():
                key = (tree, cseq)
                v = dp_memo.get(key)
                if v is None:
                    v = _stratum_value(phi2, tree, cseq)
                    dp_memo[key] = v
                if v:
                    tot += cf * v
            if tot:
                coeffs[midx] = tot
    out = Potential.build(met, coeffs, order)
    report = wdvv_check(out)
    if not report.passed:
        raise ArithmeticError("tensor assembly produced an inconsistent potential")
    return out


# ---------------------------------------------------------------------------
# rank-one theories


def _ring_exp(x: RingElement) -> RingElement:
    out = RingElement.unit(x.n)
    term = RingElement.unit(x.n)
    for k in range(1, x.n - 2):
        term = mul(term, x).scale(Fraction(1, k))
        if not term:
            break
        out = out + term
    return out


def _ring_log(c: RingElement) -> RingElement:
    u = c - RingElement.unit(c.n)
    out = RingElement(c.n, {})
    pw = RingElement.unit(c.n)
    for k in range(1, c.n - 2):
        pw = mul(pw, u)
        if not pw:
            break
        out = out + pw.scale(Fraction((-1) ** (k + 1), k))
    return out


@dataclass(frozen=True)
class RankOneTheory:
    """A sequence of classes c_n, one per label count starting at n = 3.

    These are the n-point classes of a theory on a one-dimensional base;
    the tensor product of two theories is the cup product of their
    classes, which makes the invertible ones a group.
    """

    classes: tuple[RingElement, ...]

    def __post_init__(self):
        if not self.classes:
            raise ValueError("need at least the three-point class")
        for k, cls in enumerate(self.classes):
            if cls.n != k + 3:
                raise ValueError("classes must cover n = 3, 4, ... in order")

    @property
    def nmax(self) -> int:
        return len(self.classes) + 2

    def c(self, n: int) -> RingElement:
        if not 3 <= n <= self.nmax:
            raise ValueError("label count out of range")
        return self.classes[n - 3]

    def coordinate(self, n: int) -> Fraction:
        return integrate(self.c(n))

    def coordinates(self) -> list[Fraction]:
        return [self.coordinate(n) for n in range(3, self.nmax + 1)]

    @classmethod
    def identity(cls, nmax: int) -> "RankOneTheory":
        return cls(tuple(RingElement.unit(n) for n in range(3, nmax + 1)))

    @classmethod
    def scaling(cls, t, nmax: int) -> "RankOneTheory":
        """The theory t^(n-2) times the unit; these form the scalars."""
        t = Fraction(t)
        return cls(
            tuple(
                RingElement.unit(n).scale(t ** (n - 2)) for n in range(3, nmax + 1)
            )
        )

    @classmethod
    def from_coordinates(cls, coords) -> "RankOneTheory":
        """Reconstruct the classes whose full integrals are prescribed."""
        phi = potential_from_coordinates(coords)
        out = []
        for n in range(3, phi.order + 1):
            out.append(reconstruct_classes(phi, n)[(0,) * n])
        return cls(tuple(out))

    @classmethod
    def from_kappa(cls, s, nmax: int) -> "RankOneTheory":
        """Exponential of a kappa-class combination, sum of s_a kappa_a."""
        svals = [Fraction(x) for x in s]
        out = []
        for n in range(3, nmax + 1):
            x = RingElement(n, {})
            for a, sa in enumerate(svals, start=1):
                if sa:
                    x = x + kappa(n, a).element.scale(sa)
            out.append(_ring_exp(x))
        return cls(tuple(out))

    def tensor(self, other: "RankOneTheory") -> "RankOneTheory":
        nmax = min(self.nmax, other.nmax)
        return RankOneTheory(
            tuple(mul(self.c(n), other.c(n)) for n in range(3, nmax + 1))
        )

    def equals(self, other: "RankOneTheory") -> bool:
        """Class-level equality: representatives may differ by relations."""
        if self.nmax != other.nmax:
            return False
        return all(
            equal_mod_relations(self.c(n), other.c(n))
            for n in range(3, self.nmax + 1)
        )

    def is_invertible(self) -> bool:
        return self.coordinate(3) != 0

    def factor(self) -> tuple[Fraction, "RankOneTheory"]:
        """Split off the scalar part: c = scaling(t) tensor unital.

        The scalar is the three-point integral; the remaining factor has
        unit leading coefficient in every degree, which the construction
        verifies exactly.
        """
        t = self.coordinate(3)
        if t == 0:
            raise ValueError("theory is not invertible")
        unital = self.tensor(RankOneTheory.scaling(Fraction(1, 1) / t, self.nmax))
        for n in range(3, unital.nmax + 1):
            if unital.c(n).component(0) != RingElement.unit(n):
                raise ArithmeticError("leading coefficients failed to normalize")
        return t, unital

    def log(self) -> tuple[RingElement, ...]:
        """Logarithms of a unital theory, degree by degree."""
        for n in range(3, self.nmax + 1):
            if self.c(n).component(0) != RingElement.unit(n):
                raise ValueError("logarithm needs unit leading coefficients")
        return tuple(_ring_log(self.c(n)) for n in range(3, self.nmax + 1))

    @classmethod
    def from_log(cls, lams) -> "RankOneTheory":
        return cls(tuple(_ring_exp(x) for x in lams))

    def verify_splitting(self, n: int) -> bool:
        """Check the boundary restriction law for every divisor at n.

        Pulling c_n back to a boundary divisor must give the outer
        product of the two smaller classes attached to its sides.
        """
        cn = self.c(n)
        for side in stable_splits(n):
            sigma = Split(n, side)
            geo_pull = pullback_to_divisor(sigma, cn)
            n1 = side.bit_count() + 1
            n2 = n - side.bit_count() + 1
            expect = tensor_of_factors(self.c(n1), self.c(n2))
            if not (geo_pull - expect).is_zero_class():
                return False
        return True

    def to_dict(self) -> dict:
        return {"Cn": [_fmt_coeff(c) for c in self.coordinates()]}


# ---------------------------------------------------------------------------
# volume recursions


def _volumes(nmax: int) -> dict[int, Fraction]:
    v = {3: Fraction(1)}
    for n in range(4, nmax + 1):
        tot = Fraction(0)
        for i in range(1, n - 2):
            tot += (
                Fraction(i * (n - i - 2), n - 1)
                * comb(n - 4, i - 1)
                * comb(n, i + 1)
                * v[i + 2]
                * v[n - i]
            )
        v[n] = tot / 2
    return v


def wp_volumes(nmax: int) -> list[Fraction]:
    """Weil-Petersson volume polynomials' leading integrals v_4..v_nmax.

    Normalized so every value is a positive integer; v_3 = 1 seeds the
    quadratic recursion.
    """
    if nmax < 4:
        raise ValueError("nmax must be at least 4")
    vols = _volumes(nmax)
    return [vols[n] for n in range(4, nmax + 1)]


def _ser_mul(a: list[Fraction], b: list[Fraction], nmax: int) -> list[Fraction]:
    out = [Fraction(0)] * (nmax + 1)
    for i, ai in enumerate(a):
        if not ai:
            continue
        for j in range(min(len(b), nmax + 1 - i)):
            if b[j]:
                out[i + j] += ai * b[j]
    return out


@dataclass(frozen=True)
class MatoneReport:
    """Coefficient-by-coefficient outcome of the volume ODE check."""

    nmax: int
    checked: int
    failure: tuple | None

    @property
    def passed(self) -> bool:
        return self.failure is None

    def to_dict(self) -> dict:
        out = {"nmax": self.nmax, "checked": self.checked, "passed": self.passed}
        if self.failure is not None:
            k, lhs, rhs = self.failure
            out["failure"] = {
                "power": k,
                "lhs": _fmt_coeff(lhs),
                "rhs": _fmt_coeff(rhs),
            }
        else:
            out["failure"] = None
        return out


def matone_check(nmax: int = 12, volumes=None) -> MatoneReport:
    """Check x(x - g)g'' = x(g')^2 + (x - g)g' through x^nmax.

    The series g packages the volumes as g_k = (k+1)(k-1) v_{k+1} over
    (k+1)!(k-2)!.  Passing explicit ``volumes`` (the list v_3, v_4, ...,
    at least up to v_{nmax+1}) substitutes them for the computed ones,
    which is how a perturbed sequence is shown to break the equation.
    """
    if nmax < 3:
        raise ValueError("nmax must be at least 3")
    if volumes is None:
        vols = _volumes(nmax + 1)
        seq = [vols[k] for k in range(3, nmax + 2)]
    else:
        seq = [Fraction(x) for x in volumes]
        if len(seq) < nmax - 1:
            raise ValueError("need volumes up through v_{nmax+1}")
    g = [Fraction(0)] * (nmax + 1)
    for k in range(2, nmax + 1):
        vk1 = seq[k - 2]
        g[k] = Fraction((k + 1) * (k - 1)) * vk1 / (factorial(k + 1) * factorial(k - 2))
    gp = [Fraction(0)] * (nmax + 1)
    gpp = [Fraction(0)] * (nmax + 1)
    for k in range(1, nmax + 1):
        gp[k - 1] = k * g[k]
    for k in range(2, nmax + 1):
        gpp[k - 2] = k * (k - 1) * g[k]
    xmg = [-c for c in g]
    xmg[1] += 1
    lhs = _ser_mul(xmg, gpp, nmax)
    lhs = [Fraction(0)] + lhs[:nmax]  # multiply by x
    rhs1 = _ser_mul(gp, gp, nmax)
    rhs1 = [Fraction(0)] + rhs1[:nmax]
    rhs2 = _ser_mul(xmg, gp, nmax)
    rhs = [a + b for a, b in zip(rhs1, rhs2)]
    failure = None
    for k in range(nmax + 1):
        if lhs[k] != rhs[k]:
            failure = (k, lhs[k], rhs[k])
            break
    return MatoneReport(nmax=nmax, checked=nmax + 1, failure=failure)


# ---------------------------------------------------------------------------
# stratum coefficients of the kappa classes


@dataclass(frozen=True)
class ACoefficients:
    """Symmetric stratum coefficients of one kappa class.

    ``entries`` lists one orbit representative per symmetry class of
    degree-a trees with its orbit size and coefficient.  The system that
    determines them is solved in the row space, so the answer is the
    canonical one even when boundary monomials are linearly dependent;
    ``kernel_dim`` records how much freedom was quotiented away.
    """

    n: int
    a: int
    entries: tuple[tuple[Tree, int, Fraction], ...]
    kernel_dim: int

    @cached_property
    def _lookup(self) -> dict[Tree, Fraction]:
        out = {}
        for rep, _, val in self.entries:
            for t in orbit(rep):
                out[t] = val
        return out

    def value(self, tree: Tree) -> Fraction:
        if tree.degree != self.a or tree.n != self.n:
            raise ValueError("tree does not match this coefficient table")
        return self._lookup[tree]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "a": self.a,
            "kernel_dim": self.kernel_dim,
            "orbits": [
                {"tree": str(rep), "size": size, "value": _fmt_coeff(val)}
                for rep, size, val in self.entries
            ],
        }


_ACOEFF_MEMO: dict[tuple[int, int], ACoefficients] = {}


def a_coefficients(n: int, a: int) -> ACoefficients:
    """Solve for the stratum expansion coefficients of kappa_a at n.

    The defining equations pair a symmetric degree-a boundary sum
    against every complementary monomial; the right-hand side is 1
    exactly when the monomial's tree has a vertex of valency a + 3.
    """
    if not 1 <= a <= n - 3:
        raise ValueError("need 1 <= a <= n - 3")
    got = _ACOEFF_MEMO.get((n, a))
    if got is not None:
        return got
    unknowns = orbit_reps(n, a)
    equations = orbit_reps(n, n - 3 - a)
    m_rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    for t, _ in equations:
        row = []
        for rep, _ in unknowns:
            s = Fraction(0)
            for sigma in orbit(rep):
                s += pair_kaufmann(sigma, t)
            row.append(s)
        m_rows.append(row)
        rhs.append(Fraction(int(any(v == a + 3 for v in t.valencies()))))
    rref = FractionRREF()
    for row in m_rows:
        rref.add({j: x for j, x in enumerate(row) if x})
    kernel_dim = len(unknowns) - rref.rank
    ne, nu = len(m_rows), len(unknowns)
    mmt = [
        [
            sum(m_rows[i][k] * m_rows[j][k] for k in range(nu))
            for j in range(ne)
        ]
        for i in range(ne)
    ]
    w = solve_fraction(mmt, rhs)
    y = [sum(m_rows[i][k] * w[i] for i in range(ne)) for k in range(nu)]
    for i in range(ne):
        if sum(m_rows[i][k] * y[k] for k in range(nu)) != rhs[i]:
            raise ArithmeticError("row-space solution failed verification")
    entries = tuple(
        (rep, size, y[k]) for k, (rep, size) in enumerate(unknowns)
    )
    got = ACoefficients(n=n, a=a, entries=entries, kernel_dim=kernel_dim)
    _ACOEFF_MEMO[(n, a)] = got
    return got


# ---------------------------------------------------------------------------
# the generalized volume recursion


_OMEGA_MEMO: dict[tuple[int, int], Fraction] = {}


def omega_recursion(n: int, a: int) -> Fraction:
    """Integral of the exponentiated kappa_a class via the recursion.

    Sums over degree-a boundary strata weighted by the kappa stratum
    coefficients, a multinomial in the slot counts (|v| - 3)/a, and the
    product of the smaller integrals at each vertex.  Defined when a
    divides n - 3; the a = 1 case reproduces the volume sequence.
    """
    if a < 1:
        raise ValueError("a must be positive")
    if n < 3:
        raise ValueError("need at least three labels")
    if (n - 3) % a:
        raise ValueError("the recursion needs a to divide n - 3")
    if n == 3:
        return Fraction(1)
    if n == a + 3:
        return z(a + 3)
    got = _OMEGA_MEMO.get((n, a))
    if got is not None:
        return got
    coeffs = a_coefficients(n, a)
    slots = (n - 3) // a
    tot = Fraction(0)
    for rep, size in orbit_reps(n, a):
        vals = rep.valencies()
        if any((v - 3) % a for v in vals):
            continue
        weight = Fraction(factorial(slots - 1))
        for v in vals:
            weight /= factorial((v - 3) // a)
        prod_part = Fraction(1)
        for v in vals:
            prod_part *= omega_recursion(v, a)
        tot += size * coeffs.value(rep) * weight * prod_part
    got = z(a + 3) * tot
    _OMEGA_MEMO[(n, a)] = got
    return got


# ---------------------------------------------------------------------------
# the product of two projective lines


def p1xp1_numbers(kmax: int) -> dict[tuple[int, int], Fraction]:
    """Counts of rational curves of bidegree (a, b) on the quadric.

    Seeded by the two rulings and grown by the quadratic recursion that
    the associativity constraints impose on the bidegree generating
    function.  Keys cover 1 <= a + b <= kmax.
    """
    out: dict[tuple[int, int], Fraction] = {
        (1, 0): Fraction(1),
        (0, 1): Fraction(1),
    }
    for total in range(2, kmax + 1):
        for alpha in range(total + 1):
            beta = total - alpha
            acc = Fraction(0)
            for a in range(alpha + 1):
                for b in range(beta + 1):
                    k1 = a + b
                    if k1 == 0 or k1 == total:
                        continue
                    ap, bp = alpha - a, beta - b
                    n1 = out.get((a, b))
                    n2 = out.get((ap, bp))
                    if not n1 or not n2:
                        continue
                    w = (a * a * bp * bp + a * b * ap * bp) * comb(
                        2 * total - 4, 2 * k1 - 2
                    ) - (a * a * b * bp + a * b * b * ap) * comb(
                        2 * total - 4, 2 * k1 - 1
                    )
                    if w:
                        acc += n1 * n2 * w
            out[(alpha, beta)] = acc
    return out


def p1xp1_potential(order: int = 8) -> Potential:
    """The quadric surface potential on the tensor-square flat basis.

    Flat index 0 is the unit, 3 is the point; 2 and 1 are the two ruling
    classes (first-factor hyperplane first).  Quantum terms carry the
    bidegree counts evaluated against ruling insertions.
    """
    met = tensor_metric(Metric.hyperbolic(), Metric.hyperbolic())
    coeffs: dict[tuple[int, ...], Fraction] = {
        (0, 0, 3): Fraction(1),
        (0, 1, 2): Fraction(1),
    }
    numbers = p1xp1_numbers((order + 1) // 2)
    for m in range(1, order + 1, 2):
        k = (m + 1) // 2
        for p in range(0, order - m + 1):
            for q in range(0, order - m - p + 1):
                if m + p + q < 3:
                    continue
                val = Fraction(0)
                for a in range(k + 1):
                    b = k - a
                    nv = numbers.get((a, b))
                    if nv:
                        val += nv * a**p * b**q
                if val:
                    coeffs[(1,) * q + (2,) * p + (3,) * m] = val
    return Potential.build(met, coeffs, order)


def extract_p1xp1_numbers(phi: Potential) -> dict[tuple[int, int], Fraction]:
    """Read bidegree counts back off a quadric-surface potential.

    For each total degree k, the coefficients of z^(2k-1) y1^p y2^q form
    a moment system in the numbers N(a, k - a); it is solved exactly and
    only reported for the k where the system pins the numbers down
    uniquely at this truncation order.
    """
    if phi.metric.rank != 4:
        raise ValueError("expected a potential on the rank-four flat basis")
    out: dict[tuple[int, int], Fraction] = {}
    k = 1
    while 2 * k - 1 + max(0, 3 - (2 * k - 1)) <= phi.order:
        m = 2 * k - 1
        pairs = [(a, k - a) for a in range(k + 1)]
        rows = []
        rhs = []
        for p in range(0, phi.order - m + 1):
            for q in range(0, phi.order - m - p + 1):
                if m + p + q < 3:
                    continue
                rows.append([Fraction(a**p * b**q) for a, b in pairs])
                rhs.append(phi.y((1,) * q + (2,) * p + (3,) * m))
        rref = FractionRREF()
        for row in rows:
            rref.add({j: x for j, x in enumerate(row) if x})
        if rref.rank < len(pairs):
            break
        sol = solve_fraction(rows, rhs)
        for (a, b), v in zip(pairs, sol):
            out[(a, b)] = v
        k += 1
    return out
