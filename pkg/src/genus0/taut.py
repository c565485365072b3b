"""Tautological classes: psi and kappa in divisor coordinates.

The cotangent-line class at a marked point expands into boundary
divisors with weights depending only on the side sizes.  Kappa classes
arrive by raising the psi class at an extra marked point to a power and
pushing forward along the map that forgets it.  Both feed the splitting
check and the omega integrals used by the recursion layer.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .intersect import integrate
from .keelring import (
    RingElement,
    mul,
    pullback_to_divisor,
    tensor_of_factors,
)
from .keelring import DivisorGeometry
from .trees import Split, Tree, enumerate_stable_trees, forget_and_stabilize


@dataclass(frozen=True)
class TautClass:
    """A named tautological element of the divisor ring."""

    n: int
    kind: str
    element: RingElement

    def to_dict(self) -> dict:
        d = self.element.to_dict()
        d["kind"] = self.kind
        return d

    def pow(self, k: int) -> RingElement:
        out = RingElement.unit(self.n)
        for _ in range(k):
            out = mul(out, self.element)
        return out


_PSI: dict = {}
_KAPPA: dict = {}


def psi(n: int, i: int) -> TautClass:
    """The cotangent-line class at label i, as a sum of divisors.

    Every split whose i-side has size s contributes the weight
    (n-s)(n-s-1) / ((n-1)(n-2)).  On three labels there is nothing to
    bound and the class is zero.
    """
    if n < 3:
        raise ValueError("need at least three labels")
    if not 1 <= i <= n:
        raise ValueError(f"label {i} out of range for n={n}")
    key = (n, i)
    hit = _PSI.get(key)
    if hit is not None:
        return hit
    terms: dict[Tree, Fraction] = {}
    if n >= 4:
        bit = 1 << (i - 1)
        denom = (n - 1) * (n - 2)
        for tree in enumerate_stable_trees(n, 1):
            side = tree.parts[0]
            size = side.bit_count() if side & bit else n - side.bit_count()
            w = Fraction((n - size) * (n - size - 1), denom)
            if w:
                terms[tree] = w
    out = TautClass(n, f"psi({i})", RingElement(n, terms))
    _PSI[key] = out
    return out


_PSI_PARTIAL: dict = {}


def _psi_prefix(n: int, exps: tuple[int, ...]) -> RingElement:
    # Partial products psi_1^{e_1} ... psi_k^{e_k} share prefixes across
    # the whole exponent lattice, so build them by peeling the last
    # nonzero exponent and memoizing every stage.
    hit = _PSI_PARTIAL.get((n, exps))
    if hit is not None:
        return hit
    last = max((idx for idx, e in enumerate(exps) if e), default=None)
    if last is None:
        out = RingElement.unit(n)
    else:
        prev = exps[:last] + (exps[last] - 1,) + exps[last + 1 :]
        out = mul(_psi_prefix(n, prev), psi(n, last + 1).element)
    _PSI_PARTIAL[(n, exps)] = out
    return out


def psi_monomial(n: int, exponents: Sequence[int]) -> Fraction:
    """Integral of a product of psi powers, one exponent per label."""
    exps = tuple(exponents)
    if len(exps) != n:
        raise ValueError("need one exponent per label")
    if any(e < 0 for e in exps):
        raise ValueError("exponents must be nonnegative")
    return integrate(_psi_prefix(n, exps))


def pushforward_forget(x: RingElement, label: int | None = None) -> RingElement:
    """Push a class down along the map forgetting one label.

    A good monomial survives exactly when stabilizing contracts one
    edge; its image is the stabilized monomial.  With no contraction
    the stratum maps with positive-dimensional fibers and dies.
    """
    if label is None:
        label = x.n
    out: dict[Tree, Fraction] = {}
    for tree, coeff in x.terms.items():
        smaller, contracted = forget_and_stabilize(tree, label)
        if contracted != 1:
            continue
        now = out.get(smaller, 0) + coeff
        if now:
            out[smaller] = now
        else:
            out.pop(smaller, None)
    return RingElement(x.n - 1, out)


def kappa(n: int, a: int) -> TautClass:
    """The degree-a kappa class on n labels.

    Computed as the forgetful pushforward of the (a+1)-st power of the
    psi class at the extra label.  Vanishes above the dimension; a = 0
    gives n-2 times the unit.
    """
    if n < 3:
        raise ValueError("need at least three labels")
    if a < 0:
        raise ValueError("negative degree")
    key = (n, a)
    hit = _KAPPA.get(key)
    if hit is not None:
        return hit
    if a > n - 3:
        element = RingElement(n, {})
    else:
        element = pushforward_forget(psi(n + 1, n + 1).pow(a + 1))
    out = TautClass(n, f"kappa({a})", element)
    _KAPPA[key] = out
    return out


@dataclass(frozen=True)
class LogReport:
    """Outcome of auditing the splitting identity for one family."""

    nmax: int
    checked: int
    failures: tuple

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "nmax": self.nmax,
            "checked": self.checked,
            "passed": self.passed,
            "failures": [
                {"n": n, "divisor": s} for n, s in self.failures
            ],
        }


def check_logarithmic(family: Callable[[int], RingElement], nmax: int) -> LogReport:
    """Audit the divisor-splitting identity for a family of classes.

    For every boundary divisor the pullback of the ambient class must
    equal the factor class on one side plus the factor class on the
    other, each taken with the node as an extra label.  Families that
    obey this are exactly the logarithmic ones; the report lists every
    divisor where the identity breaks.
    """

    def element_of(n: int) -> RingElement:
        got = family(n)
        if isinstance(got, TautClass):
            return got.element
        return got

    checked = 0
    failures = []
    for n in range(4, nmax + 1):
        big = element_of(n)
        for tree in enumerate_stable_trees(n, 1):
            sigma = Split(n, tree.parts[0])
            geom = DivisorGeometry(sigma)
            lhs = pullback_to_divisor(sigma, big)
            rhs = tensor_of_factors(
                element_of(geom.n1), RingElement.unit(geom.n2)
            ) + tensor_of_factors(RingElement.unit(geom.n1), element_of(geom.n2))
            checked += 1
            if not (lhs - rhs).is_zero_class():
                failures.append((n, str(sigma)))
    return LogReport(nmax, checked, tuple(failures))


def z(n: int) -> Fraction:
    """Integral of the top-degree kappa class (1 on three labels)."""
    if n < 3:
        raise ValueError("need at least three labels")
    if n == 3:
        return Fraction(1)
    return integrate(kappa(n, n - 3).element)


def omega_direct(n: int, a: int) -> Fraction:
    """Integral of the (n-3)/a power of kappa(n, a); zero off-stride."""
    if n < 3:
        raise ValueError("need at least three labels")
    if a < 1:
        raise ValueError("positive degree required")
    if (n - 3) % a:
        return Fraction(0)
    return integrate(kappa(n, a).pow((n - 3) // a))
