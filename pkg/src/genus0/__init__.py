"""Exact intersection calculus on moduli of stable rational n-pointed curves."""

from .cohft import (
    Metric,
    Potential,
    RankOneTheory,
    a_coefficients,
    identity_potential,
    matone_check,
    omega_recursion,
    p1_potential,
    reconstruct_classes,
    strata_integrals,
    tensor_potential,
    wdvv_check,
    wp_volumes,
)
from .intersect import integrate, pair_kaufmann, pair_oracle, pairing_matrix
from .keelring import (
    RingElement,
    betti,
    equal_mod_relations,
    is_zero_class,
    keel_relation,
    mul,
)
from .taut import check_logarithmic, kappa, omega_direct, psi, psi_monomial
from .trees import Split, Tree, enumerate_stable_trees, stable_splits

__version__ = "0.1.0"

__all__ = [
    "Metric",
    "Potential",
    "RankOneTheory",
    "RingElement",
    "Split",
    "Tree",
    "a_coefficients",
    "betti",
    "check_logarithmic",
    "enumerate_stable_trees",
    "equal_mod_relations",
    "identity_potential",
    "integrate",
    "is_zero_class",
    "kappa",
    "keel_relation",
    "matone_check",
    "mul",
    "omega_direct",
    "omega_recursion",
    "p1_potential",
    "pair_kaufmann",
    "pair_oracle",
    "pairing_matrix",
    "psi",
    "psi_monomial",
    "reconstruct_classes",
    "stable_splits",
    "strata_integrals",
    "tensor_potential",
    "wdvv_check",
    "wp_volumes",
]
