"""
Integral functionals of one or two conformal maps, all pulled back to the unit
disc and evaluated on one shared QuadratureRule so that inequalities between
them see identical discretisation error.
"""
from __future__ import annotations
import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from neumannlab.errors import InvalidExponent, NonFinite
from neumannlab.functionals.quadrature import QuadratureRule
from neumannlab.maps.conformal_maps import ConformalMap

logger = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class ExponentBridge:
    s: float
    q: float


@dataclass(frozen=True)
class PairFunctionals:
    alpha: float
    s: float
    p: float
    lp_norm_1: float
    lp_norm_2: float
    e_alpha: float
    d_s: float
    l2_gap: float
    measure_variation: float
    area_1: float
    area_2: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def _abs_derivs(map1: ConformalMap, map2: ConformalMap, rule: QuadratureRule) -> Tuple[np.ndarray, np.ndarray]:
    return np.abs(map1.deriv(rule.z)), np.abs(map2.deriv(rule.z))


def _checked(value: float, what: str) -> float:
    if not math.isfinite(value):
        logger.error("Functional %s is not finite: %r", what, value)
        raise NonFinite(f"{what} evaluated to {value!r}")
    return value


def lp_norm_deriv(cmap: ConformalMap, alpha: float, rule: QuadratureRule) -> float:
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    d = np.abs(cmap.deriv(rule.z))
    return _checked(rule.integrate(d ** alpha) ** (1.0 / alpha), "lp_norm_deriv")


def e_alpha(map1: ConformalMap, map2: ConformalMap, alpha: float, rule: QuadratureRule) -> float:
    """(iint max{|phi1'|^a / |phi2'|^(a-2), |phi2'|^a / |phi1'|^(a-2)})^(1/a)."""
    if alpha <= 2:
        raise ValueError(f"E_alpha needs alpha > 2, got {alpha}")
    d1, d2 = _abs_derivs(map1, map2, rule)
    hi = np.maximum(d1, d2)
    lo = np.minimum(d1, d2)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        integrand = hi ** alpha / lo ** (alpha - 2)
    if not np.all(np.isfinite(integrand)):
        logger.error("E_alpha integrand overflowed for %s vs %s", map1.label, map2.label)
        raise NonFinite(f"E_alpha integrand degenerate for {map1.label} vs {map2.label}")
    return _checked(rule.integrate(integrand) ** (1.0 / alpha), "e_alpha")


def d_s(map1: ConformalMap, map2: ConformalMap, s: float, rule: QuadratureRule) -> float:
    """(iint |h1-h2|^s min{h1,h2}^(1-s))^(1/s); absolute value as in the norm form."""
    if not 1.0 < s <= 2.0:
        raise ValueError(f"d_s needs 1 < s <= 2, got {s}")
    h1 = map1.weight(rule.z)
    h2 = map2.weight(rule.z)
    diff = np.abs(h1 - h2)
    low = np.minimum(h1, h2)
    bad = (low < DEGENERATE_TOL) & (diff > DEGENERATE_TOL)
    if np.any(bad):
        logger.error("d_s: min weight vanishes at %d nodes with h1 != h2", int(bad.sum()))
        raise NonFinite(f"d_s undefined: min(h1, h2) vanishes at {int(bad.sum())} nodes")
    integrand = np.zeros_like(diff)
    live = diff > 0.0
    integrand[live] = diff[live] ** s * low[live] ** (1.0 - s)
    return _checked(rule.integrate(integrand) ** (1.0 / s), "d_s")


def l2_deriv_gap(map1: ConformalMap, map2: ConformalMap, rule: QuadratureRule) -> float:
    d1, d2 = _abs_derivs(map1, map2, rule)
    return math.sqrt(rule.integrate((d1 - d2) ** 2))


def measure_variation_parts(map1: ConformalMap, map2: ConformalMap, rule: QuadratureRule) -> Tuple[float, float]:
    """
    Returns (|phi1(D+)| - |phi2(D+)|, |phi2(D-)| - |phi1(D-)|) where
    D+ = {J1 >= J2} and D- = {J1 < J2}; image areas come from integrating the
    Jacobians over the pre-image sets.
    """
    j1 = map1.weight(rule.z)
    j2 = map2.weight(rule.z)
    plus = j1 >= j2
    w = rule.w
    gain = float(np.dot(w[plus], j1[plus] - j2[plus]))
    loss = float(np.dot(w[~plus], j2[~plus] - j1[~plus]))
    return gain, loss


def measure_variation(map1: ConformalMap, map2: ConformalMap, rule: QuadratureRule) -> float:
    gain, loss = measure_variation_parts(map1, map2, rule)
    return gain + loss


def pair_regularity(map1: ConformalMap, map2: ConformalMap, alpha: float, rule: QuadratureRule) -> Tuple[float, float]:
    """
    (iint |phi2'|^a |phi1'|^(2-a), iint |phi1'|^a |phi2'|^(2-a)): the
    L^a-norms^a of the transition map psi = phi2 o phi1^-1 and of its inverse,
    written in disc coordinates.
    """
    if alpha <= 2:
        raise ValueError(f"pair regularity needs alpha > 2, got {alpha}")
    d1, d2 = _abs_derivs(map1, map2, rule)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        forward = rule.integrate(d2 ** alpha * d1 ** (2.0 - alpha))
        backward = rule.integrate(d1 ** alpha * d2 ** (2.0 - alpha))
    return _checked(forward, "pair_regularity"), _checked(backward, "pair_regularity")


def domain_area(cmap: ConformalMap, rule: QuadratureRule) -> float:
    return rule.integrate(cmap.weight(rule.z))


def exponent_bridge(p: float) -> ExponentBridge:
    """s = 2p/(p+2) and q = 2s/(s-1) = 4p/(p-2); p = inf gives (2, 4)."""
    if not p > 2:
        raise InvalidExponent(f"exponent p must exceed 2, got {p!r}")
    if math.isinf(p):
        return ExponentBridge(s=2.0, q=4.0)
    return ExponentBridge(s=2.0 * p / (p + 2.0), q=4.0 * p / (p - 2.0))


def pair_functionals(map1: ConformalMap, map2: ConformalMap, alpha: float, rule: QuadratureRule,
                     p: Optional[float] = None) -> PairFunctionals:
    """Every functional for one pair; p defaults to alpha and fixes s = 2p/(p+2)."""
    p = alpha if p is None else p
    bridge = exponent_bridge(p)
    result = PairFunctionals(
        alpha=float(alpha),
        s=bridge.s,
        p=float(p),
        lp_norm_1=lp_norm_deriv(map1, alpha, rule),
        lp_norm_2=lp_norm_deriv(map2, alpha, rule),
        e_alpha=e_alpha(map1, map2, alpha, rule),
        d_s=d_s(map1, map2, bridge.s, rule),
        l2_gap=l2_deriv_gap(map1, map2, rule),
        measure_variation=measure_variation(map1, map2, rule),
        area_1=domain_area(map1, rule),
        area_2=domain_area(map2, rule),
    )
    logger.debug("Functionals %s vs %s: %r", map1.label, map2.label, result)
    return result
