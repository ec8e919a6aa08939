"""Closed-form fixtures behind `neumannlab selftest`. Kept small enough to run in seconds."""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from neumannlab.errors import NeumannLabError
from neumannlab.fem.fd_oracle import disc_reference_eigenvalues
from neumannlab.fem.mesh import mesh_unit_disc
from neumannlab.fem.neumann_fem import NeumannProblem, local_stiffness
from neumannlab.functionals import disc_functionals as df
from neumannlab.functionals.quadrature import build_rule
from neumannlab.geometry.quasidisc import admissible_exponent, ahlfors_constant, circle_curve, smirnov_dim_bound
from neumannlab.maps import conformal_maps as cm
from neumannlab.stability.bounds import lemma31_bound, verify_lemma_two_weights

logger = logging.getLogger(__name__)

SELFTEST_REFINEMENT = 24


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    expected: float
    rtol: float

    @property
    def passed(self) -> bool:
        return math.isclose(self.value, self.expected, rel_tol=self.rtol, abs_tol=self.rtol)

    def line(self) -> str:
        status = "ok" if self.passed else "FAIL"
        return f"{status} {self.name} value={self.value!r} expected={self.expected!r} rtol={self.rtol:g}"


def _maps() -> List[Tuple[str, float, float, float]]:
    p = cm.poly_perturb(0.4, 2)
    return [
        ("eval poly_perturb(0.4,2) at 1", abs(p.eval(1.0)), 1.2, 1e-14),
        ("weight poly_perturb(0.4,2) at 0.5", p.weight(0.5), 1.44, 1e-14),
        ("deriv moebius(0.3) at 0", abs(cm.moebius(0.3).deriv(0.0)), 0.91, 1e-14),
        ("winding of identity", cm.check_univalent(cm.identity()).boundary_winding, 1, 0.0),
    ]


def _functionals() -> List[Tuple[str, float, float, float]]:
    rule = build_rule(8)
    r16 = build_rule(16)
    one, half = cm.identity(), cm.scale(0.5)
    bridge = df.exponent_bridge(4.0)
    return [
        ("quadrature sum of weights", float(rule.w.sum()), math.pi, 1e-12),
        ("quadrature x^2", rule.integrate(rule.z.real ** 2), math.pi / 4, 1e-10),
        ("exponent_bridge(4).s", bridge.s, 4.0 / 3.0, 1e-15),
        ("exponent_bridge(4).q", bridge.q, 8.0, 1e-15),
        ("d_s identity|scale:0.5 s=4/3", df.d_s(one, half, bridge.s, r16), 0.75 * 0.25 ** -0.25 * math.pi ** 0.75, 1e-8),
        ("e_alpha identity|scale:0.5 a=4", df.e_alpha(one, half, 4.0, r16), math.sqrt(2.0) * math.pi ** 0.25, 1e-8),
        ("l2_gap identity|scale:0.5", df.l2_deriv_gap(one, half, r16), math.sqrt(math.pi) / 2, 1e-8),
        ("measure_variation identity|scale:0.5", df.measure_variation(one, half, r16), 0.75 * math.pi, 1e-8),
        ("area moebius(0.4)", df.domain_area(cm.moebius(0.4), r16), math.pi, 1e-8),
    ]


def _fem() -> List[Tuple[str, float, float, float]]:
    local = local_stiffness(0j, 1 + 0j, 1j)
    expected = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    mesh = mesh_unit_disc(SELFTEST_REFINEMENT)
    one = NeumannProblem(mesh, cm.identity()).solve(6)
    half = NeumannProblem(mesh, cm.scale(0.5)).solve(6)
    ref = disc_reference_eigenvalues(6)
    out = [
        ("mesh R=1 vertices", mesh_unit_disc(1).n_vertices, 7, 0.0),
        ("mesh R=2 vertices", mesh_unit_disc(2).n_vertices, 19, 0.0),
        ("reference triangle stiffness", float(np.max(np.abs(local - expected))), 0.0, 1e-12),
        ("lambda_1 identity", float(one.eigenvalues[0]), 0.0, 1e-8),
    ]
    for n in range(2, 7):
        out.append((f"lambda_{n} identity vs Bessel", float(one.eigenvalues[n - 1]), ref[n - 1], 3e-2))
        out.append((f"lambda_{n} scale:0.5 times c^2", float(half.eigenvalues[n - 1]) * 0.25,
                    float(one.eigenvalues[n - 1]), 1e-10))
    report = verify_lemma_two_weights(mesh_unit_disc(8), cm.identity(), cm.scale(0.9), 6)
    out.append(("two-weight lemma identity|scale:0.9", float(report.passed), 1.0, 0.0))
    return out


def _bounds_and_geometry() -> List[Tuple[str, float, float, float]]:
    exp = admissible_exponent(math.sqrt(2.0))
    return [
        ("lemma31_bound(B=1, c=4)", lemma31_bound(1.0, 4.0)[0], 4.0 / 3.0, 1e-15),
        ("admissible_exponent(sqrt 2).sup_p", exp.sup_p, 4.0, 1e-12),
        ("admissible_exponent(sqrt 2).chosen_p", exp.chosen_p, 3.0, 1e-12),
        ("smirnov_dim_bound(3)", smirnov_dim_bound(3.0), 1.25, 1e-15),
        ("ahlfors circle 256", ahlfors_constant(circle_curve(256)), 1.0, 1e-3),
    ]


GROUPS: List[Tuple[str, Callable[[], List[Tuple[str, float, float, float]]]]] = [
    ("conformal_maps", _maps),
    ("disc_functionals", _functionals),
    ("neumann_fem", _fem),
    ("stability/quasidisc", _bounds_and_geometry),
]


def run_selftest() -> List[Check]:
    checks: List[Check] = []
    for group, build in GROUPS:
        try:
            rows = build()
        except NeumannLabError as e:
            logger.error("Selftest group %s raised %r", group, e)
            checks.append(Check(f"{group}: {type(e).__name__}", math.nan, 0.0, 0.0))
            continue
        checks.extend(Check(name, float(value), float(expected), rtol) for name, value, expected, rtol in rows)
    logger.info("Selftest: %d/%d checks passed", sum(c.passed for c in checks), len(checks))
    return checks
