"""
Experiment runner: for every configured map pair solve both spectra, evaluate
the pair functionals, estimate the Sobolev constants and assemble one BoundSet
per eigenvalue index, plus the discrete two-weight lemma check.
"""
from __future__ import annotations
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple

import numpy as np

from neumannlab.config import settings
from neumannlab.errors import NeumannLabError, ValidationError
from neumannlab.fem.mesh import Mesh, mesh_unit_disc
from neumannlab.fem.neumann_fem import NeumannProblem
from neumannlab.functionals.disc_functionals import (
    exponent_bridge,
    measure_variation_parts,
    pair_functionals,
    pair_regularity,
)
from neumannlab.functionals.quadrature import QuadratureRule, build_rule
from neumannlab.geometry.quasidisc import M_constant_formula, admissible_exponent, smirnov_dim_bound
from neumannlab.maps.conformal_maps import ConformalMap, check_univalent
from neumannlab.stability.bounds import bound_B, bound_set, verify_lemma_two_weights

if TYPE_CHECKING:
    from neumannlab.harness.experiment_config import ExperimentConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CONSTANT_CONVENTION = "C(4*alpha/(alpha-2))"
# quadrature vs mesh discretisation slack when comparing Hoelder B to the discrete B
LEMMA32_SLACK = 1e-2


def pair_label(map1: ConformalMap, map2: ConformalMap) -> str:
    return f"{map1.label}|{map2.label}"


@dataclass
class PairReport:
    pair: str
    map_1: Dict[str, Any]
    map_2: Dict[str, Any]
    status: str = "pass"
    univalence: List[Dict[str, Any]] = field(default_factory=list)
    functionals: Optional[Dict[str, float]] = None
    pair_regularity: Optional[List[float]] = None
    measure_parts: Optional[List[float]] = None
    spectrum_1: Optional[Dict[str, Any]] = None
    spectrum_2: Optional[Dict[str, Any]] = None
    constants: Optional[Dict[str, Any]] = None
    bounds: List[Dict[str, Any]] = field(default_factory=list)
    lemma: Optional[Dict[str, Any]] = None
    lemma32: Optional[Dict[str, Any]] = None
    quasidisc: Optional[Dict[str, Any]] = None
    warnings: List[str] = field(default_factory=list)
    errors: List[Dict[str, str]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PairReport":
        return cls(**data)


@dataclass(eq=False)
class PlotData:
    """Mesh and eigenvectors of one pair, kept in memory for the plot-data files."""
    mesh: Mesh
    map_1: ConformalMap
    map_2: ConformalMap
    vectors_1: np.ndarray
    vectors_2: np.ndarray


@dataclass
class StabilityReport:
    config: Dict[str, Any]
    provenance: Dict[str, Any]
    pairs: List[PairReport] = field(default_factory=list)
    quasidisc: Optional[Dict[str, Any]] = None
    schema_version: int = SCHEMA_VERSION
    # wall-clock seconds per pair and stage; kept out of to_dict so reports stay reproducible
    timings: Dict[str, Dict[str, float]] = field(default_factory=dict, compare=False)
    plot_data: Dict[str, PlotData] = field(default_factory=dict, compare=False, repr=False)

    @property
    def warning_count(self) -> int:
        return sum(len(p.warnings) for p in self.pairs)

    @property
    def failed(self) -> bool:
        return any(p.status == "fail" for p in self.pairs)

    @property
    def errored(self) -> bool:
        return any(p.status == "error" for p in self.pairs)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "provenance": self.provenance,
            "quasidisc": self.quasidisc,
            "pairs": [p.to_dict() for p in self.pairs],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StabilityReport":
        return cls(
            config=data["config"],
            provenance=data["provenance"],
            pairs=[PairReport.from_dict(p) for p in data.get("pairs", [])],
            quasidisc=data.get("quasidisc"),
            schema_version=int(data.get("schema_version", SCHEMA_VERSION)),
        )


@contextmanager
def _timed(timings: Dict[str, float], stage: str):
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[stage] = time.perf_counter() - start


def _sobolev_estimates(problems: Tuple[NeumannProblem, NeumannProblem], q: float, iters: int):
    return [p.sobolev_constant(q, iters) for p in problems]


def run_pair(map1: ConformalMap, map2: ConformalMap, mesh: Mesh, rule: QuadratureRule, alpha: float,
             k: int, iters: int, K: Optional[float] = None,
             keep_vectors: bool = False) -> Tuple[PairReport, Dict[str, float], Optional[PlotData]]:
    """One map pair end to end. Named failures are recorded on the report, never raised."""
    report = PairReport(pair=pair_label(map1, map2), map_1=map1.to_dict(), map_2=map2.to_dict())
    timings: Dict[str, float] = {}
    plot = None
    logger.info("Running pair %s (alpha=%r, R=%d, k=%d)", report.pair, alpha, mesh.refinement, k)
    try:
        with _timed(timings, "univalence"):
            report.univalence = [asdict(check_univalent(m)) for m in (map1, map2)]

        with _timed(timings, "functionals"):
            pair = pair_functionals(map1, map2, alpha, rule)
            report.functionals = pair.to_dict()
            report.pair_regularity = list(pair_regularity(map1, map2, alpha, rule))
            report.measure_parts = list(measure_variation_parts(map1, map2, rule))

        problems = (NeumannProblem(mesh, map1), NeumannProblem(mesh, map2))
        with _timed(timings, "eigensolve"):
            spec1, spec2 = (p.solve(k) for p in problems)
        report.spectrum_1, report.spectrum_2 = spec1.to_dict(), spec2.to_dict()
        if keep_vectors:
            plot = PlotData(mesh, map1, map2, spec1.eigenvectors, spec2.eigenvectors)

        q = exponent_bridge(alpha).q
        with _timed(timings, "constants"):
            estimates = _sobolev_estimates(problems, q, iters)
            k_star = [p.poincare_constant() for p in problems]
        Cq = max(e.value for e in estimates)
        report.constants = {
            "q": q,
            "C_1": estimates[0].value,
            "C_2": estimates[1].value,
            "Cq": Cq,
            "iterations": [e.iterations for e in estimates],
            "method": estimates[0].method,
            "estimated": True,
            "convention": CONSTANT_CONVENTION,
            "poincare_1": k_star[0],
            "poincare_2": k_star[1],
        }

        rows = [bound_set(n, spec1, spec2, pair, Cq) for n in range(1, k + 1)]
        report.bounds = [r.to_dict() for r in rows]
        for r in rows:
            for name, ok in (("theorem_bound", r.theorem_pass), ("measure_bound", r.measure_pass),
                             ("lemma31_bound", r.lemma31_pass)):
                if not ok:
                    msg = f"{name} below observed gap at n={r.n} under estimated constants"
                    logger.warning("%s: %s", report.pair, msg)
                    report.warnings.append(msg)

        with _timed(timings, "lemma"):
            lemma = verify_lemma_two_weights(mesh, map1, map2, k, problems=problems, raise_on_violation=False)
        report.lemma = lemma.to_dict()

        b_holder = bound_B(pair, Cq)
        consistent = b_holder >= lemma.B * (1.0 - LEMMA32_SLACK)
        report.lemma32 = {"B_holder": b_holder, "B_discrete": lemma.B, "consistent": consistent}
        if not consistent:
            msg = f"Hoelder B={b_holder!r} below discrete B={lemma.B!r} under estimated constants"
            logger.warning("%s: %s", report.pair, msg)
            report.warnings.append(msg)

        if K is not None and K > 1:
            m = M_constant_formula(K, lambda qq: max(e.value for e in _sobolev_estimates(problems, qq, iters)))
            report.quasidisc = asdict(m)

        if not lemma.passed:
            report.status = "fail"
        elif report.warnings:
            report.status = "warn"
    except NeumannLabError as e:
        logger.error("Pair %s failed: %r", report.pair, e)
        report.errors.append({"type": type(e).__name__, "message": str(e)})
        report.status = "error"
    return report, timings, plot


def resolve_alpha(config: "ExperimentConfig") -> Tuple[float, Optional[Dict[str, Any]]]:
    """alpha from the config, or the chosen exponent of K when K is set."""
    if config.K is None:
        return float(config.alpha), None
    exp = admissible_exponent(config.K)
    meta = {
        "K": float(config.K),
        "sup_p": exp.sup_p,
        "chosen_p": exp.chosen_p,
        "smirnov_dim_bound": smirnov_dim_bound(config.K),
    }
    if config.K > 1:
        meta["q"] = 4.0 * (2.0 * config.K ** 2 - 1.0)
        return exp.chosen_p, meta
    # a disc admits every exponent; fall back to the configured alpha
    return float(config.alpha), meta


def run_experiment(config: "ExperimentConfig") -> StabilityReport:
    alpha, quasidisc = resolve_alpha(config)
    mesh = mesh_unit_disc(config.refinement)
    if config.k >= mesh.n_vertices - 1:
        raise ValidationError("k", f"k < {mesh.n_vertices - 1} for refinement {mesh.refinement}")
    rule = build_rule(config.quadrature_level)
    report = StabilityReport(
        config=config.to_dict(),
        provenance={
            "refinement": mesh.refinement,
            "mesh_vertices": mesh.n_vertices,
            "mesh_triangles": mesh.n_triangles,
            "quadrature_level": rule.level,
            "quadrature_nodes": len(rule),
            "alpha_used": alpha,
            "dense_limit": settings.dense_limit,
            "shift": settings.shift,
            "seed": settings.seed,
            "lemma_rtol": settings.lemma_rtol,
            "solver": "dense" if mesh.n_vertices <= settings.dense_limit else "shift-invert",
        },
        quasidisc=quasidisc,
    )

    def job(maps):
        return run_pair(maps[0], maps[1], mesh, rule, alpha, config.k, config.sobolev_ascent_iters, config.K,
                        keep_vectors=config.emit_plot_data)

    workers = max(1, int(settings.workers))
    if workers > 1 and len(config.map_pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, config.map_pairs))
    else:
        results = [job(maps) for maps in config.map_pairs]

    for i, (pair_report, timings, plot) in enumerate(results):
        key = f"{i}:{pair_report.pair}"
        report.pairs.append(pair_report)
        report.timings[key] = timings
        if plot is not None:
            report.plot_data[key] = plot
    logger.info("Experiment finished: %d pairs, %d warnings, failed=%s", len(report.pairs),
                report.warning_count, report.failed)
    return report
