"""
Linear finite elements for the weighted Neumann problem on the unit disc

    iint grad f . grad g  =  lambda iint h f g        for all g,

with h = |phi'|^2. Stiffness A carries no boundary condition (natural
Neumann); the weighted mass M_h integrates h with the three-point edge-midpoint
rule, which reproduces the exact P1 mass matrix when h is constant.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from neumannlab.config import settings
from neumannlab.errors import ConvergenceFailure, DegenerateTriangle, NonpositiveWeight, ZeroDenominator
from neumannlab.fem.mesh import Mesh
from neumannlab.maps.conformal_maps import ConformalMap

logger = logging.getLogger(__name__)

MIN_TRIANGLE_AREA = 1e-14
ASCENT_TOL = 1e-10
ASCENT_BACKTRACKS = 30


def local_stiffness(p0: complex, p1: complex, p2: complex) -> np.ndarray:
    """P1 stiffness of one triangle (cotangent form), rows/cols in vertex order."""
    mesh = Mesh(
        vertices=np.array([p0, p1, p2], dtype=complex),
        triangles=np.array([[0, 1, 2]]),
        refinement=0,
        boundary_flags=np.zeros(3, dtype=bool),
    )
    return assemble_stiffness(mesh).toarray()


def _triangle_index_pattern(t: np.ndarray):
    t1, t2, t3 = t[:, 0], t[:, 1], t[:, 2]
    i = np.column_stack((t1, t2, t2, t3, t3, t1, t1, t2, t3)).reshape(-1)
    j = np.column_stack((t2, t1, t3, t2, t1, t3, t1, t2, t3)).reshape(-1)
    return i, j


def _symmetric(mat: sparse.spmatrix) -> sparse.csc_matrix:
    return (0.5 * (mat + mat.T)).tocsc()


def assemble_stiffness(mesh: Mesh) -> sparse.csc_matrix:
    t = mesh.triangles
    v = mesh.vertices
    v1, v2, v3 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    area = mesh.triangle_areas()
    if np.any(np.abs(area) < MIN_TRIANGLE_AREA):
        bad = int(np.sum(np.abs(area) < MIN_TRIANGLE_AREA))
        logger.error("Stiffness assembly hit %d degenerate triangles", bad)
        raise DegenerateTriangle(f"{bad} triangles with area < {MIN_TRIANGLE_AREA}")
    vol = 4.0 * np.abs(area)

    def dot(a, b):
        return a.real * b.real + a.imag * b.imag

    v2mv1 = v2 - v1
    v3mv2 = v3 - v2
    v1mv3 = v1 - v3
    a12 = dot(v3mv2, v1mv3) / vol
    a23 = dot(v1mv3, v2mv1) / vol
    a31 = dot(v2mv1, v3mv2) / vol
    # diagonals from zero row sums
    a11 = -a12 - a31
    a22 = -a12 - a23
    a33 = -a31 - a23
    local_a = np.column_stack((a12, a12, a23, a23, a31, a31, a11, a22, a33)).reshape(-1)
    i, j = _triangle_index_pattern(t)
    n = mesh.n_vertices
    return _symmetric(sparse.csc_matrix((local_a, (i, j)), shape=(n, n)))


def edge_midpoints(mesh: Mesh) -> np.ndarray:
    """(n_triangles, 3) midpoints of edges (0,1), (1,2), (2,0)."""
    p = mesh.vertices[mesh.triangles]
    return 0.5 * np.stack([p[:, 0] + p[:, 1], p[:, 1] + p[:, 2], p[:, 2] + p[:, 0]], axis=1)


def assemble_midpoint_mass(mesh: Mesh, hmid: np.ndarray) -> sparse.csc_matrix:
    """Mass matrix of the weight whose edge-midpoint values are hmid (n_triangles, 3)."""
    t = mesh.triangles
    c = np.abs(mesh.triangle_areas()) / 12.0
    h01, h12, h20 = hmid[:, 0], hmid[:, 1], hmid[:, 2]
    b12 = c * h01
    b23 = c * h12
    b31 = c * h20
    b11 = c * (h01 + h20)
    b22 = c * (h01 + h12)
    b33 = c * (h12 + h20)
    local_b = np.column_stack((b12, b12, b23, b23, b31, b31, b11, b22, b33)).reshape(-1)
    i, j = _triangle_index_pattern(t)
    n = mesh.n_vertices
    return _symmetric(sparse.csc_matrix((local_b, (i, j)), shape=(n, n)))


def weight_at_midpoints(mesh: Mesh, cmap: ConformalMap) -> np.ndarray:
    return np.asarray(cmap.weight(edge_midpoints(mesh)))


def assemble_weighted_mass(mesh: Mesh, cmap: ConformalMap) -> sparse.csc_matrix:
    hmid = weight_at_midpoints(mesh, cmap)
    if np.any(~(hmid > 0.0)):
        logger.error("Weight of %s is not positive at %d quadrature points", cmap.label, int(np.sum(~(hmid > 0.0))))
        raise NonpositiveWeight(f"h = |phi'|^2 of {cmap.label} vanishes on the mesh")
    return assemble_midpoint_mass(mesh, hmid)


@dataclass
class EigenSolution:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    weight_label: str
    mesh_refinement: int
    method: str = "dense"
    iterations: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "weight_label": self.weight_label,
            "refinement": self.mesh_refinement,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "method": self.method,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class SobolevEstimate:
    value: float
    q: float
    iterations: int
    method: str = "ascent lower bound"
    estimated: bool = True
    history: List[float] = field(default_factory=list, compare=False, repr=False)


class NeumannProblem:
    """Stiffness/weighted-mass pencil of one conformal weight on one mesh."""

    def __init__(self, mesh: Mesh, cmap: ConformalMap):
        self.mesh = mesh
        self.cmap = cmap
        self._solutions: Dict[int, EigenSolution] = {}

    @cached_property
    def stiffness(self) -> sparse.csc_matrix:
        return assemble_stiffness(self.mesh)

    @cached_property
    def hmid(self) -> np.ndarray:
        return weight_at_midpoints(self.mesh, self.cmap)

    @cached_property
    def mass(self) -> sparse.csc_matrix:
        return assemble_weighted_mass(self.mesh, self.cmap)

    @cached_property
    def mass_of_one(self) -> np.ndarray:
        return np.asarray(self.mass @ np.ones(self.mesh.n_vertices)).ravel()

    @property
    def dimension(self) -> int:
        return self.mesh.n_vertices

    # -- spectrum ---------------------------------------------------------
    def solve(self, k: int) -> EigenSolution:
        if k < 2:
            raise ValueError(f"k must be >= 2, got {k}")
        if k >= self.dimension - 1:
            raise ValueError(f"k={k} too large for dimension {self.dimension}")
        cached = next((s for kk, s in sorted(self._solutions.items()) if kk >= k), None)
        if cached is not None:
            return EigenSolution(cached.eigenvalues[:k], cached.eigenvectors[:, :k], cached.weight_label,
                                 cached.mesh_refinement, cached.method, cached.iterations)
        if self.dimension <= settings.dense_limit:
            sol = self._solve_dense(k)
        else:
            sol = self._solve_shift_invert(k)
        self._solutions[k] = sol
        logger.info("Solved %s at R=%d (%s): %s", self.cmap.label, self.mesh.refinement, sol.method,
                    np.array2string(sol.eigenvalues, precision=6))
        return sol

    def _solve_dense(self, k: int) -> EigenSolution:
        a = self.stiffness.toarray()
        m = self.mass.toarray()
        vals, vecs = scipy.linalg.eigh(a, m, subset_by_index=[0, k - 1])
        return EigenSolution(vals, _fix_signs(vecs), self.cmap.label, self.mesh.refinement, "dense")

    def _solve_shift_invert(self, k: int) -> EigenSolution:
        a, m = self.stiffness, self.mass
        sigma = settings.shift
        lu = splu((a - sigma * m).tocsc())
        op_inv = LinearOperator(matvec=lu.solve, shape=a.shape, dtype=a.dtype)
        v0 = np.random.default_rng(settings.seed).standard_normal(self.dimension)
        maxiter = 50 * self.dimension
        try:
            vals, vecs = eigsh(a, k, m, sigma=sigma, which="LM", OPinv=op_inv, v0=v0, maxiter=maxiter)
        except ArpackNoConvergence as e:
            logger.error("Shift-invert Lanczos failed for %s: %r", self.cmap.label, e)
            raise ConvergenceFailure(
                f"eigsh did not converge for {self.cmap.label}",
                {"converged": int(len(e.eigenvalues)), "requested": k, "maxiter": maxiter},
            ) from e
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        # M-orthonormalise inside clusters of repeated eigenvalues
        gram = vecs.T @ (m @ vecs)
        chol = np.linalg.cholesky(0.5 * (gram + gram.T))
        vecs = np.linalg.solve(chol, vecs.T).T
        return EigenSolution(vals, _fix_signs(vecs), self.cmap.label, self.mesh.refinement,
                             "shift-invert")

    # -- quotients --------------------------------------------------------
    def weighted_mean(self, f: np.ndarray) -> float:
        return float(self.mass_of_one @ f) / float(self.mass_of_one.sum())

    def centred(self, f: np.ndarray) -> np.ndarray:
        return f - self.weighted_mean(f)

    def rayleigh_quotient(self, f: np.ndarray, shifted: bool = False) -> float:
        f = np.asarray(f, dtype=float)
        g = self.centred(f) if shifted else f
        num = float(f @ (self.stiffness @ f))
        den = float(g @ (self.mass @ g))
        scale = float(f @ (self.mass @ f))
        if den <= 0.0 or den <= 1e-20 * scale:
            raise ZeroDenominator("Rayleigh quotient denominator vanishes")
        return num / den

    def subspace_sup_quotient(self, basis: np.ndarray, shifted: bool = False) -> float:
        """sup of the (shifted) Rayleigh quotient over span(basis)."""
        basis = np.asarray(basis, dtype=float)
        w = basis - (self.mass_of_one @ basis) / self.mass_of_one.sum() if shifted else basis
        s = basis.T @ (self.stiffness @ basis)
        t = w.T @ (self.mass @ w)
        vals = scipy.linalg.eigh(0.5 * (s + s.T), 0.5 * (t + t.T), eigvals_only=True)
        return float(vals[-1])

    def shifted_span_max(self, n: int) -> float:
        """
        Max of the shifted quotient over span{psi_1..psi_n}. Constants leave the
        shifted quotient unchanged, so the span of psi_2..psi_n is enough.
        """
        if n < 2:
            raise ValueError("shifted quotient needs n >= 2")
        sol = self.solve(max(n, 2))
        return self.subspace_sup_quotient(sol.eigenvectors[:, 1:n], shifted=True)

    # -- constants --------------------------------------------------------
    def poincare_constant(self) -> float:
        lam2 = float(self.solve(2).eigenvalues[1])
        return math.sqrt(1.0 / lam2)

    @cached_property
    def _grounded_lu(self):
        return splu(self.stiffness[1:, 1:].tocsc())

    def _stiffness_pinv(self, b: np.ndarray) -> np.ndarray:
        """A^+ b for b summing to zero, returned with zero weighted mean."""
        x = np.zeros_like(b)
        x[1:] = self._grounded_lu.solve(b[1:])
        return self.centred(x)

    def _midpoint_rule(self):
        t = self.mesh.triangles
        ea = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
        eb = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
        omega = (np.abs(self.mesh.triangle_areas())[:, None] / 3.0 * self.hmid).T.reshape(-1)
        return ea, eb, omega

    def lq_norm(self, f: np.ndarray, q: float) -> float:
        """||f||_{L^q(D,h)} with the edge-midpoint rule that also builds M_h."""
        ea, eb, omega = self._midpoint_rule()
        gm = 0.5 * (f[ea] + f[eb])
        return float(np.dot(omega, np.abs(gm) ** q)) ** (1.0 / q)

    def sobolev_constant(self, q: float, iters: int) -> SobolevEstimate:
        """
        Lower bound for C(q) = sup ||f - f_h||_{L^q(h)} / ||grad f||_{L^2}.

        Ascent runs on the A-unit sphere of mean-free functions: the search
        direction is the A-metric gradient A^+ P^T grad ||Pf||_q^q, a full step
        along it is tried first (for q = 2 that is inverse iteration) and halved
        until the ratio improves. Only improving steps are accepted.
        """
        if q < 2:
            raise ValueError(f"q must be >= 2, got {q}")
        if iters < 1:
            raise ValueError(f"iters must be >= 1, got {iters}")
        a = self.stiffness
        ea, eb, omega = self._midpoint_rule()
        n = self.dimension
        m1 = self.mass_of_one
        total = float(m1.sum())

        def a_normalise(f):
            return f / math.sqrt(float(f @ (a @ f)))

        def ratio(f):
            g = f - float(m1 @ f) / total
            gm = 0.5 * (g[ea] + g[eb])
            return float(np.dot(omega, np.abs(gm) ** q)) ** (1.0 / q) / math.sqrt(float(f @ (a @ f)))

        def ascent_direction(f):
            g = f - float(m1 @ f) / total
            gm = 0.5 * (g[ea] + g[eb])
            c = 0.5 * q * omega * np.abs(gm) ** (q - 2.0) * gm
            grad_g = np.bincount(ea, weights=c, minlength=n) + np.bincount(eb, weights=c, minlength=n)
            rhs = grad_g - m1 * (grad_g.sum() / total)
            return self._stiffness_pinv(rhs)

        f = a_normalise(self.centred(self.solve(2).eigenvectors[:, 1]))
        best = ratio(f)
        history = [best]
        steps = 0
        for steps in range(1, iters + 1):
            d = a_normalise(ascent_direction(f))
            candidate, cand_ratio = d, ratio(d)
            t = 1.0
            for _ in range(ASCENT_BACKTRACKS):
                if cand_ratio > best:
                    break
                t *= 0.5
                candidate = a_normalise(f + t * d)
                cand_ratio = ratio(candidate)
            if not cand_ratio > best:
                logger.debug("Sobolev ascent q=%g stalled after %d steps at %r", q, steps, best)
                break
            gain = (cand_ratio - best) / best
            f, best = candidate, cand_ratio
            history.append(best)
            if gain < ASCENT_TOL:
                break
        logger.info("C(%g) >= %r for %s after %d steps (estimated lower bound)", q, best, self.cmap.label, steps)
        return SobolevEstimate(value=best, q=float(q), iterations=steps, history=history)

    def check_weighted_poincare(self, n_samples: int = 20, seed: Optional[int] = None) -> float:
        """Largest ||f - f_h||_{L^2(h)} / (K* ||grad f||) over seeded random f; <= 1 expected."""
        rng = np.random.default_rng(settings.seed if seed is None else seed)
        k_star = self.poincare_constant()
        worst = 0.0
        for _ in range(n_samples):
            f = rng.standard_normal(self.dimension)
            g = self.centred(f)
            lhs = math.sqrt(float(g @ (self.mass @ g)))
            rhs = k_star * math.sqrt(float(f @ (self.stiffness @ f)))
            worst = max(worst, lhs / rhs)
        return worst


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


# Functional entry points with the signatures the harness uses.
def solve_neumann(mesh: Mesh, cmap: ConformalMap, k: int) -> EigenSolution:
    return NeumannProblem(mesh, cmap).solve(k)


def weighted_mean(mesh: Mesh, cmap: ConformalMap, f: np.ndarray) -> float:
    return NeumannProblem(mesh, cmap).weighted_mean(f)


def rayleigh_quotient(mesh: Mesh, cmap: ConformalMap, f: np.ndarray, shifted: bool = False) -> float:
    return NeumannProblem(mesh, cmap).rayleigh_quotient(f, shifted=shifted)


def estimate_poincare_constant(mesh: Mesh, cmap: ConformalMap) -> float:
    return NeumannProblem(mesh, cmap).poincare_constant()


def estimate_sobolev_constant(mesh: Mesh, cmap: ConformalMap, q: float, iters: int) -> SobolevEstimate:
    return NeumannProblem(mesh, cmap).sobolev_constant(q, iters)
