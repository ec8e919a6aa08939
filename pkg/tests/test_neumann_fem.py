import math

import numpy as np
import pytest
from scipy.sparse.linalg import ArpackNoConvergence

from neumannlab.config import settings
from neumannlab.errors import ConvergenceFailure, DegenerateTriangle, NonpositiveWeight, ZeroDenominator
from neumannlab.fem import neumann_fem as nf
from neumannlab.fem.fd_oracle import disc_reference_eigenvalues
from neumannlab.fem.mesh import mesh_unit_disc
from neumannlab.maps import conformal_maps as cm


@pytest.fixture(scope="module")
def mesh8():
    return mesh_unit_disc(8)


@pytest.fixture(scope="module")
def mesh16():
    return mesh_unit_disc(16)


def test_reference_triangle_stiffness():
    local = nf.local_stiffness(0j, 1 + 0j, 1j)

    expected = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    assert np.allclose(local, expected, atol=1e-14)


def test_collinear_triangle_is_rejected():
    with pytest.raises(DegenerateTriangle):
        nf.local_stiffness(0j, 1 + 0j, 2 + 0j)


def test_stiffness_is_symmetric_with_zero_row_sums(mesh8):
    a = nf.assemble_stiffness(mesh8)
    dense = a.toarray()

    assert np.allclose(dense, dense.T, atol=1e-14)
    assert np.max(np.abs(dense.sum(axis=1))) < 1e-12
    eigs = np.linalg.eigvalsh(dense)
    assert eigs[0] > -1e-10
    assert eigs[1] > 1e-3


def test_mass_of_constant_weight_matches_exact_p1_mass(mesh8):
    m = nf.assemble_weighted_mass(mesh8, cm.identity()).toarray()
    area = np.abs(mesh8.triangle_areas())

    assert np.allclose(m, m.T, atol=1e-15)
    assert np.all(np.linalg.eigvalsh(m) > 0)
    assert m.sum() == pytest.approx(area.sum(), rel=1e-12)
    # the centre vertex touches the six ring-1 triangles only
    assert m[0, 0] == pytest.approx(area[0], rel=1e-12)
    assert m[0, 1] == pytest.approx(2 * area[0] / 12, rel=1e-12)


def test_mass_scales_with_the_weight(mesh8):
    one = nf.assemble_weighted_mass(mesh8, cm.identity()).toarray()
    half = nf.assemble_weighted_mass(mesh8, cm.scale(0.5)).toarray()

    assert np.allclose(half, 0.25 * one, rtol=1e-13, atol=0)


def test_vanishing_weight_is_rejected():
    mesh = mesh_unit_disc(2)
    critical = cm.from_coefficients([[0, 0], [1, 0], [-2, 0]], label="critical")

    with pytest.raises(NonpositiveWeight):
        nf.assemble_weighted_mass(mesh, critical)


def test_solution_invariants(mesh8):
    prob = nf.NeumannProblem(mesh8, cm.poly_perturb(0.3, 3))
    sol = prob.solve(6)
    vals, vecs = sol.eigenvalues, sol.eigenvectors
    a, m = prob.stiffness, prob.mass

    assert sol.method == "dense"
    assert abs(vals[0]) < 1e-8
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.allclose(vecs.T @ (m @ vecs), np.eye(6), atol=1e-9)
    residual = a @ vecs - (m @ vecs) * vals
    assert np.max(np.abs(residual)) < 1e-8
    assert np.ptp(vecs[:, 0]) < 1e-8


def test_solve_rejects_bad_k(mesh8):
    prob = nf.NeumannProblem(mesh8, cm.identity())

    with pytest.raises(ValueError):
        prob.solve(1)
    with pytest.raises(ValueError):
        prob.solve(mesh8.n_vertices)


def test_smaller_requests_reuse_the_cached_solution(mesh8):
    prob = nf.NeumannProblem(mesh8, cm.identity())
    full = prob.solve(6)
    part = prob.solve(3)

    assert np.array_equal(part.eigenvalues, full.eigenvalues[:3])
    assert part.eigenvectors.shape == (mesh8.n_vertices, 3)


def test_disc_spectrum_matches_bessel_reference(mesh16):
    vals = nf.solve_neumann(mesh16, cm.identity(), 6).eigenvalues
    ref = disc_reference_eigenvalues(6)

    assert abs(vals[0]) < 1e-8
    for got, want in zip(vals[1:], ref[1:]):
        assert got == pytest.approx(want, rel=0.03)
    # P1 elements approximate from above
    assert vals[1] >= ref[1]


def test_moebius_weight_keeps_the_disc_spectrum(mesh16):
    vals = nf.solve_neumann(mesh16, cm.moebius(0.3), 5).eigenvalues
    ref = disc_reference_eigenvalues(5)

    for got, want in zip(vals[1:], ref[1:]):
        assert got == pytest.approx(want, rel=0.04)


def test_scaling_divides_eigenvalues_by_the_squared_modulus(mesh8):
    base = nf.solve_neumann(mesh8, cm.identity(), 5).eigenvalues
    scaled = nf.solve_neumann(mesh8, cm.scale(0.5), 5).eigenvalues

    assert np.allclose(scaled[1:], 4.0 * base[1:], rtol=1e-10, atol=0)


def test_weighted_mean(mesh8):
    prob = nf.NeumannProblem(mesh8, cm.moebius(0.2))

    assert prob.weighted_mean(np.full(mesh8.n_vertices, 5.0)) == pytest.approx(5.0, rel=1e-14)
    assert nf.weighted_mean(mesh8, cm.identity(), mesh8.vertices.real) == pytest.approx(0.0, abs=1e-13)
    # h > 1 towards a = 0.2 pulls the mean of x to the right
    assert prob.weighted_mean(mesh8.vertices.real) > 0


def test_rayleigh_quotient_of_eigenvectors(mesh8):
    prob = nf.NeumannProblem(mesh8, cm.poly_perturb(0.2, 2))
    sol = prob.solve(4)

    for n in range(1, 4):
        assert prob.rayleigh_quotient(sol.eigenvectors[:, n]) == pytest.approx(sol.eigenvalues[n], rel=1e-9)
        assert prob.rayleigh_quotient(sol.eigenvectors[:, n], shifted=True) == pytest.approx(
            sol.eigenvalues[n], rel=1e-8
        )


def test_shifted_quotient_of_a_constant_has_no_denominator(mesh8):
    ones = np.ones(mesh8.n_vertices)

    assert nf.rayleigh_quotient(mesh8, cm.identity(), ones) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ZeroDenominator):
        nf.rayleigh_quotient(mesh8, cm.identity(), ones, shifted=True)


def test_random_functions_respect_min_max(mesh8):
    prob = nf.NeumannProblem(mesh8, cm.moebius(0.25 - 0.1j))
    lam = prob.solve(2).eigenvalues
    rng = np.random.default_rng(3)

    for _ in range(10):
        f = rng.standard_normal(mesh8.n_vertices)
        assert prob.rayleigh_quotient(f) >= lam[0] - 1e-10
        assert prob.rayleigh_quotient(f, shifted=True) >= lam[1] * (1 - 1e-10)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_random_subspaces_never_beat_lambda_n(mesh8, n):
    prob = nf.NeumannProblem(mesh8, cm.moebius(0.3 + 0.2j))
    lam_n = prob.solve(6).eigenvalues[n - 1]
    rng = np.random.default_rng(100 + n)

    for _ in range(20):
        basis = rng.standard_normal((mesh8.n_vertices, n))
        assert prob.subspace_sup_quotient(basis) >= lam_n - 1e-8


def test_eigenvector_span_attains_lambda_n(mesh8):
    prob = nf.NeumannProblem(mesh8, cm.moebius(0.3 + 0.2j))
    sol = prob.solve(5)

    for n in range(1, 6):
        assert prob.subspace_sup_quotient(sol.eigenvectors[:, :n]) == pytest.approx(
            sol.eigenvalues[n - 1], rel=1e-8, abs=1e-10
        )


def test_shifted_span_max_recovers_lambda_n(mesh8):
    prob = nf.NeumannProblem(mesh8, cm.poly_perturb(0.3, 3))
    vals = prob.solve(6).eigenvalues

    for n in range(2, 7):
        assert prob.shifted_span_max(n) == pytest.approx(vals[n - 1], rel=1e-8)
    with pytest.raises(ValueError):
        prob.shifted_span_max(1)


def test_poincare_constant(mesh8):
    prob = nf.NeumannProblem(mesh8, cm.scale(0.9))
    lam2 = prob.solve(2).eigenvalues[1]

    assert prob.poincare_constant() == pytest.approx(1 / math.sqrt(lam2), rel=1e-12)
    assert nf.estimate_poincare_constant(mesh8, cm.scale(0.9)) == pytest.approx(1 / math.sqrt(lam2), rel=1e-12)
    assert prob.check_weighted_poincare(n_samples=15, seed=5) <= 1 + 1e-10


@pytest.mark.parametrize("cmap", [cm.identity(), cm.moebius(0.4)], ids=lambda c: c.label)
def test_sobolev_constant_at_q2_is_the_poincare_constant(mesh8, cmap):
    prob = nf.NeumannProblem(mesh8, cmap)
    est = prob.sobolev_constant(2.0, 20)

    assert est.value == pytest.approx(prob.poincare_constant(), rel=1e-4)
    assert est.estimated is True
    assert est.method == "ascent lower bound"


def test_sobolev_constant_at_q8_dominates_holder(mesh8):
    cmap = cm.poly_perturb(0.2, 2)
    prob = nf.NeumannProblem(mesh8, cmap)
    est = nf.estimate_sobolev_constant(mesh8, cmap, 8.0, 30)
    area = float(prob.mass_of_one.sum())

    assert est.value >= prob.poincare_constant() * area ** (1 / 8 - 1 / 2) * (1 - 1e-9)
    assert np.all(np.diff(est.history) > 0)
    assert est.iterations <= 30


def test_lq_norm_at_two_uses_the_mass_matrix(mesh8):
    prob = nf.NeumannProblem(mesh8, cm.moebius(0.3j))
    f = np.random.default_rng(9).standard_normal(mesh8.n_vertices)

    assert prob.lq_norm(f, 2.0) == pytest.approx(math.sqrt(float(f @ (prob.mass @ f))), rel=1e-12)


def test_sobolev_constant_rejects_bad_arguments(mesh8):
    prob = nf.NeumannProblem(mesh8, cm.identity())

    with pytest.raises(ValueError):
        prob.sobolev_constant(1.5, 10)
    with pytest.raises(ValueError):
        prob.sobolev_constant(4.0, 0)


def test_shift_invert_path_agrees_with_dense(monkeypatch, mesh8):
    cmap = cm.poly_perturb(0.3, 2)
    dense = nf.NeumannProblem(mesh8, cmap).solve(6)
    monkeypatch.setattr(settings, "dense_limit", 10)

    sparse_sol = nf.NeumannProblem(mesh8, cmap).solve(6)

    assert sparse_sol.method == "shift-invert"
    assert np.allclose(sparse_sol.eigenvalues, dense.eigenvalues, rtol=1e-8, atol=1e-9)
    m = nf.assemble_weighted_mass(mesh8, cmap)
    vecs = sparse_sol.eigenvectors
    assert np.allclose(vecs.T @ (m @ vecs), np.eye(6), atol=1e-8)


def test_lanczos_failure_becomes_convergence_failure(monkeypatch, mesh8):
    def fake_eigsh(*args, **kwargs):
        raise ArpackNoConvergence("no luck", np.array([0.0]), np.zeros((mesh8.n_vertices, 1)))

    monkeypatch.setattr(settings, "dense_limit", 10)
    monkeypatch.setattr(nf, "eigsh", fake_eigsh)

    with pytest.raises(ConvergenceFailure) as exc:
        nf.NeumannProblem(mesh8, cm.identity()).solve(4)

    assert exc.value.diagnostics["converged"] == 1
    assert exc.value.diagnostics["requested"] == 4


def test_eigen_solution_to_dict(mesh8):
    d = nf.solve_neumann(mesh8, cm.identity(), 3).to_dict()

    assert d["weight_label"] == "identity"
    assert d["refinement"] == 8
    assert d["method"] == "dense"
    assert len(d["eigenvalues"]) == 3


def test_sobolev_constant_at_q2_scales_with_the_map(mesh8):
    base = nf.estimate_sobolev_constant(mesh8, cm.identity(), 2.0, 10).value
    scaled = nf.estimate_sobolev_constant(mesh8, cm.scale(0.5), 2.0, 10).value

    assert scaled == pytest.approx(0.5 * base, rel=1e-4)
