import math

import numpy as np
import pytest

from neumannlab.errors import DegeneratePair, InvalidCurve, InvalidK
from neumannlab.geometry import quasidisc as qd


def test_admissible_exponent_for_k2():
    exp = qd.admissible_exponent(2.0)

    assert exp.sup_p == pytest.approx(8 / 3)
    assert exp.chosen_p == pytest.approx(7 / 3)
    assert 2 < exp.chosen_p < exp.sup_p


def test_admissible_exponent_for_the_disc():
    assert qd.admissible_exponent(1.0) == qd.AdmissibleExponent(math.inf, math.inf)


@pytest.mark.parametrize("K", [1.01, 1.5, 3.0, 10.0])
def test_chosen_exponent_stays_in_range(K):
    exp = qd.admissible_exponent(K)

    assert 2 < exp.chosen_p < exp.sup_p


def test_invalid_k():
    with pytest.raises(InvalidK):
        qd.admissible_exponent(0.5)
    with pytest.raises(InvalidK):
        qd.smirnov_dim_bound(0.99)
    with pytest.raises(InvalidK):
        qd.M_constant_formula(1.0, lambda q: 1.0)


def test_smirnov_dimension_bound():
    assert qd.smirnov_dim_bound(1.0) == 1.0
    assert qd.smirnov_dim_bound(3.0) == pytest.approx(1.25)
    assert qd.smirnov_dim_bound(1e9) < 2.0


def test_m_constant_squares_the_estimated_sobolev_constant():
    seen = []

    def estimator(q):
        seen.append(q)
        return 0.5

    m = qd.M_constant_formula(2.0, estimator)

    assert seen == [28.0]
    assert m == qd.MConstant(q=28.0, C=0.5, M=0.25)
    assert m.estimated is True


def _all_pairs_ahlfors(curve, samples):
    pts = curve.at_arclength(curve.length * np.arange(samples) / samples)
    dist = np.abs(pts[:, None] - pts[None, :])
    best = 1.0
    for i in range(samples):
        for j in range(i + 1, samples):
            arcs = []
            if 2 * (j - i) <= samples:
                arcs.append(np.arange(i, j + 1))
            if 2 * (j - i) >= samples:
                arcs.append(np.arange(j, i + samples + 1) % samples)
            for arc in arcs:
                best = max(best, dist[np.ix_(arc, arc)].max() / dist[i, j])
    return best


def test_circle_and_ellipse_ahlfors_constants():
    assert qd.ahlfors_constant(qd.circle_curve(256)) == pytest.approx(1.0, abs=1e-9)
    # worst pair: the equal-arc chord through +-(0.49 - 0.97i)
    assert qd.ahlfors_constant(qd.ellipse_curve(256, 2.0, 1.0)) == pytest.approx(1.25, rel=1e-3)


@pytest.mark.parametrize(
    "curve",
    [qd.ellipse_curve(256, 2.0, 1.0), qd.koch_snowflake(3)],
    ids=["ellipse", "koch"],
)
def test_sweep_matches_enumeration_of_all_pairs(curve):
    assert qd.ahlfors_constant(curve, 128) == pytest.approx(_all_pairs_ahlfors(curve, 128), rel=1e-12)


def test_skipped_pairs_are_counted(monkeypatch):
    monkeypatch.setattr(qd, "PAIR_TOL", 0.5)

    est = qd.ahlfors_check(qd.circle_curve(64), samples=32)

    # chords of one and two steps are 0.196 and 0.390
    assert est.skipped_pairs == 64
    assert est.samples == 32
    assert est.value == pytest.approx(1.0, abs=1e-9)


def test_koch_snowflake_is_less_round_than_the_ellipse():
    koch = qd.koch_snowflake(3)
    ellipse = qd.ahlfors_constant(qd.ellipse_curve(256, 2.0, 1.0))

    assert koch.points.size == 3 * 4 ** 3
    assert qd.ahlfors_constant(koch, samples=384) > ellipse


def test_ahlfors_constant_is_scale_and_rotation_invariant():
    base = qd.ellipse_curve(128, 1.5, 1.0)
    moved = qd.PolylineCurve(3.0 * np.exp(0.7j) * base.points + (2 - 1j))

    assert qd.ahlfors_constant(moved, 128) == pytest.approx(qd.ahlfors_constant(base, 128), rel=1e-9)


def test_ahlfors_constant_needs_enough_samples():
    with pytest.raises(ValueError):
        qd.ahlfors_constant(qd.circle_curve(), samples=16)


def test_degenerate_pairs_raise(monkeypatch):
    curve = qd.circle_curve(64)
    monkeypatch.setattr(qd, "PAIR_TOL", 10.0)

    with pytest.raises(DegeneratePair):
        qd.ahlfors_constant(curve, samples=32)


def test_closing_point_is_dropped():
    octagon = np.exp(2j * np.pi * np.arange(8) / 8)
    pts = np.append(octagon, octagon[0])

    curve = qd.PolylineCurve(pts)

    assert curve.points.size == 8
    assert curve.length == pytest.approx(16 * math.sin(math.pi / 8))


def test_at_arclength_walks_the_polyline():
    square = qd.PolylineCurve(np.array([0, 1, 2, 2 + 1j, 2 + 2j, 1 + 2j, 2j, 1j]))

    assert square.length == pytest.approx(8.0)
    assert np.allclose(square.at_arclength(np.array([0.0, 0.5, 2.5, 8.0, 9.0])), [0, 0.5, 2 + 0.5j, 0, 1])


@pytest.mark.parametrize(
    "points",
    [
        np.exp(2j * np.pi * np.arange(5) / 5),
        np.array([0, 1, 1, 2, 2 + 1j, 2 + 2j, 1 + 2j, 2j, 1j]),
        np.array([0, 1, 2, 2 + 1j, 2 + 2j, np.nan, 2j, 1j]),
        # figure of eight
        np.array([0, 1, 2, 2 + 1j, 1 - 1j, 0.5 - 1j, 0.2j, -0.5j]),
    ],
    ids=["too-few", "repeated", "non-finite", "self-intersecting"],
)
def test_invalid_curves(points):
    with pytest.raises(InvalidCurve):
        qd.PolylineCurve(points)


def test_fixtures_are_valid_jordan_polylines():
    for curve in (qd.circle_curve(), qd.ellipse_curve(), qd.koch_snowflake(2)):
        assert curve.length > 0


def test_read_curve(tmp_path):
    path = tmp_path / "square.txt"
    lines = ["# unit square, counterclockwise"]
    for z in (0, 1, 2, 2 + 1j, 2 + 2j, 1 + 2j, 2j, 1j):
        lines.append(f"{z.real} {z.imag}  # vertex")
    path.write_text("\n".join(lines) + "\n\n", encoding="utf-8")

    curve = qd.read_curve(path)

    assert curve.points.size == 8
    assert curve.length == pytest.approx(8.0)


def test_read_curve_reports_bad_lines(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 0\n1 0 7\n", encoding="utf-8")

    with pytest.raises(InvalidCurve, match=":2:"):
        qd.read_curve(path)


@pytest.mark.parametrize("curve", [qd.circle_curve(256), qd.ellipse_curve(256, 2.0, 1.0)], ids=["circle", "ellipse"])
def test_doubling_the_samples_barely_moves_the_estimate(curve):
    coarse = qd.ahlfors_constant(curve, 256)
    fine = qd.ahlfors_constant(curve, 512)

    assert fine == pytest.approx(coarse, rel=1e-2)
    assert min(coarse, fine) >= 1 - 1e-9
