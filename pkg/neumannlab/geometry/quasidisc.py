"""
Exponents and constants for K-quasidiscs, and a sampled proxy for the Ahlfors
three-point condition on closed polylines.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from neumannlab.errors import DegeneratePair, InvalidCurve, InvalidK

logger = logging.getLogger(__name__)

MIN_POINTS = 8
MIN_SAMPLES = 32
PAIR_TOL = 1e-12


@dataclass(frozen=True)
class AdmissibleExponent:
    sup_p: float
    chosen_p: float


@dataclass(frozen=True)
class MConstant:
    q: float
    C: float
    M: float
    estimated: bool = True


def admissible_exponent(K: float) -> AdmissibleExponent:
    """
    phi' of a K-quasidisc lies in L^p for p < 2K^2/(K^2-1); the working choice
    is p = (2K^2-1)/(K^2-1), strictly between 2 and that supremum. K = 1 (a
    disc) gives inf for both.
    """
    if K < 1:
        raise InvalidK(f"K must be >= 1, got {K!r}")
    if K == 1:
        return AdmissibleExponent(math.inf, math.inf)
    k2 = K * K
    return AdmissibleExponent(sup_p=2.0 * k2 / (k2 - 1.0), chosen_p=(2.0 * k2 - 1.0) / (k2 - 1.0))


def smirnov_dim_bound(K: float) -> float:
    """1 + k^2 with k = (K-1)/(K+1): Hausdorff dimension bound of a K-quasicircle."""
    if K < 1:
        raise InvalidK(f"K must be >= 1, got {K!r}")
    k = (K - 1.0) / (K + 1.0)
    return 1.0 + k * k


def M_constant_formula(K: float, C_estimator: Callable[[float], float]) -> MConstant:
    """M = C(4(2K^2-1))^2 with C supplied by an estimator (so M is estimated)."""
    if not K > 1:
        raise InvalidK(f"M needs K > 1, got {K!r}")
    q = 4.0 * (2.0 * K * K - 1.0)
    C = float(C_estimator(q))
    return MConstant(q=q, C=C, M=C * C)


@dataclass(eq=False)
class PolylineCurve:
    """Closed Jordan polyline, stored open (the closing segment is implied)."""
    points: np.ndarray
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        if pts.size >= 2 and pts[0] == pts[-1]:
            pts = pts[:-1]
        if pts.size < MIN_POINTS:
            raise InvalidCurve(f"need at least {MIN_POINTS} points, got {pts.size}")
        if not np.all(np.isfinite(pts)):
            raise InvalidCurve("curve points must be finite")
        self.points = pts
        seg = np.abs(np.roll(pts, -1) - pts)
        if np.any(seg == 0):
            raise InvalidCurve("curve has repeated consecutive points")
        self.cumulative = np.concatenate([[0.0], np.cumsum(seg)])
        if _has_self_intersection(pts):
            raise InvalidCurve("curve intersects itself")

    @property
    def length(self) -> float:
        return float(self.cumulative[-1])

    def at_arclength(self, s: np.ndarray) -> np.ndarray:
        s = np.mod(s, self.length)
        seg = np.clip(np.searchsorted(self.cumulative, s, side="right") - 1, 0, self.points.size - 1)
        start = self.points[seg]
        end = np.roll(self.points, -1)[seg]
        frac = (s - self.cumulative[seg]) / (self.cumulative[seg + 1] - self.cumulative[seg])
        return start + frac * (end - start)


def _cross(u, v):
    return u.real * v.imag - u.imag * v.real


def _on_segment(start, vec, x, tol: float):
    lo_re, hi_re = np.minimum(start.real, (start + vec).real), np.maximum(start.real, (start + vec).real)
    lo_im, hi_im = np.minimum(start.imag, (start + vec).imag), np.maximum(start.imag, (start + vec).imag)
    return (x.real >= lo_re - tol) & (x.real <= hi_re + tol) & (x.imag >= lo_im - tol) & (x.imag <= hi_im + tol)


def _has_self_intersection(pts: np.ndarray) -> bool:
    n = pts.size
    a = pts
    b = np.roll(pts, -1)
    extent = float(np.max(np.abs(pts - pts.mean())))
    tol = 1e-12 * extent
    area_tol = tol * extent

    for i in range(n):
        # segments sharing a vertex with segment i are adjacent
        j = np.arange(i + 2, n)
        if i == 0:
            j = j[j != n - 1]
        if j.size == 0:
            continue
        p, r = a[i], b[i] - a[i]
        q, s = a[j], b[j] - a[j]
        d1 = _cross(r, q - p)
        d2 = _cross(r, q + s - p)
        d3 = _cross(s, p - q)
        d4 = _cross(s, p + r - q)
        z1, z2, z3, z4 = (np.abs(d) <= area_tol for d in (d1, d2, d3, d4))
        proper = (d1 * d2 < 0) & (d3 * d4 < 0) & ~(z1 | z2 | z3 | z4)
        touching = ((z1 & _on_segment(p, r, q, tol)) | (z2 & _on_segment(p, r, q + s, tol))
                    | (z3 & _on_segment(q, s, p, tol)) | (z4 & _on_segment(q, s, p + r, tol)))
        if np.any(proper | touching):
            return True
    return False


@dataclass(frozen=True)
class AhlforsEstimate:
    value: float
    samples: int
    skipped_pairs: int


def ahlfors_check(curve: PolylineCurve, samples: int = 256) -> AhlforsEstimate:
    """
    max over sampled pairs (a, b) of diam(smaller arc) / |a - b|.

    Points are taken at equal arc-length spacing starting from the first
    vertex; the smaller arc is the shorter one in arc length and its diameter is
    the largest distance between sampled points on it (endpoints included).
    Pairs closer than 1e-12 are skipped and counted.
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"samples must be >= {MIN_SAMPLES}, got {samples}")
    pts = curve.at_arclength(curve.length * np.arange(samples) / samples)
    half = samples // 2
    best = 1.0
    skipped = 0
    for i in range(samples):
        arc = pts[(i + np.arange(half + 1)) % samples]
        dist = np.abs(arc[:, None] - arc[None, :])
        # diameter of arc[0..j] for every j
        diam = np.maximum.accumulate(np.max(np.triu(dist), axis=0))
        chord = dist[0, 1:]
        diam = diam[1:]
        ok = chord >= PAIR_TOL
        skipped += int(np.sum(~ok))
        if np.any(ok):
            best = max(best, float(np.max(diam[ok] / chord[ok])))
    if skipped:
        logger.warning("Ahlfors check skipped %d near-coincident pairs", skipped)
    if skipped == samples * half:
        raise DegeneratePair("every sampled pair is degenerate")
    return AhlforsEstimate(value=best, samples=int(samples), skipped_pairs=skipped)


def ahlfors_constant(curve: PolylineCurve, samples: int = 256) -> float:
    return ahlfors_check(curve, samples).value


def circle_curve(n: int = 256, radius: float = 1.0) -> PolylineCurve:
    t = 2.0 * np.pi * np.arange(n) / n
    return PolylineCurve(radius * np.exp(1j * t))


def ellipse_curve(n: int = 256, a: float = 2.0, b: float = 1.0) -> PolylineCurve:
    t = 2.0 * np.pi * np.arange(n) / n
    return PolylineCurve(a * np.cos(t) + 1j * b * np.sin(t))


def koch_snowflake(level: int = 3) -> PolylineCurve:
    pts = np.exp(2j * np.pi * np.arange(3) / 3) * 1j
    for _ in range(level):
        nxt = []
        for p, q in zip(pts, np.roll(pts, -1)):
            d = q - p
            # counterclockwise curve: outward is to the right of d
            peak = p + d / 2 + (-1j * d) * math.sqrt(3) / 6
            nxt.extend([p, p + d / 3, peak, p + 2 * d / 3])
        pts = np.asarray(nxt)
    return PolylineCurve(pts)


def read_curve(path: Union[str, Path]) -> PolylineCurve:
    """Plain-text point list, one 'x y' pair per line; '#' starts a comment."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidCurve(f"{path}:{lineno}: expected 'x y', got {line!r}")
        rows.append(complex(float(parts[0]), float(parts[1])))
    return PolylineCurve(np.asarray(rows))
