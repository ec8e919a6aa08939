"""
Conformal maps of the unit disc of the form  phi = P o m  where

    m(z) = (z - a) / (1 - conj(a) z)        (disc automorphism, identity for a = 0)
    P(w) = c0 + c1 w + ... + cm w^m          (polynomial part, applied after m)

so that phi(z) = P(m(z)) and phi'(z) = P'(m(z)) * m'(z) with
m'(z) = (1 - |a|^2) / (1 - conj(a) z)^2. The conformal weight of a map is
h(z) = |phi'(z)|^2, the Jacobian of phi.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

from neumannlab.errors import UnivalenceSuspect

logger = logging.getLogger(__name__)

ComplexLike = Union[complex, float, np.ndarray]

WINDING_RADIUS = 1.0 - 1e-6
WINDING_SAMPLES = 4096
MIN_ABS_DERIV = 1e-12


@dataclass(frozen=True)
class ConformalMap:
    moebius_param: complex = 0j
    poly_coeffs: Tuple[complex, ...] = (0j, 1 + 0j)
    label: str = "identity"

    def __post_init__(self):
        if not abs(self.moebius_param) < 1.0:
            raise ValueError(f"moebius_param must satisfy |a| < 1, got {self.moebius_param!r}")
        if len(self.poly_coeffs) < 2:
            raise ValueError("poly_coeffs needs at least c0 and c1")
        coeffs = tuple(complex(c) for c in self.poly_coeffs)
        if not all(np.isfinite(c.real) and np.isfinite(c.imag) for c in coeffs):
            raise ValueError("poly_coeffs must be finite")
        object.__setattr__(self, "poly_coeffs", coeffs)
        object.__setattr__(self, "moebius_param", complex(self.moebius_param))

    @property
    def degree(self) -> int:
        return len(self.poly_coeffs) - 1

    def _moebius(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        a = self.moebius_param
        denom = 1.0 - np.conj(a) * z
        return (z - a) / denom, (1.0 - abs(a) ** 2) / denom ** 2

    def _poly(self, w: np.ndarray) -> np.ndarray:
        return P.polyval(w, np.asarray(self.poly_coeffs))

    def _poly_deriv(self, w: np.ndarray) -> np.ndarray:
        return P.polyval(w, P.polyder(np.asarray(self.poly_coeffs)))

    def eval(self, z: ComplexLike) -> ComplexLike:
        w, _ = self._moebius(np.asarray(z, dtype=complex))
        out = self._poly(w)
        return out if np.ndim(out) else complex(out)

    def deriv(self, z: ComplexLike) -> ComplexLike:
        w, dm = self._moebius(np.asarray(z, dtype=complex))
        out = self._poly_deriv(w) * dm
        return out if np.ndim(out) else complex(out)

    def weight(self, z: ComplexLike) -> Union[float, np.ndarray]:
        d = np.asarray(self.deriv(z))
        h = np.abs(d) ** 2
        return h if np.ndim(h) else float(h)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "moebius_param": [self.moebius_param.real, self.moebius_param.imag],
            "poly_coeffs": [[c.real, c.imag] for c in self.poly_coeffs],
        }


def identity() -> ConformalMap:
    return ConformalMap(label="identity")


def scale(c: complex) -> ConformalMap:
    if c == 0:
        raise ValueError("scale factor must be nonzero")
    return ConformalMap(poly_coeffs=(0j, complex(c)), label=f"scale:{_fmt(c)}")


def moebius(a: complex) -> ConformalMap:
    return ConformalMap(moebius_param=complex(a), label=f"moebius:{_fmt(a)}")


def poly_perturb(eps: float, k: int) -> ConformalMap:
    """z + (eps/k) z^k; Re phi' >= 1 - eps > 0 keeps it univalent."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"poly_perturb needs 0 <= eps < 1, got {eps!r}")
    if int(k) != k or k < 2:
        raise ValueError(f"poly_perturb needs an integer k >= 2, got {k!r}")
    k = int(k)
    coeffs = [0j] * (k + 1)
    coeffs[1] = 1 + 0j
    coeffs[k] = complex(eps / k)
    return ConformalMap(poly_coeffs=tuple(coeffs), label=f"poly_perturb:{_fmt(eps)},{k}")


def _fmt(x: complex) -> str:
    x = complex(x)
    if x.imag == 0:
        return repr(x.real)
    return f"{x.real!r},{x.imag!r}"


# Module-level operations mirror the methods so callers can stay functional.
def eval(cmap: ConformalMap, z: ComplexLike) -> ComplexLike:  # noqa: A001
    return cmap.eval(z)


def deriv(cmap: ConformalMap, z: ComplexLike) -> ComplexLike:
    return cmap.deriv(z)


def weight(cmap: ConformalMap, z: ComplexLike) -> Union[float, np.ndarray]:
    return cmap.weight(z)


@dataclass(frozen=True)
class UnivalenceReport:
    min_abs_deriv: float
    re_deriv_positive: bool
    boundary_winding: int
    grid_n: int = field(default=0)


def check_univalent(cmap: ConformalMap, grid_n: int = 32) -> UnivalenceReport:
    """
    Samples phi' on a polar grid of grid_n radii (centre and rim included)
    times grid_n angles, and counts how often phi(|z| = 1 - 1e-6) winds around
    phi(0). Re phi' > 0 is the Noshiro-Warschawski sufficient condition.
    """
    if grid_n < 16:
        raise ValueError(f"grid_n must be >= 16, got {grid_n}")
    radii = np.linspace(0.0, 1.0, grid_n)
    angles = 2.0 * np.pi * np.arange(grid_n) / grid_n
    z = (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()
    d = np.asarray(cmap.deriv(z))
    min_abs = float(np.min(np.abs(d)))
    re_pos = bool(np.all(d.real > 0.0))

    theta = 2.0 * np.pi * np.arange(WINDING_SAMPLES) / WINDING_SAMPLES
    rim = np.asarray(cmap.eval(WINDING_RADIUS * np.exp(1j * theta)))
    centre = cmap.eval(0.0)
    rel = rim - centre
    turns = np.angle(np.roll(rel, -1) / rel)
    winding = int(np.rint(turns.sum() / (2.0 * np.pi)))

    report = UnivalenceReport(min_abs, re_pos, winding, grid_n)
    logger.debug("Univalence check for %s: %r", cmap.label, report)
    if min_abs <= MIN_ABS_DERIV or winding != 1:
        logger.error("Map %s failed the univalence check: %r", cmap.label, report)
        raise UnivalenceSuspect(
            f"{cmap.label}: min|phi'|={min_abs!r}, winding={winding} (need > {MIN_ABS_DERIV} and 1)"
        )
    return report


def boundary_image(cmap: ConformalMap, n_angles: int = 512) -> Tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * np.pi * np.arange(n_angles) / n_angles
    return theta, np.asarray(cmap.eval(np.exp(1j * theta)))


def from_coefficients(coeffs: Sequence[Sequence[float]], moebius_param: Sequence[float] = (0.0, 0.0),
                      label: str = "custom") -> ConformalMap:
    """Builds a map from [re, im] pairs, the form used in experiment configs."""
    poly = tuple(complex(re, im) for re, im in coeffs)
    a = complex(moebius_param[0], moebius_param[1])
    return ConformalMap(moebius_param=a, poly_coeffs=poly, label=label)
