"""
Independent references for the disc spectrum: a polar finite-difference
discretisation and the Bessel closed form.
"""
from __future__ import annotations
import logging
from typing import List

import numpy as np
import scipy.linalg
from scipy.special import jnp_zeros

from neumannlab.maps.conformal_maps import ConformalMap

logger = logging.getLogger(__name__)

MAX_GRID = 80


def disc_reference_eigenvalues(k: int) -> List[float]:
    """
    First k Neumann eigenvalues of the unit disc: 0, then (j'_{m,s})^2 where
    j'_{m,s} is the s-th positive zero of J_m', doubled for m >= 1.
    """
    per_order = k // 2 + 2
    values = []
    for m in range(k + 1):
        zeros = jnp_zeros(m, per_order)
        mult = 1 if m == 0 else 2
        for z in zeros:
            values.extend([float(z) ** 2] * mult)
    values.sort()
    return [0.0] + values[: k - 1]


def fd_oracle_disc_eigs(grid_n: int, cmap: ConformalMap, k: int) -> List[float]:
    """
    5-point polar finite differences on r_i = i/N (i = 0..N), theta_j = 2 pi j/N.

    The pole is a single unknown coupled to ring 1 through its angular average,
    Lap u(0) ~ 4 (mean_j u_1j - u_0) / dr^2. At r = 1 the mirrored ghost ring is
    written in its symmetric half-cell form (zero flux through r = 1). The weight
    enters as a lumped diagonal mass h(node) * cell area.
    """
    if grid_n < 8 or grid_n > MAX_GRID:
        raise ValueError(f"grid_n must lie in [8, {MAX_GRID}], got {grid_n}")
    n_r = n_t = int(grid_n)
    dr = 1.0 / n_r
    dt = 2.0 * np.pi / n_t
    dim = 1 + n_r * n_t

    def idx(i, j):
        return 1 + (i - 1) * n_t + (j % n_t)

    stiff = np.zeros((dim, dim))
    area = np.zeros(dim)
    nodes = np.zeros(dim, dtype=complex)

    area[0] = np.pi * (0.5 * dr) ** 2
    for i in range(1, n_r + 1):
        r = i * dr
        r_in = r - 0.5 * dr
        r_out = min(r + 0.5 * dr, 1.0)
        for j in range(n_t):
            p = idx(i, j)
            nodes[p] = r * np.exp(1j * j * dt)
            area[p] = 0.5 * (r_out ** 2 - r_in ** 2) * dt
            # radial flux towards ring i-1 (the pole for i = 1)
            inner = 0 if i == 1 else idx(i - 1, j)
            c = r_in * dt / dr
            stiff[p, p] += c
            stiff[inner, inner] += c
            stiff[p, inner] -= c
            stiff[inner, p] -= c
            # angular flux towards the next node on the ring
            c = (r_out - r_in) / (r * dt)
            q = idx(i, j + 1)
            stiff[p, p] += c
            stiff[q, q] += c
            stiff[p, q] -= c
            stiff[q, p] -= c

    mass = np.asarray(cmap.weight(nodes)) * area
    vals = scipy.linalg.eigh(stiff, np.diag(mass), eigvals_only=True, subset_by_index=[0, k - 1])
    logger.debug("FD oracle N=%d for %s: %s", grid_n, cmap.label, vals)
    return [float(v) for v in vals]
