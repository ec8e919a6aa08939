from __future__ import annotations
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation of the closed unit disc; vertices are complex numbers."""
    vertices: np.ndarray
    triangles: np.ndarray
    refinement: int
    boundary_flags: np.ndarray

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.size)

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def triangle_areas(self) -> np.ndarray:
        """Signed areas, positive for counterclockwise triangles."""
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1.real * e2.imag - e1.imag * e2.real)

    def min_angle_deg(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            angles.append(np.abs(np.angle(v / u)))
        return float(np.degrees(np.min(angles)))

    def edge_use_counts(self) -> np.ndarray:
        t = self.triangles
        edges = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return counts


def _ring_start(j: int) -> int:
    # index of the first vertex on ring j (ring 0 is the centre)
    return 0 if j == 0 else 1 + 3 * j * (j - 1)


def mesh_unit_disc(refinement: int) -> Mesh:
    """
    Structured concentric mesh: ring j (1 <= j <= R) carries 6j equally spaced
    vertices at radius j/R, so R rings give 3R^2 + 3R + 1 vertices and 6R^2
    triangles. Each of the six sectors between rings j-1 and j holds j
    outward-pointing and j-1 inward-pointing triangles.
    """
    if refinement < 1:
        raise ValueError(f"refinement must be >= 1, got {refinement}")
    R = int(refinement)
    verts = [0j]
    for j in range(1, R + 1):
        k = np.arange(6 * j)
        verts.extend((j / R) * np.exp(2j * np.pi * k / (6 * j)))
    vertices = np.asarray(verts, dtype=complex)

    tris = []
    for j in range(1, R + 1):
        outer0, n_out = _ring_start(j), 6 * j
        inner0, n_in = _ring_start(j - 1), max(1, 6 * (j - 1))
        for s in range(6):
            for t in range(j):
                a = inner0 + (s * (j - 1) + t) % n_in
                b = outer0 + (s * j + t) % n_out
                c = outer0 + (s * j + t + 1) % n_out
                tris.append((a, b, c))
            for t in range(j - 1):
                a = inner0 + (s * (j - 1) + t) % n_in
                b = outer0 + (s * j + t + 1) % n_out
                c = inner0 + (s * (j - 1) + t + 1) % n_in
                tris.append((a, b, c))
    triangles = np.asarray(tris, dtype=np.int64)

    # enforce counterclockwise orientation
    p = vertices[triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    flip = (e1.real * e2.imag - e1.imag * e2.real) < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    boundary = np.zeros(vertices.size, dtype=bool)
    boundary[_ring_start(R):] = True
    vertices.setflags(write=False)
    triangles.setflags(write=False)
    logger.debug("Meshed unit disc R=%d: %d vertices, %d triangles", R, vertices.size, len(triangles))
    return Mesh(vertices=vertices, triangles=triangles, refinement=R, boundary_flags=boundary)
