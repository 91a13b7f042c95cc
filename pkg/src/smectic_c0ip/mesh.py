"""Uniform quadrilateral meshes of the unit square."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Cell:
    index: int
    corner: tuple[float, float]  # lower-left


@dataclass(frozen=True)
class FacetInfo:
    facet_id: int
    cell_minus: int
    cell_plus: int | None
    normal: tuple[float, float]  # outward from cell_minus
    h_e: float
    endpoints: tuple[tuple[float, float], tuple[float, float]]

    @property
    def axis(self) -> int:
        """0 if the facet is vertical (normal along x), 1 if horizontal."""
        return 0 if self.normal[0] != 0.0 else 1


@dataclass(frozen=True)
class Mesh:
    n_per_side: int
    h: float
    cells: list[Cell] = field(repr=False)
    interior_facets: list[FacetInfo] = field(repr=False)
    boundary_facets: list[FacetInfo] = field(repr=False)

    @property
    def n_cells(self) -> int:
        return self.n_per_side**2

    def corners(self) -> np.ndarray:
        return np.array([c.corner for c in self.cells])

    def interior_pairs(self, axis: int) -> tuple[np.ndarray, np.ndarray]:
        """Arrays (minus, plus) of cell indices for interior facets with the given normal axis."""
        pairs = [(f.cell_minus, f.cell_plus) for f in self.interior_facets if f.axis == axis]
        if not pairs:
            return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        arr = np.array(pairs, dtype=int)
        return arr[:, 0], arr[:, 1]


def unit_square_mesh(n: int) -> Mesh:
    """N x N squares on (0,1)^2; cells are numbered row-major (x fastest).

    Interior facets take the lower-index cell as ``cell_minus``, so normals
    always point in +x or +y.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    h = 1.0 / n
    cells = [Cell(j * n + i, (i * h, j * h)) for j in range(n) for i in range(n)]

    interior: list[FacetInfo] = []
    boundary: list[FacetInfo] = []

    def add(lst, minus, plus, normal, p0, p1):
        fid = len(interior) + len(boundary)
        lst.append(FacetInfo(fid, minus, plus, normal, h, (p0, p1)))

    for j in range(n):
        for i in range(n):
            c = j * n + i
            x0, y0 = i * h, j * h
            # right edge
            if i < n - 1:
                add(interior, c, c + 1, (1.0, 0.0), (x0 + h, y0), (x0 + h, y0 + h))
            else:
                add(boundary, c, None, (1.0, 0.0), (x0 + h, y0), (x0 + h, y0 + h))
            # top edge
            if j < n - 1:
                add(interior, c, c + n, (0.0, 1.0), (x0, y0 + h), (x0 + h, y0 + h))
            else:
                add(boundary, c, None, (0.0, 1.0), (x0, y0 + h), (x0 + h, y0 + h))
            if i == 0:
                add(boundary, c, None, (-1.0, 0.0), (x0, y0), (x0, y0 + h))
            if j == 0:
                add(boundary, c, None, (0.0, -1.0), (x0, y0), (x0 + h, y0))

    return Mesh(n, h, cells, interior, boundary)
