"""Tensor-product Lagrange bases on the reference square [0,1]^2."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial


@dataclass(frozen=True)
class BasisTabulation:
    degree: int
    points: np.ndarray  # (P, 2)
    values: np.ndarray  # (P, nb)
    gradients: np.ndarray  # (P, nb, 2)
    hessians: np.ndarray  # (P, nb, 2, 2)

    @property
    def n_basis(self) -> int:
        return self.values.shape[1]


def _check_degree(degree: int) -> None:
    if int(degree) != degree or degree < 1:
        raise ValueError(f"degree must be a positive integer, got {degree!r}")


def reference_nodes(degree: int) -> np.ndarray:
    """Equispaced nodes, node k = b*(degree+1) + a sits at (a/degree, b/degree)."""
    _check_degree(degree)
    t = np.linspace(0.0, 1.0, degree + 1)
    X, Y = np.meshgrid(t, t, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def _lagrange_1d(degree: int) -> list[Polynomial]:
    t = np.linspace(0.0, 1.0, degree + 1)
    polys = []
    for a in range(degree + 1):
        others = np.delete(t, a)
        p = Polynomial.fromroots(others)
        polys.append(p / p(t[a]))
    return polys


def tabulate_1d(degree: int, x: np.ndarray) -> np.ndarray:
    """Values and first two derivatives of the 1D Lagrange basis: shape (3, len(x), degree+1)."""
    _check_degree(degree)
    x = np.asarray(x, dtype=float)
    out = np.empty((3, x.size, degree + 1))
    for a, p in enumerate(_lagrange_1d(degree)):
        out[0, :, a] = p(x)
        out[1, :, a] = p.deriv(1)(x)
        out[2, :, a] = p.deriv(2)(x) if degree >= 2 else 0.0
    return out


def tabulate(degree: int, points) -> BasisTabulation:
    _check_degree(degree)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    X = tabulate_1d(degree, pts[:, 0])  # (3, P, m)
    Y = tabulate_1d(degree, pts[:, 1])
    P, m = pts.shape[0], degree + 1

    def prod(dx, dy):
        # basis k = b*m + a -> X[a] * Y[b]
        return (Y[dy][:, :, None] * X[dx][:, None, :]).reshape(P, m * m)

    values = prod(0, 0)
    grads = np.stack([prod(1, 0), prod(0, 1)], axis=-1)
    hxx, hxy, hyy = prod(2, 0), prod(1, 1), prod(0, 2)
    hess = np.empty((P, m * m, 2, 2))
    hess[..., 0, 0] = hxx
    hess[..., 0, 1] = hxy
    hess[..., 1, 0] = hxy
    hess[..., 1, 1] = hyy
    return BasisTabulation(degree, pts, values, grads, hess)


def pullback_scalings(mesh_h: float) -> tuple[float, float]:
    """Derivative scale factors for the map x = corner + h * xi."""
    if mesh_h <= 0:
        raise ValueError("mesh size must be positive")
    return 1.0 / mesh_h, 1.0 / mesh_h**2
