"""Gauss-Legendre rules on [0,1], the unit square and cell edges."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n_points, dim)
    weights: np.ndarray  # (n_points,)

    def __len__(self) -> int:
        return len(self.weights)


def gauss_1d(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre on [0,1], exact up to degree 2n-1."""
    if not 1 <= n <= 20:
        raise ValueError(f"number of Gauss points must lie in [1, 20], got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(((x + 1.0) / 2.0)[:, None], w / 2.0)


def tensor_rule(n: int) -> QuadratureRule:
    """n x n tensor Gauss rule on [0,1]^2 with x varying fastest."""
    g = gauss_1d(n)
    x = g.points[:, 0]
    X, Y = np.meshgrid(x, x, indexing="xy")
    W = np.outer(g.weights, g.weights)
    return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), W.ravel())


def cell_rule(degree: int, kind: Literal["residual", "error"] = "residual") -> QuadratureRule:
    # residual: 2n-1 >= 4*degree so the cubic bulk term is integrated exactly
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if kind == "residual":
        n = 2 * degree + 1
    elif kind == "error":
        n = degree + 3
    else:
        raise ValueError(f"unknown rule kind {kind!r}")
    return tensor_rule(n)


def facet_rule(degree: int) -> QuadratureRule:
    """Rule on the unit reference edge, parameter t in [0,1]."""
    if degree < 1:
        raise ValueError("degree must be >= 1")
    return gauss_1d(degree + 2)
