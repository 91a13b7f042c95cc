"""Manufactured solution: exact fields, derivatives, sources and initial guess.

u = 10 (x(x-1) y(y-1))^3 is separable, u = 10 X(x) X(y) with X(t) = (t^2 - t)^3.
Q = 1/2 [cos phi, sin phi] in (Q11, Q12) with phi = pi (2x-1)(2y-1) / 4, which is
(cos^2 theta - 1/2, cos theta sin theta) at theta = phi / 2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.polynomial import Polynomial

from .params import ModelParams
from .space import DofMap, SystemState, interpolate, l2_project

ProblemKind = Literal["P1", "P2", "coupled"]

_X = Polynomial([0.0, -1.0, 1.0]) ** 3
_XD = [_X.deriv(k) if k else _X for k in range(5)]


def _sep(x, k):
    return _XD[k](x)


def exact_u(x, y) -> dict[str, np.ndarray]:
    """u and its partial derivatives up to fourth order, keyed by derivative letters."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X = [_sep(x, k) for k in range(5)]
    Y = [_sep(y, k) for k in range(5)]
    d = {}
    for kx in range(5):
        for ky in range(5 - kx):
            d["x" * kx + "y" * ky] = 10.0 * X[kx] * Y[ky]
    d["u"] = d.pop("")
    return d


def _phase(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    phi = np.pi * (2 * x - 1) * (2 * y - 1) / 4
    return phi, np.pi * (2 * y - 1) / 2, np.pi * (2 * x - 1) / 2


def exact_q(x, y) -> dict[str, np.ndarray]:
    """Q11, Q12 and derivatives up to second order (phi_xx = phi_yy = 0, phi_xy = pi)."""
    phi, px, py = _phase(x, y)
    c, s = 0.5 * np.cos(phi), 0.5 * np.sin(phi)
    pxy = np.pi
    return {
        "q11": c, "q11_x": -s * px, "q11_y": -s * py,
        "q11_xx": -c * px**2, "q11_yy": -c * py**2, "q11_xy": -(c * px * py + s * pxy),
        "q12": s, "q12_x": c * px, "q12_y": c * py,
        "q12_xx": -s * px**2, "q12_yy": -s * py**2, "q12_xy": c * pxy - s * px * py,
    }


def exact_fields(x, y):
    """(u, grad u, hess u, Q11, grad Q11, Q12, grad Q12) at a point or arrays of points."""
    U, Q = exact_u(x, y), exact_q(x, y)
    grad_u = np.stack([U["x"], U["y"]], axis=-1)
    hess_u = np.stack([np.stack([U["xx"], U["xy"]], -1), np.stack([U["xy"], U["yy"]], -1)], -2)
    g11 = np.stack([Q["q11_x"], Q["q11_y"]], axis=-1)
    g12 = np.stack([Q["q12_x"], Q["q12_y"]], axis=-1)
    return U["u"], grad_u, hess_u, Q["q11"], g11, Q["q12"], g12


def _second_of_product(U, m, mx, my, mxx, mxy, myy):
    """(d_xx, d_xy, d_yy) of u*m by the Leibniz rule."""
    dxx = U["xx"] * m + 2 * U["x"] * mx + U["u"] * mxx
    dyy = U["yy"] * m + 2 * U["y"] * my + U["u"] * myy
    dxy = U["xy"] * m + U["x"] * my + U["y"] * mx + U["u"] * mxy
    return dxx, dxy, dyy


def sources(x, y, params: ModelParams):
    """Right-hand sides (s1, s2, s3) of the strong component equations at the exact fields."""
    p = params
    U, Q = exact_u(x, y), exact_q(x, y)
    u, q11, q12 = U["u"], Q["q11"], Q["q12"]
    B, q2, q4 = p.B, p.q**2, p.q**4
    sq = q11**2 + q12**2
    lap11 = Q["q11_xx"] + Q["q11_yy"]
    lap12 = Q["q12_xx"] + Q["q12_yy"]

    s1 = (4 * B * q4 * u**2 * q11 + 2 * B * q2 * u * (U["xx"] - U["yy"])
          - 2 * p.K * lap11 - 4 * p.l * q11 + 16 * p.l * q11 * sq)
    s2 = (4 * B * q4 * u**2 * q12 + 4 * B * q2 * u * U["xy"]
          - 2 * p.K * lap12 - 4 * p.l * q12 + 16 * p.l * q12 * sq)

    t1 = (q11 + 0.5) * U["xx"] + (0.5 - q11) * U["yy"] + 2 * q12 * U["xy"]
    # M = Q + I/2 entries and their derivatives
    a_xx, _, _ = _second_of_product(U, q11 + 0.5, Q["q11_x"], Q["q11_y"],
                                    Q["q11_xx"], Q["q11_xy"], Q["q11_yy"])
    _, _, b_yy = _second_of_product(U, 0.5 - q11, -Q["q11_x"], -Q["q11_y"],
                                    -Q["q11_xx"], -Q["q11_xy"], -Q["q11_yy"])
    _, c_xy, _ = _second_of_product(U, q12, Q["q12_x"], Q["q12_y"],
                                    Q["q12_xx"], Q["q12_xy"], Q["q12_yy"])
    t2 = a_xx + b_yy + 2 * c_xy
    biharm = U["xxxx"] + 2 * U["xxyy"] + U["yyyy"]
    s3 = (p.a1 * u + p.a2 * u**2 + p.a3 * u**3 + 2 * B * biharm
          + B * q4 * (4 * sq + 1) * u + 2 * B * q2 * (t1 + t2))
    return s1, s2, s3


def dirichlet_data(x, y):
    """Traces (u_b, Q11_b, Q12_b); u_b vanishes on the whole boundary."""
    U, Q = exact_u(x, y), exact_q(x, y)
    return U["u"], Q["q11"], Q["q12"]


@dataclass(frozen=True)
class ManufacturedCase:
    kind: ProblemKind

    @property
    def has_u(self) -> bool:
        return self.kind in ("P1", "coupled")

    @property
    def has_q(self) -> bool:
        return self.kind in ("P2", "coupled")

    def exact_u(self, x, y):
        return exact_u(x, y)

    def exact_q(self, x, y):
        return exact_q(x, y)

    def sources(self, x, y, params: ModelParams):
        return sources(x, y, params)

    def boundary_hessian(self, x, y):
        U = exact_u(x, y)
        return U["xx"], U["xy"], U["yy"]

    def initial_guess(self, u_map: DofMap | None, q_map: DofMap | None, **bc) -> SystemState:
        return initial_guess(self, u_map, q_map, **bc)


BoundaryMethod = Literal["projection", "interpolation"]


def boundary_values(dofmap: DofMap, f, method: BoundaryMethod = "projection") -> np.ndarray:
    """Dirichlet values on ``dofmap.boundary_dofs``.

    "projection" takes the boundary entries of the global L2 projection of f;
    "interpolation" takes nodal values of f.
    """
    if method == "projection":
        vals = l2_project(dofmap, f)
    elif method == "interpolation":
        vals = interpolate(dofmap, f)
    else:
        raise ValueError(f"unknown boundary method {method!r}")
    return vals[dofmap.boundary_dofs]


def _half_plus(dofmap: DofMap, f, method: BoundaryMethod):
    vals = 0.5 * interpolate(dofmap, f) + 1e-9
    vals[dofmap.boundary_dofs] = boundary_values(dofmap, f, method)
    return vals


def initial_guess(case: ManufacturedCase, u_map: DofMap | None, q_map: DofMap | None,
                  u_bc: BoundaryMethod | None = None,
                  q_bc: BoundaryMethod = "projection") -> SystemState:
    """Interpolant of exact/2 + 1e-9, carrying the full Dirichlet data on boundary DOFs.

    By default u takes interpolated boundary values when decoupled and
    projected ones in the coupled problem; Q always takes projected values.
    These are the choices that reproduce the reference error tables.
    """
    if u_bc is None:
        u_bc = "projection" if case.kind == "coupled" else "interpolation"
    state = SystemState()
    if case.has_u:
        state.u = _half_plus(u_map, lambda x, y: exact_u(x, y)["u"], u_bc)
    if case.has_q:
        state.q11 = _half_plus(q_map, lambda x, y: exact_q(x, y)["q11"], q_bc)
        state.q12 = _half_plus(q_map, lambda x, y: exact_q(x, y)["q12"], q_bc)
    return state
