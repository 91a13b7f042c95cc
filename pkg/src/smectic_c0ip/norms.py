"""Error norms against closed-form fields and observed convergence orders."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fe_basis import tabulate
from .forms import facet_traces
from .quadrature import cell_rule, facet_rule
from .space import DofMap, physical_points, physical_tables


@dataclass
class LevelErrors:
    n_per_side: int
    eu_l2: float | None = None
    eu_h1: float | None = None
    eu_triple: float | None = None
    eq_l2: float | None = None
    eq_h1: float | None = None
    newton_iters: int = 0


@dataclass
class ErrorReport:
    case: str
    deg_u: int | None
    deg_q: int | None
    levels: list[LevelErrors] = field(default_factory=list)

    def column(self, name: str) -> list[float | None]:
        return [getattr(lv, name) for lv in self.levels]

    def orders(self, name: str) -> list[float]:
        vals = self.column(name)
        if len(vals) < 2 or any(v is None for v in vals):
            return []
        return convergence_orders(vals)


def _error_tables(dofmap: DofMap):
    rule = cell_rule(dofmap.degree, "error")
    tables = physical_tables(tabulate(dofmap.degree, rule.points), dofmap.mesh.h)
    x, y = physical_points(dofmap.mesh, rule.points)
    return rule.weights * dofmap.mesh.h**2, tables, x, y


def _sq_errors(dofmap: DofMap, coeffs: np.ndarray, exact) -> tuple[float, float]:
    """Squared L2 error of value and of gradient; exact(x, y) -> (v, v_x, v_y)."""
    w, tab, x, y = _error_tables(dofmap)
    loc = coeffs[dofmap.cell_to_global]
    v, vx, vy = exact(x, y)
    e0 = loc @ tab["v"].T - v
    ex = loc @ tab["x"].T - vx
    ey = loc @ tab["y"].T - vy
    return float(np.sum(e0**2 * w)), float(np.sum((ex**2 + ey**2) * w))


def error_l2_h1(dofmap: DofMap, coeffs, exact) -> tuple[float, float]:
    """(||e||_0, ||e||_1) with ||e||_1^2 = ||e||_0^2 + |e|_1^2.

    ``coeffs``/``exact`` may be a single field or a sequence of fields, in which
    case the components are combined as a vector field.
    """
    if callable(exact):
        coeffs, exact = [coeffs], [exact]
    l2 = semi = 0.0
    for c, f in zip(coeffs, exact):
        a, b = _sq_errors(dofmap, np.asarray(c), f)
        l2 += a
        semi += b
    return float(np.sqrt(l2)), float(np.sqrt(l2 + semi))


def broken_h2_seminorm_sq(dofmap: DofMap, coeffs: np.ndarray, exact_hessian) -> float:
    """sum_T int_T |D^2 e|^2 (Frobenius) with exact_hessian(x, y) -> (v_xx, v_xy, v_yy)."""
    w, tab, x, y = _error_tables(dofmap)
    loc = coeffs[dofmap.cell_to_global]
    hxx, hxy, hyy = exact_hessian(x, y)
    exx = loc @ tab["xx"].T - hxx
    exy = loc @ tab["xy"].T - hxy
    eyy = loc @ tab["yy"].T - hyy
    return float(np.sum((exx**2 + 2 * exy**2 + eyy**2) * w))


def jump_seminorm_sq(dofmap: DofMap, coeffs: np.ndarray) -> float:
    """sum over interior facets of h_e^-3 int_e [[grad v]]^2."""
    mesh = dofmap.mesh
    total = 0.0
    rule = facet_rule(dofmap.degree + 1)
    for axis in (0, 1):
        minus, plus = mesh.interior_pairs(axis)
        if not len(minus):
            continue
        jump, _, w = facet_traces(dofmap.degree, mesh.h, axis, rule)
        loc = np.hstack([coeffs[dofmap.cell_to_global[minus]], coeffs[dofmap.cell_to_global[plus]]])
        j = loc @ jump.T
        total += float(np.sum(j**2 * w)) / mesh.h**3
    return total


def error_triple_norm(dofmap: DofMap, coeffs, exact_hessian) -> float:
    """Mesh-dependent H^2-like norm of u_exact - u_h for a C^1 exact field.

    The exact field has no gradient jumps, so the jump part only sees u_h.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    return float(np.sqrt(broken_h2_seminorm_sq(dofmap, coeffs, exact_hessian)
                         + jump_seminorm_sq(dofmap, coeffs)))


def convergence_orders(errors) -> list[float]:
    """log2(e_h / e_{h/2}) between consecutive levels."""
    e = np.asarray(errors, dtype=float)
    if np.any(~(e > 0)):
        raise ValueError("errors must be positive to compute orders")
    return list(np.log2(e[:-1] / e[1:]))
