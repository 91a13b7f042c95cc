"""Continuous Q_deg spaces on a uniform mesh: numbering, interpolation, evaluation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fe_basis import BasisTabulation, pullback_scalings, tabulate
from .mesh import Mesh
from .quadrature import cell_rule


@dataclass(frozen=True)
class DofMap:
    mesh: Mesh = field(repr=False)
    degree: int
    n_global: int
    cell_to_global: np.ndarray = field(repr=False)  # (n_cells, (degree+1)^2)
    boundary_dofs: np.ndarray = field(repr=False)  # sorted
    dof_coords: np.ndarray = field(repr=False)  # (n_global, 2)

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_global, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)


def build_dofmap(mesh: Mesh, degree: int) -> DofMap:
    """Global nodes form a (degree*n+1)^2 grid numbered row-major by coordinate."""
    if int(degree) != degree or degree < 1:
        raise ValueError(f"degree must be a positive integer, got {degree!r}")
    n, d = mesh.n_per_side, degree
    m = d * n + 1
    a = np.arange(d + 1)
    A, Bv = np.meshgrid(a, a, indexing="xy")
    A, Bv = A.ravel(), Bv.ravel()  # local node k -> (a, b)

    cell_i = np.tile(np.arange(n), n)
    cell_j = np.repeat(np.arange(n), n)
    gi = cell_i[:, None] * d + A[None, :]
    gj = cell_j[:, None] * d + Bv[None, :]
    c2g = gj * m + gi

    t = np.linspace(0.0, 1.0, m)
    X, Y = np.meshgrid(t, t, indexing="xy")
    coords = np.column_stack([X.ravel(), Y.ravel()])
    I, J = np.meshgrid(np.arange(m), np.arange(m), indexing="xy")
    on_bdry = (I == 0) | (I == m - 1) | (J == 0) | (J == m - 1)
    boundary = np.flatnonzero(on_bdry.ravel())
    return DofMap(mesh, degree, m * m, c2g, boundary, coords)


@dataclass
class SystemState:
    """Coefficient vectors; Q is [[q11, q12], [q12, -q11]]."""

    u: np.ndarray | None = None
    q11: np.ndarray | None = None
    q12: np.ndarray | None = None

    def copy(self) -> "SystemState":
        cp = lambda a: None if a is None else a.copy()  # noqa: E731
        return SystemState(cp(self.u), cp(self.q11), cp(self.q12))

    def q_tensor(self) -> np.ndarray:
        """Nodal Q as (n, 2, 2) symmetric traceless matrices."""
        Q = np.empty((len(self.q11), 2, 2))
        Q[:, 0, 0] = self.q11
        Q[:, 1, 1] = -self.q11
        Q[:, 0, 1] = Q[:, 1, 0] = self.q12
        return Q


def interpolate(dofmap: DofMap, f) -> np.ndarray:
    """Nodal interpolant; ``f`` maps arrays (x, y) to values."""
    x, y = dofmap.dof_coords[:, 0], dofmap.dof_coords[:, 1]
    vals = np.asarray(f(x, y), dtype=float)
    return np.broadcast_to(vals, x.shape).copy()


def physical_tables(tab: BasisTabulation, h: float) -> dict[str, np.ndarray]:
    """Reference tabulation scaled to a physical cell of size h; each entry is (P, nb)."""
    gs, hs = pullback_scalings(h)
    return {
        "v": tab.values,
        "x": tab.gradients[..., 0] * gs,
        "y": tab.gradients[..., 1] * gs,
        "xx": tab.hessians[..., 0, 0] * hs,
        "xy": tab.hessians[..., 0, 1] * hs,
        "yy": tab.hessians[..., 1, 1] * hs,
    }


def eval_fe(dofmap: DofMap, coeffs: np.ndarray, cell: int, ref_point):
    """(value, gradient, hessian) of the FE function on ``cell`` at a reference point."""
    tab = tabulate(dofmap.degree, np.atleast_2d(ref_point))
    gs, hs = pullback_scalings(dofmap.mesh.h)
    c = coeffs[dofmap.cell_to_global[cell]]
    value = tab.values[0] @ c
    grad = np.einsum("ik,i->k", tab.gradients[0], c) * gs
    hess = np.einsum("ikl,i->kl", tab.hessians[0], c) * hs
    return value, grad, hess


def eval_at_points(dofmap: DofMap, coeffs: np.ndarray, tables: dict[str, np.ndarray], keys=("v",)):
    """Evaluate requested derivative tables on every cell: dict key -> (n_cells, P)."""
    local = coeffs[dofmap.cell_to_global]
    return {k: local @ tables[k].T for k in keys}


def physical_points(mesh: Mesh, ref_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Physical coordinates (n_cells, P) of reference points mapped into every cell."""
    corners = mesh.corners()
    x = corners[:, 0:1] + mesh.h * ref_points[None, :, 0]
    y = corners[:, 1:2] + mesh.h * ref_points[None, :, 1]
    return x, y


def mass_matrix(dofmap: DofMap) -> sp.csc_matrix:
    rule = cell_rule(dofmap.degree, "error")
    phi = tabulate(dofmap.degree, rule.points).values
    M = np.einsum("p,pi,pj->ij", rule.weights * dofmap.mesh.h**2, phi, phi)
    c2g = dofmap.cell_to_global
    nb = c2g.shape[1]
    rows = np.repeat(c2g, nb, axis=1).ravel()
    cols = np.tile(c2g, (1, nb)).ravel()
    data = np.broadcast_to(M.ravel(), (len(c2g), nb * nb)).ravel()
    return sp.coo_matrix((data, (rows, cols)), shape=(dofmap.n_global,) * 2).tocsc()


def l2_project(dofmap: DofMap, f) -> np.ndarray:
    """Global (unconstrained) L2 projection of f onto the space."""
    rule = cell_rule(dofmap.degree, "error")
    phi = tabulate(dofmap.degree, rule.points).values
    x, y = physical_points(dofmap.mesh, rule.points)
    vals = np.broadcast_to(np.asarray(f(x, y), dtype=float), x.shape)
    local = (vals * rule.weights * dofmap.mesh.h**2) @ phi
    rhs = np.bincount(dofmap.cell_to_global.ravel(), weights=local.ravel(), minlength=dofmap.n_global)
    return spla.spsolve(mass_matrix(dofmap), rhs)
