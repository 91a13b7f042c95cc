"""Residual, Jacobian and energy assembly for the u, Q and coupled problems.

Every cell term is the variation of a pointwise energy density written in
terms of a few field variables (values, gradients, Hessian entries). The
kernels return the first and second derivatives of that density at the
quadrature points; ``_contract`` turns them into local residuals and
Jacobians. The C0 interior penalty facet terms are linear in u and are
assembled once into a constant sparse matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp

from .fe_basis import tabulate
from .mesh import FacetInfo, Mesh
from .mms import ManufacturedCase
from .params import ModelParams
from .quadrature import cell_rule, facet_rule
from .space import DofMap, SystemState, build_dofmap, physical_points, physical_tables

ProblemKind = Literal["P1", "P2", "coupled"]

_CHUNK = 256


@dataclass
class AssembledSystem:
    residual: np.ndarray  # over free DOFs
    jacobian: sp.csr_matrix  # over free DOFs
    energy: float


# ---------------------------------------------------------------------------
# local operators


def u_operator(tables: dict[str, np.ndarray]) -> np.ndarray:
    """(P, 4, nb): maps u coefficients to (u, u_xx, u_xy, u_yy)."""
    return np.stack([tables["v"], tables["xx"], tables["xy"], tables["yy"]], axis=1)


def q_operator(tables: dict[str, np.ndarray]) -> np.ndarray:
    """(P, 6, 2nb): maps (Q11, Q12) coefficients to (Q11, Q11_x, Q11_y, Q12, Q12_x, Q12_y)."""
    P, nb = tables["v"].shape
    op = np.zeros((P, 6, 2 * nb))
    for k, key in enumerate(("v", "x", "y")):
        op[:, k, :nb] = tables[key]
        op[:, 3 + k, nb:] = tables[key]
    return op


def _contract(op: np.ndarray, grad: np.ndarray, hess: np.ndarray | None, w: np.ndarray):
    """Local residual sum_q w g.op and Jacobian sum_q w op^T H op.

    op (P, a, n); grad (C, P, a); hess (C, P, a, a) or None; w (P,).
    """
    C, P, a = grad.shape
    n = op.shape[-1]
    res = np.einsum("cpa,pan->cn", grad * w[None, :, None], op, optimize=True)
    if hess is None:
        return res, None
    flat = op.reshape(P * a, n)
    jac = np.empty((C, n, n))
    for s in range(0, C, _CHUNK):
        Hw = hess[s:s + _CHUNK] * w[None, :, None, None]
        T = np.einsum("cpab,pbn->cpan", Hw, op, optimize=True).reshape(-1, P * a, n)
        jac[s:s + _CHUNK] = flat.T @ T
    return res, jac


# ---------------------------------------------------------------------------
# pointwise density derivatives


def u_density(params: ModelParams, z: np.ndarray):
    """f_s(u) + B |D^2 u|^2 with z = (u, u_xx, u_xy, u_yy) on the last axis."""
    p = params
    u, uxx, uxy, uyy = np.moveaxis(z, -1, 0)
    energy = (p.a1 / 2 * u**2 + p.a2 / 3 * u**3 + p.a3 / 4 * u**4
              + p.B * (uxx**2 + 2 * uxy**2 + uyy**2))
    g = np.stack([p.a1 * u + p.a2 * u**2 + p.a3 * u**3,
                  2 * p.B * uxx, 4 * p.B * uxy, 2 * p.B * uyy], axis=-1)
    H = np.zeros(z.shape + (4,))
    H[..., 0, 0] = p.a1 + 2 * p.a2 * u + 3 * p.a3 * u**2
    H[..., 1, 1] = 2 * p.B
    H[..., 2, 2] = 4 * p.B
    H[..., 3, 3] = 2 * p.B
    return energy, g, H


def q_density(params: ModelParams, z: np.ndarray):
    """K/2 |grad Q|^2 - l tr(Q^2) + l tr(Q^2)^2 in 2D, z = (Q11, Q11_x, Q11_y, Q12, Q12_x, Q12_y)."""
    K, l = params.K, params.l
    q11, q11x, q11y, q12, q12x, q12y = np.moveaxis(z, -1, 0)
    s = q11**2 + q12**2  # tr(Q^2) = 2 s
    energy = K * (q11x**2 + q11y**2 + q12x**2 + q12y**2) - 2 * l * s + 4 * l * s**2
    bulk = -4 * l + 16 * l * s
    g = np.stack([bulk * q11, 2 * K * q11x, 2 * K * q11y,
                  bulk * q12, 2 * K * q12x, 2 * K * q12y], axis=-1)
    H = np.zeros(z.shape + (6,))
    H[..., 0, 0] = bulk + 32 * l * q11**2
    H[..., 3, 3] = bulk + 32 * l * q12**2
    H[..., 0, 3] = H[..., 3, 0] = 32 * l * q11 * q12
    for k in (1, 2, 4, 5):
        H[..., k, k] = 2 * K
    return energy, g, H


def coupling_density(params: ModelParams, z: np.ndarray):
    """B|D^2u + q^2 M u|^2 - B|D^2u|^2 with M = Q + I/2, z = (u, u_xx, u_xy, u_yy, Q11, Q12)."""
    B, q2 = params.B, params.q**2
    q4 = q2 * q2
    u, uxx, uxy, uyy, q11, q12 = np.moveaxis(z, -1, 0)
    MH = (q11 + 0.5) * uxx + 2 * q12 * uxy + (0.5 - q11) * uyy
    MM = 2 * q11**2 + 2 * q12**2 + 0.5
    energy = 2 * B * q2 * u * MH + B * q4 * u**2 * MM
    g = np.stack([
        2 * B * q2 * MH + 2 * B * q4 * u * MM,
        2 * B * q2 * u * (q11 + 0.5),
        4 * B * q2 * u * q12,
        2 * B * q2 * u * (0.5 - q11),
        2 * B * q2 * u * (uxx - uyy) + 4 * B * q4 * u**2 * q11,
        4 * B * q2 * u * uxy + 4 * B * q4 * u**2 * q12,
    ], axis=-1)
    H = np.zeros(z.shape + (6,))

    def put(i, j, val):
        H[..., i, j] = val
        H[..., j, i] = val

    put(0, 0, 2 * B * q4 * MM)
    put(0, 1, 2 * B * q2 * (q11 + 0.5))
    put(0, 2, 4 * B * q2 * q12)
    put(0, 3, 2 * B * q2 * (0.5 - q11))
    put(0, 4, 2 * B * q2 * (uxx - uyy) + 8 * B * q4 * u * q11)
    put(0, 5, 4 * B * q2 * uxy + 8 * B * q4 * u * q12)
    put(1, 4, 2 * B * q2 * u)
    put(3, 4, -2 * B * q2 * u)
    put(2, 5, 4 * B * q2 * u)
    put(4, 4, 4 * B * q4 * u**2)
    put(5, 5, 4 * B * q4 * u**2)
    return energy, g, H


# ---------------------------------------------------------------------------
# cell kernels on batches of cells


def cell_kernel_u(params: ModelParams, u_local: np.ndarray, op: np.ndarray, w: np.ndarray,
                  jacobian: bool = True):
    """Local (residual, jacobian, energy) of the smectic bulk + Hessian term; u_local is (C, nb)."""
    z = np.einsum("pan,cn->cpa", op, u_local, optimize=True)
    e, g, H = u_density(params, z)
    res, jac = _contract(op, g, H if jacobian else None, w)
    return res, jac, e @ w


def cell_kernel_Q(params: ModelParams, q_local: np.ndarray, op: np.ndarray, w: np.ndarray,
                  jacobian: bool = True):
    """Same for the nematic terms; q_local is (C, 2nb) = [Q11 | Q12] coefficients."""
    z = np.einsum("pan,cn->cpa", op, q_local, optimize=True)
    e, g, H = q_density(params, z)
    res, jac = _contract(op, g, H if jacobian else None, w)
    return res, jac, e @ w


def cell_kernel_coupling(params: ModelParams, local: np.ndarray, op: np.ndarray, w: np.ndarray,
                         jacobian: bool = True):
    """q != 0 cross terms; local is (C, nbu + 2nbq) = [u | Q11 | Q12]."""
    if params.q == 0:
        C, n = local.shape
        return np.zeros((C, n)), (np.zeros((C, n, n)) if jacobian else None), np.zeros(C)
    z = np.einsum("pan,cn->cpa", op, local, optimize=True)
    e, g, H = coupling_density(params, z)
    res, jac = _contract(op, g, H if jacobian else None, w)
    return res, jac, e @ w


# ---------------------------------------------------------------------------
# facet terms


def _facet_points(axis: int, t: np.ndarray):
    """Reference points of a facet seen from the minus and plus cells."""
    one, zero = np.ones_like(t), np.zeros_like(t)
    if axis == 0:
        return np.column_stack([one, t]), np.column_stack([zero, t])
    return np.column_stack([t, one]), np.column_stack([t, zero])


def facet_traces(degree: int, h: float, axis: int, rule=None):
    """Jump of the normal derivative and average of the second normal derivative.

    Returns (jump, avg, weights) with jump/avg of shape (P, 2nb) over the stacked
    [minus | plus] local basis, and weights already scaled by the facet length.
    """
    rule = rule or facet_rule(degree)
    t = rule.points[:, 0]
    pm, pp = _facet_points(axis, t)
    tm, tp = tabulate(degree, pm), tabulate(degree, pp)
    dn = lambda tab: tab.gradients[..., axis] / h  # noqa: E731
    dnn = lambda tab: tab.hessians[..., axis, axis] / h**2  # noqa: E731
    jump = np.hstack([dn(tm), -dn(tp)])
    avg = 0.5 * np.hstack([dnn(tm), dnn(tp)])
    return jump, avg, rule.weights * h


def facet_matrix(params: ModelParams, degree: int, h: float, axis: int) -> np.ndarray:
    """Local 2nb x 2nb matrix of the penalty (+ consistency terms if consistent) on one facet."""
    jump, avg, w = facet_traces(degree, h, axis)
    pen = 2 * params.B * params.epsilon / h**3
    M = pen * np.einsum("p,pi,pj->ij", w, jump, jump)
    if params.form_variant == "consistent":
        M -= 2 * params.B * (np.einsum("p,pi,pj->ij", w, jump, avg)
                             + np.einsum("p,pi,pj->ij", w, avg, jump))
    return M


def facet_kernel_u(params: ModelParams, facet: FacetInfo, u_minus: np.ndarray, u_plus: np.ndarray,
                   degree: int):
    """Residual and Jacobian contributions of one interior facet, over [minus | plus] DOFs."""
    if facet.cell_plus is None:
        raise ValueError(f"facet {facet.facet_id} is a boundary facet; penalty acts on interior facets only")
    M = facet_matrix(params, degree, facet.h_e, facet.axis)
    local = np.concatenate([u_minus, u_plus])
    return M @ local, M


def _boundary_side_points(side: str, t: np.ndarray):
    one, zero = np.ones_like(t), np.zeros_like(t)
    return {
        "left": (np.column_stack([zero, t]), (-1.0, 0.0)),
        "right": (np.column_stack([one, t]), (1.0, 0.0)),
        "bottom": (np.column_stack([t, zero]), (0.0, -1.0)),
        "top": (np.column_stack([t, one]), (0.0, 1.0)),
    }[side]


def boundary_load_u(params: ModelParams, dofmap: DofMap, hessian_fn) -> np.ndarray:
    """2B int_{dOmega} (D^2 u_b grad t) . nu for every basis function t.

    ``hessian_fn(x, y)`` returns (u_xx, u_xy, u_yy) of the boundary data.
    """
    mesh = dofmap.mesh
    rule = facet_rule(dofmap.degree)
    t = rule.points[:, 0]
    load = np.zeros(dofmap.n_global)
    n = mesh.n_per_side
    sides = {
        "left": np.arange(n) * n,
        "right": np.arange(n) * n + n - 1,
        "bottom": np.arange(n),
        "top": (n - 1) * n + np.arange(n),
    }
    corners = mesh.corners()
    for side, cells in sides.items():
        ref, nu = _boundary_side_points(side, t)
        tab = tabulate(dofmap.degree, ref)
        gx, gy = tab.gradients[..., 0] / mesh.h, tab.gradients[..., 1] / mesh.h
        x = corners[cells, 0:1] + mesh.h * ref[None, :, 0]
        y = corners[cells, 1:2] + mesh.h * ref[None, :, 1]
        hxx, hxy, hyy = (np.broadcast_to(np.asarray(v, dtype=float), x.shape) for v in hessian_fn(x, y))
        # (D^2 u_b nu) . grad t
        vx = hxx * nu[0] + hxy * nu[1]
        vy = hxy * nu[0] + hyy * nu[1]
        w = rule.weights * mesh.h
        local = 2 * params.B * ((vx * w) @ gx + (vy * w) @ gy)
        np.add.at(load, dofmap.cell_to_global[cells], local)
    return load


# ---------------------------------------------------------------------------
# global discretisation


@dataclass
class Discretisation:
    """Spaces, quadrature tables and sparsity data for one problem on one mesh."""

    mesh: Mesh
    kind: ProblemKind
    params: ModelParams
    u_map: DofMap | None = None
    q_map: DofMap | None = None
    case: ManufacturedCase | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in ("P1", "P2", "coupled"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.kind == "P1" and self.u_map is None:
            raise ValueError("P1 requires a u DofMap")
        if self.kind == "P2" and self.q_map is None:
            raise ValueError("P2 requires a Q DofMap")
        if self.kind == "coupled" and (self.u_map is None or self.q_map is None):
            raise ValueError("coupled problem requires both DofMaps")
        if self.kind != "coupled" and self.params.q != 0:
            raise ValueError("decoupled problems require q = 0")
        self._setup()

    @property
    def has_u(self) -> bool:
        return self.kind in ("P1", "coupled")

    @property
    def has_q(self) -> bool:
        return self.kind in ("P2", "coupled")

    # layout ----------------------------------------------------------------
    def _setup(self):
        mesh, h = self.mesh, self.mesh.h
        nu = self.u_map.n_global if self.has_u else 0
        nq = self.q_map.n_global if self.has_q else 0
        self.n_u, self.n_q = nu, nq
        self.n_total = nu + 2 * nq
        degs = ([self.u_map.degree] if self.has_u else []) + ([self.q_map.degree] if self.has_q else [])
        self.rule = cell_rule(max(degs), "residual")
        self.weights = self.rule.weights * h * h
        self.xq, self.yq = physical_points(mesh, self.rule.points)

        l2g = []
        if self.has_u:
            self.u_tables = physical_tables(tabulate(self.u_map.degree, self.rule.points), h)
            self.u_op = u_operator(self.u_tables)
            l2g.append(self.u_map.cell_to_global)
        if self.has_q:
            self.q_tables = physical_tables(tabulate(self.q_map.degree, self.rule.points), h)
            self.q_op = q_operator(self.q_tables)
            l2g.append(nu + self.q_map.cell_to_global)
            l2g.append(nu + nq + self.q_map.cell_to_global)
        self.l2g = np.hstack(l2g)
        self.nbu = self.u_map.cell_to_global.shape[1] if self.has_u else 0
        self.nbq = self.q_map.cell_to_global.shape[1] if self.has_q else 0

        if self.kind == "coupled":
            op = np.zeros((len(self.weights), 6, self.nbu + 2 * self.nbq))
            op[:, :4, :self.nbu] = self.u_op
            op[:, 4, self.nbu:self.nbu + self.nbq] = self.q_tables["v"]
            op[:, 5, self.nbu + self.nbq:] = self.q_tables["v"]
            self.c_op = op

        # Dirichlet elimination: global -> reduced index (-1 for constrained DOFs)
        fixed = []
        if self.has_u:
            fixed.append(self.u_map.boundary_dofs)
        if self.has_q:
            fixed.append(nu + self.q_map.boundary_dofs)
            fixed.append(nu + nq + self.q_map.boundary_dofs)
        self.fixed = np.concatenate(fixed)
        mask = np.ones(self.n_total, dtype=bool)
        mask[self.fixed] = False
        self.free = np.flatnonzero(mask)
        self.reduced_index = np.full(self.n_total, -1)
        self.reduced_index[self.free] = np.arange(len(self.free))

        self.facet_matrix = self._facet_operator() if self.has_u else None
        self._facet_traces = self._facet_trace_data() if self.has_u else []
        self._build_pattern()
        self._sources_at_qp()
        if self.has_u and self.case is not None:
            self.load = boundary_load_u(self.params, self.u_map, self.case.boundary_hessian)
        else:
            self.load = None

    def _facet_operator(self) -> sp.csr_matrix:
        """Global u x u matrix of all interior-facet terms (constant in u)."""
        rows, cols, vals = [], [], []
        c2g = self.u_map.cell_to_global
        for axis in (0, 1):
            minus, plus = self.mesh.interior_pairs(axis)
            if not len(minus):
                continue
            M = facet_matrix(self.params, self.u_map.degree, self.mesh.h, axis)
            dofs = np.hstack([c2g[minus], c2g[plus]])  # (F, 2nb)
            n = dofs.shape[1]
            rows.append(np.repeat(dofs, n, axis=1).ravel())
            cols.append(np.tile(dofs, (1, n)).ravel())
            vals.append(np.broadcast_to(M.ravel(), (len(minus), n * n)).ravel())
        if not rows:
            return sp.csr_matrix((self.n_u, self.n_u))
        return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_u, self.n_u)).tocsr()

    def _facet_trace_data(self):
        """Per-axis (dofs, jump, avg, weights) used to apply the facet terms in factored form."""
        out = []
        c2g = self.u_map.cell_to_global
        for axis in (0, 1):
            minus, plus = self.mesh.interior_pairs(axis)
            if not len(minus):
                continue
            jump, avg, w = facet_traces(self.u_map.degree, self.mesh.h, axis)
            out.append((np.hstack([c2g[minus], c2g[plus]]), jump, avg, w))
        return out

    def _build_pattern(self):
        """Precompute the scatter from local cell entries into the reduced CSR data array."""
        n = self.l2g.shape[1]
        ri = self.reduced_index[self.l2g]
        rows = np.repeat(ri, n, axis=1).ravel()
        cols = np.tile(ri, (1, n)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        nfree = len(self.free)
        keys = rows[keep].astype(np.int64) * nfree + cols[keep]
        if self.facet_matrix is not None:
            F = self.facet_matrix.tocoo()
            fr, fc = self.reduced_index[F.row], self.reduced_index[F.col]
            fk = (fr >= 0) & (fc >= 0)
            self._facet_red = sp.csr_matrix((F.data[fk], (fr[fk], fc[fk])), shape=(nfree, nfree))
            keys = np.concatenate([keys, fr[fk].astype(np.int64) * nfree + fc[fk]])
        uniq, inv = np.unique(keys, return_inverse=True)
        self._keep = keep
        self._inv_cells = inv[: keep.sum()]
        self._nnz = len(uniq)
        self._indices = (uniq % nfree).astype(np.int32)
        counts = np.bincount(uniq // nfree, minlength=nfree)
        self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        if self.facet_matrix is not None:
            F = self._facet_red.tocoo()
            fkeys = F.row.astype(np.int64) * nfree + F.col
            self._facet_pos = np.searchsorted(uniq, fkeys)
            self._facet_vals = F.data

    def _sources_at_qp(self):
        self.src = None
        if self.case is None:
            return
        s1, s2, s3 = self.case.sources(self.xq, self.yq, self.params)
        self.src = (s1, s2, s3)

    # state helpers ---------------------------------------------------------
    def pack(self, state: SystemState) -> np.ndarray:
        parts = []
        if self.has_u:
            if state.u is None or len(state.u) != self.n_u:
                raise ValueError("u coefficient vector does not match its DofMap")
            parts.append(state.u)
        if self.has_q:
            for a in (state.q11, state.q12):
                if a is None or len(a) != self.n_q:
                    raise ValueError("Q coefficient vector does not match its DofMap")
            parts += [state.q11, state.q12]
        return np.concatenate(parts).astype(float)

    def unpack(self, x: np.ndarray) -> SystemState:
        st = SystemState()
        if self.has_u:
            st.u = x[: self.n_u].copy()
        if self.has_q:
            st.q11 = x[self.n_u: self.n_u + self.n_q].copy()
            st.q12 = x[self.n_u + self.n_q:].copy()
        return st


def make_discretisation(kind: ProblemKind, n: int, params: ModelParams, deg_u: int | None = None,
                        deg_q: int | None = None, case: ManufacturedCase | None = None,
                        mesh: Mesh | None = None) -> Discretisation:
    from .mesh import unit_square_mesh

    mesh = mesh or unit_square_mesh(n)
    u_map = build_dofmap(mesh, deg_u) if kind in ("P1", "coupled") else None
    q_map = build_dofmap(mesh, deg_q) if kind in ("P2", "coupled") else None
    return Discretisation(mesh, kind, params, u_map, q_map, case)


def _local_terms(disc: Discretisation, x: np.ndarray, jacobian: bool, with_sources: bool):
    """Summed local residuals/Jacobians over the stacked cell layout, plus cell energy."""
    local = x[disc.l2g]
    C, n = local.shape
    res = np.zeros((C, n))
    jac = np.zeros((C, n, n)) if jacobian else None
    energy = 0.0
    p, w = disc.params, disc.weights
    nbu, nbq = disc.nbu, disc.nbq

    if disc.has_u:
        r, J, e = cell_kernel_u(p, local[:, :nbu], disc.u_op, w, jacobian)
        res[:, :nbu] += r
        if jacobian:
            jac[:, :nbu, :nbu] += J
        energy += e.sum()
    if disc.has_q:
        sl = slice(nbu, nbu + 2 * nbq)
        r, J, e = cell_kernel_Q(p, local[:, sl], disc.q_op, w, jacobian)
        res[:, sl] += r
        if jacobian:
            jac[:, sl, sl] += J
        energy += e.sum()
    if disc.kind == "coupled" and p.q != 0:
        r, J, e = cell_kernel_coupling(p, local, disc.c_op, w, jacobian)
        res += r
        if jacobian:
            jac += J
        energy += e.sum()

    if with_sources and disc.src is not None:
        s1, s2, s3 = disc.src
        if disc.has_u:
            phi = disc.u_tables["v"]
            res[:, :nbu] -= (s3 * w) @ phi
            energy -= np.sum((s3 * w) * (local[:, :nbu] @ phi.T))
        if disc.has_q:
            phi = disc.q_tables["v"]
            for k, s in ((0, s1), (1, s2)):
                sl = slice(nbu + k * nbq, nbu + (k + 1) * nbq)
                res[:, sl] -= (s * w) @ phi
                energy -= np.sum((s * w) * (local[:, sl] @ phi.T))
    return res, jac, energy


def facet_residual(disc: Discretisation, u: np.ndarray) -> tuple[np.ndarray, float]:
    """Facet terms applied to u as T^T W (T u), with their energy.

    Equal to ``disc.facet_matrix @ u`` in exact arithmetic. Taking the jumps
    first keeps rounding proportional to u instead of to the penalty-scaled
    matrix entries, whose errors would otherwise pollute the C^1 modes.
    """
    p = disc.params
    pen = 2 * p.B * p.epsilon / disc.mesh.h**3
    out = np.zeros(disc.n_u)
    energy = 0.0
    for dofs, jump, avg, w in disc._facet_traces:
        local = u[dofs]
        j = local @ jump.T  # (F, P)
        r = (pen * w * j) @ jump
        energy += 0.5 * pen * np.sum(w * j * j)
        if p.form_variant == "consistent":
            a = local @ avg.T
            r -= 2 * p.B * ((w * a) @ jump + (w * j) @ avg)
            energy -= 2 * p.B * np.sum(w * j * a)
        out += np.bincount(dofs.ravel(), weights=r.ravel(), minlength=disc.n_u)
    return out, energy


def global_residual(disc: Discretisation, state: SystemState, with_sources: bool = True):
    """Full-length residual vector (all DOFs) and discrete energy."""
    x = disc.pack(state)
    res_loc, _, energy = _local_terms(disc, x, False, with_sources)
    R = np.bincount(disc.l2g.ravel(), weights=res_loc.ravel(), minlength=disc.n_total)
    if disc.has_u:
        u = x[: disc.n_u]
        Fu, e_facet = facet_residual(disc, u)
        R[: disc.n_u] += Fu
        energy += e_facet
        if disc.load is not None:
            R[: disc.n_u] -= disc.load
            energy -= disc.load @ u
    return R, energy


def assemble(disc: Discretisation, state: SystemState, with_sources: bool = True) -> AssembledSystem:
    """Reduced residual, Jacobian and discrete energy at ``state``.

    Dirichlet values must already be present in ``state``; their rows and
    columns are eliminated.
    """
    x = disc.pack(state)
    res_loc, jac_loc, energy = _local_terms(disc, x, True, with_sources)
    if not (np.all(np.isfinite(res_loc)) and np.all(np.isfinite(jac_loc))):
        raise FloatingPointError("non-finite value in cell kernels; state is invalid")

    R = np.bincount(disc.l2g.ravel(), weights=res_loc.ravel(), minlength=disc.n_total)
    data = np.bincount(disc._inv_cells, weights=jac_loc.ravel()[disc._keep], minlength=disc._nnz)
    if disc.has_u:
        u = x[: disc.n_u]
        Fu, e_facet = facet_residual(disc, u)
        R[: disc.n_u] += Fu
        energy += e_facet
        if disc.load is not None:
            R[: disc.n_u] -= disc.load
            energy -= disc.load @ u
        data += np.bincount(disc._facet_pos, weights=disc._facet_vals, minlength=disc._nnz)
    nfree = len(disc.free)
    J = sp.csr_matrix((data, disc._indices.copy(), disc._indptr.copy()), shape=(nfree, nfree))
    return AssembledSystem(R[disc.free], J, float(energy))
