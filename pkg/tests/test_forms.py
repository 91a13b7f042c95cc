import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from smectic_c0ip.fe_basis import tabulate
from smectic_c0ip.forms import (
    assemble, boundary_load_u, cell_kernel_Q, cell_kernel_u, facet_kernel_u, facet_matrix,
    facet_residual,
    global_residual, make_discretisation, q_operator, u_operator,
)
from smectic_c0ip.mesh import unit_square_mesh
from smectic_c0ip.mms import ManufacturedCase, exact_q, exact_u
from smectic_c0ip.params import ModelParams
from smectic_c0ip.quadrature import cell_rule
from smectic_c0ip.space import SystemState, build_dofmap, interpolate, physical_tables

COUPLED = ModelParams(q=30.0, epsilon=5e4, form_variant="inconsistent")
CASES = [
    ("P1", 2, None, ModelParams()),
    ("P1", 3, None, ModelParams(form_variant="inconsistent", epsilon=5e4)),
    ("P2", None, 1, ModelParams()),
    ("P2", None, 2, ModelParams()),
    ("coupled", 2, 1, COUPLED),
    ("coupled", 2, 2, ModelParams(q=30.0)),
]


def random_state(disc, rng, scale=0.3):
    x = rng.normal(size=disc.n_total) * scale
    return disc.unpack(x)


def fd_jacobian(disc, state, step=1e-6):
    x = disc.pack(state)
    cols = []
    for j in disc.free:
        h = step * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        rp = assemble(disc, disc.unpack(xp)).residual
        rm = assemble(disc, disc.unpack(xm)).residual
        cols.append((rp - rm) / (2 * h))
    return np.column_stack(cols)


@pytest.mark.parametrize("kind,du,dq,params", CASES)
def test_jacobian_matches_finite_differences(kind, du, dq, params, rng):
    disc = make_discretisation(kind, 2, params, deg_u=du, deg_q=dq, case=ManufacturedCase(kind))
    state = random_state(disc, rng)
    J = assemble(disc, state).jacobian.toarray()
    Jfd = fd_jacobian(disc, state)
    big = np.abs(J) > 1e-12
    rel = np.abs(J - Jfd)[big] / np.abs(J)[big]
    # the FD columns carry rounding noise of size eps*|R|/step
    noise = 1e-16 * np.abs(assemble(disc, state).residual).max() / 1e-6 + 1e-12
    assert np.all((rel <= 1e-5) | (np.abs(J - Jfd)[big] <= 10 * noise))
    assert np.abs(Jfd[~big]).max(initial=0) <= 1e-6 * np.abs(J).max()


@pytest.mark.parametrize("kind,du,dq,params", CASES)
def test_jacobian_symmetric(kind, du, dq, params, rng):
    disc = make_discretisation(kind, 3, params, deg_u=du, deg_q=dq, case=ManufacturedCase(kind))
    J = assemble(disc, random_state(disc, rng)).jacobian
    assert abs(J - J.T).max() <= 1e-10 * abs(J).max()


@pytest.mark.parametrize("kind,du,dq,params", CASES)
def test_energy_gradient_is_residual(kind, du, dq, params, rng):
    disc = make_discretisation(kind, 2, params, deg_u=du, deg_q=dq, case=ManufacturedCase(kind))
    x = disc.pack(random_state(disc, rng))
    d = np.zeros_like(x)
    d[disc.free] = rng.normal(size=len(disc.free))
    t = 1e-5
    ep = assemble(disc, disc.unpack(x + t * d)).energy
    em = assemble(disc, disc.unpack(x - t * d)).energy
    slope = assemble(disc, disc.unpack(x)).residual @ d[disc.free]
    assert (ep - em) / (2 * t) == pytest.approx(slope, rel=1e-6)


def test_q0_coupled_is_block_diagonal(rng):
    p = ModelParams(q=0.0, epsilon=5e4, form_variant="inconsistent")
    mesh = unit_square_mesh(3)
    c = make_discretisation("coupled", 3, p, deg_u=3, deg_q=2, case=ManufacturedCase("coupled"), mesh=mesh)
    u = make_discretisation("P1", 3, p, deg_u=3, case=ManufacturedCase("P1"), mesh=mesh)
    q = make_discretisation("P2", 3, p, deg_q=2, case=ManufacturedCase("P2"), mesh=mesh)
    st = random_state(c, rng)
    Ac, Au, Aq = assemble(c, st), assemble(u, st), assemble(q, st)
    ref = sp.block_diag([Au.jacobian, Aq.jacobian]).toarray()
    assert np.abs(Ac.jacobian.toarray() - ref).max() <= 1e-12 * np.abs(ref).max()
    res = np.concatenate([Au.residual, Aq.residual])
    assert np.abs(Ac.residual - res).max() <= 1e-12 * np.abs(res).max()
    assert Ac.energy == pytest.approx(Au.energy + Aq.energy, rel=1e-12)


def test_decoupled_kinds_reject_wave_number():
    with pytest.raises(ValueError):
        make_discretisation("P1", 2, ModelParams(q=1.0), deg_u=2)
    with pytest.raises(ValueError):
        make_discretisation("P3", 2, ModelParams(), deg_u=2)


# --- cell kernels ---------------------------------------------------------------

def _u_tables(deg, h):
    rule = cell_rule(deg)
    return rule, physical_tables(tabulate(deg, rule.points), h)


def test_u_kernel_at_zero_is_hessian_plus_mass():
    p, deg, h = ModelParams(), 2, 0.5
    rule, tab = _u_tables(deg, h)
    w = rule.weights * h * h
    res, jac, e = cell_kernel_u(p, np.zeros((1, 9)), u_operator(tab), w)
    hess = (np.einsum("p,pi,pj->ij", w, tab["xx"], tab["xx"])
            + 2 * np.einsum("p,pi,pj->ij", w, tab["xy"], tab["xy"])
            + np.einsum("p,pi,pj->ij", w, tab["yy"], tab["yy"]))
    mass = np.einsum("p,pi,pj->ij", w, tab["v"], tab["v"])
    assert np.allclose(res, 0) and e[0] == 0
    assert np.allclose(jac[0], 2 * p.B * hess + p.a1 * mass, rtol=1e-12, atol=1e-15)


def test_u_kernel_hessian_term_for_x_squared():
    p = ModelParams(a1=0.0, a3=1e-30)
    mesh = unit_square_mesh(1)
    dm = build_dofmap(mesh, 2)
    c = interpolate(dm, lambda x, y: x**2)
    rule, tab = _u_tables(2, 1.0)
    res, _, _ = cell_kernel_u(p, c[dm.cell_to_global], u_operator(tab), rule.weights)
    # 2B int 2 t_xx
    ref = 2 * p.B * 2 * (rule.weights @ tab["xx"])
    assert np.allclose(res[0], ref, atol=1e-18)


def test_q_kernel_zero_state_and_bulk_root():
    p = ModelParams()
    h = 0.25
    rule = cell_rule(1)
    tab = physical_tables(tabulate(1, rule.points), h)
    w = rule.weights * h * h
    op = q_operator(tab)
    res, jac, _ = cell_kernel_Q(p, np.zeros((1, 8)), op, w)
    stiff = (np.einsum("p,pi,pj->ij", w, tab["x"], tab["x"])
             + np.einsum("p,pi,pj->ij", w, tab["y"], tab["y"]))
    mass = np.einsum("p,pi,pj->ij", w, tab["v"], tab["v"])
    assert np.allclose(res, 0)
    assert np.allclose(jac[0, :4, :4], 2 * p.K * stiff - 4 * p.l * mass)
    assert np.allclose(jac[0, :4, 4:], 0)
    # the bulk derivative 2l(2|Q|^2 - 1)Q vanishes for |Q|^2 = 2(Q11^2 + Q12^2) = 1/2
    for q11, q12 in ((0.5, 0.0), (0.3, 0.4), (0.0, -0.5)):
        local = np.concatenate([np.full(4, q11), np.full(4, q12)])[None]
        r, _, _ = cell_kernel_Q(p, local, op, w)
        assert np.abs(r).max() < 1e-14


def test_p2_constant_minimiser_has_zero_residual():
    p = ModelParams()
    disc = make_discretisation("P2", 4, p, deg_q=2)
    n = disc.q_map.n_global
    st = SystemState(q11=np.full(n, 0.3), q12=np.full(n, -0.4))
    assert np.abs(assemble(disc, st, with_sources=False).residual).max() < 1e-12


def test_quartic_term_equals_tensor_form(rng):
    # B^n(Q,Q,Q,P) = 4l/3 int (Q:Q)(Q:P) + 2 (Q:Q)(Q:P), Q = [[a, b], [b, -a]]
    p = ModelParams()
    deg, h = 2, 0.5
    rule = cell_rule(deg)
    tab = physical_tables(tabulate(deg, rule.points), h)
    w = rule.weights * h * h
    op = q_operator(tab)
    nb = tab["v"].shape[1]
    local = rng.normal(size=(3, 2 * nb))
    res, _, _ = cell_kernel_Q(p, local, op, w)
    _, jac0, _ = cell_kernel_Q(p, np.zeros((1, 2 * nb)), op, w)
    quartic = res - local @ jac0[0].T

    phi = tab["v"]
    a, b = local[:, :nb] @ phi.T, local[:, nb:] @ phi.T  # (C, P)
    Q = np.zeros(a.shape + (2, 2))
    Q[..., 0, 0], Q[..., 1, 1] = a, -a
    Q[..., 0, 1] = Q[..., 1, 0] = b
    QQ = np.einsum("cpij,cpij->cp", Q, Q)
    ref = np.zeros_like(quartic)
    for k in range(2 * nb):
        P = np.zeros((len(w), 2, 2))
        if k < nb:
            P[:, 0, 0], P[:, 1, 1] = phi[:, k], -phi[:, k]
        else:
            P[:, 0, 1] = P[:, 1, 0] = phi[:, k - nb]
        QP = np.einsum("cpij,pij->cp", Q, P)
        ref[:, k] = 4 * p.l / 3 * ((QQ * QP) + 2 * (QP * QQ)) @ w
    assert np.allclose(quartic, ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())


# --- facet terms ----------------------------------------------------------------

@pytest.mark.parametrize("deg", [2, 3, 4])
@pytest.mark.parametrize("variant", ["consistent", "inconsistent"])
def test_c1_polynomial_has_no_jump(deg, variant):
    p = ModelParams(form_variant=variant, epsilon=7.0)
    disc = make_discretisation("P1", 3, p, deg_u=deg)
    u = interpolate(disc.u_map, lambda x, y: x**2 * y**2 + x * y)
    pen = make_discretisation("P1", 3, p.with_(form_variant="inconsistent"), deg_u=deg)
    assert abs(u @ (pen.facet_matrix @ u)) < 1e-14
    if variant == "inconsistent":
        assert np.abs(disc.facet_matrix @ u).max() < 1e-12


@given(st.integers(0, 2**32 - 1), st.sampled_from(["consistent", "inconsistent"]),
       st.integers(2, 4))
def test_factored_facet_terms_equal_assembled_matrix(seed, variant, deg):
    p = ModelParams(form_variant=variant, epsilon=50.0)
    disc = make_discretisation("P1", 3, p, deg_u=deg)
    u = np.random.default_rng(seed).normal(size=disc.n_u)
    r, e = facet_residual(disc, u)
    Fu = disc.facet_matrix @ u
    scale = abs(disc.facet_matrix) @ np.abs(u)
    assert np.all(np.abs(r - Fu) <= 1e-13 * scale)
    assert e == pytest.approx(0.5 * u @ Fu, rel=1e-10, abs=1e-10 * np.abs(u) @ scale)


@given(st.integers(0, 2**32 - 1))
def test_penalty_nonnegative(seed):
    p = ModelParams(form_variant="inconsistent", epsilon=3.0)
    disc = make_discretisation("P1", 2, p, deg_u=2)
    u = np.random.default_rng(seed).normal(size=disc.n_u)
    assert u @ (disc.facet_matrix @ u) >= 0


def test_kink_penalty_hand_value():
    # u = |x - 1/2|: grad jump of size 2 along x = 1/2 (length 1), nothing else
    p = ModelParams(form_variant="inconsistent", epsilon=5.0)
    disc = make_discretisation("P1", 2, p, deg_u=2)
    u = interpolate(disc.u_map, lambda x, y: np.abs(x - 0.5))
    h = 0.5
    assert u @ (disc.facet_matrix @ u) == pytest.approx(2 * p.B * p.epsilon / h**3 * 4.0, rel=1e-12)


def test_facet_kernel_on_mesh_facets():
    p = ModelParams()
    mesh = unit_square_mesh(2)
    f = mesh.interior_facets[0]
    nb = 9
    r, M = facet_kernel_u(p, f, np.zeros(nb), np.zeros(nb), 2)
    assert np.allclose(r, 0) and np.allclose(M, M.T)
    assert np.allclose(M, facet_matrix(p, 2, mesh.h, f.axis))
    with pytest.raises(ValueError):
        facet_kernel_u(p, mesh.boundary_facets[0], np.zeros(nb), np.zeros(nb), 2)


def test_consistent_matrix_differs_only_by_symmetric_terms():
    pc = ModelParams(form_variant="consistent")
    pi = pc.with_(form_variant="inconsistent")
    D = facet_matrix(pc, 3, 0.25, 1) - facet_matrix(pi, 3, 0.25, 1)
    assert np.abs(D).max() > 0
    assert np.allclose(D, D.T, atol=1e-14 * np.abs(D).max())


# --- boundary load --------------------------------------------------------------

def test_boundary_load_zero_hessian_and_mms():
    p = ModelParams()
    dm = build_dofmap(unit_square_mesh(3), 2)
    zero = lambda x, y: (0 * x, 0 * x, 0 * x)  # noqa: E731
    assert np.all(boundary_load_u(p, dm, zero) == 0)
    mms = ManufacturedCase("P1").boundary_hessian
    assert np.abs(boundary_load_u(p, dm, mms)).max() < 1e-20


def test_boundary_load_identity_on_left_edge():
    # D^2 u_b = I on x = 0 only: load_t = 2B int_0^1 -d_x t(0, y) dy
    p = ModelParams()
    dm = build_dofmap(unit_square_mesh(1), 1)
    left = lambda x, y: ((x == 0).astype(float), 0 * x, (x == 0).astype(float))  # noqa: E731
    load = boundary_load_u(p, dm, left)
    # nodes (0,0), (1,0), (0,1), (1,1)
    assert np.allclose(load, [p.B, -p.B, p.B, -p.B], rtol=1e-12)


# --- assembly -------------------------------------------------------------------

@pytest.mark.parametrize("kind,du,dq", [("P2", None, 1), ("P2", None, 2), ("P1", 4, None)])
def test_residual_at_exact_interpolant_decreases(kind, du, dq):
    norms = []
    for n in (6, 12, 24):
        disc = make_discretisation(kind, n, ModelParams(), deg_u=du, deg_q=dq,
                                   case=ManufacturedCase(kind))
        st = SystemState()
        if disc.has_u:
            st.u = interpolate(disc.u_map, lambda x, y: exact_u(x, y)["u"])
        if disc.has_q:
            st.q11 = interpolate(disc.q_map, lambda x, y: exact_q(x, y)["q11"])
            st.q12 = interpolate(disc.q_map, lambda x, y: exact_q(x, y)["q12"])
        norms.append(np.linalg.norm(assemble(disc, st).residual))
    assert norms[0] > norms[1] > norms[2]


def test_assemble_errors():
    disc = make_discretisation("P1", 2, ModelParams(), deg_u=2)
    with pytest.raises(ValueError):
        assemble(disc, SystemState(u=np.zeros(3)))
    bad = np.zeros(disc.n_u)
    bad[disc.free[0]] = np.nan
    with pytest.raises(FloatingPointError):
        assemble(disc, SystemState(u=bad))


def test_global_residual_matches_reduced(rng):
    disc = make_discretisation("coupled", 2, COUPLED, deg_u=2, deg_q=1, case=ManufacturedCase("coupled"))
    st = random_state(disc, rng)
    R, e = global_residual(disc, st)
    A = assemble(disc, st)
    assert np.allclose(R[disc.free], A.residual, rtol=1e-13, atol=1e-16)
    assert e == pytest.approx(A.energy, rel=1e-13)
