from dataclasses import replace
import math

import numpy as np
import pytest
import scipy.linalg

from ibmdiff import backend
from ibmdiff.closure import (
    Algorithm,
    AlgorithmSpec,
    BCKind,
    BoundaryConditionSpec,
    ClosureSet,
    assemble,
    build_all_closures,
    collect_stencil,
    ghost_geometry,
    moment_matrix,
    solve_closure,
)
from ibmdiff.errors import EmptyStencil, RegularityFailure
from ibmdiff.geometry import NodeClass, NodeClassification
from ibmdiff.kernels import BasisFamily, CubicSpline, PowerOfDistance

D = 1e-10
ZERO_FLUX = BoundaryConditionSpec(D=D)


def alg(name, basis=BasisFamily.INCOMPLETE_QUARTIC, beta=2.75, kappa=100.0):
    return AlgorithmSpec(Algorithm(name), basis, CubicSpline(beta), kappa)


def axis_gp(cls, grid):
    """Ghost point on the +x axis through the center."""
    kc = grid.shape[1] // 2
    return max(g for g in cls.gp if g[1] == kc)


def system(gp, a, bc, grid, hole, cls):
    geo = ghost_geometry(gp, grid, hole)
    st = collect_stencil(geo.gip, cls, grid, a.stencil_radius)
    return st, assemble(gp, st, a, bc, grid, hole)


def test_stencil_brute_force(grid100, hole, cls100):
    gp = axis_gp(cls100, grid100)
    gip = ghost_geometry(gp, grid100, hole).gip
    got = set(collect_stencil(gip, cls100, grid100, 2.75))
    want = set()
    for j in range(grid100.shape[0]):
        for k in range(grid100.shape[1]):
            x, y = grid100.node_xy(j, k)
            if cls100.interior[j, k] and math.hypot(x - gip[0], y - gip[1]) <= 2.75 * grid100.h * (1 + 1e-12):
                want.add((j, k))
    assert got == want and len(got) > 9


def test_stencil_extremes(grid100, hole, cls100):
    gp = cls100.gp[1]  # off-axis: its image point is not a lattice node
    gip = ghost_geometry(gp, grid100, hole).gip
    with pytest.raises(EmptyStencil):
        collect_stencil(gip, cls100, grid100, 1e-3)
    full = collect_stencil(gip, cls100, grid100, math.inf)
    assert len(full) == int(cls100.interior.sum())


def test_assemble_shapes(grid100, hole, cls100):
    gp = axis_gp(cls100, grid100)
    st, _ = system(gp, alg("mls"), ZERO_FLUX, grid100, hole, cls100)
    one = assemble(gp, st[:1], alg("mls", BasisFamily.LINEAR), ZERO_FLUX, grid100, hole)
    assert one.G.shape == (1, 3)
    mls = assemble(gp, st, alg("mls"), ZERO_FLUX, grid100, hole)
    ec = assemble(gp, st, alg("ecmls"), ZERO_FLUX, grid100, hole)
    assert ec.n_rows == 2 * mls.n_rows == 2 * len(st)
    ip = np.array(ec.row_kind) == "ip"
    assert np.all(ec.f[ip] == 0.0)
    np.testing.assert_array_equal(ec.E[ip], np.eye(len(st)))


def test_assemble_dirichlet_rows(grid100, hole, cls100):
    gp = axis_gp(cls100, grid100)
    bc = BoundaryConditionSpec(BCKind.DIRICHLET, 2.0, D)
    st, sys = system(gp, alg("ecmls"), bc, grid100, hole, cls100)
    kind = np.array(sys.row_kind)
    S = len(st)
    assert sys.n_rows == 3 * S
    np.testing.assert_array_equal(sys.E[kind == "ip"], -np.eye(S))
    np.testing.assert_array_equal(sys.f[kind == "ip"], 4.0)
    np.testing.assert_array_equal(sys.E[kind == "bi"], 0.0)
    np.testing.assert_array_equal(sys.f[kind == "bi"], 2.0)
    np.testing.assert_array_equal(sys.Dvec, sys.gip_basis + sys.gp_basis)


@pytest.mark.parametrize("name", ["mls", "cmls", "ecmls"])
@pytest.mark.parametrize("basis", list(BasisFamily))
def test_constant_reproduction(name, basis, grid100, hole, cls100):
    a = alg(name, basis, beta=3.5)
    for gp in cls100.gp[::37]:
        st, sys = system(gp, a, ZERO_FLUX, grid100, hole, cls100)
        cl = solve_closure(sys, a, ZERO_FLUX, gp=gp, stencil=st, allow_singular=True)
        assert cl.evaluate(np.ones(grid100.shape)) == pytest.approx(1.0, abs=1e-10)


def test_quadratic_reproduction(grid100, hole, cls100):
    a = alg("mls", BasisFamily.QUADRATIC, kappa=0.0)
    X, Y = grid100.coordinates()
    h = grid100.h
    field = 2 + 3 * (X / h) + (Y / h) ** 2 + 0 * X + 0 * Y
    for gp in cls100.gp[::11]:
        st, sys = system(gp, a, ZERO_FLUX, grid100, hole, cls100)
        cl = solve_closure(sys, a, ZERO_FLUX, gp=gp, stencil=st)
        gip = ghost_geometry(gp, grid100, hole).gip
        exact = 2 + 3 * gip[0] / h + (gip[1] / h) ** 2
        # zero-flux closure: c_GP equals the fitted GIP value
        assert cl.evaluate(field) == pytest.approx(exact, rel=1e-9)


def test_undersized_stencil_is_singular(grid100, hole, cls100):
    gp = axis_gp(cls100, grid100)
    a = alg("cmls", BasisFamily.QUADRATIC, kappa=0.0)
    st, _ = system(gp, a, ZERO_FLUX, grid100, hole, cls100)
    sys = assemble(gp, st[:4], a, ZERO_FLUX, grid100, hole)
    with pytest.raises(RegularityFailure) as err:
        solve_closure(sys, a, ZERO_FLUX, gp=gp, stencil=st[:4])
    assert err.value.rcond < 1e-12 and err.value.gp == gp
    cl = solve_closure(sys, a, ZERO_FLUX, gp=gp, stencil=st[:4], allow_singular=True)
    assert not cl.regular


LINEAR_FIELD = (1.5, 2.0e6, -3.0e6)  # c* = a + b x + c y


def _linear(x, y):
    a, b, c = LINEAR_FIELD
    return a + b * x + c * y


@pytest.mark.parametrize("basis", list(BasisFamily))
@pytest.mark.parametrize("kind", ["dirichlet", "neumann"])
def test_linear_field_exact_with_boundary_data(basis, kind, grid100, hole, cls100):
    # the mirror relations hold exactly for linear fields, so every row is consistent
    if kind == "dirichlet":
        bc = BoundaryConditionSpec(BCKind.DIRICHLET, _linear, D)
    else:
        def flux(x, y):
            n = np.array([x, y]) / hole.radius
            return -D * (LINEAR_FIELD[1] * n[0] + LINEAR_FIELD[2] * n[1])
        bc = BoundaryConditionSpec(BCKind.NEUMANN, flux, D)
    X, Y = grid100.coordinates()
    field = _linear(X, Y) + 0 * X * Y
    for name in ("ecmls", "cmls"):
        a = alg(name, basis, beta=3.0)
        for gp in cls100.gp[::29]:
            st, sys = system(gp, a, bc, grid100, hole, cls100)
            cl = solve_closure(sys, a, bc, gp=gp, stencil=st, allow_singular=True)
            if not cl.regular:
                continue
            assert cl.evaluate(field) == pytest.approx(_linear(*grid100.node_xy(*gp)), rel=1e-8)


def test_kappa_limit_enforces_constraint(grid100, hole, cls100, rng):
    flux = lambda x, y: 3e-3 * (1 + x / hole.radius)  # noqa: E731
    bc = BoundaryConditionSpec(BCKind.NEUMANN, flux, D)
    a = alg("cmls", kappa=1e12)
    vals = rng.uniform(0.5, 1.5, size=grid100.shape)
    for gp in cls100.gp[::41]:
        st, sys = system(gp, a, bc, grid100, hole, cls100)
        M, GtW = moment_matrix(sys, a.kappa)
        rhs = GtW @ (sys.E @ np.array([vals[n] for n in st]) + sys.f) + a.kappa * sys.gamma_gip * sys.Dvec
        A = scipy.linalg.solve(M, rhs, assume_a="sym")
        c_gip = sys.gip_basis @ A
        c_gp = sys.gp_basis @ A
        assert abs(c_gip - bc.eta * c_gp - sys.gamma_gip) <= 1e-6 * abs(c_gip)


def test_weight_scale_invariance(grid100, hole, cls100):
    a = alg("mls", kappa=0.0)
    for gp in cls100.gp[::53]:
        st, sys = system(gp, a, ZERO_FLUX, grid100, hole, cls100)
        base = solve_closure(sys, a, ZERO_FLUX, gp=gp, stencil=st)
        scaled = solve_closure(replace(sys, W=sys.W * 37.5), a, ZERO_FLUX, gp=gp, stencil=st)
        np.testing.assert_allclose(scaled.coeffs, base.coeffs, rtol=0, atol=1e-12 * np.abs(base.coeffs).max())
        assert scaled.constant == pytest.approx(base.constant, abs=1e-12)


def test_mls_ignores_kappa():
    assert alg("mls", kappa=100.0).effective_kappa == 0.0
    assert alg("cmls", kappa=100.0).effective_kappa == 100.0
    with pytest.raises(ValueError):
        alg("cmls", kappa=-1.0)


def test_power_weight_needs_stencil_radius():
    a = AlgorithmSpec(Algorithm.ECMLS, BasisFamily.QUADRATIC, PowerOfDistance(-2.0), 100.0)
    with pytest.raises(ValueError):
        a.stencil_radius
    assert replace(a, stencil_beta=2.5).stencil_radius == 2.5


def test_no_ghost_points(grid100, hole):
    labels = np.full(grid100.shape, NodeClass.IN, dtype=np.int8)
    empty = build_all_closures(NodeClassification(labels, (), ()), grid100, hole, alg("ecmls"), ZERO_FLUX)
    assert len(empty) == 0 and empty.failures == {}


def test_ecmls_without_penalty_is_regular(grid100, hole, cls100):
    cs = build_all_closures(cls100, grid100, hole, alg("ecmls", kappa=0.0), ZERO_FLUX)
    assert len(cs) == len(cls100.gp) and cs.failures == {}


def test_small_beta_quartic_mls_fails(grid100, hole, cls100):
    cs = build_all_closures(cls100, grid100, hole, alg("mls", BasisFamily.QUARTIC, beta=2.0, kappa=0.0), ZERO_FLUX)
    assert len(cs.failures) >= 1
    assert all(not cs.closures[g].regular for g in cs.failures)


def test_gather_arrays_match_evaluate(grid100, hole, cls100, rng):
    cs = build_all_closures(cls100, grid100, hole, alg("ecmls"), ZERO_FLUX)
    vals = rng.normal(size=grid100.shape)
    expected = {gp: cl.evaluate(vals) for gp, cl in cs.closures.items()}
    for name in backend.available():
        out = vals.copy()
        backend.get(name).fill_ghosts(out.reshape(-1), *cs.gather_arrays(grid100))
        for gp, v in expected.items():
            assert out[gp] == pytest.approx(v, rel=1e-12, abs=1e-12)


def test_build_is_deterministic(grid100, hole, cls100):
    a = alg("cmls")
    one = build_all_closures(cls100, grid100, hole, a, ZERO_FLUX)
    two = build_all_closures(cls100, grid100, hole, a, ZERO_FLUX)
    assert isinstance(one, ClosureSet)
    for gp in one.closures:
        np.testing.assert_array_equal(one.closures[gp].coeffs, two.closures[gp].coeffs)
