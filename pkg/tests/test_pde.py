import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from hlrp.diffcore import Jet, Mode
from hlrp.errors import ConfigError, ModeError
from hlrp.pde import (
    CdrParams,
    HelmholtzParams,
    ProblemSpec,
    boundary_residual,
    cdr_residual,
    cdr_residual_vjp,
    forcing_q,
    helmholtz_residual,
    helmholtz_residual_vjp,
    helmholtz_solution,
    initial_condition,
    make_spec,
)


def const_jet(channels, mode, n=5):
    data = np.zeros((len(mode.channels), 1, n))
    for k, v in enumerate(channels):
        data[k, 0] = v
    return Jet(data, mode)


def test_cdr_residual_closed_forms():
    p = CdrParams(3.0, 0.5, 2.0)
    assert np.all(cdr_residual(const_jet([0, 0, 0, 0], Mode.SPACE1D_TIME), p) == 0)
    assert np.all(cdr_residual(const_jet([1, 0, 0, 0], Mode.SPACE1D_TIME), p) == 0)
    np.testing.assert_allclose(cdr_residual(const_jet([0.3], Mode.SPACE1D_TIME), p), -2.0 * 0.3 * 0.7)
    with pytest.raises(ModeError):
        cdr_residual(const_jet([0], Mode.SPACE2D), p)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(-5, 5), st.floats(0, 2), st.floats(-5, 5))
def test_cdr_residual_polynomial_identity(ch, beta, nu, rho):
    v, dx, dt, dxx = ch
    r = cdr_residual(const_jet(ch, Mode.SPACE1D_TIME, 1), CdrParams(beta, nu, rho))
    assert r[0] == pytest.approx(dt + beta * dx - nu * dxx - rho * v + rho * v * v, abs=1e-10)


def test_residual_vjps(rng):
    for mode, fn, vjp, p in (
        (Mode.SPACE1D_TIME, lambda j: cdr_residual(j, CdrParams(2.0, 0.3, 1.5)), lambda j, a: cdr_residual_vjp(j, CdrParams(2.0, 0.3, 1.5), a), None),
        (Mode.SPACE2D, lambda j: helmholtz_residual(j, HelmholtzParams(1.0, 2.0, 1.5), np.zeros((6, 2))), lambda j, a: helmholtz_residual_vjp(j, HelmholtzParams(1.0, 2.0, 1.5), a), None),
    ):
        jet = Jet(rng.normal(size=(len(mode.channels), 1, 6)), mode)
        adj = rng.normal(size=6)
        d = rng.normal(size=jet.data.shape)
        h = 1e-6
        fd = (fn(Jet(jet.data + h * d, mode)) - fn(Jet(jet.data - h * d, mode))) / (2 * h)
        assert np.sum(adj * fd) == pytest.approx(np.sum(vjp(jet, adj) * d), rel=1e-7)


def exact_convection_jet(x, t, beta):
    s = x - beta * t
    data = np.zeros((4, 1, x.size))
    data[0, 0] = 1 + np.sin(s)
    data[1, 0] = np.cos(s)
    data[2, 0] = -beta * np.cos(s)
    data[3, 0] = -np.sin(s)
    return Jet(data, Mode.SPACE1D_TIME)


def test_exact_convection_residual_zero(rng):
    x, t = rng.uniform(0, 2 * np.pi, 100), rng.uniform(0, 1, 100)
    r = cdr_residual(exact_convection_jet(x, t, 30.0), CdrParams(beta=30.0))
    assert np.abs(r).max() <= 1e-8


def test_forcing_examples():
    p = HelmholtzParams(1.0, 1.0, 1.0)
    assert forcing_q(0.0, 0.3, p) == 0.0
    assert forcing_q(0.5, 0.5, p) == pytest.approx(-2 * np.pi**2 + 1, abs=1e-12)


def test_forcing_matches_symbolic_expansion():
    x, y, a1, a2, k = sp.symbols("x y a1 a2 k")
    u = sp.sin(a1 * sp.pi * x) * sp.sin(a2 * sp.pi * y)
    q = sp.diff(u, x, 2) + sp.diff(u, y, 2) + k**2 * u
    f = sp.lambdify((x, y, a1, a2, k), q, "numpy")
    g = np.linspace(-1, 1, 100)
    X, Y = np.meshgrid(g, g, indexing="ij")
    for p in (HelmholtzParams(2.5, 2.5, 1.0), HelmholtzParams(1.0, 4.0, 2.0)):
        np.testing.assert_allclose(forcing_q(X, Y, p), f(X, Y, p.a1, p.a2, p.k), atol=1e-12)


def helmholtz_exact_jet(x, y, p):
    a1, a2 = p.a1 * np.pi, p.a2 * np.pi
    u = np.sin(a1 * x) * np.sin(a2 * y)
    data = np.zeros((5, 1, x.size))
    data[0, 0] = u
    data[1, 0] = a1 * np.cos(a1 * x) * np.sin(a2 * y)
    data[2, 0] = a2 * np.sin(a1 * x) * np.cos(a2 * y)
    data[3, 0] = -(a1**2) * u
    data[4, 0] = -(a2**2) * u
    return Jet(data, Mode.SPACE2D)


def test_helmholtz_residual_zero_on_grid():
    g = np.linspace(-1, 1, 100)
    X, Y = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    for p in (HelmholtzParams(2.5, 2.5), HelmholtzParams(2.0, 3.0, 1.7)):
        r = helmholtz_residual(helmholtz_exact_jet(X, Y, p), p, np.column_stack([X, Y]))
        assert np.abs(r).max() <= 1e-8
        np.testing.assert_allclose(
            helmholtz_residual(const_jet([0], Mode.SPACE2D, X.size), p, np.column_stack([X, Y])),
            -forcing_q(X, Y, p),
        )
    zero = HelmholtzParams(0.0, 0.0)
    assert np.all(forcing_q(X, Y, zero) == 0)


def test_initial_conditions():
    conv = make_spec("convection", [1.0])
    assert initial_condition(conv, np.pi / 2) == pytest.approx(2.0)
    react = make_spec("reaction", [1.0])
    assert initial_condition(react, np.pi) == 1.0
    np.testing.assert_allclose(initial_condition(react, np.pi + np.array([-1, 1]) * np.pi / 4), np.exp(-0.5))
    assert make_spec("cdr", [1, 1, 1]).ic_sigma == pytest.approx(np.pi / 2)


def test_boundary_residual_examples(rng):
    t = rng.uniform(0, 1, 20)
    u = lambda x: np.sin(x - 3.0 * t)
    spec = make_spec("convection", [3.0])
    np.testing.assert_allclose(boundary_residual(spec, u(0.0), u(2 * np.pi)), 0, atol=1e-12)
    assert np.all(boundary_residual(spec, np.full(5, 2.0), np.full(5, 2.0)) == 0)
    hs = make_spec("helmholtz", [2.5])
    xb, yb = np.full(5, -1.0), rng.uniform(-1, 1, 5)
    ex = helmholtz_solution(xb, yb, hs.params)
    assert np.all(boundary_residual(hs, ex, ex) == 0)


def test_spec_validation():
    with pytest.raises(ConfigError):
        make_spec("burgers", [1.0])
    with pytest.raises(ConfigError):
        make_spec("cdr", [1.0])
    with pytest.raises(ConfigError):
        ProblemSpec("helmholtz", CdrParams())
    with pytest.raises(ValueError):
        CdrParams(nu=-1.0)
    with pytest.raises(ValueError):
        HelmholtzParams(1.0, 1.0, 0.0)
    assert make_spec("cdr", [1.0, 2.0, 3.0]).mu.tolist() == [1.0, 2.0, 3.0]
