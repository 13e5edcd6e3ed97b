import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pevo.config import ConfigError, GevreyConfig, preset_config
from pevo.cutoffs import gevrey_fit, psi as psi_jet, smooth_step
from pevo.grid import Grid, bracket_h
from pevo.symbols import (LambdaField, Lambda_symbol, Lambda_time, Lambda_total, SampleLattice, ScalarSymbol,
                          SymbolGrid, bracket_symbol, lambda_pk, omega, psi, symbol_derivative, tabulate,
                          verify_decay_orders, verify_lambda_estimates, x_bracket_symbol, xi_power_symbol)

from conftest import rel

# mpmath (30 digits) quadratures of the defining integrals, with psi rebuilt from the bump
S_QUARTER = 0.122967283277329078085734025563
S_POINT8 = 0.930596279499895927573240163475
INT_FLAT = 2.46815586255968326187463778394      # int_0^5 <y>^-0.9 dy
INT_CUT_K1 = 2.9255228631699250055947605334     # int_0^9 <y>^-0.9  psi(<y>/10) dy
INT_CUT_K2 = 4.46875719185066849208843429597     # int_0^9 <y>^-0.45 psi(<y>/10) dy


def kdv_with(**kw):
    return preset_config("kdv3", **{"M": (0.7, 0.9), **kw})


# -- cutoffs --------------------------------------------------------------

def test_omega_examples(kdv_cfg):
    assert omega(0.5, kdv_cfg, 1) == 0.0
    assert omega(3.0, kdv_cfg, 1) == -1.0
    assert omega(3.0, kdv_cfg, -1) == 1.0
    assert -1 < omega(1.5, kdv_cfg, 1) < 0
    # the bump is even, so the step passes 1/2 at the midpoint
    assert omega(1.5, kdv_cfg, 1) == pytest.approx(-0.5, abs=1e-12)
    assert omega(1.25, kdv_cfg, 1) == pytest.approx(-S_QUARTER, abs=1e-12)


def test_omega_monotone_on_transition(kdv_cfg):
    xi = np.linspace(0.0, 3.0, 3001)
    w = omega(xi, kdv_cfg, 1)
    assert np.all(np.diff(w) <= 0)
    assert np.all(w[xi <= 1] == 0) and np.all(w[xi >= 2] == -1)


def test_omega_even_p_carries_frequency_sign():
    cfg = preset_config("schrodinger2")
    assert omega(3.0, cfg, 1) == -1.0 and omega(-3.0, cfg, 1) == 1.0
    cfg3 = preset_config("kdv3")
    assert omega(-3.0, cfg3, 1) == omega(3.0, cfg3, 1)


def test_psi_examples():
    assert psi(0.3) == 1.0
    assert psi(1.2) == 0.0
    assert 0 < psi(0.75) < 1
    assert psi(0.75) == pytest.approx(0.5, abs=1e-12)
    assert psi(0.9) == pytest.approx(1 - S_POINT8, abs=1e-12)
    y = np.linspace(-1.5, 1.5, 601)
    v = psi(y)
    assert np.all((v >= 0) & (v <= 1))
    assert np.array_equal(v, psi(-y))


def test_cutoff_derivatives_match_finite_differences():
    t = np.linspace(0.05, 0.95, 19)
    d = smooth_step(t, 3)
    step = 1e-5
    for k in range(1, 4):
        fd = (smooth_step(t + step, k - 1)[k - 1] - smooth_step(t - step, k - 1)[k - 1]) / (2 * step)
        assert rel(d[k], fd) < 1e-6


def test_cutoff_factorial_estimates_fit():
    y = np.linspace(-1.2, 1.2, 4001)
    fit = gevrey_fit(psi_jet(y, 4), mu=1.125)
    assert 0 < fit["C"] < np.inf and set(fit["per_order"]) == {1, 2, 3, 4}


# -- lambda_{p-k} ------------------------------------------------------------

def test_lambda_flat_region_matches_quadrature_oracle():
    cfg = preset_config("kdv3", M=(1.0, 1.0), h=10.0)
    xi = 10.0 * cfg.R_ap + 1e-3
    v = lambda_pk(1, 5.0, xi, cfg, sign_ap=-1)
    assert v == pytest.approx(INT_FLAT, rel=1e-9)
    assert 0 < v <= cfg.M_of(1) / (1 - cfg.sigma) * bracket_h(xi, cfg.h) ** (2 * (1 - cfg.sigma))


@pytest.mark.parametrize("k,integral", [(1, INT_CUT_K1), (2, INT_CUT_K2)])
def test_lambda_cutoff_region_matches_quadrature_oracle(k, integral):
    cfg = preset_config("kdv3", M=(1.0, 1.0), h=1.0)
    v = lambda_pk(k, 9.0, 3.0, cfg, sign_ap=1)
    assert v == pytest.approx(-integral * np.sqrt(10.0) ** (1 - k), rel=1e-9)


def test_lambda_vanishes_on_axes():
    cfg = kdv_with(h=4.0)
    lf = LambdaField(cfg)
    x = np.linspace(-10, 10, 41)
    xi = np.linspace(-4.0, 4.0, 33)  # |xi| <= h
    for k in (1, 2):
        assert np.all(lf.value(k, x, xi) == 0)
        assert np.all(lf.value(k, np.array([0.0]), np.linspace(-40, 40, 81)) == 0)


@given(st.floats(-10, 10), st.floats(8.01, 40.0), st.sampled_from([1, -1]), st.sampled_from([1, 2]))
def test_lambda_sign_structure(x, xi, sign_ap, k):
    cfg = kdv_with(h=4.0)
    v = lambda_pk(k, x, xi, cfg, sign_ap)
    if x == 0:
        assert v == 0
    else:
        assert np.sign(v) == -sign_ap * np.sign(x)


def test_Lambda_total_sums_levels_and_reduces_for_p2():
    cfg = kdv_with(h=2.0)
    x, xi = np.linspace(-8, 8, 17), np.linspace(-30, 30, 25)
    tot = Lambda_total(x, xi, cfg)
    assert rel(tot, lambda_pk(1, x, xi, cfg) + lambda_pk(2, x, xi, cfg)) < 1e-14
    assert np.all(Lambda_total(np.array([0.0]), xi, cfg) == 0)
    cfg2 = preset_config("schrodinger2", M=(0.8,), h=2.0)
    assert np.array_equal(Lambda_total(x, xi, cfg2), lambda_pk(1, x, xi, cfg2))


def test_lambda_bound_i_pointwise():
    cfg = kdv_with(h=4.0)
    lf = LambdaField(cfg)
    x = np.linspace(-10, 10, 201)
    xi = np.linspace(-60, 60, 601)
    for k in (1, 2):
        m = (cfg.p - k) * (1 - cfg.sigma)
        bound = cfg.M_of(k) / (1 - cfg.decay(k)) * bracket_h(xi, cfg.h)[None, :] ** m
        assert np.all(np.abs(lf.value(k, x, xi)) <= bound)


# -- time weight ---------------------------------------------------------------

def test_Lambda_time_examples():
    cfg = kdv_with(K=2.0, h=3.0)
    xi = np.linspace(-20, 20, 41)
    b = bracket_h(xi, 3.0)
    assert np.array_equal(Lambda_time(cfg.T, xi, cfg), cfg.rho_prime * b ** 0.5)
    assert Lambda_time(0.03, 0.0, cfg) == pytest.approx(
        2.0 * (cfg.T - 0.03) * 3.0 ** cfg.kappa_order + cfg.rho_prime * 3.0 ** 0.5, rel=1e-15)
    zero = GevreyConfig(3, 0.9, 1.5, 2.0, 0.1, 1.0, 1e-300, K=0.0)
    assert np.max(Lambda_time(0.05, xi, zero)) < 1e-290
    with pytest.raises(ValueError):
        Lambda_time(cfg.T * 1.5, xi, cfg)


@given(st.floats(0, 0.1), st.floats(0, 0.1), st.floats(0, 10), st.floats(-100, 100))
def test_Lambda_time_decreasing_and_positive(t1, t2, K, xi):
    cfg = kdv_with(K=K)
    lo, hi = sorted((t1, t2))
    assert Lambda_time(lo, xi, cfg) >= Lambda_time(hi, xi, cfg) >= Lambda_time(cfg.T, xi, cfg)
    assert Lambda_time(hi, xi, cfg) >= cfg.rho_prime * cfg.h ** (1 / cfg.theta)


# -- symbols and derivatives -------------------------------------------------------

def test_bracket_symbol_derivative():
    s = bracket_symbol(3.0)
    xi = np.linspace(-10, 10, 21)
    d = symbol_derivative(s, 1, 0, np.array([0.0]), xi)
    assert rel(d[0], xi / bracket_h(xi, 3.0)) < 1e-14
    assert np.array_equal(symbol_derivative(s, 0, 0, np.array([1.0]), xi), s.eval(np.array([1.0]), xi))


def test_Lambda_x_derivative_by_fundamental_theorem():
    cfg = kdv_with(h=4.0)
    lf = LambdaField(cfg)
    x, xi = np.linspace(-10, 10, 21), np.linspace(9, 40, 16)
    d = symbol_derivative(Lambda_symbol(cfg), 0, 1, x, xi)
    exact = sum(lf.dx_exact(k, x, xi) for k in (1, 2))
    assert rel(d, exact) < 1e-12
    # where psi = 1 and omega = -1 the derivative is the bare product
    bx = np.sqrt(1 + x * x)[:, None]
    bare = -sum(cfg.M_of(k) * bracket_h(xi, 4.0)[None, :] ** (1 - k) * bx ** (-cfg.decay(k)) for k in (1, 2))
    assert rel(exact, bare) < 1e-14


def test_Lambda_xi_derivative_against_finite_differences():
    cfg = kdv_with(h=4.0)
    lf = LambdaField(cfg)
    fd_sym = ScalarSymbol(eval_fn=lambda X, XI: lf.Lambda_jet(X.ravel(), XI.ravel()).value)
    x = np.linspace(-10, 10, 11)
    xi = np.linspace(cfg.R_ap * cfg.h + 1.5, 40, 12)
    analytic = symbol_derivative(Lambda_symbol(cfg), 1, 0, x, xi)
    fd = symbol_derivative(fd_sym, 1, 0, x, xi, step=1e-3)
    assert rel(fd, analytic) < 1e-6


def test_finite_difference_fallback_on_smooth_symbol():
    s = ScalarSymbol(eval_fn=lambda X, XI: np.sin(X) * XI ** 3)
    x, xi = np.linspace(-2, 2, 5), np.linspace(1, 3, 5)
    d = symbol_derivative(s, 2, 1, x, xi)
    assert rel(d, np.cos(x)[:, None] * 6 * xi[None, :]) < 1e-6
    with pytest.raises(ValueError):
        symbol_derivative(s, 4, 3, x, xi)


def test_tabulate_examples():
    g = Grid(5.0, 16)
    assert np.all(tabulate(ScalarSymbol.constant(1.0), g).table == 1)
    t = tabulate(xi_power_symbol(1), g).table
    assert np.linalg.matrix_rank(t) == 1 and np.array_equal(t[3], g.xi_nodes)
    cfg = kdv_with(h=1.0)
    lam = tabulate(Lambda_symbol(cfg), Grid(10.0, 32)).table
    g32 = Grid(10.0, 32)
    assert rel(lam, Lambda_total(g32.x_nodes, g32.xi_nodes, cfg)) < 1e-13
    with pytest.raises(ValueError):
        SymbolGrid(np.full((16, 16), np.nan), g)


def test_symbol_grid_csv(tmp_path):
    g = Grid(1.0, 8)
    sg = tabulate(lambda X, XI: X + 1j * XI, g)
    sg.to_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "x_index,xi_index,re,im" and len(rows) == 65
    i, j, re, im = rows[10].split(",")
    assert float(re) == g.x_nodes[int(i)] and float(im) == g.xi_nodes[int(j)]


# -- decay fits ------------------------------------------------------------------

def test_decay_fit_of_pure_power_laws():
    g = Grid(40.0, 512, 2.0)
    f = verify_decay_orders(tabulate(bracket_symbol(2.0, -2.0), g), -2.0, 0.0)
    assert f.passed and f.xi_slope == pytest.approx(-2.0, abs=0.05)
    f = verify_decay_orders(tabulate(x_bracket_symbol(0.9), g), 0.0, -0.9)
    assert f.passed and f.x_slope == pytest.approx(-0.9, abs=0.05)
    assert not verify_decay_orders(tabulate(bracket_symbol(2.0, 1.0), g), 0.0, 0.0).passed


def test_decay_fit_inconclusive_on_zero_table():
    g = Grid(10.0, 64)
    f = verify_decay_orders(SymbolGrid(np.zeros((64, 64)), g), -1, -1)
    assert f.inconclusive and not f.passed


# -- estimate family -------------------------------------------------------------

def test_lambda_estimates_report():
    cfg = kdv_with(h=4.0)
    lat = SampleLattice(10.0, 40.0, 33, 129)
    for k in (1, 2):
        rep = verify_lambda_estimates(k, cfg, lat)
        assert rep.bound_i["passed"]
        assert rep.bound_i["max_ratio"] <= cfg.M_of(k) / (1 - cfg.decay(k))
        shapes = {r["shape"] for r in rep.constants}
        assert shapes == {"i", "ii", "iii", "iv", "v"}
        assert all(np.isfinite(r["C"]) for r in rep.constants)
        v1 = [r for r in rep.constants if r["shape"] == "v" and r["alpha"] == 0 and r["beta"] == 1][0]
        # first x-derivative constant against M_{p-k} sup|omega| = M_{p-k}
        assert 0.5 * cfg.M_of(k) <= v1["C"] ** 2 <= 2 * cfg.M_of(k)


def test_config_invariants():
    with pytest.raises(ConfigError):
        preset_config("kdv3", sigma=0.4)
    with pytest.raises(ConfigError):
        preset_config("kdv3", theta=6.0)
    with pytest.raises(ConfigError):
        preset_config("kdv3", rho_prime=2.0)
    with pytest.raises(ConfigError):
        preset_config("kdv3", M=(1.0, 0.0))
    with pytest.raises(ConfigError):
        preset_config("kdv3", M=(1.0,))
    with pytest.raises(ConfigError):
        preset_config("nope")
    with pytest.raises(ConfigError):
        kdv_with().check_overflow(1e8)
