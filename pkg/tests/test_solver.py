import numpy as np
import pytest

from uqboltz.errors import BlowUpError, DomainError, UsageError
from uqboltz.gpc import GpcField, build_s_tensor, project_z, reconstruct
from uqboltz.kernel import AffineFactor, ConstantFactor, maxwell_kernel
from uqboltz.oracle import BkwParams, bkw
from uqboltz.quadrature import default_rule, gauss_legendre
from uqboltz.solver import SolverConfig, default_dt, run, run_collocation, step_deterministic
from uqboltz.spectral import SpectralField, constant_field, l2_norm, project_initial, random_real_field
from uqboltz.weights import collision_rhs
from tests.conftest import main_domain, restricted, small_domain

BKW = BkwParams(T=0.65, t0=20.0)


def _bkw_field(dom, p=BKW, t=0.0):
    return project_initial(lambda v, z: bkw(t, v, p), 0.0, dom, default_rule(dom))


def test_config_validation():
    with pytest.raises(DomainError):
        SolverConfig(-0.1, 1.0)
    with pytest.raises(DomainError):
        SolverConfig(0.5, 0.1)
    with pytest.raises(DomainError):
        SolverConfig(0.1, 1.0, "midpoint")
    with pytest.raises(DomainError):
        SolverConfig(0.1, 1.0, record_every=0)
    cfg = SolverConfig(0.3, 1.0)
    assert cfg.n_steps == 4
    assert np.sum(cfg.step_sizes()) == pytest.approx(1.0)


def test_equilibrium_is_stationary(table_small6):
    G = table_small6
    f = constant_field(G.domain, 0.02)
    assert np.array_equal(step_deterministic(f, G, 0.1).coeffs, f.coeffs)
    tr = run(f, G, None, SolverConfig(0.05, 1.0))
    assert np.max(np.abs(tr.final.coeffs - f.coeffs)) <= 1e-13
    assert np.ptp(tr.column("l1")) == 0.0


def test_euler_step_by_hand(maxwell):
    from uqboltz.weights import precompute_weights

    dom = small_domain(2)
    G = precompute_weights(maxwell, dom, default_rule(dom))
    f = random_real_field(dom, np.random.default_rng(1), mean=1.0)
    dt = 0.05
    expect = f.coeffs + dt * collision_rhs(G, f).coeffs
    assert np.allclose(step_deterministic(f, G, dt, "euler").coeffs, expect, rtol=0, atol=1e-16)


@pytest.mark.slow
def test_rk4_step_matches_bkw_time_derivative(table24):
    p = BkwParams(T=0.65, t0=2.0)
    dom = table24.domain
    f0 = _bkw_field(dom, p)
    h = 1e-4
    dfdt = (_bkw_field(dom, p, h) - _bkw_field(dom, p, -h)) * (0.5 / h)
    rhs0 = collision_rhs(table24, f0)
    # the spectral right-hand side reproduces the projected time derivative
    assert l2_norm(rhs0 - dfdt) <= 1e-2 * l2_norm(dfdt)
    defects = []
    for dt in (1e-3, 5e-4):
        step = step_deterministic(f0, table24, dt) - f0
        assert l2_norm(step - dfdt * dt) <= dt * l2_norm(rhs0 - dfdt) + 1e-3 * dt**2
        defects.append(l2_norm(step - rhs0 * dt))
    # what is left after the first-order term shrinks like dt^2
    assert 3.5 <= defects[0] / defects[1] <= 4.5


def test_snapshot_count_and_time_grid(table_small6, rng):
    G = table_small6
    f = random_real_field(G.domain, rng, mean=0.5) * 0.01
    tr = run(f, G, None, SolverConfig(0.01, 0.1, record_every=3))
    assert len(tr.diagnostics) == 10 // 3 + 1
    assert np.all(np.diff(tr.times) > 0)
    assert tr.steps == 10


def test_run_checks_arguments(table_small6, rng):
    G = table_small6
    f = random_real_field(G.domain, rng)
    S = build_s_tensor(ConstantFactor(), 1, default_rule(G.domain, 1))
    with pytest.raises(UsageError):
        run(f, G, S, SolverConfig(0.1, 0.2))
    F = GpcField(G.domain, np.stack([f.coeffs, f.coeffs]))
    with pytest.raises(UsageError):
        run(F, G, None, SolverConfig(0.1, 0.2))
    with pytest.raises(UsageError):
        run(constant_field(small_domain(3), 1.0), G, None, SolverConfig(0.1, 0.2))


def test_blow_up_carries_partial_trajectory(table_small6, rng):
    G = table_small6
    f = random_real_field(G.domain, rng, mean=1.0) * 1e3
    with pytest.raises(BlowUpError) as info:
        run(f, G, None, SolverConfig(0.5, 50.0, "euler"))
    err = info.value
    assert err.t is not None and np.isfinite(err.norm)
    assert err.trajectory is not None and err.trajectory.failed
    assert len(err.trajectory.diagnostics) >= 1


def test_collocation_node_failure_is_isolated(table_small6, rng):
    G = table_small6
    f = random_real_field(G.domain, rng, mean=1.0)

    def f0(z):
        return f * (1e3 if z > 0.5 else 0.01)

    trs = run_collocation(f0, [-0.5, 0.9], G, SolverConfig(0.5, 6.0, "euler"), ConstantFactor(),
                          keep_states=False)
    assert not trs[0].failed and trs[1].failed
    with pytest.raises(DomainError):
        run_collocation(f0, [1.5], G, SolverConfig(0.1, 0.2), ConstantFactor())


def test_identical_nodes_give_identical_trajectories(table_small6, rng):
    G = table_small6
    f = random_real_field(G.domain, rng, mean=1.0) * 0.01
    trs = run_collocation(lambda z: f, [-0.3, 0.6], G, SolverConfig(0.05, 0.3), ConstantFactor())
    assert np.array_equal(trs[0].final.coeffs, trs[1].final.coeffs)


def test_half_rate_node_is_time_rescaled(table_small6, rng):
    G = table_small6
    f = random_real_field(G.domain, rng, mean=1.0) * 0.02
    lam = AffineFactor(0.5)  # lambda(-1) = 0.5
    slow = run_collocation(lambda z: f, [-1.0], G, SolverConfig(0.02, 0.4), lam)[0]
    fast = run(f, G, None, SolverConfig(0.01, 0.2))
    assert np.max(np.abs(slow.final.coeffs - fast.final.coeffs)) <= 1e-14 * np.max(np.abs(f.coeffs))


@pytest.mark.slow
def test_bkw_mass_drift(table24):
    G = restricted(table24, 16)
    tr = run(_bkw_field(G.domain), G, None, SolverConfig(0.01, 0.5), default_rule(G.domain),
             keep_states=False)
    assert tr.mass_drift <= 1e-12
    assert tr.final.real_valued


@pytest.mark.slow
def test_rk4_self_convergence(table24):
    G = restricted(table24, 16)
    f0 = _bkw_field(G.domain)
    finals = [run(f0, G, None, SolverConfig(dt, 0.5), keep_states=False).final for dt in (0.1, 0.05, 0.025)]
    factor = l2_norm(finals[0] - finals[1]) / l2_norm(finals[1] - finals[2])
    assert 12.0 <= factor <= 20.0


def test_galerkin_mean_matches_collocation_quadrature(maxwell):
    from uqboltz.weights import precompute_weights

    dom = main_domain(6)
    q = default_rule(dom, 8)
    G = precompute_weights(maxwell, dom, q)
    lam = AffineFactor(0.5)

    def f0(z):
        def g(v, _z):
            T = 1.0 + 0.2 * z
            return np.exp(-np.sum(v * v, axis=-1) / (2 * T)) / (2 * np.pi * T)
        return project_initial(g, z, dom, q)

    K = 8
    cfg = SolverConfig(0.02, 0.3)
    F0 = project_z(f0, K, q.with_(n_z=40))
    gal = run(F0, G, build_s_tensor(lam, K, q), cfg, q, keep_states=False)
    nodes, w = gauss_legendre(12)
    col = run_collocation(lambda z: reconstruct(F0, z), nodes, G, cfg, lam, q, keep_states=False)
    mean = sum(0.5 * wq * tr.final.coeffs for wq, tr in zip(w, col))
    assert np.max(np.abs(mean - gal.final.coeffs[0])) * dom.volume <= 1e-8
    assert gal.mass_drift <= 1e-12


def test_default_dt_scales_inversely_with_l1(table_small6):
    dom = table_small6.domain
    q = default_rule(dom)
    f = constant_field(dom, 0.05)
    a = default_dt(maxwell_kernel(), f, q)
    b = default_dt(maxwell_kernel(), f * 2.0, q)
    assert a == pytest.approx(2.0 * b)
    assert SolverConfig(a, 1.0).stability_margin(0.01 / (a * 0.05 * dom.volume), 0.05 * dom.volume) \
        == pytest.approx(0.01)


def test_reality_flag_is_preserved(table_small6, rng):
    G = table_small6
    f = random_real_field(G.domain, rng, mean=1.0) * 0.01
    tr = run(f, G, None, SolverConfig(0.05, 0.2))
    assert all(s.real_valued for s in tr.states)
    assert isinstance(tr.final, SpectralField)
