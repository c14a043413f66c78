import numpy as np
import pytest

from smoltt.coag import OperatorWorkspace
from smoltt.dense import dense_initial, dense_solve, dense_step, kernel_function
from smoltt.integrator import SolverConfig, SolverError, relative_error_vs_analytic, rhs, solve, step
from smoltt.kernels import analytic_grid_2d, build_kernel, exponential_rank_one
from smoltt.optim import dense_scan_extrema
from smoltt.tt import Grid, TTTensor, tt_from_rank_one, tt_full, tt_zeros


@pytest.mark.parametrize("kw", [
    dict(tau=0.0), dict(tau=0.2, t_end=0.1), dict(t_end=0.25, tau=0.1), dict(correction_interval=-1),
    dict(kernel="brownian"), dict(scheme="rk4"), dict(initial="gauss"), dict(eps_cross=0.0),
    dict(eps_round=-1.0), dict(N=1),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_config_resolution():
    c = SolverConfig(eps_cross=1e-6)
    assert c.resolved_eps_round == pytest.approx(1e-7)
    assert c.resolved_final_correction is False
    assert SolverConfig(source_enabled=True).resolved_final_correction is True
    r = SolverConfig(source_enabled=True).resolved()
    assert r.eps_round is not None and r.final_correction is True
    assert SolverConfig(t_end=5.0, tau=0.1).n_steps == 50


def _parts(N=32, v_max=10.0, kernel="constant", eps=1e-12):
    g = Grid(2, N, v_max)
    return g, build_kernel(kernel, g), OperatorWorkspace.for_grid(g, eps)


def test_rhs_trivial_cases():
    g, K, ws = _parts()
    z = tt_zeros(2, g.N)
    assert not np.any(tt_full(rhs(z, K, None, g, ws)))
    q = exponential_rank_one(g, "source")
    np.testing.assert_allclose(tt_full(rhs(z, K, q, g, ws)), tt_full(q), rtol=1e-14)


def test_rhs_matches_dense():
    g, K, ws = _parts()
    n = exponential_rank_one(g)
    from smoltt.dense import dense_L1, dense_L2
    Kf = kernel_function("constant", g)
    N0 = dense_initial(g)
    ref = 0.5 * dense_L1(N0, Kf, g).values - N0 * dense_L2(N0, Kf, g).values
    got = tt_full(rhs(n, K, None, g, ws))
    assert np.abs(got - ref).max() <= 1e-10 * np.abs(ref).max()


@pytest.mark.parametrize("scheme", ["printed", "midpoint"])
def test_step_matches_dense(scheme):
    g, K, ws = _parts(eps=1e-10)
    n = exponential_rank_one(g)
    got = tt_full(step(n, K, None, g, ws, 0.1, scheme))
    ref = dense_step(dense_initial(g), kernel_function("constant", g), np.zeros(g.mode_sizes), g, 0.1, scheme)
    assert np.abs(got - ref).max() <= 10 * 1e-10 * np.abs(ref).max()


def test_step_rejects_unknown_scheme():
    g, K, ws = _parts()
    with pytest.raises(ValueError):
        step(exponential_rank_one(g), K, None, g, ws, 0.1, "euler")


def test_zero_kernel_exactness():
    cfg = SolverConfig(N=20, v_max=10.0, tau=0.1, t_end=2.0, kernel="zero", source_enabled=True,
                       initial="zero", final_correction=False)
    q = tt_full(exponential_rank_one(cfg.grid, "source"))
    states = []
    solve(cfg, callback=lambda rec, s: states.append(tt_full(s)))
    for k, s in enumerate(states, 1):
        np.testing.assert_allclose(s, k * cfg.tau * q, rtol=1e-13, atol=1e-16)


def test_zero_kernel_without_source_is_stationary():
    cfg = SolverConfig(N=20, v_max=10.0, tau=0.1, t_end=1.0, kernel="zero")
    n, diags = solve(cfg)
    np.testing.assert_allclose(tt_full(n), tt_full(exponential_rank_one(cfg.grid)), rtol=1e-13)
    assert len({round(d.total_density, 13) for d in diags}) == 1


def test_agrees_with_dense_solver():
    cfg = SolverConfig(N=32, v_max=10.0, tau=0.1, t_end=1.0, eps_cross=1e-10, correction_interval=0)
    n, diags = solve(cfg)
    traj, mom = dense_solve(cfg)
    assert np.abs(tt_full(n) - traj[-1].values).max() <= 50 * cfg.resolved_eps_round * np.abs(traj[-1].values).max()
    np.testing.assert_allclose([d.total_density for d in diags], mom.density[1:], rtol=1e-9)
    np.testing.assert_allclose([d.total_mass for d in diags], mom.mass[1:], rtol=1e-9)


def test_diagnostics_cadence():
    cfg = SolverConfig(N=24, v_max=10.0, tau=0.1, t_end=1.2, correction_interval=5)
    _, diags = solve(cfg)
    assert [d.step for d in diags] == list(range(1, 13))
    checked = [d.step for d in diags if not np.isnan(d.min_estimate)]
    assert checked == [5, 10, 12]
    assert all(d.wall_time_ms >= 0 for d in diags)
    assert all(not d.correction_applied for d in diags if d.step not in (5, 10))


def test_final_correction_applied_once():
    # no periodic checks; one correction after the last step
    cfg = SolverConfig(N=64, v_max=20.0, tau=0.1, t_end=10.0, correction_interval=0, final_correction=True)
    n, diags = solve(cfg)
    assert [d.step for d in diags if d.correction_applied] == [100]
    assert dense_scan_extrema(n)[0] == 0.0


def test_relative_error_self_comparison():
    g = Grid(2, 100, 20.0)
    exact = analytic_grid_2d(g, 1.0)
    u, s, vt = np.linalg.svd(exact)
    r = int((s > 1e-15 * s[0]).sum())
    x = TTTensor([(u[:, :r] * s[:r]).reshape(1, g.N, r), vt[:r].reshape(r, g.N, 1)])
    frob, dens = relative_error_vs_analytic(x, 1.0, g)
    assert frob < 1e-13
    assert dens < 1e-2


def test_relative_error_argument_checks():
    g = Grid(3, 4, 1.0)
    with pytest.raises(ValueError):
        relative_error_vs_analytic(exponential_rank_one(g), 1.0, g)
    g2 = Grid(2, 4, 1.0)
    with pytest.raises(ValueError):
        relative_error_vs_analytic(exponential_rank_one(g2), 1.0, g2, kernel="ballistic")


def test_solver_error_carries_state(monkeypatch):
    import smoltt.integrator as integ
    calls = {"n": 0}
    real_step = integ.step

    def failing(*a, **k):
        calls["n"] += 1
        if calls["n"] == 3:
            raise FloatingPointError("boom")
        return real_step(*a, **k)

    monkeypatch.setattr(integ, "step", failing)
    with pytest.raises(SolverError) as exc:
        solve(SolverConfig(N=16, v_max=8.0, tau=0.1, t_end=1.0))
    assert exc.value.step == 2
    assert exc.value.state.mode_sizes == (16, 16)


def test_rank_stays_small_for_short_constant_run():
    n, diags = solve(SolverConfig(N=200, tau=0.1, t_end=1.0))
    assert max(d.max_rank for d in diags) <= 8
