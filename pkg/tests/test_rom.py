import numpy as np
import pytest

import pmorkit.solver as solver_mod
from pmorkit.errors import InvalidInputError
from pmorkit.metrics import eps_inf_inf
from pmorkit.pod import pod_basis, rank_of
from pmorkit.rom import ReducedState, check_basis, run_rom, step_rom
from pmorkit.solver import CoupledModel, Scenario, TimeIntegrator, run_fom

SHORT = Scenario(integrator=TimeIntegrator(t_end=0.32))


@pytest.fixture(scope="module")
def short_fom():
    return run_fom(SHORT)


def _state_before(model, k):
    s = model.initial_state()
    for j in range(1, k):
        s, _, _ = model.step(s, j * model.dt)
    return s


def test_identity_basis_matches_fom_step():
    model = CoupledModel(SHORT)
    prev = _state_before(model, 290)
    t = 290 * model.dt
    full, _, _ = model.step(prev, t)
    red, rs, _ = step_rom(prev, np.eye(model.n), t, model=model)
    np.testing.assert_allclose(red.d, full.d, atol=1e-9)
    np.testing.assert_allclose(red.p, full.p, atol=1e-9)
    assert rs.p.shape == (4,)


def test_single_mode_step_converges(short_fom):
    _, snaps = short_fom
    model = CoupledModel(SHORT)
    V = pod_basis(snaps, 1).V
    prev = model.initial_state(V)
    state, rs, it = step_rom(prev, V, model.dt, model=model)
    assert it >= 1 and rs.d_r.shape == (1,) and rs.p.shape == (4,)
    np.testing.assert_allclose(rs.lifted, V @ rs.d_r, atol=1e-12)


def test_galerkin_consistency_post_hoc(short_fom):
    _, snaps = short_fom
    model = CoupledModel(SHORT)
    V = pod_basis(snaps, 8).V
    prev = model.initial_state(V)
    for j in range(1, 280):
        prev, _, _ = step_rom(prev, V, j * model.dt, model=model)
    t = 280 * model.dt
    state, _, _ = step_rom(prev, V, t, model=model)
    RS, R0, _ = model.residuals(state.d, state.p, prev, state.tau, t, jacobian=False)
    assert np.max(np.abs(V.T @ RS)) < SHORT.tolerances.tol_s_res
    assert np.linalg.norm(R0) < SHORT.tolerances.tol_0d_res


def test_full_rank_basis_reproduces_fom(short_fom):
    traj, snaps = short_fom
    q = rank_of(snaps)
    rom, _ = run_rom(None, pod_basis(snaps, q), SHORT)
    assert eps_inf_inf(rom, traj) <= 10 * SHORT.tolerances.tol_s_inc


def test_basis_invariance(short_fom):
    _, snaps = short_fom
    V = pod_basis(snaps, 6).V
    Q = np.linalg.qr(np.random.default_rng(2).standard_normal((6, 6)))[0]
    a, _ = run_rom(None, V, SHORT)
    b, _ = run_rom(None, V @ Q, SHORT)
    assert eps_inf_inf(a, b) < 1e-8


def test_reduced_system_dimension(short_fom, monkeypatch):
    _, snaps = short_fom
    V = pod_basis(snaps, 5).V
    shapes = []
    real = solver_mod.solve_dense

    def spy(a, b):
        shapes.append(a.shape)
        return real(a, b)

    monkeypatch.setattr(solver_mod, "solve_dense", spy)
    model = CoupledModel(SHORT)
    step_rom(model.initial_state(V), V, model.dt, model=model)
    assert shapes and all(s == (9, 9) for s in shapes[1:])  # first call is the reduced mass solve


def test_timing_breakdown(short_fom):
    _, snaps = short_fom
    rom, rs = run_rom(None, pod_basis(snaps, 4), SHORT)
    total = sum(rom.timings.values())
    assert total == pytest.approx(rom.wall_time, rel=0.05)
    assert rom.q == 4 and rom.pressures.shape[1] == 4
    assert rs.n_s == SHORT.integrator.n_steps


def test_initial_condition_is_projection(short_fom):
    _, snaps = short_fom
    V = pod_basis(snaps, 3).V
    model = CoupledModel(SHORT)
    s0 = model.initial_state(V)
    rs = ReducedState.from_state(s0, V)
    np.testing.assert_allclose(rs.d_r, V.T @ s0.d)


def test_check_basis_errors():
    with pytest.raises(InvalidInputError):
        check_basis(np.ones((200, 2)), 200)
    with pytest.raises(InvalidInputError):
        check_basis(np.eye(10)[:, :2], 200)
    with pytest.raises(InvalidInputError):
        ReducedState(np.array([np.nan]), np.zeros(4), np.zeros(2))
