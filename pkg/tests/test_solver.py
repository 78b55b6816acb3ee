import numpy as np
import pytest

from pmorkit.errors import NonConvergenceError
from pmorkit.solver import (CoupledModel, Scenario, SolverTolerances, State, TimeIntegrator,
                            run_fom, step_coupled)
from pmorkit.windkessel import AtrialParams, WindkesselParams


def _quiet():
    sc = Scenario(windkessel=WindkesselParams(atrial=AtrialParams(p_pulse=0.0)))
    return sc.with_activation(sigma=0.0)


def test_generalized_alpha_parameters():
    ti = TimeIntegrator(rho_inf=0.8)
    assert ti.alpha_m == pytest.approx(0.6 / 1.8)
    assert ti.alpha_f == pytest.approx(0.8 / 1.8)
    assert ti.beta == pytest.approx(0.25 * (1 - ti.alpha_m + ti.alpha_f) ** 2)
    assert ti.gamma == pytest.approx(0.5 - ti.alpha_m + ti.alpha_f)
    assert TimeIntegrator().n_steps == 800


def test_zero_loads_stay_at_rest_in_one_iteration():
    sc = _quiet()
    model = CoupledModel(sc)
    s0 = model.initial_state()
    s1, it = step_coupled(s0, sc.integrator.dt, sc, model=model)
    assert it == 1
    np.testing.assert_allclose(s1.d, 0.0, atol=1e-14)
    np.testing.assert_allclose(s1.p, s0.p, atol=1e-14)


def test_reentering_converged_step(scenario):
    model = CoupledModel(scenario)
    s = model.initial_state()
    for j in range(1, 300):
        s, _, _ = model.step(s, j * scenario.integrator.dt)
    prev = s
    t = 300 * scenario.integrator.dt
    s1, it1, _ = model.step(prev, t)
    s2, it2, hist = model.step(prev, t, guess=s1)
    assert it2 == 1
    np.testing.assert_allclose(s2.d, s1.d, atol=1e-9)
    assert hist[0]["inc_s"] < scenario.tolerances.tol_s_inc


def test_newton_converges_quadratically(scenario):
    """|d_{i+1}| <= C |d_i|^2 over the last increments above round-off."""
    model = CoupledModel(scenario)
    s = model.initial_state()
    consts = []
    for j in range(1, 300):
        s_new, it, hist = model.step(s, j * scenario.integrator.dt)
        if it >= 4 and j > 250:
            inc = [h["inc_s"] for h in hist if h["inc_s"] > 1e-14]
            consts += [c / b**2 for b, c in zip(inc[-3:-1], inc[-2:])]
        s = s_new
    assert len(consts) >= 10
    # linear convergence from 1e-10 would need C ~ 1e9 or more
    assert max(consts) < 1e6


def test_coupled_jacobian_fd(scenario):
    model = CoupledModel(scenario)
    s = model.initial_state()
    for j in range(1, 281):
        s, _, _ = model.step(s, j * scenario.integrator.dt)
    t = 281 * scenario.integrator.dt
    rng = np.random.default_rng(7)
    d = s.d + 1e-3 * rng.standard_normal(s.d.size)
    p = s.p + 1e-3 * rng.standard_normal(4)
    R, K = model.system(d, p, s, t)
    x = np.concatenate([d, p])
    n = d.size
    fd = np.empty_like(K)
    for j in range(n + 4):
        h = 1e-6 * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        fd[:, j] = (model.system(xp[:n], xp[n:], s, t)[0]
                    - model.system(xm[:n], xm[n:], s, t)[0]) / (2 * h)
    assert np.max(np.abs(K - fd)) / np.max(np.abs(K)) < 1e-5


def test_snapshot_bookkeeping():
    sc = Scenario(integrator=TimeIntegrator(t_end=3e-3))
    traj, snaps = run_fom(sc)
    assert snaps.n_s == 3 and snaps.n == 200
    assert traj.displacements.shape == (4, 200)
    assert np.all(np.diff(traj.times) > 0)
    np.testing.assert_array_equal(snaps.data, traj.displacements[1:].T)


def test_no_contraction_stays_at_rest():
    sc = _quiet()
    traj, snaps = run_fom(Scenario(**{**sc.__dict__, "integrator": TimeIntegrator(t_end=0.1)}))
    assert np.max(np.abs(snaps.data)) < 1e-10


def test_default_volume_curve(default_fom):
    traj, _ = default_fom
    V = traj.volumes
    t = traj.times
    i_min = int(np.argmin(V))
    # one systolic dip: monotone decrease into the minimum, refilling afterwards
    assert 0.25 < t[i_min] < 0.6
    assert V[-1] > 0.9 * V[0]
    ef = (V.max() - V.min()) / V.max()
    assert 0.4 <= ef <= 0.7
    assert traj.wall_time > 0
    assert set(traj.timings) == {"element", "linear", "other"}


def test_deterministic(default_fom, scenario):
    traj2, _ = run_fom(scenario)
    np.testing.assert_array_equal(default_fom[0].displacements, traj2.displacements)
    np.testing.assert_array_equal(default_fom[0].pressures, traj2.pressures)


def test_nonconvergence_reports_step():
    sc = Scenario(tolerances=SolverTolerances(max_newton=1))
    with pytest.raises(NonConvergenceError) as exc:
        run_fom(sc)
    assert exc.value.step is not None and exc.value.history


def test_second_order_in_time():
    """Linear oscillator m a + k d = 0 marched with the solver's kinematics."""
    sc = Scenario()
    m, k = 1.0, 400.0
    T = 0.5

    def march(dt):
        model = CoupledModel(Scenario(integrator=TimeIntegrator(dt=dt, rho_inf=sc.integrator.rho_inf)))
        am, af = model.am, model.af
        d0 = np.array([1.0])
        prev = State(0.0, d0, np.zeros(1), -k / m * d0, 0.0, np.zeros(4), 0.0)
        for j in range(int(round(T / dt))):
            # residual is linear in d: solve m a_m + k d_m = 0 exactly
            def res(d):
                v, a = model.kinematics(d, prev)
                return m * ((1 - am) * a + am * prev.a) + k * ((1 - af) * d + af * prev.d)
            r0 = res(prev.d)
            slope = m * model.c_m + k * model.c_k
            d = prev.d - r0 / slope
            v, a = model.kinematics(d, prev)
            prev = State((j + 1) * dt, d, v, a, 0.0, prev.p, 0.0)
        return prev.d[0]

    exact = np.cos(np.sqrt(k / m) * T)
    e1 = abs(march(2e-3) - exact)
    e2 = abs(march(1e-3) - exact)
    assert 3.5 <= e1 / e2 <= 4.5
