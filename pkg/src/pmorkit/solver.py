"""Monolithic Newton solve of the coupled chamber/windkessel system.

The structure is integrated with the generalized-alpha method (Newmark
kinematics, mid-point evaluation of inertia and forces); the windkessel
uses its own one-step-theta residual at the end of the step. Each step
solves the 2x2 block system

    [ dRS/dd   dRS/dp ] [dd]     [RS ]
    [ dR0/dd   dR0/dp ] [dp] = - [R0 ]

until the four residual/increment criteria hold. Passing a projection
matrix ``V`` switches to the Galerkin-reduced variant (see :mod:`.rom`).
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .activation import ActivationParams, step_tau
from .chamber import (ChamberMaterial, ChamberMesh, ChamberModel, cavity_volume,
                      polygon_is_simple, volume_increment)
from .errors import DegenerateGeometryError, InvalidInputError, NonConvergenceError, PmorError
from .linalg import solve_dense
from .windkessel import WindkesselParams, _wk, equilibrium_state

__all__ = [
    "TimeIntegrator",
    "SolverTolerances",
    "Scenario",
    "State",
    "Trajectory",
    "CoupledModel",
    "step_coupled",
    "run_fom",
]


@dataclass(frozen=True)
class TimeIntegrator:
    dt: float = 1e-3
    t_end: float = 0.8
    rho_inf: float = 0.8
    theta: float = 1.0

    def __post_init__(self):
        if not self.dt > 0 or not self.t_end > 0:
            raise InvalidInputError("dt and t_end must be positive")
        if not 0.0 <= self.rho_inf <= 1.0:
            raise InvalidInputError("rho_inf must lie in [0, 1]")
        if not 0.5 <= self.theta <= 1.0:
            raise InvalidInputError("theta must lie in [0.5, 1]")

    @property
    def alpha_m(self):
        return (2.0 * self.rho_inf - 1.0) / (self.rho_inf + 1.0)

    @property
    def alpha_f(self):
        return self.rho_inf / (self.rho_inf + 1.0)

    @property
    def beta(self):
        return 0.25 * (1.0 - self.alpha_m + self.alpha_f) ** 2

    @property
    def gamma(self):
        return 0.5 - self.alpha_m + self.alpha_f

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class SolverTolerances:
    tol_s_res: float = 1e-6
    tol_s_inc: float = 1e-8
    tol_0d_res: float = 1e-8
    tol_0d_inc: float = 1e-8
    max_newton: int = 25

    def __post_init__(self):
        if min(self.tol_s_res, self.tol_s_inc, self.tol_0d_res, self.tol_0d_inc) <= 0:
            raise InvalidInputError("tolerances must be positive")
        if self.max_newton < 1:
            raise InvalidInputError("max_newton must be at least 1")


@dataclass(frozen=True)
class Scenario:
    """Everything needed to run one forward simulation."""

    mesh: ChamberMesh = field(default_factory=ChamberMesh)
    material: ChamberMaterial = field(default_factory=ChamberMaterial)
    windkessel: WindkesselParams = field(default_factory=WindkesselParams)
    activation: ActivationParams = field(default_factory=ActivationParams)
    integrator: TimeIntegrator = field(default_factory=TimeIntegrator)
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)

    def with_activation(self, **values) -> "Scenario":
        return replace(self, activation=replace(self.activation, **values))

    def to_dict(self):
        return asdict(self)


@dataclass
class State:
    """Converged state at one time instant."""

    t: float
    d: np.ndarray
    v: np.ndarray
    a: np.ndarray
    tau: float
    p: np.ndarray
    volume: float


@dataclass
class Trajectory:
    times: np.ndarray
    displacements: np.ndarray  # (steps + 1, n), row 0 is the initial state
    pressures: np.ndarray      # (steps + 1, 4)
    volumes: np.ndarray
    newton_iters: np.ndarray
    wall_time: float
    timings: dict = field(default_factory=dict)
    q: int | None = None
    final_state: State | None = None

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1


class CoupledModel:
    """Residual/Jacobian assembly and Newton stepping for one scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.chamber = ChamberModel(scenario.mesh, scenario.material)
        self.n = self.chamber.n
        integ = scenario.integrator
        self.dt = integ.dt
        self.am, self.af = integ.alpha_m, integ.alpha_f
        self.beta, self.gamma = integ.beta, integ.gamma
        self.c_m = (1.0 - self.am) / (self.beta * self.dt**2)
        self.c_k = 1.0 - self.af
        self.c_c = (1.0 - self.af) * self.gamma / (self.beta * self.dt)
        self.timings = {"element": 0.0, "linear": 0.0}

    max_backtracks = 12

    # -- kinematics ------------------------------------------------------------
    def kinematics(self, d, prev: State):
        dt, beta, gam = self.dt, self.beta, self.gamma
        a = (d - prev.d - dt * prev.v - dt * dt * (0.5 - beta) * prev.a) / (beta * dt * dt)
        v = prev.v + dt * ((1.0 - gam) * prev.a + gam * a)
        return v, a

    def residuals(self, d, p, prev: State, tau_new, t_new, jacobian=True):
        """Stacked residual pieces and Jacobian blocks at iterate ``(d, p)``."""
        sc = self.scenario
        t0 = time.perf_counter()
        v, a = self.kinematics(d, prev)
        af, am = self.af, self.am
        d_m = (1.0 - af) * d + af * prev.d
        v_m = (1.0 - af) * v + af * prev.v
        a_m = (1.0 - am) * a + am * prev.a
        # the reference ring is the unloaded state at venous pressure, so the
        # cavity wall sees the gauge pressure p_v - p_ref
        pv_m = (1.0 - af) * p[0] + af * prev.p[0] - sc.windkessel.p_ref
        tau_m = np.full(sc.mesh.node_count, (1.0 - af) * tau_new + af * prev.tau)
        RS, vals, dRdp = self.chamber.evaluate(
            d_m, v_m, a_m, tau_m, pv_m, coeffs=(self.c_m, self.c_k, self.c_c),
            jacobian=jacobian)
        vol, gradV = cavity_volume(d, sc.mesh, check=False)
        if vol <= 0.0:
            raise DegenerateGeometryError("chamber volume became non-positive")
        R0, J00 = _wk(p, prev.p, volume_increment(prev.d, d, sc.mesh), self.dt, t_new, sc.windkessel,
                      sc.integrator.theta, jacobian)
        self.timings["element"] += time.perf_counter() - t0
        blocks = None
        if jacobian:
            blocks = (vals, self.c_k * dRdp, gradV / self.dt, J00)
        return RS, R0, blocks

    def _dense_block(self, vals, JSp, J0s_row, J00):
        n = self.n
        K = np.zeros((n + 4, n + 4))
        K[:n, :n] = self.chamber.dense(vals)
        K[:n, n] = JSp
        K[n, :n] = J0s_row
        K[n:, n:] = J00
        return K

    def system(self, d, p, prev: State, t_new: float):
        """Stacked residual ``[R_S; R_0D]`` and the dense coupled Jacobian.

        ``t_new`` fixes the activation, so the result is a pure function of
        ``(d, p)`` given ``prev``.
        """
        tau_new = step_tau(prev.tau, prev.t, t_new, self.scenario.activation,
                           self.scenario.integrator.theta)
        RS, R0, (vals, JSp, J0s_row, J00) = self.residuals(d, p, prev, tau_new, t_new)
        return np.concatenate([RS, R0]), self._dense_block(vals, JSp, J0s_row, J00)

    def initial_state(self, V=None) -> State:
        sc = self.scenario
        n = self.n
        d = np.zeros(n)
        p = equilibrium_state(sc.windkessel)
        vol, _ = cavity_volume(d, sc.mesh)
        tau = np.zeros(sc.mesh.node_count)
        R0, _, _ = self.chamber.evaluate(d, d, d, tau, p[0] - sc.windkessel.p_ref,
                                         jacobian=False)
        R0[self.chamber.pinned] = 0.0
        if V is None:
            a = -R0 / self.chamber.inertia
        else:
            Mr = V.T @ (self.chamber.inertia[:, None] * V)
            a = V @ solve_dense(Mr, -(V.T @ R0))
        a[self.chamber.pinned] = 0.0
        return State(0.0, d, np.zeros(n), a, 0.0, p, vol)

    def step(self, prev: State, t_new: float, V=None, guess=None):
        """One Newton-converged time step; returns ``(State, iters, history)``."""
        sc = self.scenario
        tol = sc.tolerances
        tau_new = step_tau(prev.tau, prev.t, t_new, sc.activation, sc.integrator.theta)
        if guess is not None:
            d, p = guess.d.copy(), guess.p.copy()
        else:
            d, p = prev.d.copy(), prev.p.copy()
        history = []
        last = None  # (d, p, dd_full, dp, merit) of the previous full step
        frac, backtracks = 1.0, 0
        it = 0
        while it < tol.max_newton:
            RS, R0, (vals, JSp, J0s_row, J00) = self.residuals(d, p, prev, tau_new, t_new)
            RSr = RS if V is None else V.T @ RS
            merit = (np.dot(RSr, RSr) / tol.tol_s_res**2
                     + np.dot(R0, R0) / tol.tol_0d_res**2)
            if (last is not None and merit > last[4] and merit > 1.0
                    and backtracks < self.max_backtracks):
                # residual grew: retreat along the previous Newton direction
                backtracks += 1
                frac *= 0.5
                d = last[0] + frac * last[2]
                p = last[1] + frac * last[3]
                continue
            frac, backtracks = 1.0, 0
            it += 1
            t0 = time.perf_counter()
            if V is None:
                K = self._dense_block(vals, JSp, J0s_row, J00)
            else:
                q = V.shape[1]
                JV = self.chamber.sparse(vals) @ V
                K = np.zeros((q + 4, q + 4))
                K[:q, :q] = V.T @ JV
                K[:q, q] = V.T @ JSp
                K[q, :q] = J0s_row @ V
                K[q:, q:] = J00
            rhs = -np.concatenate([RSr, R0])
            try:
                delta = solve_dense(K, rhs)
            finally:
                self.timings["linear"] += time.perf_counter() - t0
            if not np.all(np.isfinite(delta)):
                raise NonConvergenceError("Newton increment became non-finite", history)
            m = K.shape[0] - 4
            dd, dp = delta[:m], delta[m:]
            if V is None:
                dd[self.chamber.pinned] = 0.0
                dd_full = dd
            else:
                dd_full = V @ dd
            entry = {
                "res_s": float(np.max(np.abs(RSr))),
                "inc_s": float(np.max(np.abs(dd))),
                "res_0d": float(np.linalg.norm(R0)),
                "inc_0d": float(np.linalg.norm(dp)),
            }
            history.append(entry)
            last = (d, p, dd_full, dp, merit)
            d = d + dd_full
            p = p + dp
            if (entry["res_s"] < tol.tol_s_res and entry["inc_s"] < tol.tol_s_inc
                    and entry["res_0d"] < tol.tol_0d_res and entry["inc_0d"] < tol.tol_0d_inc):
                v, a = self.kinematics(d, prev)
                vol, _ = cavity_volume(d, sc.mesh, check=False)
                return State(t_new, d, v, a, tau_new, p, vol), it, history
        raise NonConvergenceError(
            f"Newton did not converge in {tol.max_newton} iterations at t={t_new:.6g}",
            history)

    def run(self, V=None, check_every: int = 1):
        """March from t=0 to t_end; returns a :class:`Trajectory`."""
        sc = self.scenario
        integ = sc.integrator
        steps = integ.n_steps
        self.timings = {"element": 0.0, "linear": 0.0}
        start = time.perf_counter()
        state = self.initial_state(V)
        n = self.n
        times = np.empty(steps + 1)
        disp = np.empty((steps + 1, n))
        pres = np.empty((steps + 1, 4))
        vols = np.empty(steps + 1)
        iters = np.zeros(steps + 1, dtype=int)
        times[0], disp[0], pres[0], vols[0] = 0.0, state.d, state.p, state.volume
        N = sc.mesh.node_count
        for j in range(1, steps + 1):
            try:
                state, it, _ = self.step(state, j * integ.dt, V=V)
                if check_every and j % check_every == 0:
                    xy = sc.mesh.reference_positions + state.d.reshape(N, 2)
                    if not polygon_is_simple(xy):
                        raise DegenerateGeometryError("chamber polygon self-intersects")
            except PmorError as exc:
                exc.step = j
                exc.args = (f"step {j}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
                raise
            times[j], disp[j], pres[j], vols[j], iters[j] = (
                state.t, state.d, state.p, state.volume, it)
        wall = time.perf_counter() - start
        timings = {
            "element": self.timings["element"],
            "linear": self.timings["linear"],
            "other": wall - self.timings["element"] - self.timings["linear"],
        }
        return Trajectory(times, disp, pres, vols, iters, wall, timings,
                          q=None if V is None else V.shape[1], final_state=state)


def step_coupled(prev: State, t: float, scenario: Scenario, guess=None, model=None):
    """Single FOM step to time ``t``; returns ``(State, iterations)``."""
    model = model or CoupledModel(scenario)
    state, it, _ = model.step(prev, t, guess=guess)
    return state, it


def run_fom(scenario: Scenario, params=None):
    """Full-order run; returns ``(Trajectory, SnapshotMatrix)``.

    ``params`` optionally overrides activation fields (a mapping of
    ``ActivationParams`` field names to values).
    """
    from .pod import SnapshotMatrix

    if params:
        scenario = scenario.with_activation(**dict(params))
    traj = CoupledModel(scenario).run()
    snaps = SnapshotMatrix(traj.displacements[1:].T.copy(), scenario.activation.to_dict(),
                           scenario.integrator.dt)
    return traj, snaps
