"""Levenberg-Marquardt calibration of activation parameters.

Objective evaluations always use the full-order model. Jacobian columns come
from one-sided finite differences, evaluated either with the full-order model
or with a Galerkin ROM whose basis is built from stored full-order snapshots
(``gradients="prom"``). With pROM gradients every iteration runs the ROM at
the current iterate too, so differences are taken between two ROM outputs.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import (ColumnFailureError, ForwardModelError, InvalidInputError, PmorError,
                     SingularSystemError)
from .interp import cos_basis
from .linalg import solve_dense
from .pod import SnapshotMatrix, pod_basis
from .rom import run_rom
from .solver import Scenario, run_fom

__all__ = [
    "ParameterSet",
    "ObjectiveSpec",
    "VolumeCurve",
    "Evaluation",
    "ForwardModel",
    "LMConfig",
    "LMIteration",
    "LMTrace",
    "objective",
    "fd_sign",
    "fd_jacobian",
    "enrichment_weights",
    "enrichment_basis",
    "lm_run",
    "predicted_speedup",
    "speedup_report",
    "SpeedupReport",
]


@dataclass(frozen=True)
class ParameterSet:
    """Normalized parameters ``mu = physical / initial_physical``."""

    names: tuple
    initial_physical: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        names = tuple(self.names)
        ref = np.asarray(self.initial_physical, dtype=float).ravel()
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "initial_physical", ref)
        if len(names) < 1 or len(names) != ref.size:
            raise InvalidInputError("need at least one parameter and one reference per name")
        if len(set(names)) != len(names):
            raise InvalidInputError("parameter names must be unique")
        # alpha_min is negative, so only a vanishing reference is rejected;
        # the ratio stays positive as long as the sign does not flip
        if not np.all(np.isfinite(ref)) or np.any(ref == 0.0):
            raise InvalidInputError("normalization references must be finite and nonzero")
        vals = np.ones(ref.size) if self.values is None else np.asarray(self.values, float).ravel()
        if vals.size != ref.size:
            raise InvalidInputError("values and references differ in length")
        object.__setattr__(self, "values", vals)

    @property
    def n_p(self) -> int:
        return len(self.names)

    def physical(self, mu=None) -> dict:
        mu = self.values if mu is None else np.asarray(mu, dtype=float)
        return {k: float(m * r) for k, m, r in zip(self.names, mu, self.initial_physical)}

    def normalize(self, physical: dict) -> np.ndarray:
        return np.array([physical[k] / r for k, r in zip(self.names, self.initial_physical)])


@dataclass(frozen=True)
class VolumeCurve:
    """Cavity volume every ``stride`` time steps, divided by the initial volume."""

    stride: int = 10

    def __call__(self, traj) -> np.ndarray:
        v = np.asarray(traj.volumes, dtype=float)
        return v[self.stride::self.stride] / v[0]

    def times(self, traj) -> np.ndarray:
        return np.asarray(traj.times)[self.stride::self.stride]


@dataclass(frozen=True)
class ObjectiveSpec:
    y: np.ndarray
    extractor: object = field(default_factory=VolumeCurve)
    sample_times: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        if y.size == 0 or not np.all(np.isfinite(y)):
            raise InvalidInputError("measurements must be finite and nonempty")
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return self.y.size

    @classmethod
    def synthetic(cls, scenario: Scenario, truth: dict, extractor=None) -> "ObjectiveSpec":
        """Measurements generated by a full-order run at ``truth``."""
        extractor = extractor or VolumeCurve()
        traj, _ = run_fom(scenario, truth)
        times = extractor.times(traj) if hasattr(extractor, "times") else None
        return cls(extractor(traj), extractor, times)


@dataclass
class Evaluation:
    f: np.ndarray
    snapshots: SnapshotMatrix | None
    wall_time: float
    kind: str


@dataclass(frozen=True)
class ForwardModel:
    """Maps normalized parameters to model outputs through FOM or ROM runs."""

    scenario: Scenario
    params: ParameterSet
    extractor: object = field(default_factory=VolumeCurve)

    def _run(self, mu, basis):
        phys = self.params.physical(mu)
        start = time.perf_counter()
        try:
            if basis is None:
                traj, snaps = run_fom(self.scenario, phys)
            else:
                traj, snaps = run_rom(phys, basis, self.scenario)
        except PmorError as exc:
            raise ForwardModelError(f"forward run failed at mu={np.round(mu, 6).tolist()}: {exc}",
                                    np.asarray(mu)) from exc
        wall = time.perf_counter() - start
        return Evaluation(self.extractor(traj), snaps if basis is None else None, wall,
                          "fom" if basis is None else "rom")

    def fom(self, mu) -> Evaluation:
        return self._run(mu, None)

    def rom(self, mu, basis) -> Evaluation:
        return self._run(mu, basis)


def objective(mu, spec: ObjectiveSpec, forward):
    """``(S, r)`` with ``r = y - f(mu)`` and ``S = |r|^2 / 2``.

    ``forward`` is a callable returning ``f(mu)`` or an :class:`Evaluation`.
    """
    try:
        out = forward(mu)
    except ForwardModelError:
        raise
    except PmorError as exc:
        raise ForwardModelError(f"forward run failed at mu={np.asarray(mu).tolist()}: {exc}",
                                np.asarray(mu)) from exc
    f = out.f if isinstance(out, Evaluation) else np.asarray(out, dtype=float)
    if f.shape != spec.y.shape:
        raise InvalidInputError(f"forward output has shape {f.shape}, expected {spec.y.shape}")
    r = spec.y - f
    return 0.5 * float(r @ r), r


def fd_sign(mu_p: float, eps: float, lo: float, hi: float) -> int:
    """+1 unless only the negative perturbation stays inside ``[lo, hi]``."""
    plus_in = lo <= mu_p + eps <= hi
    minus_in = lo <= mu_p - eps <= hi
    return -1 if (minus_in and not plus_in) else 1


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(fn, *it) for it in items]
        return [f.result() for f in futs]


def _safe(fn, *args):
    try:
        return fn(*args)
    except ForwardModelError as exc:
        return exc


def fd_jacobian(mu_i, f_i, perturbed, eps, history=None, workers: int = 1):
    """One-sided finite-difference Jacobian of ``r = y - f``.

    ``perturbed(p, mu)`` evaluates the forward model for column ``p``;
    ``f_i`` is the base output the differences are taken against.
    ``history`` holds earlier parameter vectors; each column steps toward
    their range. Returns ``(J, evaluations, signs)``.
    Raises :class:`ColumnFailureError` naming the first failed column.
    """
    mu_i = np.asarray(mu_i, dtype=float)
    f_i = np.asarray(f_i, dtype=float)
    n_p = mu_i.size
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (n_p,))
    if np.any(eps <= 0):
        raise InvalidInputError("finite-difference steps must be positive")
    pts = np.vstack([mu_i] + ([] if history is None else [np.atleast_2d(history)]))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    signs = np.array([fd_sign(mu_i[p], eps[p], lo[p], hi[p]) for p in range(n_p)])
    items = []
    for p in range(n_p):
        mu_p = mu_i.copy()
        mu_p[p] += signs[p] * eps[p]
        items.append((perturbed, p, mu_p))
    results = _map(_safe, items, workers)
    J = np.empty((f_i.size, n_p))
    evals = []
    for p, res in enumerate(results):
        if isinstance(res, ForwardModelError):
            raise ColumnFailureError(f"Jacobian column {p} failed: {res}", res.mu, p) from res
        f_p = res.f if isinstance(res, Evaluation) else np.asarray(res, dtype=float)
        J[:, p] = -(f_p - f_i) / (signs[p] * eps[p])
        evals.append(res)
    return J, evals, signs


def enrichment_weights(mu_eval, mu_i, mu_k) -> tuple[float, float]:
    """IDW pair ``(w1, w2)`` for the current iterate and the nearest earlier one."""
    d1 = float(np.linalg.norm(np.asarray(mu_eval, float) - np.asarray(mu_i, float)))
    d2 = float(np.linalg.norm(np.asarray(mu_eval, float) - np.asarray(mu_k, float)))
    if d1 == 0.0 and d2 == 0.0:
        raise InvalidInputError("coincident evaluation points: d1 = d2 = 0")
    if d1 == 0.0:
        return 1.0, 0.0
    if d2 == 0.0:
        return 0.0, 1.0
    w1 = (1.0 / d1) / (1.0 / d1 + 1.0 / d2)
    return w1, 1.0 - w1


def enrichment_basis(mu_eval, store, q: int):
    """Projection basis for a pROM run at ``mu_eval``.

    ``store`` is the ordered list of ``(mu_j, D(mu_j))`` full-order
    evaluations; the last entry is the current iterate.
    """
    if not store:
        raise InvalidInputError("no stored full-order snapshots")
    mu_i, D_i = store[-1]
    if len(store) == 1:
        return pod_basis(D_i, q)
    prior = np.array([np.asarray(m, float) for m, _ in store[:-1]])
    k = int(np.argmin(np.linalg.norm(prior - np.asarray(mu_eval, float), axis=1)))
    w1, w2 = enrichment_weights(mu_eval, mu_i, store[k][0])
    basis = cos_basis([D_i, store[k][1]], [w1, w2], q)
    basis.meta.update({"k": k, "w1": w1})
    return basis


@dataclass(frozen=True)
class LMConfig:
    lambda0: float = 0.1
    eps: float = 0.01
    tol_grad: float = 1e-8
    tol_inc: float = 1e-8
    s_rel: float = 1e-5
    max_iter: int = 50
    gradients: str = "prom"
    q: int = 30
    fom_fallback: bool = True
    max_damping_retries: int = 5
    workers: int | None = None

    def __post_init__(self):
        if not self.lambda0 >= 0:
            raise InvalidInputError("lambda0 must be non-negative")
        if self.gradients not in ("prom", "fom"):
            raise InvalidInputError("gradients must be 'prom' or 'fom'")
        if self.max_iter < 1 or self.q < 1 or not self.eps > 0:
            raise InvalidInputError("max_iter, q and eps must be positive")

    def resolved_workers(self) -> int:
        if self.workers is not None:
            return max(1, int(self.workers))
        return max(1, int(os.environ.get("PMORKIT_THREADS", "1")))


@dataclass
class LMIteration:
    iter: int
    mu: np.ndarray
    S: float
    grad_norm: float = float("nan")
    lam: float = float("nan")
    step_norm: float = float("nan")
    t_fom: float = 0.0
    t_grad: list = field(default_factory=list)
    grad_kinds: list = field(default_factory=list)
    fallbacks: int = 0
    predicted_decrease: float = float("nan")


@dataclass
class LMTrace:
    gradients: str
    n_p: int
    iterations: list = field(default_factory=list)
    store: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""

    @property
    def S0(self) -> float:
        return self.iterations[0].S

    @property
    def n_iter(self) -> int:
        """Iterations with a completed parameter update."""
        return sum(1 for it in self.iterations if np.isfinite(it.step_norm))

    def best(self) -> LMIteration:
        return min(self.iterations, key=lambda it: it.S)

    def rows(self):
        S0 = self.S0
        g0 = self.iterations[0].grad_norm
        for it in self.iterations:
            yield {
                "iter": it.iter,
                "S_rel": it.S / S0 if S0 > 0 else 0.0,
                "grad_rel": it.grad_norm / g0 if g0 > 0 else float("nan"),
                "lambda": it.lam,
                **{f"mu_{p + 1}": float(v) for p, v in enumerate(it.mu)},
                "t_fom_s": it.t_fom,
                "t_prom_total_s": float(sum(it.t_grad)),
            }


def _damped_step(J, r, lam, retries):
    JtJ = J.T @ J
    g = J.T @ r
    D = np.diag(np.diag(JtJ))
    for _ in range(retries + 1):
        try:
            return solve_dense(JtJ + lam * D, -g), lam
        except SingularSystemError:
            lam = 10.0 * lam if lam > 0 else 1e-8
    raise SingularSystemError("normal matrix singular after damping retries")


def lm_run(mu0, spec: ObjectiveSpec, forward: ForwardModel, config: LMConfig = LMConfig(),
           callback=None):
    """Levenberg-Marquardt iteration; returns ``(mu_hat, LMTrace)``.

    ``mu_hat`` is the iterate with the lowest FOM objective. The trace's
    ``converged`` flag is False when ``max_iter`` was exhausted.
    """
    mu = np.asarray(mu0, dtype=float).copy()
    n_p = mu.size
    if spec.m < n_p:
        raise InvalidInputError("fewer measurements than parameters")
    workers = config.resolved_workers()
    trace = LMTrace(config.gradients, n_p)
    lam = config.lambda0
    g_prev = None
    for i in range(config.max_iter + 1):
        ev = forward.fom(mu)
        S, r = objective(mu, spec, lambda _m: ev)
        trace.store.append((mu.copy(), ev.snapshots))
        rec = LMIteration(i, mu.copy(), S, t_fom=ev.wall_time)
        trace.iterations.append(rec)
        if callback is not None:
            callback(rec)
        if S <= config.s_rel * trace.S0:
            trace.converged, trace.reason = True, "S/S0 below threshold"
            break
        if i == config.max_iter:
            trace.reason = "maximum iterations reached"
            break

        history = np.array([it.mu for it in trace.iterations[:-1]]).reshape(-1, n_p)
        if config.gradients == "fom":
            f_base = ev.f
            col = partial(_fom_column, forward)
        else:
            base_basis = enrichment_basis(mu, trace.store, config.q)
            base = forward.rom(mu, base_basis)
            rec.t_grad.append(base.wall_time)
            rec.grad_kinds.append("rom")
            f_base = base.f
            col = partial(_rom_column, forward, list(trace.store), config.q)

        try:
            J, evals, _ = fd_jacobian(mu, f_base, col, config.eps, history, workers)
        except ColumnFailureError as exc:
            if not (config.fom_fallback and config.gradients == "prom"):
                raise
            J, evals = _jacobian_with_fallback(mu, f_base, ev.f, col, forward, config.eps,
                                               history, exc.column, rec)
        for e in evals:
            rec.t_grad.append(e.wall_time)
            rec.grad_kinds.append(e.kind)

        g = J.T @ r
        gn = float(np.linalg.norm(g))
        if g_prev is not None and g_prev > 0:
            lam = lam * gn / g_prev
        delta, lam = _damped_step(J, r, lam, config.max_damping_retries)
        rec.grad_norm, rec.lam = gn, lam
        rec.step_norm = float(np.linalg.norm(delta))
        rec.predicted_decrease = float(g @ delta)
        if gn < config.tol_grad and rec.step_norm < config.tol_inc:
            rec.step_norm = float("nan")
            trace.converged, trace.reason = True, "gradient and increment below tolerance"
            break
        g_prev = gn
        mu = mu + delta
    return trace.best().mu.copy(), trace


def _fom_column(forward, p, m):
    return forward.fom(m)


def _rom_column(forward, store, q, p, m):
    return forward.rom(m, enrichment_basis(m, store, q))


def _jacobian_with_fallback(mu, f_rom_base, f_fom_base, col, forward, eps, history, failed, rec):
    """Column-by-column Jacobian where failed ROM columns use a FOM run.

    A FOM column is differenced against the FOM output at ``mu``.
    """
    n_p = mu.size
    J = np.empty((f_rom_base.size, n_p))
    evals = []
    pts = np.vstack([mu] + ([history] if len(history) else []))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    for p in range(n_p):
        s = fd_sign(mu[p], eps, lo[p], hi[p])
        m = mu.copy()
        m[p] += s * eps
        try:
            if p == failed:
                raise ForwardModelError("known failure", m)
            e, base = col(p, m), f_rom_base
        except ForwardModelError:
            e, base = forward.fom(m), f_fom_base
            rec.fallbacks += 1
        J[:, p] = -(e.f - base) / (s * eps)
        evals.append(e)
    return J, evals


def predicted_speedup(alpha: float, n_p: int, iteration_ratio: float = 1.0) -> float:
    """``beta = ratio / (1/alpha + 1/(1 + n_p))``."""
    if not alpha > 0 or n_p < 1:
        raise InvalidInputError("alpha must be positive and n_p >= 1")
    return iteration_ratio / (1.0 / alpha + 1.0 / (1.0 + n_p))


@dataclass(frozen=True)
class SpeedupReport:
    alpha: float
    beta: float
    beta_measured: float
    t_fom_mean: float
    t_prom_mean: float
    n_i_fom: int
    n_i_prom: int
    T_fom: float
    T_prom: float


def speedup_report(trace_fom: LMTrace, trace_prom: LMTrace) -> SpeedupReport:
    """Single-evaluation speedup ``alpha`` and overall speedup ``beta``.

    Measured totals count the updating iterations only (objective plus
    Jacobian), which is what the closed form models.
    """
    if trace_fom.n_p != trace_prom.n_p:
        raise InvalidInputError("traces use different parameter counts")
    fom_times = [it.t_fom for it in trace_fom.iterations + trace_prom.iterations]
    for it in trace_fom.iterations:
        fom_times += [t for t, k in zip(it.t_grad, it.grad_kinds) if k == "fom"]
    rom_times = [t for it in trace_prom.iterations
                 for t, k in zip(it.t_grad, it.grad_kinds) if k == "rom"]
    if not rom_times:
        raise InvalidInputError("pROM trace holds no ROM evaluations")
    t_f, t_r = float(np.mean(fom_times)), float(np.mean(rom_times))
    alpha = t_f / t_r
    n_f, n_r = trace_fom.n_iter, trace_prom.n_iter
    if n_f == 0 or n_r == 0:
        raise InvalidInputError("both traces need at least one completed iteration")
    beta = predicted_speedup(alpha, trace_fom.n_p, n_f / n_r)

    def total(tr):
        return sum(it.t_fom + sum(it.t_grad) for it in tr.iterations if np.isfinite(it.step_norm))

    T_f, T_r = total(trace_fom), total(trace_prom)
    return SpeedupReport(alpha, beta, T_f / T_r, t_f, t_r, n_f, n_r, T_f, T_r)
