"""Four-element windkessel with smooth diode valves, one-step-theta in time.

Unknowns ``p = (p_v, p_p, p_d, q_p)``: ventricular, proximal and distal
arterial pressure (kPa) and the inertance flux (mm^3/s). Compliances are in
mm^3/kPa, resistances in kPa*s/mm^3, the inertance in kPa*s^2/mm^3.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .activation import sigmoid_pair
from .errors import InvalidInputError

__all__ = [
    "AtrialParams",
    "WindkesselParams",
    "valve_resistance",
    "atrial_pressure",
    "wk_residual",
    "wk_jacobian",
    "equilibrium_state",
]


@dataclass(frozen=True)
class AtrialParams:
    """Prescribed atrial pressure: a sigmoid pulse repeated every ``period``."""

    p_base: float = 1.0
    p_pulse: float = 0.6
    t_on: float = 0.10
    t_off: float = 0.20
    gamma: float = 0.005
    period: float = 0.8

    def __post_init__(self):
        if not self.gamma > 0 or not self.period > 0:
            raise InvalidInputError("atrial gamma and period must be positive")
        if not 0.0 <= self.t_on < self.t_off <= self.period:
            raise InvalidInputError("atrial pulse must satisfy 0 <= t_on < t_off <= period")


@dataclass(frozen=True)
class WindkesselParams:
    C_p: float = 20.0
    C_d: float = 300.0
    R_p: float = 5e-4
    R_d: float = 5e-3
    L_p: float = 5e-6
    R_min: float = 5e-5
    R_max: float = 0.1
    k_valve: float = 0.1
    p_ref: float = 1.0
    atrial: AtrialParams = field(default_factory=AtrialParams)

    def __post_init__(self):
        for name in ("C_p", "C_d", "R_p", "R_d", "L_p", "R_min", "k_valve"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")
        if not self.R_min < self.R_max:
            raise InvalidInputError("R_min must be below R_max")
        if isinstance(self.atrial, dict):
            object.__setattr__(self, "atrial", AtrialParams(**self.atrial))

    def to_dict(self):
        return asdict(self)


def _valve(p_up, p_down, wk):
    """Resistance and its partials w.r.t. ``p_up`` and ``p_down``."""
    # 0.5 * (1 + tanh(x)) written as a logistic so the open-valve branch
    # (x << 0) keeps full relative accuracy
    x = 2.0 * (p_down - p_up) / wk.k_valve
    s_open, s_shut = expit(-x), expit(x)
    span = wk.R_max - wk.R_min
    R = wk.R_min + span * s_shut
    dR = 2.0 * span * s_shut * s_open / wk.k_valve
    return R, -dR, dR


def valve_resistance(p_up: float, p_down: float, wk: WindkesselParams) -> float:
    return _valve(p_up, p_down, wk)[0]


def atrial_pressure(t: float, wk: WindkesselParams) -> float:
    at = wk.atrial
    tc = math.fmod(t, at.period)
    s_plus, _ = sigmoid_pair(tc - at.t_on, at.gamma)
    _, s_minus = sigmoid_pair(tc - at.t_off, at.gamma)
    return at.p_base + at.p_pulse * s_plus * s_minus


def _flow(p_up, p_down, wk):
    """Valve flow ``(p_up - p_down)/R`` and its partials."""
    R, dRu, dRd = _valve(p_up, p_down, wk)
    dp = p_up - p_down
    return dp / R, 1.0 / R - dp * dRu / (R * R), -1.0 / R - dp * dRd / (R * R)


def _algebraic(pt, pat, wk):
    pv, pp, pd, q = pt
    q_av, dqav_up, dqav_down = _flow(pat, pv, wk)  # atrium -> ventricle
    q_sl, dqsl_up, dqsl_down = _flow(pv, pp, wk)   # ventricle -> aorta
    g = np.array([
        -q_av + q_sl,
        q - q_sl,
        q + (pd - pp) / wk.R_p,
        (pd - wk.p_ref) / wk.R_d - q,
    ])
    dg = np.array([
        [-dqav_down + dqsl_up, dqsl_down, 0.0, 0.0],
        [-dqsl_up, -dqsl_down, 0.0, 1.0],
        [0.0, -1.0 / wk.R_p, 1.0 / wk.R_p, 1.0],
        [0.0, 0.0, 1.0 / wk.R_d, -1.0],
    ])
    return g, dg


def wk_residual(p_new, p_old, vol_new, vol_old, dt, t, wk: WindkesselParams,
                theta: float = 0.5) -> np.ndarray:
    """Discrete windkessel residual for the step ending at time ``t``.

    Algebraic terms are evaluated at the theta-blended state (pressures and
    atrial pressure); time derivatives are backward differences over ``dt``.
    """
    return _wk(p_new, p_old, vol_new - vol_old, dt, t, wk, theta, False)[0]


def wk_jacobian(p_new, p_old, vol_new, vol_old, dt, t, wk: WindkesselParams,
                theta: float = 0.5, dV_dd=None):
    """``dR0D/dp`` (4x4) and ``dR0D/dd`` (4xn, only the first row nonzero)."""
    _, dp = _wk(p_new, p_old, vol_new - vol_old, dt, t, wk, theta, True)
    dd = None
    if dV_dd is not None:
        dd = np.zeros((4, len(dV_dd)))
        dd[0] = np.asarray(dV_dd) / dt
    return dp, dd


def _wk(p_new, p_old, dvol, dt, t, wk, theta, jac):
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    p_new = np.asarray(p_new, dtype=float)
    p_old = np.asarray(p_old, dtype=float)
    pt = theta * p_new + (1.0 - theta) * p_old
    pat = theta * atrial_pressure(t, wk) + (1.0 - theta) * atrial_pressure(max(t - dt, 0.0), wk)
    g, dg = _algebraic(pt, pat, wk)
    inert = wk.L_p / wk.R_p
    # storage terms: p_p in row 1, q_p in row 2, p_d in row 3
    rate = np.zeros(4)
    rate[1] = wk.C_p * (p_new[1] - p_old[1]) / dt
    rate[2] = inert * (p_new[3] - p_old[3]) / dt
    rate[3] = wk.C_d * (p_new[2] - p_old[2]) / dt
    R = g + rate
    R[0] += dvol / dt
    if not jac:
        return R, None
    J = theta * dg
    J[1, 1] += wk.C_p / dt
    J[2, 3] += inert / dt
    J[3, 2] += wk.C_d / dt
    return R, J


def equilibrium_state(wk: WindkesselParams) -> np.ndarray:
    """All pressures at ``p_ref``, zero flux."""
    return np.array([wk.p_ref, wk.p_ref, wk.p_ref, 0.0])
