"""Myofiber activation input and the active stress evolution."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import InvalidInputError

__all__ = [
    "ActivationParams",
    "sigmoid_pair",
    "activation_u",
    "step_tau",
]


@dataclass(frozen=True)
class ActivationParams:
    """Parameters of the prescribed activation ``u(t)`` and contractility.

    Units: ``sigma`` in kPa, rates in 1/s, times and ``gamma`` in s.
    """

    sigma: float = 280.0
    alpha_max: float = 10.0
    alpha_min: float = -30.0
    t_sys: float = 0.25
    t_dias: float = 0.50
    gamma: float = 0.005

    def __post_init__(self):
        if not self.sigma >= 0.0:
            raise InvalidInputError("sigma must be non-negative")
        if not self.gamma > 0.0:
            raise InvalidInputError("gamma must be positive")
        if not self.t_sys < self.t_dias:
            raise InvalidInputError("t_sys must precede t_dias")
        if not self.alpha_max > 0.0:
            raise InvalidInputError("alpha_max must be positive")
        if not self.alpha_min < 0.0:
            raise InvalidInputError("alpha_min must be negative")

    def to_dict(self):
        return asdict(self)


def sigmoid_pair(dt: float, gamma: float) -> tuple[float, float]:
    """Return ``(S+, S-)`` at time offset ``dt``: ``0.5 * (1 +/- tanh(dt/gamma))``."""
    th = math.tanh(dt / gamma)
    return 0.5 * (1.0 + th), 0.5 * (1.0 - th)


def systole_indicator(t: float, p: ActivationParams) -> float:
    s_plus, _ = sigmoid_pair(t - p.t_sys, p.gamma)
    _, s_minus = sigmoid_pair(t - p.t_dias, p.gamma)
    return s_plus * s_minus


def activation_u(t: float, p: ActivationParams) -> float:
    f = systole_indicator(t, p)
    return p.alpha_max * f + p.alpha_min * (1.0 - f)


def step_tau(tau: float, t0: float, t1: float, p: ActivationParams,
             theta: float = 0.5) -> float:
    """Advance ``dtau/dt = -|u| tau + sigma max(u, 0)`` from ``t0`` to ``t1``.

    One-step-theta rule; the ODE is linear in ``tau`` so the implicit update
    is solved in closed form.
    """
    if not t1 > t0:
        raise InvalidInputError("t1 must be greater than t0")
    h = t1 - t0
    u0 = activation_u(t0, p)
    u1 = activation_u(t1, p)
    rhs = tau + h * (1.0 - theta) * (-abs(u0) * tau + p.sigma * max(u0, 0.0))
    rhs += h * theta * p.sigma * max(u1, 0.0)
    return rhs / (1.0 + h * theta * abs(u1))
