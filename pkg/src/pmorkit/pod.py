"""Snapshot matrices and POD bases."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .linalg import numerical_rank, thin_svd

__all__ = [
    "SnapshotMatrix",
    "ProjectionBasis",
    "pod_basis",
    "ric",
    "truncation_error",
    "select_order",
]


@dataclass
class SnapshotMatrix:
    """Column-wise displacement history ``D`` (n x n_s) of one simulation."""

    data: np.ndarray
    parameter: dict = field(default_factory=dict)
    dt: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] < 1:
            raise InvalidInputError("snapshot matrix needs at least one column")
        if not np.all(np.isfinite(self.data)):
            raise InvalidInputError("snapshot matrix contains non-finite entries")

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def n_s(self):
        return self.data.shape[1]

    def strided(self, stride: int) -> "SnapshotMatrix":
        return SnapshotMatrix(self.data[:, stride - 1::stride], dict(self.parameter),
                              self.dt * stride)


@dataclass
class ProjectionBasis:
    """Orthonormal reduced basis ``V`` (n x q).

    ``parameter`` is the sample parameter the basis was built at, or the
    string ``"interpolated"``. ``singular_values`` keeps the full spectrum
    of the generating SVD (empty when there is none).
    """

    V: np.ndarray
    singular_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    parameter: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        self.singular_values = np.asarray(self.singular_values, dtype=float)

    @property
    def q(self) -> int:
        return self.V.shape[1]

    @property
    def n(self) -> int:
        return self.V.shape[0]


def _check_order(q, limit):
    if not isinstance(q, (int, np.integer)) or not 1 <= q <= limit:
        raise InvalidInputError(f"reduced order q={q} outside [1, {limit}]")


def pod_basis(D, q: int) -> ProjectionBasis:
    """First ``q`` left singular vectors of the (uncentred) snapshot matrix."""
    snaps = D if isinstance(D, SnapshotMatrix) else SnapshotMatrix(D)
    _check_order(q, min(snaps.data.shape))
    res = thin_svd(snaps.data)
    return ProjectionBasis(res.left[:, :q].copy(), res.singular_values,
                           dict(snaps.parameter))


def _sq(singular_values):
    s = np.asarray(singular_values, dtype=float)
    return s * s


def ric(singular_values, q: int) -> float:
    """Relative information content of the leading ``q`` singular values."""
    s2 = _sq(singular_values)
    if not 0 <= q <= s2.size:
        raise InvalidInputError(f"q={q} outside [0, {s2.size}]")
    total = s2.sum()
    if total == 0.0:
        raise InvalidInputError("RIC undefined for an all-zero spectrum")
    return float(s2[:q].sum() / total)


def truncation_error(singular_values, q: int) -> float:
    s2 = _sq(singular_values)
    if not 0 <= q <= s2.size:
        raise InvalidInputError(f"q={q} outside [0, {s2.size}]")
    return float(s2[q:].sum())


def select_order(singular_values, eps_pod: float) -> int:
    """Smallest ``q`` with ``RIC(q) >= 1 - eps_pod``, capped at the numerical rank.

    The discarded energy is summed from the tail (no cancellation against
    the total) and compared as ``tail <= eps_pod * total``, so the exact
    boundary resolves to the smaller order.
    """
    if not 0.0 < eps_pod < 1.0:
        raise InvalidInputError("eps_pod must lie in (0, 1)")
    s = np.asarray(singular_values, dtype=float)
    s2 = s * s
    total = s2.sum()
    if total == 0.0:
        raise InvalidInputError("order selection undefined for an all-zero spectrum")
    tail = np.append(np.cumsum(s2[::-1])[::-1][1:], 0.0)
    ok = np.flatnonzero(tail <= eps_pod * total * (1 + 1e-12))
    return min(int(ok[0]) + 1, max(1, numerical_rank(s, (s.size, s.size))))


def rank_of(D) -> int:
    data = D.data if isinstance(D, SnapshotMatrix) else np.asarray(D)
    return numerical_rank(thin_svd(data).singular_values, data.shape)
