"""Subspace interpolation between precomputed local bases.

Four constructions produce a basis at an unsampled parameter from a
:class:`SampleLibrary`:

* ``interp_cob``: weighted concatenation of the sample bases, then SVD.
* ``interp_cos``: weighted concatenation of the snapshot matrices, then SVD.
* ``interp_direct_adjusted``: mode-by-mode weighted sum after pairing modes
  by MAC and aligning their signs.
* ``interp_grassmann``: weighted average in the tangent space of the
  Grassmann manifold at a reference sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (ExtrapolationError, InvalidInputError, SingularSystemError,
                     TangentMapError)
from .linalg import solve_dense, thin_svd
from .pod import ProjectionBasis, SnapshotMatrix, pod_basis

__all__ = [
    "Sample",
    "SampleLibrary",
    "linear_weights",
    "idw_weights",
    "query_weights",
    "interp_cob",
    "interp_cos",
    "cos_basis",
    "interp_svcob",
    "mac",
    "interp_direct_adjusted",
    "interp_grassmann",
    "grassmann_log",
    "grassmann_exp",
    "interpolate",
    "METHODS",
]

METHODS = ("cob", "cos", "direct", "grassmann")


@dataclass(frozen=True)
class Sample:
    mu: np.ndarray
    snapshots: SnapshotMatrix | None
    basis: ProjectionBasis

    def __post_init__(self):
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, dtype=float)))


@dataclass(frozen=True)
class SampleLibrary:
    """Immutable collection of sample parameters with their snapshots and bases."""

    samples: tuple = field(default_factory=tuple)

    def __post_init__(self):
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        if not samples:
            raise InvalidInputError("sample library is empty")
        n, q = samples[0].basis.n, samples[0].basis.q
        dim = samples[0].mu.size
        for s in samples:
            if s.basis.n != n or s.basis.q != q:
                raise InvalidInputError("all sample bases must share n and q")
            if s.mu.size != dim:
                raise InvalidInputError("all sample parameters must share a dimension")
            if s.snapshots is not None and s.snapshots.n != n:
                raise InvalidInputError("snapshot row count does not match the bases")
        mus = np.array([s.mu for s in samples])
        for i in range(len(samples)):
            for j in range(i):
                if np.array_equal(mus[i], mus[j]):
                    raise InvalidInputError(f"duplicate sample parameter {mus[i].tolist()}")

    @classmethod
    def from_snapshots(cls, items, q: int) -> "SampleLibrary":
        """Build from ``(mu, SnapshotMatrix)`` pairs using POD bases of order ``q``."""
        return cls(tuple(Sample(mu, D, pod_basis(D, q)) for mu, D in items))

    def __len__(self):
        return len(self.samples)

    @property
    def K(self) -> int:
        return len(self.samples)

    @property
    def n(self) -> int:
        return self.samples[0].basis.n

    @property
    def q(self) -> int:
        return self.samples[0].basis.q

    @property
    def mus(self) -> np.ndarray:
        return np.array([s.mu for s in self.samples])


# -- weights -------------------------------------------------------------------
def linear_weights(mu_star: float, mu_1: float, mu_2: float) -> tuple[float, float]:
    """Piecewise-linear weights ``(w, 1 - w)`` with ``w = (mu* - mu2)/(mu1 - mu2)``."""
    if mu_1 == mu_2:
        raise InvalidInputError("interpolation interval has zero length")
    lo, hi = min(mu_1, mu_2), max(mu_1, mu_2)
    if not lo <= mu_star <= hi:
        raise ExtrapolationError(f"mu*={mu_star} outside [{lo}, {hi}]")
    w = (mu_star - mu_2) / (mu_1 - mu_2)
    return w, 1.0 - w


def idw_weights(mu_star, mus) -> np.ndarray:
    """Inverse-distance weights ``(1/d_k) / sum(1/d_j)``; a coincident sample takes all weight."""
    mus = np.atleast_2d(np.asarray(mus, dtype=float))
    d = np.linalg.norm(mus - np.atleast_1d(np.asarray(mu_star, dtype=float)), axis=1)
    hit = np.flatnonzero(d == 0.0)
    if hit.size > 1:
        raise InvalidInputError("coincident sample points")
    w = np.zeros(len(d))
    if hit.size:
        w[hit[0]] = 1.0
        return w
    inv = 1.0 / d
    return inv / inv.sum()


def query_weights(lib: SampleLibrary, mu_star) -> np.ndarray:
    """Default weights: piecewise-linear for scalar parameters, IDW otherwise."""
    mus = lib.mus
    mu_star = np.atleast_1d(np.asarray(mu_star, dtype=float))
    if mus.shape[1] != mu_star.size:
        raise InvalidInputError("query dimension does not match the library")
    w = np.zeros(lib.K)
    if mus.shape[1] > 1:
        return idw_weights(mu_star, mus)
    x = mus[:, 0]
    m = float(mu_star[0])
    if lib.K == 1:
        if m != x[0]:
            raise ExtrapolationError("single-sample library queried away from its sample")
        w[0] = 1.0
        return w
    order = np.argsort(x)
    xs = x[order]
    if not xs[0] <= m <= xs[-1]:
        raise ExtrapolationError(f"mu*={m} outside [{xs[0]}, {xs[-1]}]")
    j = min(int(np.searchsorted(xs, m, side="right")), len(xs) - 1)
    a, b = order[j - 1], order[j]
    wa, wb = linear_weights(m, x[a], x[b])
    w[a], w[b] = wa, wb
    return w


def _check_weights(lib, weights, normalized=False):
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != lib.K:
        raise InvalidInputError(f"expected {lib.K} weights, got {w.size}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidInputError("weights must be finite and non-negative")
    if not np.any(w > 0):
        raise InvalidInputError("all weights are zero")
    if normalized and abs(w.sum() - 1.0) > 1e-10:
        raise InvalidInputError("weights must sum to one for this method")
    return w


def _leading(mat, q, tag, meta=None):
    res = thin_svd(mat)
    return ProjectionBasis(res.left[:, :q].copy(), res.singular_values, tag, dict(meta or {}))


# -- concatenation methods -------------------------------------------------------
def interp_cob(lib: SampleLibrary, weights, q: int | None = None) -> ProjectionBasis:
    """Leading ``q`` left singular vectors of ``[w_1 V_1, ..., w_K V_K]``."""
    w = _check_weights(lib, weights)
    q = q or lib.q
    stacked = np.hstack([wk * s.basis.V for wk, s in zip(w, lib.samples)])
    return _leading(stacked, q, "interpolated", {"method": "cob", "weights": w.tolist()})


def interp_svcob(lib: SampleLibrary, weights, q: int | None = None) -> ProjectionBasis:
    """CoB with every basis column scaled by its singular value."""
    w = _check_weights(lib, weights)
    q = q or lib.q
    cols = []
    for wk, s in zip(w, lib.samples):
        sv = s.basis.singular_values[:s.basis.q]
        if sv.size != s.basis.q:
            raise InvalidInputError("sample basis carries no singular values")
        cols.append(wk * s.basis.V * sv)
    return _leading(np.hstack(cols), q, "interpolated", {"method": "svcob", "weights": w.tolist()})


def cos_basis(snapshots, weights, q: int) -> ProjectionBasis:
    """Leading ``q`` left singular vectors of ``[w_1 D_1, ..., w_K D_K]``.

    Zero-weight blocks are dropped before the SVD (they contribute only
    null directions).
    """
    blocks = [wk * (D.data if isinstance(D, SnapshotMatrix) else np.asarray(D, float))
              for wk, D in zip(weights, snapshots) if wk > 0]
    if not blocks:
        raise InvalidInputError("all weights are zero")
    stacked = np.hstack(blocks)
    if not 1 <= q <= min(stacked.shape):
        raise InvalidInputError(f"reduced order q={q} outside [1, {min(stacked.shape)}]")
    return _leading(stacked, q, "interpolated", {"method": "cos", "weights": list(weights)})


def interp_cos(lib: SampleLibrary, weights, q: int | None = None) -> ProjectionBasis:
    """Leading ``q`` left singular vectors of ``[w_1 D_1, ..., w_K D_K]``."""
    w = _check_weights(lib, weights)
    if any(s.snapshots is None for s in lib.samples):
        raise InvalidInputError("CoS needs the snapshot matrices of every sample")
    return cos_basis([s.snapshots for s in lib.samples], w.tolist(), q or lib.q)


# -- MAC-adjusted direct interpolation -------------------------------------------
def mac(v_i, v_j) -> float:
    """Modal assurance criterion ``|v_i . v_j|^2 / (|v_i|^2 |v_j|^2)``."""
    v_i = np.asarray(v_i, dtype=float).ravel()
    v_j = np.asarray(v_j, dtype=float).ravel()
    ni, nj = np.dot(v_i, v_i), np.dot(v_j, v_j)
    if ni == 0.0 or nj == 0.0:
        raise InvalidInputError("MAC of a zero vector is undefined")
    c = np.dot(v_i, v_j)
    return float(min(c * c / (ni * nj), 1.0))


def _mac_matrix(A, B):
    num = (A.T @ B) ** 2
    return num / np.outer(np.sum(A * A, axis=0), np.sum(B * B, axis=0))


def interp_direct_adjusted(lib: SampleLibrary, weights, reference="svcob",
                           q: int | None = None) -> ProjectionBasis:
    """Weighted mode-by-mode sum after MAC pairing against a reference basis.

    ``reference`` is a sample index, an explicit ``ProjectionBasis``/matrix,
    ``"cob"`` (weighted CoB) or ``"svcob"`` (singular-value weighted CoB,
    the default). A sample whose pairing is not injective is reported in
    ``meta["warnings"]``; the duplicated mode is still used.
    """
    w = _check_weights(lib, weights, normalized=True)
    q = q or lib.q
    if isinstance(reference, str):
        if reference == "cob":
            R = interp_cob(lib, w, q).V
        elif reference == "svcob":
            R = interp_svcob(lib, w, q).V
        else:
            raise InvalidInputError(f"unknown reference policy {reference!r}")
    elif isinstance(reference, (int, np.integer)):
        if not 0 <= reference < lib.K:
            raise InvalidInputError(f"reference sample {reference} out of range")
        R = lib.samples[reference].basis.V[:, :q]
    else:
        R = reference.V if isinstance(reference, ProjectionBasis) else np.asarray(reference, float)
    if R.shape != (lib.n, q):
        raise InvalidInputError(f"reference basis must be {lib.n} x {q}")
    vbar = np.zeros((lib.n, q))
    warnings, pairing = [], []
    for k, (wk, s) in enumerate(zip(w, lib.samples)):
        Vk = s.basis.V
        M = _mac_matrix(Vk, R)  # rows: sample modes, cols: reference modes
        idx = np.argmax(M, axis=0)
        pairing.append(idx.tolist())
        if len(set(idx.tolist())) < q:
            warnings.append(f"sample {k}: ambiguous MAC pairing {idx.tolist()}")
        if wk == 0.0:
            continue
        picked = Vk[:, idx]
        signs = np.sign(np.sum(picked * R, axis=0))
        signs[signs == 0] = 1.0
        vbar += wk * picked * signs
    meta = {"method": "direct", "weights": w.tolist(), "pairing": pairing,
            "warnings": warnings}
    return _leading(vbar, q, "interpolated", meta)


# -- Grassmann manifold ----------------------------------------------------------
def grassmann_log(V0, Vk, sample=None):
    """Tangent vector ``U arctan(S) T^T`` of ``span(Vk)`` at ``span(V0)``."""
    try:
        C = solve_dense((V0.T @ Vk).T, Vk.T).T  # Vk (V0^T Vk)^{-1}
    except SingularSystemError as exc:
        raise TangentMapError(
            f"sample {sample}: V0^T Vk is singular, subspaces are too far apart", sample) from exc
    M = C - V0 @ (V0.T @ C)
    U, s, T = thin_svd(M)
    return (U * np.arctan(s)) @ T.T


def grassmann_exp(V0, gamma):
    """Point ``V0 T cos(S) + U sin(S)`` reached from ``span(V0)`` along ``gamma``."""
    U, s, T = thin_svd(gamma)
    return V0 @ T * np.cos(s) + U * np.sin(s)


def interp_grassmann(lib: SampleLibrary, weights, k0: int | None = None,
                     q: int | None = None) -> ProjectionBasis:
    """Weighted tangent-space average at sample ``k0`` (default: largest weight)."""
    w = _check_weights(lib, weights, normalized=True)
    if q is not None and q != lib.q:
        raise InvalidInputError("Grassmann interpolation keeps the library order q")
    if k0 is None:
        k0 = int(np.argmax(w))
    if not 0 <= k0 < lib.K:
        raise InvalidInputError(f"reference sample {k0} out of range")
    V0 = lib.samples[k0].basis.V
    gamma = np.zeros_like(V0)
    for k, (wk, s) in enumerate(zip(w, lib.samples)):
        if wk == 0.0 or k == k0:
            continue
        gamma += wk * grassmann_log(V0, s.basis.V, sample=k)
    V = grassmann_exp(V0, gamma)
    # re-orthonormalize against round-off in the trigonometric map
    V = thin_svd(V).left
    meta = {"method": "grassmann", "weights": w.tolist(), "k0": k0}
    return ProjectionBasis(V, np.empty(0), "interpolated", meta)


_DISPATCH = {
    "cob": interp_cob,
    "cos": interp_cos,
    "direct": interp_direct_adjusted,
    "grassmann": interp_grassmann,
}


def interpolate(lib: SampleLibrary, mu_star, method: str = "cos", weights=None,
                **kwargs) -> ProjectionBasis:
    """Basis at ``mu_star`` with the named method and default weights."""
    if method not in _DISPATCH:
        raise InvalidInputError(f"unknown interpolation method {method!r}; choose from {METHODS}")
    if weights is None:
        weights = query_weights(lib, mu_star)
    basis = _DISPATCH[method](lib, weights, **kwargs)
    basis.meta["mu"] = np.atleast_1d(np.asarray(mu_star, dtype=float)).tolist()
    return basis
