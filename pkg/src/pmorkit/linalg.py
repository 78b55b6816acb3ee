"""Dense linear algebra primitives and the shared matrix text format.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Everything in
here is pure; inputs are never modified.
"""

from __future__ import annotations

from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import InvalidInputError, RankDeficiencyError, SingularSystemError

__all__ = [
    "SVDResult",
    "thin_svd",
    "solve_dense",
    "orthonormalize",
    "principal_angles",
    "numerical_rank",
    "write_matrix",
    "read_matrix",
]


class SVDResult(NamedTuple):
    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray


def _as_finite_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInputError(f"expected a non-empty 2D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix contains non-finite entries")
    return a


def thin_svd(a) -> SVDResult:
    """Economy SVD ``a = U diag(s) T^T`` with a deterministic sign convention.

    The largest-magnitude entry of every left singular vector is made
    positive (the matching right vector is flipped along with it), so bases
    built from the same data are identical across platforms.
    """
    a = _as_finite_matrix(a)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    t = vt.T
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return SVDResult(u * signs, s, t * signs)


def solve_dense(a, b) -> np.ndarray:
    """Direct LU solve of a square system.

    Raises :class:`SingularSystemError` when the reciprocal condition
    estimate drops below ``n * eps``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
        raise InvalidInputError("linear system contains non-finite entries")
    anorm = np.abs(a).sum(axis=0).max()
    if anorm == 0.0:
        raise SingularSystemError("zero matrix")
    lu, piv, info = sla.lapack.dgetrf(a)
    if info > 0:
        raise SingularSystemError("exactly singular pivot in LU factorization")
    rcond, _ = sla.lapack.dgecon(lu, anorm, norm="1")
    if rcond < n * np.finfo(float).eps:
        raise SingularSystemError("matrix is singular to working precision",
                                  condition=1.0 / max(rcond, 1e-300))
    x, _ = sla.lapack.dgetrs(lu, piv, b)
    return x


def numerical_rank(singular_values, shape) -> int:
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = max(shape) * np.finfo(float).eps * s[0]
    return int(np.sum(s > tol))


def orthonormalize(a) -> np.ndarray:
    """Orthonormal basis of the column span of ``a`` via the SVD."""
    a = _as_finite_matrix(a)
    res = thin_svd(a)
    rank = numerical_rank(res.singular_values, a.shape)
    if rank < a.shape[1]:
        raise RankDeficiencyError(
            f"cannot orthonormalize {a.shape[1]} columns", rank)
    return res.left[:, : a.shape[1]]


def principal_angles(a, b) -> np.ndarray:
    """Principal angles (radians, descending) between ``span(a)`` and ``span(b)``.

    Small angles are resolved through their sines, so values down to about
    1e-15 are meaningful.
    """
    return sla.subspace_angles(_as_finite_matrix(a), _as_finite_matrix(b))


def write_matrix(path, a) -> None:
    """Write ``a`` in the repository matrix format (``rows cols`` header, %.17g)."""
    a = _as_finite_matrix(a)
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines.extend(" ".join(f"{x:.17g}" for x in row) for row in a)
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    text = Path(path).read_text().split("\n", 1)
    header = text[0].split()
    if len(header) != 2:
        raise InvalidInputError(f"{path}: bad matrix header {text[0]!r}")
    rows, cols = int(header[0]), int(header[1])
    body = text[1] if len(text) > 1 else ""
    data = np.array(body.split(), dtype=float)
    if data.size != rows * cols:
        raise InvalidInputError(
            f"{path}: expected {rows * cols} entries, found {data.size}")
    return data.reshape(rows, cols)
