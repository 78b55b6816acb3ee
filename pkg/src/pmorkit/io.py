"""File formats: CSV tables, key-value sidecars and matrix files.

Floats are written with 17 significant digits, so every file reads back to
the same binary values.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .interp import Sample, SampleLibrary
from .linalg import read_matrix, write_matrix
from .pod import ProjectionBasis, SnapshotMatrix, pod_basis

__all__ = [
    "TRAJECTORY_COLUMNS",
    "SWEEP_COLUMNS",
    "write_table",
    "read_table",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_metadata",
    "read_metadata",
    "save_snapshots",
    "load_snapshots",
    "save_basis",
    "load_basis",
    "save_library_sample",
    "load_library",
    "write_sweep_csv",
    "write_lm_trace",
]

TRAJECTORY_COLUMNS = ("t", "p_v", "p_p", "p_d", "q_p", "V", "newton_iters")
SWEEP_COLUMNS = ("mu", "method", "eps_inf_inf", "EF", "p_max", "marked_disp")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_table(path, columns, rows) -> None:
    """Write dict rows with a fixed header."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _parse(s):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_table(path):
    """Return ``(columns, rows)`` with numeric cells converted."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        try:
            header = next(r)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty table") from None
        rows = []
        for line in r:
            if len(line) != len(header):
                raise InvalidInputError(f"{path}: row has {len(line)} cells, header {len(header)}")
            rows.append({k: _parse(v) for k, v in zip(header, line)})
    return tuple(header), rows


def write_trajectory_csv(path, traj) -> None:
    cols = list(TRAJECTORY_COLUMNS)
    extra = {}
    if traj.q is not None:
        extra = {"q": int(traj.q)}
        extra.update({f"t_{k}_s": float(v) for k, v in traj.timings.items()})
        cols += list(extra)
    rows = []
    for j in range(len(traj.times)):
        p = traj.pressures[j]
        rows.append({"t": traj.times[j], "p_v": p[0], "p_p": p[1], "p_d": p[2], "q_p": p[3],
                     "V": traj.volumes[j], "newton_iters": int(traj.newton_iters[j]), **extra})
    write_table(path, cols, rows)


def read_trajectory_csv(path) -> dict:
    """Columns as numpy arrays."""
    header, rows = read_table(path)
    missing = set(TRAJECTORY_COLUMNS) - set(header)
    if missing:
        raise InvalidInputError(f"{path}: missing columns {sorted(missing)}")
    return {c: np.array([r[c] for r in rows]) for c in header}


def write_metadata(path, meta: dict) -> None:
    """``key = value`` lines; values are JSON encoded."""
    lines = []
    for k, v in meta.items():
        if "=" in k or "\n" in k:
            raise InvalidInputError(f"bad metadata key {k!r}")
        if isinstance(v, np.ndarray):
            v = v.tolist()
        elif isinstance(v, np.generic):
            v = v.item()
        lines.append(f"{k} = {json.dumps(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_metadata(path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise InvalidInputError(f"{path}:{n}: expected 'key = value'")
        out[key.strip()] = json.loads(val.strip())
    return out


def save_snapshots(stem, snaps: SnapshotMatrix) -> None:
    stem = Path(stem)
    write_matrix(stem.with_suffix(".mat"), snaps.data)
    write_metadata(stem.with_suffix(".meta"), {"kind": "snapshots", "parameter": snaps.parameter,
                                               "dt": snaps.dt})


def load_snapshots(stem) -> SnapshotMatrix:
    stem = Path(stem)
    if stem.suffix in (".mat", ".meta"):
        stem = stem.with_suffix("")
    meta_path = stem.with_suffix(".meta")
    meta = read_metadata(meta_path) if meta_path.exists() else {}
    return SnapshotMatrix(read_matrix(stem.with_suffix(".mat")), meta.get("parameter", {}),
                          meta.get("dt", 0.0))


def save_basis(stem, basis: ProjectionBasis) -> None:
    stem = Path(stem)
    write_matrix(stem.with_suffix(".mat"), basis.V)
    meta = {"kind": "basis", "q": basis.q, "parameter": basis.parameter,
            "singular_values": basis.singular_values.tolist()}
    write_metadata(stem.with_suffix(".meta"), meta)


def load_basis(stem) -> ProjectionBasis:
    stem = Path(stem)
    if stem.suffix in (".mat", ".meta"):
        stem = stem.with_suffix("")
    meta = read_metadata(stem.with_suffix(".meta"))
    V = read_matrix(stem.with_suffix(".mat"))
    if meta.get("q", V.shape[1]) != V.shape[1]:
        raise InvalidInputError(f"{stem}: metadata q disagrees with the matrix")
    return ProjectionBasis(V, np.asarray(meta.get("singular_values", [])), meta.get("parameter"))


def save_library_sample(directory, index: int, mu, snaps: SnapshotMatrix) -> Path:
    """Store one library sample as ``sample_XXX.{mat,meta}``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    stem = d / f"sample_{index:03d}"
    save_snapshots(stem, snaps)
    meta = read_metadata(stem.with_suffix(".meta"))
    meta["mu"] = np.atleast_1d(np.asarray(mu, dtype=float)).tolist()
    write_metadata(stem.with_suffix(".meta"), meta)
    return stem


def load_library(directory, q: int) -> SampleLibrary:
    """Read every ``sample_*.meta`` in ``directory`` and build POD bases of order ``q``."""
    d = Path(directory)
    metas = sorted(d.glob("sample_*.meta"))
    if not metas:
        raise InvalidInputError(f"{d}: no library samples found")
    samples = []
    for m in metas:
        meta = read_metadata(m)
        if "mu" not in meta:
            raise InvalidInputError(f"{m}: missing 'mu'")
        snaps = load_snapshots(m.with_suffix(""))
        samples.append(Sample(meta["mu"], snaps, pod_basis(snaps, q)))
    return SampleLibrary(tuple(samples))


def write_sweep_csv(path, rows) -> None:
    write_table(path, SWEEP_COLUMNS, rows)


def write_lm_trace(path, trace) -> None:
    rows = list(trace.rows())
    cols = ["iter", "S_rel", "grad_rel", "lambda"]
    cols += [f"mu_{p + 1}" for p in range(trace.n_p)] + ["t_fom_s", "t_prom_total_s"]
    write_table(path, cols, rows)
