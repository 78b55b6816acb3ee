"""Command-line entry point ``pmorkit``.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io as pio
from .config import ExperimentConfig, load_config
from .errors import InvalidInputError, PmorError
from .interp import METHODS, interpolate
from .inverse import (ForwardModel, LMConfig, ObjectiveSpec, ParameterSet, VolumeCurve, lm_run,
                      speedup_report)
from .metrics import eps_inf_inf, scalar_outputs
from .pod import pod_basis, ric, select_order
from .rom import run_rom
from .solver import run_fom

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_help()}")


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("PMORKIT_THREADS", "1")))
    except ValueError:
        raise UsageError("PMORKIT_THREADS must be an integer") from None


def _range(text):
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError("range must look like a:b:n") from None
    if n < 1:
        raise argparse.ArgumentTypeError("range needs n >= 1")
    return np.linspace(a, b, n)


def _out(args, cfg: ExperimentConfig) -> Path:
    d = Path(args.out or cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- verbs ---------------------------------------------------------------------------
def cmd_fom_run(args, cfg):
    out = _out(args, cfg)
    traj, snaps = run_fom(cfg.scenario)
    pio.write_trajectory_csv(out / "trajectory.csv", traj)
    pio.save_snapshots(out / "snapshots", snaps)
    summary = scalar_outputs(traj, cfg.scenario.mesh).to_dict()
    summary.update(wall_time_s=traj.wall_time, timings=traj.timings,
                   mean_newton_iters=float(np.mean(traj.newton_iters[1:])))
    _write_json(out / "summary.json", summary)
    print(f"fom run: EF={summary['EF']:.4f} p_v_max={summary['p_v_max']:.4f} -> {out}")


def cmd_pod_build(args, cfg):
    snaps = pio.load_snapshots(args.snapshots)
    if args.stride > 1:
        snaps = snaps.strided(args.stride)
    from .linalg import thin_svd

    sv = thin_svd(snaps.data).singular_values
    q = select_order(sv, args.eps_pod) if args.eps_pod is not None else args.q
    basis = pod_basis(snaps, q)
    stem = Path(args.out) if args.out else Path(args.snapshots).with_suffix("").parent / f"basis_q{q}"
    stem.parent.mkdir(parents=True, exist_ok=True)
    pio.save_basis(stem, basis)
    print(f"pod build: q={q} RIC={ric(sv, q):.12f} -> {stem}.mat")


def cmd_rom_run(args, cfg):
    out = _out(args, cfg)
    basis = pio.load_basis(args.basis)
    traj, _ = run_rom(None, basis, cfg.scenario)
    pio.write_trajectory_csv(out / "trajectory_rom.csv", traj)
    summary = scalar_outputs(traj, cfg.scenario.mesh).to_dict()
    summary.update(q=basis.q, wall_time_s=traj.wall_time, timings=traj.timings)
    if args.compare:
        fom, _ = run_fom(cfg.scenario)
        summary["eps_inf_inf"] = eps_inf_inf(traj, fom)
    _write_json(out / "summary_rom.json", summary)
    print(f"rom run: q={basis.q} EF={summary['EF']:.4f} -> {out}")


def cmd_pmor_library(args, cfg):
    out = Path(args.out or Path(cfg.output_dir) / "library")
    name = cfg.pmor.parameter
    for i, val in enumerate(cfg.pmor.samples):
        _, snaps = run_fom(cfg.scenario, {name: val})
        pio.save_library_sample(out, i, [val], snaps)
        print(f"pmor library: sample {i} {name}={val:g}")
    print(f"pmor library -> {out}")


def sweep_rows(lib, values, methods, cfg, q=None, reference=None):
    """FOM vs pROM comparison rows at every value for every method."""
    name = cfg.pmor.parameter
    rows = []
    for mu in values:
        fom, _ = run_fom(cfg.scenario, {name: float(mu)})
        for method in methods:
            kw = {"q": q or lib.q}
            if method == "direct":
                kw["reference"] = reference or cfg.pmor.reference
            basis = interpolate(lib, [mu], method, **kw)
            rom, _ = run_rom({name: float(mu)}, basis, cfg.scenario)
            so = scalar_outputs(rom, cfg.scenario.mesh)
            rows.append({"mu": float(mu), "method": method, "eps_inf_inf": eps_inf_inf(rom, fom),
                         "EF": so.EF, "p_max": so.p_v_max, "marked_disp": so.marked_disp_max})
        fo = scalar_outputs(fom, cfg.scenario.mesh)
        rows.append({"mu": float(mu), "method": "fom", "eps_inf_inf": 0.0, "EF": fo.EF,
                     "p_max": fo.p_v_max, "marked_disp": fo.marked_disp_max})
    return rows


def cmd_pmor_sweep(args, cfg):
    out = _out(args, cfg)
    q = args.q or cfg.pmor.q
    lib = pio.load_library(args.library, q)
    methods = METHODS if args.method == "all" else (args.method,)
    rows = sweep_rows(lib, args.range, methods, cfg, q)
    path = out / f"sweep_{args.method}.csv"
    pio.write_sweep_csv(path, rows)
    print(f"pmor sweep: {len(rows)} rows -> {path}")


def invana_setup(cfg):
    inv = cfg.invana
    params = ParameterSet(inv.names, inv.initial)
    truth = dict(zip(inv.names, inv.truth))
    extractor = VolumeCurve(inv.stride)
    spec = ObjectiveSpec.synthetic(cfg.scenario, truth, extractor)
    return params, truth, spec, ForwardModel(cfg.scenario, params, extractor)


def cmd_invana_run(args, cfg):
    out = _out(args, cfg)
    params, truth, spec, fwd = invana_setup(cfg)
    lm = LMConfig(**{**asdict(cfg.invana.lm), "gradients": args.gradients,
                     "workers": _workers()})

    def progress(rec):
        print(f"invana: iter {rec.iter} S={rec.S:.6e}", flush=True)

    mu_hat, trace = lm_run(np.ones(params.n_p), spec, fwd, lm, callback=progress)
    pio.write_lm_trace(out / f"lm_trace_{args.gradients}.csv", trace)
    summary = {
        "gradients": args.gradients,
        "converged": trace.converged,
        "reason": trace.reason,
        "iterations": trace.n_iter,
        "mu_hat": mu_hat.tolist(),
        "mu_truth": params.normalize(truth).tolist(),
        "S_rel_final": trace.iterations[-1].S / trace.S0,
    }
    if args.compare:
        other = pio.read_table(args.compare)
        summary["compare_trace"] = str(args.compare)
        summary["compare_iterations"] = max(r["iter"] for r in other[1])
    _write_json(out / f"lm_summary_{args.gradients}.json", summary)
    import pickle

    with open(out / f"lm_trace_{args.gradients}.pkl", "wb") as fh:
        pickle.dump(trace, fh)
    if args.gradients == "prom" and (out / "lm_trace_fom.pkl").exists():
        with open(out / "lm_trace_fom.pkl", "rb") as fh:
            rep = speedup_report(pickle.load(fh), trace)
        summary.update(alpha=rep.alpha, beta=rep.beta, beta_measured=rep.beta_measured)
        _write_json(out / f"lm_summary_{args.gradients}.json", summary)
    print(f"invana run ({args.gradients}): converged={trace.converged} "
          f"iterations={trace.n_iter} -> {out}")
    return 0 if trace.converged else 2


def cmd_report(args, cfg):
    """Plot-ready CSVs for POD spectrum, error vs q, sweeps and LM traces."""
    out = _out(args, cfg)
    from .linalg import thin_svd

    fom, snaps = run_fom(cfg.scenario)
    sv = thin_svd(snaps.data).singular_values
    pio.write_table(out / "pod_result.csv", ("i", "sigma", "ric"),
                    [{"i": i + 1, "sigma": s, "ric": ric(sv, i + 1)} for i, s in enumerate(sv)])
    rows = []
    for q in args.q_list:
        basis = pod_basis(snaps, q)
        rom, _ = run_rom(None, basis, cfg.scenario)
        rows.append({"q": q, "eps_inf_inf": eps_inf_inf(rom, fom), "t_rom_s": rom.wall_time,
                     "t_fom_s": fom.wall_time})
    pio.write_table(out / "disp_err.csv", ("q", "eps_inf_inf", "t_rom_s", "t_fom_s"), rows)

    from .interp import Sample, SampleLibrary

    name = cfg.pmor.parameter
    samples = []
    for val in cfg.pmor.samples:
        _, s = run_fom(cfg.scenario, {name: val})
        samples.append(Sample([val], s, pod_basis(s, cfg.pmor.q)))
    lib = SampleLibrary(tuple(samples))
    lo, hi = min(cfg.pmor.samples), max(cfg.pmor.samples)
    values = np.linspace(lo, hi, args.points)
    pio.write_sweep_csv(out / "err_sample.csv", sweep_rows(lib, values, METHODS, cfg))

    import pickle

    for g in ("fom", "prom"):
        pkl = Path(args.traces or out) / f"lm_trace_{g}.pkl"
        if pkl.exists():
            with open(pkl, "rb") as fh:
                pio.write_lm_trace(out / f"lm_iter_{g}.csv", pickle.load(fh))
    print(f"report -> {out}")


# -- parser ----------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pmorkit", description="Parametric ROM toolkit for a coupled chamber model.")
    p.add_argument("--seed", type=int, default=None, help="seed for all random draws")
    sub = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--out", help="output directory (default: config output_dir)")
        sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    fom = sub.add_parser("fom", help="full-order simulation").add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sp = fom.add_parser("run", help="full-order run")
    common(sp)
    sp.set_defaults(func=cmd_fom_run)

    pod = sub.add_parser("pod", help="POD basis construction").add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sp = pod.add_parser("build", help="POD basis from a snapshot matrix file")
    common(sp)
    sp.add_argument("--snapshots", required=True)
    sp.add_argument("--q", type=int, default=30)
    sp.add_argument("--eps-pod", type=float, default=None)
    sp.add_argument("--stride", type=int, default=1)
    sp.set_defaults(func=cmd_pod_build)

    rom = sub.add_parser("rom", help="reduced-order simulation").add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sp = rom.add_parser("run", help="reduced run with a stored basis")
    common(sp)
    sp.add_argument("--basis", required=True)
    sp.add_argument("--compare", action="store_true", help="also run the FOM and report the error")
    sp.set_defaults(func=cmd_rom_run)

    pm = sub.add_parser("pmor", help="parametric library and interpolation sweeps").add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sp = pm.add_parser("library", help="FOM runs at the configured samples")
    common(sp)
    sp.set_defaults(func=cmd_pmor_library)
    sp = pm.add_parser("sweep", help="interpolated ROM vs FOM over a parameter range")
    common(sp)
    sp.add_argument("--library", required=True)
    sp.add_argument("--method", choices=METHODS + ("all",), default="cos")
    sp.add_argument("--range", type=_range, required=True, help="a:b:n in library units")
    sp.add_argument("--q", type=int, default=None)
    sp.set_defaults(func=cmd_pmor_sweep)

    inv = sub.add_parser("invana", help="inverse analysis").add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sp = inv.add_parser("run", help="Levenberg-Marquardt calibration")
    common(sp)
    sp.add_argument("--gradients", choices=("prom", "fom"), default="prom")
    sp.add_argument("--compare", help="lm_trace.csv of another run to cross-reference")
    sp.set_defaults(func=cmd_invana_run)

    sp = sub.add_parser("report", help="plot-ready CSVs")
    common(sp)
    sp.add_argument("--q-list", type=lambda s: [int(x) for x in s.split(",")],
                    default=[2, 4, 8, 16, 32])
    sp.add_argument("--points", type=int, default=9)
    sp.add_argument("--traces", help="directory holding lm_trace_{fom,prom}.pkl")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        cfg = load_config(getattr(args, "config", None))
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        np.random.seed(cfg.seed)
        rc = args.func(args, cfg)
        return int(rc or 0)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PmorError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
