"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` (or plain
``python tests/test_acceptance.py``). The lines are repeated in the pytest
terminal summary.
"""

import sys
import time

import numpy as np
import pytest

from pmorkit.interp import (METHODS, SampleLibrary, grassmann_exp, grassmann_log,
                            interp_cos, interp_svcob, interpolate)
from pmorkit.inverse import (ForwardModel, LMConfig, ObjectiveSpec, ParameterSet, VolumeCurve,
                             lm_run, predicted_speedup, speedup_report)
from pmorkit.linalg import principal_angles, thin_svd
from pmorkit.metrics import eps_inf_inf, scalar_outputs
from pmorkit.pod import SnapshotMatrix, pod_basis, rank_of, ric
from pmorkit.rom import run_rom
from pmorkit.solver import CoupledModel, Scenario, run_fom

RESULTS = {}
SAMPLES = (280.0, 430.0)
Q = 30


def report(n, ok, detail, elapsed):
    line = f"CRITERION {n:2d} {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s): {detail}"
    RESULTS[n] = line
    print(line, file=sys.__stdout__, flush=True)
    return ok


def angle(a, b):
    return principal_angles(getattr(a, "V", a), getattr(b, "V", b)).max()


@pytest.fixture(scope="module")
def library(scenario):
    """Two-sample contractility library plus the FOM runs behind it."""
    runs = {s: run_fom(scenario, {"sigma": s}) for s in SAMPLES}
    lib = SampleLibrary.from_snapshots([([s], runs[s][1]) for s in SAMPLES], Q)
    return lib, runs


@pytest.fixture(scope="module")
def lm_runs(scenario):
    names = ("sigma", "alpha_max", "alpha_min", "t_sys", "t_dias")
    params = ParameterSet(names, (200.0, 15.0, -15.0, 0.35, 0.60))
    truth = dict(zip(names, (280.0, 10.0, -30.0, 0.246, 0.502)))
    spec = ObjectiveSpec.synthetic(scenario, truth, VolumeCurve(10))
    fwd = ForwardModel(scenario, params, VolumeCurve(10))
    out = {}
    for g in ("fom", "prom"):
        t0 = time.perf_counter()
        mu, tr = lm_run(np.ones(5), spec, fwd, LMConfig(gradients=g))
        out[g] = (mu, tr, time.perf_counter() - t0)
    return out


def _random_snapshots(rng):
    n = int(rng.integers(10, 80))
    m = int(rng.integers(3, 60))
    decay = rng.uniform(0.3, 0.95)
    return rng.standard_normal((n, m)) * decay ** np.arange(m)


def test_criterion_01_pod_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst, mono, full = 0.0, True, True
    for _ in range(20):
        D = _random_snapshots(rng)
        sv = thin_svd(D).singular_values
        n_s = sv.size
        for q in range(1, n_s + 1):
            V = pod_basis(SnapshotMatrix(D), q).V
            lhs = np.linalg.norm(D - V @ (V.T @ D), "fro") ** 2
            rhs = np.sum(sv[q:] ** 2)
            worst = max(worst, abs(lhs - rhs) / np.sum(sv**2))
        r = [ric(sv, q) for q in range(n_s + 1)]
        mono &= bool(np.all(np.diff(r) >= -1e-15))
        full &= abs(ric(sv, n_s) - 1.0) < 1e-14
    el = time.perf_counter() - t0
    ok = worst < 1e-10 and mono and full and el < 10
    assert report(1, ok, f"max rel truncation mismatch {worst:.2e}, RIC monotone={mono}, "
                         f"RIC(n_s)=1 {full}", el)


def test_criterion_02_jacobian_consistency(scenario):
    t0 = time.perf_counter()
    model = CoupledModel(scenario)
    rng = np.random.default_rng(202)
    steps = sorted(rng.choice(np.arange(200, 500), 5, replace=False))
    s = model.initial_state()
    worst = 0.0
    k = 1
    for target in steps:
        while k < target:
            s, _, _ = model.step(s, k * model.dt)
            k += 1
        t = target * model.dt
        d = s.d + 1e-3 * rng.standard_normal(s.d.size)
        p = s.p + 1e-3 * rng.standard_normal(4)
        _, K = model.system(d, p, s, t)
        x = np.concatenate([d, p])
        n = d.size
        fd = np.empty_like(K)
        for j in range(x.size):
            h = 1e-6 * max(1.0, abs(x[j]))
            xp, xm = x.copy(), x.copy()
            xp[j] += h
            xm[j] -= h
            fd[:, j] = (model.system(xp[:n], xp[n:], s, t)[0]
                        - model.system(xm[:n], xm[n:], s, t)[0]) / (2 * h)
        worst = max(worst, np.max(np.abs(K - fd)) / np.max(np.abs(K)))
    el = time.perf_counter() - t0
    assert report(2, worst < 1e-5 and el < 60,
                  f"max relative FD error {worst:.2e} at steps {list(map(int, steps))}", el)


def test_criterion_03_full_rank_rom(scenario, default_fom):
    t0 = time.perf_counter()
    traj, snaps = default_fom
    q = rank_of(snaps)
    rom, _ = run_rom(None, pod_basis(snaps, q), scenario)
    err = eps_inf_inf(rom, traj)
    bound = 10 * scenario.tolerances.tol_s_inc
    el = time.perf_counter() - t0
    assert report(3, err <= bound and el < 300, f"q=rank={q}, eps_inf_inf={err:.2e} mm "
                                                 f"(bound {bound:.0e})", el)


def test_criterion_04_error_decay(scenario, default_fom):
    t0 = time.perf_counter()
    traj, snaps = default_fom
    qs = (2, 4, 8, 16, 32)
    errs = [eps_inf_inf(run_rom(None, pod_basis(snaps, q), scenario)[0], traj) for q in qs]
    bumps = sum(b >= a for a, b in zip(errs, errs[1:]))
    drop = errs[0] / errs[-1]
    el = time.perf_counter() - t0
    ok = drop >= 100 and bumps <= 1 and el < 900
    detail = ", ".join(f"q={q}: {e:.2e}" for q, e in zip(qs, errs))
    assert report(4, ok, f"{detail}; reduction {drop:.0f}x, non-monotone pairs {bumps}", el)


def test_criterion_05_sample_point_consistency(library):
    t0 = time.perf_counter()
    lib, _ = library
    worst = 0.0
    for k, s in enumerate(SAMPLES):
        local = lib.samples[k].basis
        for method in METHODS:
            worst = max(worst, angle(interpolate(lib, [s], method), local))
    el = time.perf_counter() - t0
    assert report(5, worst < 1e-8 and el < 60,
                  f"max principal angle to local POD over {METHODS}: {worst:.2e}", el)


def test_criterion_06_cos_equals_sv_weighted_cob(library):
    t0 = time.perf_counter()
    _, runs = library
    items = [([s], runs[s][1]) for s in SAMPLES]
    full = min(rank_of(runs[s][1]) for s in SAMPLES)
    lib = SampleLibrary.from_snapshots(items, full)
    worst = 0.0
    for w in (0.1, 0.3, 0.5, 0.7, 0.9):
        worst = max(worst, angle(interp_cos(lib, [w, 1 - w], Q), interp_svcob(lib, [w, 1 - w], Q)))
    el = time.perf_counter() - t0
    assert report(6, worst < 1e-6 and el < 60,
                  f"full-rank library (q={full}), interpolated q={Q}: max angle {worst:.2e}", el)


def test_criterion_07_grassmann_roundtrip(library):
    t0 = time.perf_counter()
    lib, _ = library
    worst = 0.0
    for i, a in enumerate(lib.samples):
        for b in lib.samples:
            worst = max(worst, angle(grassmann_exp(a.basis.V, grassmann_log(a.basis.V, b.basis.V)),
                                     b.basis))
        at_ref = interpolate(lib, [SAMPLES[i]], "grassmann")
        worst = max(worst, angle(at_ref, a.basis))
    el = time.perf_counter() - t0
    assert report(7, worst < 1e-8 and el < 60, f"max angle after Exp(Log) and at reference: "
                                              f"{worst:.2e}", el)


def test_criterion_08_two_sample_sweep(scenario, library):
    t0 = time.perf_counter()
    lib, runs = library
    mid = 0.5 * sum(SAMPLES)
    fom_mid, _ = run_fom(scenario, {"sigma": mid})
    mid_err, sample_err = {}, {}
    for method in METHODS:
        rom, _ = run_rom({"sigma": mid}, interpolate(lib, [mid], method), scenario)
        mid_err[method] = eps_inf_inf(rom, fom_mid)
        sample_err[method] = max(
            eps_inf_inf(run_rom({"sigma": s}, interpolate(lib, [s], method), scenario)[0], runs[s][0])
            for s in SAMPLES)
    el = time.perf_counter() - t0
    ok = all(mid_err[m] > sample_err[m] for m in METHODS) and mid_err["cos"] <= mid_err["cob"]
    detail = "; ".join(f"{m}: mid {mid_err[m]:.3e} / sample {sample_err[m]:.3e}" for m in METHODS)
    assert report(8, ok and el < 1200, f"q={Q}, sigma*={mid:g}: {detail}", el)


def test_criterion_09_scalar_outputs(scenario, library):
    t0 = time.perf_counter()
    lib, _ = library
    worst = {"EF": 0.0, "p_v_max": 0.0, "marked_disp_max": 0.0}
    for s in np.linspace(*SAMPLES, 7)[1:-1]:
        fom = scalar_outputs(run_fom(scenario, {"sigma": s})[0], scenario.mesh)
        rom_traj, _ = run_rom({"sigma": s}, interpolate(lib, [s], "cos"), scenario)
        rom = scalar_outputs(rom_traj, scenario.mesh)
        for key in worst:
            a, b = getattr(rom, key), getattr(fom, key)
            worst[key] = max(worst[key], abs(a - b) / abs(b))
    el = time.perf_counter() - t0
    ok = max(worst.values()) <= 0.05 and el < 1200
    assert report(9, ok, ", ".join(f"{k} max rel err {v:.2e}" for k, v in worst.items()), el)


TARGET = np.array([1.4, 0.667, 2.0, 0.7029, 0.8367])


def test_criterion_10_lm_parity(lm_runs):
    mu_f, tr_f, el_f = lm_runs["fom"]
    mu_p, tr_p, el_p = lm_runs["prom"]
    rel_f = np.max(np.abs(mu_f / TARGET - 1))
    rel_p = np.max(np.abs(mu_p / TARGET - 1))
    el = el_f + el_p
    ok = (tr_f.converged and tr_p.converged and tr_p.n_iter <= tr_f.n_iter + 2
          and max(rel_f, rel_p) <= 0.01 and el < 7200)
    assert report(10, ok, f"n_i FOM={tr_f.n_iter} pROM={tr_p.n_iter}; "
                          f"S/S0 {tr_f.iterations[-1].S / tr_f.S0:.1e} / "
                          f"{tr_p.iterations[-1].S / tr_p.S0:.1e}; "
                          f"max param dev FOM {rel_f:.2%} pROM {rel_p:.2%}; "
                          f"pROM mu={np.round(mu_p, 4).tolist()}", el)


def test_criterion_11_speedup_accounting(lm_runs):
    t0 = time.perf_counter()
    beta = predicted_speedup(7.1, 5, 1.0)
    rep = speedup_report(lm_runs["fom"][1], lm_runs["prom"][1])
    dev = abs(rep.beta - rep.beta_measured) / rep.beta_measured
    ok = abs(beta - 3.26) <= 0.05 and dev <= 0.10
    assert report(11, ok, f"beta(7.1, 5, 1)={beta:.3f}; surrogate alpha={rep.alpha:.2f}, "
                          f"beta predicted {rep.beta:.3f} vs measured {rep.beta_measured:.3f} "
                          f"({dev:.1%})", time.perf_counter() - t0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
