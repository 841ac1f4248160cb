"""End-to-end pipelines for the example systems, with pass/fail checks.

Each ``check_*`` function runs one pipeline and returns a list of
:class:`Check` results. The CLI ``reproduce`` subcommand and the acceptance
test-suite both call these.
"""
import time
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from . import zoo
from .analytics import (classify_incomplete_localization, localized_mask,
                        localization_statistics, make_observable, mean_fidelity,
                        participation_ratio)
from .lindblad import (apply_adjoint_generator, apply_generator, asymptotic_state, propagate)
from .linalg import dag, projector, random_density
from .structure import (detect_dfs, find_all_stationary_states, infinite_time_projector,
                        simultaneous_block_diagonalize, split_decaying_asymptotic,
                        system_operators, trajectory_steady_state_finder)
from .system import validate_density
from .unravel import run_ensemble, run_trajectory

N_TRAJ = 500


@dataclass
class Check:
    criterion: str
    name: str
    passed: bool
    detail: str
    metrics: Dict = field(default_factory=dict)

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.criterion} {self.name}: {self.detail}"


def _sigma3(w, n):
    return 3 * np.sqrt(w * (1 - w) / n)


def _mc_envelope(series, reference, n):
    err = max(np.linalg.norm(a - b) for a, b in zip(series, reference))
    return float(err), 5 / np.sqrt(n)


# -- qubit -------------------------------------------------------------------------

def qubit_ensembles(n_traj=N_TRAJ, seed=7, t_final=40.0, t_burn=15.0, dt=1e-3):
    sys = zoo.build_monitored_qubit(1.0, 0.7)
    psi = zoo.preset_initial_state("qubit", sys)
    P0 = np.diag([1.0, 0.0]).astype(complex)
    projs = [P0, np.eye(2) - P0]
    runs = {sch: run_ensemble(sys, psi, sch, n_traj, t_final, dt=dt, base_seed=seed + k,
                              projectors=projs, t_burn=t_burn)
            for k, sch in enumerate(("diffusive", "jump"))}
    return sys, psi, runs


def check_qubit(n_traj=N_TRAJ, seed=7):
    sys, psi, runs = qubit_ensembles(n_traj, seed)
    out = []
    for sch, ens in runs.items():
        rep = localization_statistics(ens, [0.5, 0.5], ["|0>", "|1>"])
        f0 = rep.frequencies[0]
        min_max = float(ens.terminal_overlap_samples.max(axis=0).min())
        ok = abs(f0 - 0.5) <= _sigma3(0.5, n_traj) and min_max > 0.99
        out.append(Check("C1", f"qubit localization ({sch})", ok,
                         f"freq(|0>)={f0:.3f} (0.50 +- {_sigma3(0.5, n_traj):.3f}), "
                         f"min terminal max-overlap={min_max:.6f}",
                         {"frequency": f0, "min_max_overlap": min_max}))
    rho0 = np.outer(psi, psi.conj())
    rho_s = asymptotic_state(sys, rho0)
    erg = mean_fidelity(runs["diffusive"], rho_s, predicted_weights=[0.5, 0.5])
    out.append(Check("C2", "qubit ergodicity", abs(erg.mean_fidelity - 0.5) <= 0.05,
                     f"E[F]={erg.mean_fidelity:.4f} (0.50 +- 0.05)",
                     {"mean_fidelity": erg.mean_fidelity}))
    return out, (sys, psi, runs, erg)


# -- two qubits --------------------------------------------------------------------

def check_two_qubit_jump(n_traj=N_TRAJ, seed=11, t_final=40.0, dt=1e-3):
    sys, _ = zoo.build_preset("two-qubit-dark")
    psi = zoo.two_qubit_initial_state()
    q1, q2 = zoo.two_qubit_dark_states()
    projs = [np.outer(q1, q1.conj()), np.outer(q2, q2.conj())]
    ens = run_ensemble(sys, psi, "jump", n_traj, t_final, dt=dt, base_seed=seed,
                       projectors=projs)
    quiet = ens.jump_counts == 0
    frac = float(quiet.mean())
    ok1 = abs(frac - 0.375) <= 0.065
    w = ens.terminal_overlap_samples[:, quiet].mean(axis=1) if quiet.any() else np.full(2, np.nan)
    ok2 = bool(np.all(np.abs(w - [2 / 3, 1 / 3]) <= 1e-3))
    return [Check("C3", "two-qubit zero-click fraction", ok1,
                  f"{frac:.3f} (0.375 +- 0.065)", {"zero_click_fraction": frac}),
            Check("C3", "two-qubit no-click weights", ok2,
                  f"({w[0]:.5f}, {w[1]:.5f}) vs (2/3, 1/3) within 1e-3",
                  {"no_click_weights": w.tolist()})], ens


def check_two_qubit_structure():
    sys, _ = zoo.build_preset("two-qubit-dark")
    P_D, _ = split_decaying_asymptotic(sys)
    psi1 = zoo.bitstring_ket("11")
    psi2 = (zoo.bitstring_ket("10") + zoo.bitstring_ket("01")) / np.sqrt(2)
    expect = projector(np.stack([psi1, psi2], axis=1))
    errD = float(np.linalg.norm(P_D - expect))
    _, sset = find_all_stationary_states(sys)
    q1, q2 = zoo.two_qubit_dark_states()
    targets = [np.outer(q, q.conj()) for q in (q1, q2)]
    errs = [min(np.linalg.norm(r - t) for r in sset.states) for t in targets]
    res = max(sset.residuals) if sset.residuals else np.inf
    ok = errD <= 1e-8 and len(sset) == 2 and max(errs) <= 1e-7 and res <= 1e-7
    return [Check("C4", "two-qubit structure", ok,
                  f"|P_D - expected|={errD:.1e}, {len(sset)} states, "
                  f"max state error={max(errs):.1e}, max residual={res:.1e}",
                  {"decaying_error": errD, "state_errors": errs})]


# -- Kerr --------------------------------------------------------------------------

def check_kerr(n_traj=N_TRAJ, seed=5, t_final=80.0, dt=1e-3, cat_fock=30):
    sys, spec = zoo.build_preset("kerr")
    n = int(spec.params["n_fock"])
    Pe, Po = zoo.parity_projectors(n)
    psi = zoo.preset_initial_state("kerr", sys)
    ens = run_ensemble(sys, psi, "diffusive", n_traj, t_final, dt=dt, base_seed=seed,
                       projectors=[Pe, Po])
    rep = localization_statistics(ens, [0.5, 0.5], ["even", "odd"])
    f = rep.frequencies[0]
    out = [Check("C5", "Kerr parity selection", abs(f - 0.5) <= _sigma3(0.5, n_traj),
                 f"even freq={f:.3f} (0.50 +- {_sigma3(0.5, n_traj):.3f})",
                 {"even_frequency": f})]
    p = spec.params
    cat_sys = zoo.build_kerr(0.0, p["pump"], p["kerr"], p["gamma"], cat_fock)
    cp, cm = zoo.kerr_cat_states(0.0, p["pump"], p["kerr"], p["gamma"], cat_fock)
    c0 = classify_incomplete_localization(cat_sys, np.outer(cp, cp.conj()),
                                          np.outer(cm, cm.conj()), "diffusive")
    c2 = classify_incomplete_localization(sys, Pe, Po, "diffusive")
    out.append(Check("C5", "Kerr classification", c0 == "case-i" and c2 == "complete-expected",
                     f"delta=0 -> {c0}, delta=2 -> {c2}", {"delta0": c0, "delta2": c2}))
    return out, ens


# -- scars -------------------------------------------------------------------------

def check_scar(n_traj=N_TRAJ, seed=3, t_final=40.0, t_burn=25.0, dt=1e-3):
    sys, _ = zoo.build_preset("scar")
    scars = zoo.scar_tower(2)
    S = [np.outer(s, s.conj()) for s in scars]
    _, sset = find_all_stationary_states(sys)
    errs = [min(np.linalg.norm(r - P) for r in sset.states) for P in S]
    out = [Check("C6", "scar stationary states", len(sset) == 3 and max(errs) <= 1e-6,
                 f"{len(sset)} states, max distance to scar projectors={max(errs):.1e}",
                 {"n_states": len(sset), "errors": errs})]
    psi = zoo.preset_initial_state("scar", sys)
    rho0 = np.outer(psi, psi.conj())
    w = np.array([np.trace(infinite_time_projector(sys, P) @ rho0).real for P in S])
    ens = run_ensemble(sys, psi, "diffusive", n_traj, t_final, dt=dt, base_seed=seed,
                       projectors=S, t_burn=t_burn)
    rep = localization_statistics(ens, w, ["s0", "s1", "s2"])
    out.append(Check("C6", "scar diffusive localization", rep.passed,
                     "freq=" + ", ".join(f"{f:.3f}" for f in rep.frequencies)
                     + " vs w=" + ", ".join(f"{x:.3f}" for x in w)
                     + " (z=" + ", ".join(f"{z:+.2f}" for z in rep.z_scores) + ")",
                     {"frequencies": rep.frequencies.tolist(), "weights": w.tolist()}))
    Lz = sys.jumps[-1]
    vals = [float(np.vdot(s, dag(Lz) @ Lz @ s).real) for s in scars]
    g = zoo.PRESET_DEFAULTS["scar"]["gamma_dephasing"]
    exact = all(abs(v - t) <= 1e-10 for v, t in zip(vals, (4 * g, 0.0, 4 * g)))
    cls = classify_incomplete_localization(sys, S[0], S[2], "jump")
    out.append(Check("C6", "scar jump degeneracy", exact and cls == "case-i",
                     f"<LzLz> = ({vals[0]:.12f}, {vals[1]:.12f}, {vals[2]:.12f}); "
                     f"classify(s0, s2, jump) = {cls}", {"values": vals, "class": cls}))
    return out, (sys, rho0, ens, w)


# -- XX ring -----------------------------------------------------------------------

def check_ring_structure(seeds=(0, 1)):
    sys, _ = zoo.build_preset("xx-ring")
    sizes = []
    for s in seeds:
        dec = simultaneous_block_diagonalize(system_operators(sys), seed=s)
        sizes.append(sorted(dec.block_sizes()))
    a = sizes[0]
    ones = sum(1 for x in a if x == 1)
    rest = [x for x in a if x != 1]
    ok = (len(a) == 18 and ones == 6 and len(rest) == 12 and set(rest) <= {3, 4, 6, 9}
          and sum(rest) == 58 and all(s == a for s in sizes))
    return [Check("C7", "XX ring block structure", ok,
                  f"{len(a)} blocks, sizes {a}; draws agree: {all(s == a for s in sizes)}",
                  {"sizes": sizes})]


def check_ring_localization(n_traj=N_TRAJ, seed=13, t_final=40.0, dt=2e-3, stride=10,
                            window=0.25):
    sys, _ = zoo.build_preset("xx-ring")
    psi = zoo.preset_initial_state("xx-ring", sys)
    rep = detect_dfs(sys)
    PQ = projector(np.stack(rep.dfs_states, axis=1))
    obs = {"c26": make_observable("concurrence", sys.dim, pair=(2, 6)),
           "c35": make_observable("concurrence", sys.dim, pair=(3, 5)),
           "purity": make_observable("purity", sys.dim)}
    ens = run_ensemble(sys, psi, "diffusive", n_traj, t_final, dt=dt, base_seed=seed,
                       projectors=[PQ, np.eye(sys.dim) - PQ], stride=stride,
                       observables=obs, keep_mean=False)
    wq = float(np.vdot(psi, PQ @ psi).real)
    loc = localized_mask(ens.overlap_series)
    fq, fp = loc[:, 0].mean(), loc[:, 1].mean()
    tol = _sigma3(0.5, n_traj)
    out = [Check("C8", "ring DFS localization", abs(fq - wq) <= tol and abs(fp - (1 - wq)) <= tol,
                 f"DFS {fq:.3f}, complement {fp:.3f} (0.50 +- {tol:.3f}; overlap {wq:.3f})",
                 {"dfs": fq, "complement": fp})]
    tail = int(np.ceil(window * len(ens.times)))
    dfs = np.flatnonzero(loc[:, 0])
    peak26 = ens.observables["c26"][dfs, -tail:].max(axis=1)
    peak35 = ens.observables["c35"][dfs, -tail:].max(axis=1)
    pur = ens.observables["purity"][:, -tail:]
    worst = float(min(peak26.min(initial=1), peak35.min(initial=1)))
    out.append(Check("C8", "ring Bell-pair concurrence", len(dfs) > 0 and worst > 0.99,
                     f"min over DFS trajectories of peak concurrence = {worst:.4f} "
                     f"(pairs (2,6) and (3,5), {len(dfs)} trajectories)", {"worst_peak": worst}))
    deficit = float(1 - pur.min())
    out.append(Check("C8", "ring post-localization purity", deficit <= 1e-6,
                     f"max purity deficit = {deficit:.2e}", {"purity_deficit": deficit}))
    return out, ens


# -- property suites ----------------------------------------------------------------

def check_properties(qubit_runs=None, scar_data=None, n_traj=N_TRAJ, seed=21):
    out = []
    # state validity along sampled trajectories
    bad = 0
    cases = [("qubit", zoo.build_monitored_qubit(1, 0.7), np.array([1, 1]) / np.sqrt(2)),
             ("two-qubit", zoo.build_two_qubit_dark(1, 0.2), zoo.two_qubit_initial_state())]
    for _, s, psi in cases:
        for sch in ("diffusive", "jump"):
            for k in range(3):
                rec = run_trajectory(s, psi, sch, 10.0, dt=1e-3, seed=seed + k, stride=50)
                for rho in rec.states:
                    try:
                        validate_density(rho, s.dim)
                    except Exception:
                        bad += 1
                bad += int(abs(np.trace(rec.running_average).real - 1) > 1e-6)
    out.append(Check("C9", "trace/Hermiticity/positivity", bad == 0,
                     f"{bad} invalid sampled states", {"invalid": bad}))
    # martingale and Lindblad envelope
    if qubit_runs is None:
        sys, psi, qubit_runs = qubit_ensembles(n_traj, seed)
    else:
        sys, psi, qubit_runs = qubit_runs
    rho0 = np.outer(psi, psi.conj())
    ref = [propagate(sys, rho0, t) for t in qubit_runs["diffusive"].times]
    for sch, ens in qubit_runs.items():
        n = ens.n_traj
        drift = float(np.abs(ens.overlap_series.mean(axis=0) - 0.5).max())
        out.append(Check("C9", f"martingale overlaps ({sch})", drift <= 5 / np.sqrt(n),
                         f"max |E[overlap] - overlap(0)| = {drift:.4f} (<= {5 / np.sqrt(n):.4f})",
                         {"drift": drift}))
        err, env = _mc_envelope(ens.mean_state_series, ref, n)
        out.append(Check("C9", f"ensemble mean vs Lindblad ({sch})", err <= env,
                         f"max Frobenius error = {err:.4f} (<= {env:.4f})", {"error": err}))
    # exact stationary states vs trajectory time averages
    algo_cases = [("qubit", zoo.build_monitored_qubit(1, 0.7), dict(t_final=30.0, dt=1e-3)),
                  ("two-qubit", zoo.build_two_qubit_dark(1, 0.2), dict(t_final=30.0, dt=1e-3)),
                  ("kerr", zoo.build_preset("kerr")[0], dict(t_final=120.0, dt=1e-3)),
                  ("scar", zoo.build_preset("scar")[0], dict(t_final=30.0, dt=1e-3))]
    for name, s, kw in algo_cases:
        _, exact = find_all_stationary_states(s)
        # trajectory data only; overlapping averages are pooled, not solved
        found = trajectory_steady_state_finder(s, "diffusive", budget=64, seed=seed,
                                               resolve=False, **kw)
        errs = [min(np.linalg.norm(r - e) for r in found.states) for e in exact.states]
        ok = len(found) == len(exact) and max(errs) <= 2e-2
        out.append(Check("C9", f"exact vs trajectory stationary states ({name})", ok,
                         f"{len(exact)} vs {len(found)} states, max error = {max(errs):.2e}",
                         {"errors": errs}))
    # duality
    rng = np.random.default_rng(seed)
    worst = 0.0
    for s in (zoo.build_monitored_qubit(1, 0.7), zoo.build_two_qubit_dark(1, 0.2),
              zoo.build_scar_chain(2, 1, 1.3, 1.0)):
        rho = random_density(s.dim, rng)
        X = rng.standard_normal((s.dim, s.dim)) + 1j * rng.standard_normal((s.dim, s.dim))
        a = np.trace(X @ apply_generator(s, rho))
        b = np.trace(apply_adjoint_generator(s, X) @ rho)
        worst = max(worst, abs(a - b))
    out.append(Check("C9", "duality tr[X L(rho)] = tr[L+(X) rho]", worst <= 1e-10,
                     f"max deviation = {worst:.1e}", {"deviation": worst}))
    # participation ratio bounds and identity
    rng_w = rng.dirichlet(np.ones(5), size=20)
    bounds = all(1 / 5 - 1e-12 <= participation_ratio(w) <= 1 + 1e-12 for w in rng_w)
    erg = mean_fidelity(qubit_runs["diffusive"], asymptotic_state(sys, rho0), [0.5, 0.5])
    ok_q = abs(erg.mean_fidelity - erg.participation_ratio) <= max(3 * erg.std_error, 0.02)
    detail = (f"bounds hold: {bounds}; qubit E[F]={erg.mean_fidelity:.4f} vs "
              f"PR={erg.participation_ratio:.4f}")
    ok_s = True
    if scar_data is not None:
        ssys, srho0, sens, w = scar_data
        serg = mean_fidelity(sens, asymptotic_state(ssys, srho0), w / w.sum())
        ok_s = abs(serg.mean_fidelity - serg.participation_ratio) <= max(3 * serg.std_error, 0.05)
        detail += f"; scar E[F]={serg.mean_fidelity:.4f} vs PR={serg.participation_ratio:.4f}"
    out.append(Check("C9", "participation ratio", bounds and ok_q and ok_s, detail))
    return out


FIGURES = {
    "fig7": ("C1", "C2"),
    "two-qubit": ("C3", "C4"),
    "fig8": ("C5",),
    "fig9": ("C6",),
    "fig11": ("C7", "C8"),
}


def run_figure(figure, n_traj=N_TRAJ, seed=None, log=print):
    """Run one named pipeline; returns ``(checks, artifacts)``."""
    t0 = time.time()
    kw = {} if seed is None else {"seed": seed}
    if figure == "fig7":
        checks, data = check_qubit(n_traj, **kw)
        arts = {"ensembles": data[2]}
    elif figure == "two-qubit":
        checks, ens = check_two_qubit_jump(n_traj, **kw)
        checks += check_two_qubit_structure()
        arts = {"ensembles": {"jump": ens}}
    elif figure == "fig8":
        checks, ens = check_kerr(n_traj, **kw)
        arts = {"ensembles": {"diffusive": ens}}
    elif figure == "fig9":
        checks, data = check_scar(n_traj, **kw)
        arts = {"ensembles": {"diffusive": data[2]}}
    elif figure == "fig11":
        checks = check_ring_structure()
        more, ens = check_ring_localization(n_traj, **kw)
        checks += more
        arts = {"ensembles": {"diffusive": ens}}
    else:
        raise KeyError(f"unknown figure {figure!r}; choose from {sorted(FIGURES)}")
    for c in checks:
        log(c.line())
    log(f"{figure}: {time.time() - t0:.1f}s")
    return checks, arts
