"""Command-line entry point: run configuration, output files and manifests.

Usage examples::

    qtraj structure --preset xx-ring --out runs/ring
    qtraj ensemble --config run.json --threads 4
    qtraj ensemble --config runs/ring/manifest.json     # exact rerun
    qtraj reproduce fig7 --out runs/fig7

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 a
``reproduce`` check failed.
"""
import argparse
import dataclasses
import hashlib
import json
import os
import platform
import sys as _sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import scipy

from . import __version__, zoo
from .analytics import (localization_statistics, make_observable, mean_fidelity, to_jsonable,
                        verify_update_rule)
from .errors import (InputError, ParseError, QtrajError, UnknownObservable,
                     ValidationError)
from .lindblad import asymptotic_state
from .linalg import projector
from .structure import (DEFAULT_EPSILON, StationarySet, detect_dfs, find_all_stationary_states,
                        infinite_time_projector, simultaneous_block_diagonalize,
                        structure_report, system_operators)
from .system import QuantumSystem, load_system, matrix_from_json, normalize_ket, validate_density
from .unravel import DEFAULT_STRIDE, SCHEMES, default_dt, run_ensemble, run_trajectory

ANALYSES = ("structure", "steady-states", "trajectory", "ensemble", "localization",
            "ergodicity", "update-rule")
FORMATS = ("csv", "json")
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3


@dataclass
class RunSpec:
    """Everything needed to reproduce one run.

    The system comes either from a preset (``preset`` plus ``params``
    overrides) or from a JSON matrix file (``system_file``). The initial
    state is the preset's default unless ``state_file`` is given.
    Observables are names understood by :func:`make_observable`, with
    arguments after a colon: ``overlap:1`` (first tracked projector),
    ``concurrence:2,6``, ``sx:1``.
    """
    preset: Optional[str] = None
    params: Dict[str, float] = field(default_factory=dict)
    system_file: Optional[str] = None
    state_file: Optional[str] = None
    scheme: str = "diffusive"
    n_traj: int = 100
    t_final: float = 20.0
    dt: Optional[float] = None
    base_seed: int = 0
    stride: int = DEFAULT_STRIDE
    t_burn: float = 0.0
    analyses: List[str] = field(default_factory=lambda: ["ensemble"])
    observables: List[str] = field(default_factory=lambda: ["overlap:1"])
    out_dir: str = "qtraj-out"
    formats: List[str] = field(default_factory=lambda: ["csv"])
    threads: int = 1


_FIELDS = {f.name for f in dataclasses.fields(RunSpec)}


def _check_spec(spec: RunSpec, base: Path):
    bad = []
    if (spec.preset is None) == (spec.system_file is None):
        bad.append("give exactly one of 'preset' or 'system_file'")
    if spec.preset is not None:
        try:
            zoo.preset_spec(spec.preset, **spec.params)
        except ValidationError as e:
            bad.extend(e.violations)
    elif spec.params:
        bad.append("'params' only applies to presets")
    for key in ("system_file", "state_file"):
        p = getattr(spec, key)
        if p is not None and not (base / p).is_file():
            bad.append(f"{key}: file {p!r} does not exist")
    if spec.scheme not in SCHEMES:
        bad.append(f"scheme must be one of {list(SCHEMES)}, got {spec.scheme!r}")
    for key in ("n_traj", "stride", "threads"):
        v = getattr(spec, key)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            bad.append(f"{key} must be a positive integer, got {v!r}")
    for key in ("t_final", "dt"):
        v = getattr(spec, key)
        if v is None and key == "dt":
            continue
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            bad.append(f"{key} must be positive, got {v!r}")
    if not isinstance(spec.t_burn, (int, float)) or spec.t_burn < 0:
        bad.append(f"t_burn must be non-negative, got {spec.t_burn!r}")
    elif isinstance(spec.t_final, (int, float)) and 0 < spec.t_final <= spec.t_burn:
        bad.append("t_burn must be smaller than t_final")
    if not isinstance(spec.base_seed, int) or spec.base_seed < 0:
        bad.append(f"base_seed must be a non-negative integer, got {spec.base_seed!r}")
    for a in spec.analyses:
        if a not in ANALYSES:
            bad.append(f"unknown analysis {a!r}; choose from {list(ANALYSES)}")
    for f in spec.formats:
        if f not in FORMATS:
            bad.append(f"unknown format {f!r}; choose from {list(FORMATS)}")
    for o in spec.observables:
        try:
            _observable_parts(o)
        except UnknownObservable as e:
            bad.append(str(e))
    if bad:
        raise ValidationError(bad)


def spec_from_dict(obj, base=".") -> RunSpec:
    """Build and validate a :class:`RunSpec` from parsed JSON."""
    if not isinstance(obj, dict):
        raise ParseError("configuration must be a JSON object")
    if "spec" in obj and isinstance(obj["spec"], dict):   # a manifest
        obj = obj["spec"]
    unknown = sorted(set(obj) - _FIELDS)
    if unknown:
        raise ValidationError([f"unknown field {k!r}" for k in unknown])
    kw = dict(obj)
    for key in ("analyses", "observables", "formats"):
        if isinstance(kw.get(key), str):
            kw[key] = [kw[key]]
    if kw.get("params") is None:
        kw["params"] = {}
    for key in ("t_final", "t_burn", "dt"):
        if isinstance(kw.get(key), int) and not isinstance(kw.get(key), bool):
            kw[key] = float(kw[key])
    if isinstance(kw.get("params"), dict):
        kw["params"] = {k: float(v) if isinstance(v, (int, float)) else v
                        for k, v in kw["params"].items()}
    spec = RunSpec(**kw)
    _check_spec(spec, Path(base))
    return spec


def _load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}", line=e.lineno) from e


def parse_config(path) -> RunSpec:
    """Read a JSON run configuration (or a manifest written by a previous run)."""
    return spec_from_dict(_load_json(path), base=Path(path).parent)


def serialize(spec: RunSpec) -> str:
    return json.dumps(dataclasses.asdict(spec), indent=2, sort_keys=True)


# -- system and state resolution ------------------------------------------------------

def resolve_system(spec: RunSpec, base=".") -> QuantumSystem:
    if spec.preset is not None:
        return zoo.build_preset(spec.preset, **spec.params)[0]
    return load_system(Path(base) / spec.system_file)


def resolve_state(spec: RunSpec, sys: QuantumSystem, base="."):
    if spec.state_file is not None:
        with open(Path(base) / spec.state_file) as fh:
            obj = json.load(fh)
        if "ket" in obj:
            v = np.asarray(obj["ket"], dtype=float)
            return normalize_ket(v[:, 0] + 1j * v[:, 1], sys.dim)
        return validate_density(matrix_from_json(obj), sys.dim)
    if spec.preset is not None:
        return zoo.preset_initial_state(spec.preset, sys, spec.params)
    return np.eye(sys.dim, dtype=complex)[:, 0]


def tracked_projectors(spec: RunSpec, sys: QuantumSystem):
    """Projectors whose overlaps are recorded, with labels.

    Presets use their natural targets; matrix systems use the supports of
    their extremal stationary states.
    """
    name = spec.preset
    if name == "qubit":
        P0 = np.diag([1.0, 0.0]).astype(complex)
        return [P0, np.eye(2) - P0], ["|0>", "|1>"]
    if name == "two-qubit-dark":
        qs = zoo.two_qubit_dark_states()
        return [np.outer(q, q.conj()) for q in qs], ["Q1", "Q2"]
    if name == "kerr":
        return list(zoo.parity_projectors(sys.dim)), ["even", "odd"]
    if name == "scar":
        S = zoo.scar_projectors(int(zoo.preset_spec("scar", **spec.params).params["n_sites"]))
        return S, [f"s{j}" for j in range(len(S))]
    if name == "xx-ring":
        rep = detect_dfs(sys)
        PQ = projector(np.stack(rep.dfs_states, axis=1))
        return [PQ, np.eye(sys.dim) - PQ], ["DFS", "complement"]
    _, sset = find_all_stationary_states(sys)
    return list(sset.supports), [f"Q{j + 1}" for j in range(len(sset))]


def _observable_parts(name):
    head, _, arg = name.partition(":")
    if head not in ("overlap", "sx", "sy", "sz", "purity", "coherence", "concurrence"):
        raise UnknownObservable(f"unknown observable {name!r}")
    try:
        args = [int(a) for a in arg.split(",")] if arg else []
    except ValueError:
        raise UnknownObservable(f"bad observable arguments in {name!r}") from None
    return head, args


def build_observables(names, sys: QuantumSystem, projectors):
    out = {}
    for name in names:
        head, args = _observable_parts(name)
        if head == "overlap":
            k = args[0] if args else 1
            if not 1 <= k <= len(projectors):
                raise UnknownObservable(f"{name!r}: only {len(projectors)} projectors tracked")
            out[name] = make_observable("overlap", sys.dim, projector=projectors[k - 1])
        elif head in ("sx", "sy", "sz"):
            out[name] = make_observable(head, sys.dim, site=args[0] if args else 1)
        elif head == "coherence":
            out[name] = make_observable("coherence", sys.dim, basis=list(np.eye(sys.dim)))
        elif head == "concurrence":
            out[name] = make_observable("concurrence", sys.dim,
                                        pair=tuple(args) if args else None)
        else:
            out[name] = make_observable(head, sys.dim)
    return out


# -- output -------------------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def emit_plot_data(records, observable, path):
    """Write one observable as long-format CSV.

    Columns: ``trajectory_id, time, <observable>, mean_<observable>``.
    `records` is an :class:`EnsembleStats` or a list of trajectory records.
    """
    if hasattr(records, "observables") and hasattr(records, "n_traj"):
        times = records.times
        if observable not in records.observables:
            raise UnknownObservable(f"observable {observable!r} was not recorded")
        values = np.asarray(records.observables[observable])
    else:
        records = list(records)
        if not records or any(observable not in r.observables for r in records):
            raise UnknownObservable(f"observable {observable!r} was not recorded")
        times = records[0].times
        values = np.stack([r.observables[observable] for r in records])
    mean = values.mean(axis=0)
    col = observable.replace(",", "_").replace(":", "")
    lines = [f"trajectory_id,time,{col},mean_{col}"]
    for i, row in enumerate(values):
        lines.extend(f"{i},{_fmt(t)},{_fmt(v)},{_fmt(m)}" for t, v, m in zip(times, row, mean))
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def _write_series_json(records, names, path):
    obj = {"times": records.times, "observables": {n: records.observables[n] for n in names}}
    Path(path).write_text(json.dumps(to_jsonable(obj)))


def _write_json(obj, path):
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True))


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(spec, extra, files):
    from . import structure, unravel
    return {
        "spec": dataclasses.asdict(spec),
        "versions": {"qtraj": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version(), "platform": platform.platform()},
        "tolerances": {"sbd_epsilon": DEFAULT_EPSILON,
                       "support_rtol": structure.SUPPORT_RTOL,
                       "asymptotic_rtol": structure.ASYMPTOTIC_RTOL,
                       "jump_prob_max": unravel.JUMP_PROB_MAX},
        "files": {Path(f).name: _sha256(f) for f in files},
        **extra,
    }


def run(spec: RunSpec, base=".") -> int:
    """Execute every requested analysis and write results to ``spec.out_dir``."""
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sys = resolve_system(spec, base)
    files, extra = [], {}
    want = set(spec.analyses)

    if "structure" in want:
        dec = simultaneous_block_diagonalize(system_operators(sys), seed=spec.base_seed)
        rep = structure_report(dec)
        rep["n_blocks"] = dec.n_blocks
        rep["block_sizes"] = dec.block_sizes()
        rep["residual"] = dec.residual
        _write_json(rep, out / "structure.json")
        files.append(out / "structure.json")
    if "steady-states" in want:
        dec, sset = find_all_stationary_states(sys, seed=spec.base_seed)
        rep = structure_report(dec, sset, detect_dfs(sys))
        rep["n_stationary"] = len(sset)
        _write_json(rep, out / "steady_states.json")
        files.append(out / "steady_states.json")

    traj_like = want & {"trajectory", "ensemble", "localization", "ergodicity", "update-rule"}
    if traj_like:
        rho0 = resolve_state(spec, sys, base)
        projs, labels = tracked_projectors(spec, sys)
        obs = build_observables(spec.observables, sys, projs)
        dt = spec.dt if spec.dt is not None else default_dt(sys)
        extra["dt"] = dt
        extra["projector_labels"] = labels
    if "trajectory" in want:
        rec = run_trajectory(sys, rho0, spec.scheme, spec.t_final, dt=dt, seed=spec.base_seed,
                             projectors=projs, stride=spec.stride, t_burn=spec.t_burn,
                             observables=obs, keep_states=False)
        files += _write_series([rec], spec, out, "trajectory")
        extra["trajectory_jumps"] = [[t, k] for t, k in rec.jump_events]
    ens_like = traj_like - {"trajectory"}
    if ens_like:
        ens = run_ensemble(sys, rho0, spec.scheme, spec.n_traj, spec.t_final, dt=dt,
                           base_seed=spec.base_seed, projectors=projs, stride=spec.stride,
                           t_burn=spec.t_burn, observables=obs, threads=spec.threads)
        extra["trajectory_seeds"] = [int(s) for s in ens.seeds]
        if "ensemble" in want:
            files += _write_series(ens, spec, out, "ensemble")
        report = _analyses(sys, rho0, ens, projs, labels, want, spec)
        if report:
            _write_json(report, out / "analysis.json")
            files.append(out / "analysis.json")
    man = _manifest(spec, extra, files)
    _write_json(man, out / "manifest.json")
    return EXIT_OK


def _write_series(records, spec, out, stem):
    written = []
    single = isinstance(records, list)
    for name in spec.observables:
        tag = name.replace(",", "_").replace(":", "")
        if "csv" in spec.formats:
            p = out / f"{stem}_{tag}.csv"
            emit_plot_data(records, name, p)
            written.append(p)
    if "json" in spec.formats:
        p = out / f"{stem}.json"
        src = records[0] if single else records
        _write_series_json(src, spec.observables, p)
        written.append(p)
    return written


def _analyses(sys, rho0, ens, projs, labels, want, spec):
    report = {}
    rho = np.asarray(rho0, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    need_weights = want & {"localization", "ergodicity", "update-rule"}
    if not need_weights:
        return report
    inf = [infinite_time_projector(sys, P) for P in projs]
    w = np.array([float(np.trace(P @ rho).real) for P in inf])
    report["predicted_weights"] = dict(zip(labels, w))
    if "localization" in want:
        rep = localization_statistics(ens, w, labels)
        report["localization"] = {"labels": labels, "frequencies": rep.frequencies,
                                  "z_scores": rep.z_scores, "within_3sigma": rep.within_3sigma,
                                  "passed": rep.passed}
    if "ergodicity" in want:
        rho_s = asymptotic_state(sys, rho)
        ww = w / w.sum() if w.sum() > 0 else None
        erg = mean_fidelity(ens, rho_s, ww)
        report["ergodicity"] = {"mean_fidelity": erg.mean_fidelity, "std_error": erg.std_error,
                                "participation_ratio": erg.participation_ratio}
    if "update-rule" in want:
        _, sset = find_all_stationary_states(sys, seed=spec.base_seed)
        if len(sset) == len(projs):
            order = [int(np.argmax([np.trace(P @ r).real for r in sset.states])) for P in projs]
            sset = StationarySet([sset.states[i] for i in order],
                                 [sset.supports[i] for i in order],
                                 sset.pairwise_overlaps[np.ix_(order, order)], order,
                                 [sset.residuals[i] for i in order])
            upd = verify_update_rule(sys, rho, ens, sset, inf, labels)
            report["update_rule"] = dataclasses.asdict(upd) | {"passed": upd.passed}
        else:
            report["update_rule"] = {"skipped": "tracked projectors are not the stationary supports"}
    return report


# -- reproduce ---------------------------------------------------------------------

def run_reproduce(figure, out_dir, n_traj, seed, threads, log=print):
    from .reproduce import FIGURES, run_figure
    if figure not in FIGURES:
        raise ValidationError(f"unknown figure {figure!r}; choose from {sorted(FIGURES)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checks, arts = run_figure(figure, n_traj=n_traj, seed=seed, log=log)
    files = []
    for sch, ens in arts.get("ensembles", {}).items():
        p = out / f"{figure}_{sch}_overlaps.csv"
        _overlap_csv(ens, p)
        files.append(p)
    p = out / f"{figure}_checks.json"
    _write_json([dataclasses.asdict(c) for c in checks], p)
    files.append(p)
    man = {"figure": figure, "n_traj": n_traj, "seed": seed,
           "versions": {"qtraj": __version__, "numpy": np.__version__,
                        "scipy": scipy.__version__, "python": platform.python_version()},
           "files": {f.name: _sha256(f) for f in files}}
    _write_json(man, out / "manifest.json")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK


def _overlap_csv(ens, path):
    lines = ["trajectory_id,time,projector,overlap,mean_overlap"]
    mean = ens.overlap_series.mean(axis=0)
    for i, per in enumerate(ens.overlap_series):
        for k, row in enumerate(per):
            lines.extend(f"{i},{_fmt(t)},{k + 1},{_fmt(v)},{_fmt(m)}"
                         for t, v, m in zip(ens.times, row, mean[k]))
    Path(path).write_text("\n".join(lines) + "\n")


# -- argument parsing ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(_sys.stderr)
        _emit_error(InputError(message))
        raise SystemExit(EXIT_INPUT)


def _emit_error(err):
    kind = "input" if isinstance(err, InputError) else "numerical"
    obj = {"error": type(err).__name__, "kind": kind, "message": str(err)}
    if isinstance(err, ValidationError):
        obj["violations"] = err.violations
    if isinstance(err, ParseError):
        obj["line"] = err.line
    print(json.dumps(obj), file=_sys.stderr)
    return obj


def _parser():
    p = _Parser(prog="qtraj", description="Quantum trajectory unravelings and "
                "asymptotic structure of Lindblad dynamics.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration or manifest")
    common.add_argument("--preset", choices=sorted(zoo.PRESET_DEFAULTS))
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a run field or preset parameter (repeatable)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--threads", type=int, help="worker threads (default $TRAJ_THREADS or 1)")
    common.add_argument("--format", choices=FORMATS, action="append",
                        help="time-series output format (repeatable)")
    for name in ("structure", "steady-states", "trajectory", "ensemble", "analyze"):
        sub.add_parser(name, parents=[common])
    rp = sub.add_parser("reproduce", parents=[common])
    rp.add_argument("figure")
    rp.add_argument("--n-traj", type=int, default=500)
    return p


def _apply_overrides(obj, items):
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            parsed = json.loads(val)
        except json.JSONDecodeError:
            parsed = val
        if key in _FIELDS:
            obj[key] = parsed
        else:
            obj.setdefault("params", {})[key] = parsed


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("TRAJ_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"TRAJ_THREADS must be an integer, got {env!r}") from None
    return None


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        threads = _threads(args)
        if args.command == "reproduce":
            out = args.out or f"qtraj-{args.figure}"
            return run_reproduce(args.figure, out, args.n_traj, args.seed, threads)
        base = "."
        if args.config:
            obj = _load_json(args.config)
            if not isinstance(obj, dict):
                raise ParseError("configuration must be a JSON object")
            if isinstance(obj.get("spec"), dict):
                obj = obj["spec"]
            obj = dict(obj)
            base = str(Path(args.config).parent)
        else:
            obj = {}
        if args.preset:
            obj["preset"] = args.preset
            obj.pop("system_file", None)
        _apply_overrides(obj, args.set)
        if args.out:
            obj["out_dir"] = args.out
        if args.seed is not None:
            obj["base_seed"] = args.seed
        if threads is not None:
            obj["threads"] = threads
        if args.format:
            obj["formats"] = args.format
        if args.command != "analyze":
            obj["analyses"] = [args.command]
        elif "analyses" not in obj:
            obj["analyses"] = ["localization", "ergodicity"]
        spec = spec_from_dict(obj, base=base)
        return run(spec, base=base)
    except InputError as e:
        _emit_error(e)
        return EXIT_INPUT
    except QtrajError as e:
        _emit_error(e)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
