"""Command line driver.

Every subcommand reads a single JSON config (fail-closed: unknown keys
are rejected so typos cannot silently change a run) and writes
deterministic artifacts into an output directory.  The light-weight
subcommands also accept direct flags (``exponent --operator op.json
--ell 1``); flags are merged over the config when both are given.
Directory precedence: ``--out-dir`` flag, then the CRITEVO_OUT
environment variable, then the config's ``output_dir``, then the
current directory.

Subcommands:
    exponent   critical exponent report for an operator
    envelope   scaling envelope segments plus sampled values
    mu-check   modulation-factor admissibility and integral criterion
    simulate   spectral time integration on a periodic box
    decay      linear decay fits against the predicted rate
    residual   weak-form identity residual of a recorded run
    sweep      repeat one subcommand over a parameter list

Exit codes: 0 success (a detected blow-up is a successful diagnosis,
reported in the artifact), 2 invalid input or config, 3 numerical
failure.  Artifacts carry no timestamps and are byte-identical across
repeat runs with the same config and seed.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import reporting
from .decay import RadialProfile, check_linear_decay_hypothesis
from .envelope import INF, critical_exponent, envelope_samples
from .errors import NumericalError, ValidationError
from .mu import MuSpec, NonlinearitySpec, integral_condition, lipschitz_certificate, parse_mu
from .operators import EvolutionOperator, as_fraction, parse_operator
from .residual import make_test_function, weak_residual
from .solver import Grid, RunConfig, parse_profile, run


def _check_keys(doc: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ValidationError(f"unknown keys in {where}: {unknown} (allowed: {sorted(allowed)})")


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ValidationError(f"{where} is missing required key {key!r}")
    return doc[key]


def _read_json(path: str | Path, what: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {what} {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{what} {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{what} {path} must hold a JSON object")
    return doc


def load_config(path: str | Path) -> dict:
    cfg = _read_json(path, "config")
    if cfg.get("schema_version") != reporting.SCHEMA_VERSION:
        raise ValidationError(
            f"config must declare schema_version = {reporting.SCHEMA_VERSION}"
        )
    return cfg


def _operator_from(cfg: dict) -> EvolutionOperator:
    spec = _require(cfg, "operator", "config")
    if isinstance(spec, str):
        doc = _read_json(spec, "operator file")
    elif isinstance(spec, dict):
        doc = spec
    else:
        raise ValidationError("operator must be an inline object or a file path")
    if cfg.get("n") is not None:
        # dimension override; monomial alphas must already fit the new n
        doc = dict(doc)
        doc["n"] = int(cfg["n"])
    return parse_operator(doc)


def _grid_from(cfg: dict, op: EvolutionOperator) -> Grid:
    doc = _require(cfg, "grid", "config")
    if not isinstance(doc, dict):
        raise ValidationError("grid must be an object")
    _check_keys(doc, {"N", "L"}, "grid")
    return Grid(n=op.n, N=int(_require(doc, "N", "grid")),
                L=float(_require(doc, "L", "grid")))


def _resolve_p(value, op: EvolutionOperator, ell: int) -> tuple[float, list[str]]:
    """A literal power, or 'critical' resolved from the operator."""
    notes: list[str] = []
    if value == "critical":
        rep = critical_exponent(op, ell, op.n)
        if rep.p_c == INF:
            raise ValidationError(
                "critical exponent is infinite for this operator; "
                "pass a finite nonlinearity power explicitly"
            )
        if rep.degenerate:
            raise ValidationError(
                f"critical exponent {rep.p_c} is <= 1 (degenerate); "
                "pass the nonlinearity power explicitly"
            )
        notes.append(f"p resolved to the critical exponent {rep.p_c} = {float(rep.p_c)}")
        return float(rep.p_c), notes
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value), notes
    raise ValidationError("nonlinearity power must be a number or 'critical'")


def _nonlinearity_from(cfg: dict, op: EvolutionOperator, ell: int):
    doc = cfg.get("nonlinearity")
    if doc is None:
        return None, []
    if not isinstance(doc, dict):
        raise ValidationError("nonlinearity must be an object or null")
    _check_keys(doc, {"p", "mu"}, "nonlinearity")
    p, notes = _resolve_p(_require(doc, "p", "nonlinearity"), op, ell)
    mu = parse_mu(doc["mu"]) if "mu" in doc else MuSpec(family="constant", value=1.0)
    return NonlinearitySpec(p=p, mu=mu), notes


def _out_path(out_dir: Path, cfg: dict, default: str) -> Path:
    name = cfg.get("output", default)
    if not isinstance(name, str) or not name or "/" in name or "\\" in name:
        raise ValidationError("output must be a bare file name")
    return out_dir / name


# --- subcommands ----------------------------------------------------------

def cmd_exponent(cfg: dict, out_dir: Path) -> dict:
    _check_keys(cfg, {"schema_version", "operator", "ell", "n", "output",
                      "output_dir"}, "config")
    op = _operator_from(cfg)
    ell = int(cfg.get("ell", 0))
    rep = critical_exponent(op, ell, op.n)
    doc = reporting.artifact("exponent", {"config": cfg, "report": rep})
    path = reporting.write_json(_out_path(out_dir, cfg, "exponent.json"), doc)
    print(f"p_c = {rep.p_c} at eta = {rep.eta_star} "
          f"(levels {list(rep.active_levels)}, regime {rep.regime})")
    print(f"wrote {path}")
    return {"p_c": reporting.jsonify(rep.p_c if rep.p_c == INF else str(rep.p_c)),
            "p_c_float": float(rep.p_c), "degenerate": rep.degenerate}


def cmd_envelope(cfg: dict, out_dir: Path) -> dict:
    _check_keys(cfg, {"schema_version", "operator", "ell", "n", "samples",
                      "eta_max", "output", "output_dir"}, "config")
    op = _operator_from(cfg)
    ell = int(cfg.get("ell", 0))
    rep = critical_exponent(op, ell, op.n)
    env = rep.envelope
    n_samples = int(cfg.get("samples", 65))
    if n_samples < 2:
        raise ValidationError("samples must be >= 2")
    if "eta_max" in cfg:
        eta_max = as_fraction(cfg["eta_max"])
        if eta_max <= 0:
            raise ValidationError("eta_max must be > 0")
    else:
        tail = [bp for bp in env.breakpoints]
        if rep.eta_star != INF:
            tail.append(as_fraction(rep.eta_star))
        eta_max = 2 * max(tail) if tail else Fraction(4)
        if eta_max <= 0:
            eta_max = Fraction(4)
    etas = [eta_max * i / (n_samples - 1) for i in range(n_samples)]
    rows = envelope_samples(env, op.n, etas)
    doc = reporting.artifact("envelope", {
        "config": cfg,
        "report": rep,
        "samples": [{"eta": reporting.jsonify(e), "eta_float": float(e),
                     "g": reporting.jsonify(g), "g_float": float(g),
                     "h": reporting.jsonify(h if h != INF else math.inf),
                     "h_float": float(h)} for e, g, h in rows],
    })
    path = reporting.write_json(_out_path(out_dir, cfg, "envelope.json"), doc)
    csv_path = reporting.write_csv(out_dir / "envelope_samples.csv", {
        "eta": [float(e) for e, _, _ in rows],
        "g": [float(g) for _, g, _ in rows],
        "h": [float(h) for _, _, h in rows],
    })
    print(f"{len(env.pieces)} envelope segment(s); p_c = {rep.p_c} at eta = {rep.eta_star}")
    print(f"wrote {path}")
    print(f"wrote {csv_path}")
    return {"segments": len(env.pieces), "p_c_float": float(rep.p_c)}


def cmd_mu_check(cfg: dict, out_dir: Path) -> dict:
    _check_keys(cfg, {"schema_version", "mu", "c0", "levels", "tol", "p", "cap",
                      "seed", "output", "output_dir"}, "config")
    mu = parse_mu(_require(cfg, "mu", "config"))
    c0 = cfg.get("c0")
    if c0 is None:
        c0 = 0.1 if not math.isfinite(mu.tau_star) else min(0.1, mu.tau_star / 2.0)
    c0 = float(c0)
    verdict = integral_condition(mu, c0, levels=int(cfg.get("levels", 8)),
                                 tol=float(cfg.get("tol", 1e-9)))
    nl = NonlinearitySpec(p=float(cfg.get("p", 2.0)), mu=mu)
    cap = cfg.get("cap")
    cert = lipschitz_certificate(nl, cap=float(cap) if cap is not None else None,
                                 seed=int(cfg.get("seed", 0)))
    doc = reporting.artifact("mu_check", {
        "config": cfg,
        "mu": mu,
        "c0": c0,
        "integral": verdict,
        "certificate": cert,
    })
    path = reporting.write_json(_out_path(out_dir, cfg, "mu_check.json"), doc)
    print(f"integral: {verdict.classification} ({verdict.growth_label}); "
          f"lipschitz constant ~ {cert.constant:.6g}")
    print(f"wrote {path}")
    return {"classification": verdict.classification, "growth": verdict.growth_label}


_SIM_KEYS = {"schema_version", "operator", "ell", "n", "grid", "profile",
             "amplitude", "dt", "T", "nonlinearity", "p_for_norms",
             "record_every", "record_fields", "seed", "output", "output_dir"}


def _sim_config(cfg: dict, record_fields: bool = False):
    op = _operator_from(cfg)
    ell = int(cfg.get("ell", 0))
    grid = _grid_from(cfg, op)
    profile = parse_profile(_require(cfg, "profile", "config"))
    nl, notes = _nonlinearity_from(cfg, op, ell)
    p_for_norms = cfg.get("p_for_norms")
    rc = RunConfig(
        op=op, grid=grid, profile=profile, ell=ell,
        dt=float(_require(cfg, "dt", "config")),
        T=float(_require(cfg, "T", "config")),
        amplitude=float(cfg.get("amplitude", 1.0)),
        nl=nl,
        p_for_norms=float(p_for_norms) if p_for_norms is not None else None,
        record_every=int(cfg.get("record_every", 1)),
        record_fields=record_fields or bool(cfg.get("record_fields", False)),
    )
    return rc, notes


_FIELD_FILES = {
    "times": "fields_times.npy",
    "layer0": "fields_layer0.npy",
    "layer_ell": "fields_layer_ell.npy",
    "initial_layers": "fields_initial_layers.npy",
}


def cmd_simulate(cfg: dict, out_dir: Path) -> dict:
    _check_keys(cfg, _SIM_KEYS, "config")
    rc, notes = _sim_config(cfg)
    report = run(rc)
    doc = reporting.artifact("simulate", {
        "config": cfg,
        "seed": int(cfg.get("seed", 0)),
        "notes": notes,
        "report": report,
    })
    path = reporting.write_json(_out_path(out_dir, cfg, "simulate.json"), doc)
    columns = {"time": report.times}
    columns.update(report.series)
    csv_path = reporting.write_csv(out_dir / "series.csv", columns)
    written = [path, csv_path]
    if rc.record_fields:
        out_dir.mkdir(parents=True, exist_ok=True)
        np.save(out_dir / _FIELD_FILES["times"], np.asarray(report.times))
        np.save(out_dir / _FIELD_FILES["layer0"], report.fields["layer0"])
        np.save(out_dir / _FIELD_FILES["layer_ell"], report.fields["layer_ell"])
        np.save(out_dir / _FIELD_FILES["initial_layers"], report.initial_layers)
        written += [out_dir / _FIELD_FILES[k] for k in _FIELD_FILES]
    msg = report.outcome
    if report.blowup_time is not None:
        msg += f" at t = {report.blowup_time:.6g}"
    print(f"{msg}; xnorm sup {report.xnorm_sup:.6g} "
          f"(last increase t = {report.xnorm_last_increase:.6g})")
    for w in written:
        print(f"wrote {w}")
    return {"outcome": report.outcome, "blowup_time": report.blowup_time,
            "xnorm_sup": report.xnorm_sup}


def cmd_decay(cfg: dict, out_dir: Path) -> dict:
    _check_keys(cfg, {"schema_version", "operator", "ell", "n", "p_c", "q_list",
                      "width", "window", "n_times", "tol", "mode", "grid", "dt",
                      "targets", "fit_mode", "output", "output_dir"}, "config")
    op = _operator_from(cfg)
    ell = int(cfg.get("ell", 0))
    p_c_cfg = cfg.get("p_c", "critical")
    notes: list[str] = []
    if p_c_cfg == "critical":
        rep = critical_exponent(op, ell, op.n)
        if rep.p_c == INF or rep.degenerate:
            raise ValidationError(
                f"critical exponent is {rep.p_c}; pass a finite p_c > 1 explicitly"
            )
        p_c = float(rep.p_c)
        notes.append(f"p_c resolved to {rep.p_c} = {p_c}")
    else:
        p_c = float(p_c_cfg)
    window = cfg.get("window", [1e2, 1e4])
    if not (isinstance(window, (list, tuple)) and len(window) == 2):
        raise ValidationError("window must be [t_min, t_max]")
    mode = cfg.get("mode", "whole-space")
    torus_grid = _grid_from(cfg, op) if mode == "torus" else None
    targets_cfg = cfg.get("targets")
    targets = None
    if targets_cfg is not None:
        if not isinstance(targets_cfg, dict):
            raise ValidationError("targets must map q to a rate, e.g. {\"2\": -0.25}")
        targets = {float(k): float(v) for k, v in targets_cfg.items()}
    report = check_linear_decay_hypothesis(
        op, ell, p_c,
        q_list=[float(q) for q in cfg.get("q_list", [2])],
        profile=RadialProfile(width=float(cfg.get("width", 1.0))),
        mode=mode,
        window=(float(window[0]), float(window[1])),
        n_times=int(cfg.get("n_times", 40)),
        tol=float(cfg.get("tol", 0.05)),
        torus_grid=torus_grid,
        torus_dt=float(cfg.get("dt", 0.05)),
        targets=targets,
        fit_mode=str(cfg.get("fit_mode", "at-least-as-fast")),
    )
    doc = reporting.artifact("decay", {"config": cfg, "notes": notes, "report": report})
    path = reporting.write_json(_out_path(out_dir, cfg, "decay.json"), doc)
    print_paths = [path]
    for entry in report.entries:
        curve = reporting.write_csv(out_dir / f"decay_curve_q{entry.q:g}.csv",
                                    {"time": entry.times, "norm": entry.values})
        print_paths.append(curve)
        print(f"q = {entry.q:g}: slope {entry.fit.slope:.4f} vs target {entry.fit.target}"
              f" -> {entry.fit.verdict}")
    for w in print_paths:
        print(f"wrote {w}")
    return {"all_pass": report.all_pass}


def cmd_residual(cfg: dict, out_dir: Path) -> dict:
    if "run" in cfg:
        _check_keys(cfg, {"schema_version", "run", "test_function", "seed",
                          "output", "output_dir"}, "config")
        run_dir = Path(cfg["run"])
        sim_doc = _read_json(run_dir / "simulate.json", "recorded run report")
        sim_cfg = sim_doc.get("config")
        if not isinstance(sim_cfg, dict):
            raise ValidationError(f"{run_dir}/simulate.json carries no config echo")
        op = _operator_from(sim_cfg)
        ell = int(sim_cfg.get("ell", 0))
        grid = _grid_from(sim_cfg, op)
        nl, notes = _nonlinearity_from(sim_cfg, op, ell)
        try:
            times = np.load(run_dir / _FIELD_FILES["times"])
            frames = np.load(run_dir / _FIELD_FILES["layer_ell"])
            initial_layers = np.load(run_dir / _FIELD_FILES["initial_layers"])
        except OSError as exc:
            raise ValidationError(
                f"recorded run at {run_dir} has no field files (simulate needs "
                f"\"record_fields\": true): {exc}"
            ) from exc
        run_outcome = None
        run_meta = {"source": str(run_dir)}
    else:
        _check_keys(cfg, _SIM_KEYS | {"test_function"}, "config")
        rc, notes = _sim_config(cfg, record_fields=True)
        report = run(rc)
        op, ell, grid, nl = rc.op, rc.ell, rc.grid, rc.nl
        times = np.asarray(report.times)
        frames = report.fields["layer_ell"]
        initial_layers = report.initial_layers
        run_outcome = report.outcome
        run_meta = report.meta

    tf_cfg = cfg.get("test_function", {})
    if not isinstance(tf_cfg, dict):
        raise ValidationError("test_function must be an object")
    _check_keys(tf_cfg, {"eta_bar", "scale", "q_tf", "flat_fraction",
                         "smooth_order", "reg_epsilon"}, "test_function")
    eta_cfg = tf_cfg.get("eta_bar", "critical")
    exp_rep = None
    if eta_cfg == "critical" or tf_cfg.get("q_tf") is None:
        exp_rep = critical_exponent(op, ell, op.n)
    if eta_cfg == "critical":
        if exp_rep.eta_star == INF:
            raise ValidationError(
                "critical scaling weight is infinite; pass test_function.eta_bar"
            )
        eta_bar = as_fraction(exp_rep.eta_star)
        notes.append(f"eta_bar resolved to {eta_bar}")
        if eta_bar <= 0:
            raise ValidationError(
                "critical eta is 0; pass a positive test_function.eta_bar"
            )
    else:
        eta_bar = as_fraction(eta_cfg)
    t_end = float(times[-1])
    scale_cfg = tf_cfg.get("scale", "auto")
    if scale_cfg == "auto":
        scale = 0.98 * min(t_end, (grid.L / 2.0) ** float(eta_bar))
        notes.append(f"test function scale resolved to {scale!r}")
    else:
        scale = float(scale_cfg)
    p_c_for_q = exp_rep.p_c if exp_rep is not None else INF
    tf = make_test_function(
        op, ell, p_c_for_q, scale, eta_bar, grid=grid,
        q_tf=tf_cfg.get("q_tf"),
        flat_fraction=float(tf_cfg.get("flat_fraction", 0.5)),
        smooth_order=tf_cfg.get("smooth_order"),
        reg_epsilon=tf_cfg.get("reg_epsilon"),
    )
    res = weak_residual(op, ell, grid, times, frames, tf, nl=nl,
                        initial_layers=initial_layers)
    doc = reporting.artifact("residual", {
        "config": cfg,
        "seed": int(cfg.get("seed", 0)),
        "notes": notes,
        "run_outcome": run_outcome,
        "run_meta": run_meta,
        "report": res,
    })
    path = reporting.write_json(_out_path(out_dir, cfg, "residual.json"), doc)
    print(f"residual = {res.residual:.6g} (lhs {res.lhs:.6g}, rhs {res.rhs:.6g})")
    print(f"wrote {path}")
    return {"residual": res.residual, "outcome": run_outcome}


_SWEEPABLE = {
    # parameter -> {task: path into the config}
    "gamma": {"mu-check": ("mu", "gamma"),
              "simulate": ("nonlinearity", "mu", "gamma"),
              "residual": ("nonlinearity", "mu", "gamma")},
    "amplitude": {"simulate": ("amplitude",), "residual": ("amplitude",)},
    "p": {"mu-check": ("p",), "simulate": ("nonlinearity", "p"),
          "residual": ("nonlinearity", "p")},
    # "critical" powers re-resolve inside each run, so an n sweep stays
    # consistent; the operator must be inline and dimension-free (fractional
    # terms), else per-value validation rejects it
    "n": {"exponent": ("operator", "n"), "envelope": ("operator", "n"),
          "simulate": ("operator", "n"), "residual": ("operator", "n"),
          "decay": ("operator", "n")},
    "N": {"simulate": ("grid", "N"), "residual": ("grid", "N")},
    "dt": {"simulate": ("dt",), "residual": ("dt",), "decay": ("dt",)},
}


def _set_nested(doc: dict, path: tuple[str, ...], value) -> None:
    node = doc
    for key in path[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            raise ValidationError(
                f"sweep target {'.'.join(path)} needs an inline {key!r} object in the config"
            )
        node = child
    node[path[-1]] = value


def cmd_sweep(cfg: dict, out_dir: Path) -> dict:
    _check_keys(cfg, {"schema_version", "task", "parameter", "values", "config",
                      "output", "output_dir"}, "config")
    task = _require(cfg, "task", "config")
    if task not in _COMMANDS or task == "sweep":
        raise ValidationError(f"sweep task must be one of {sorted(set(_COMMANDS) - {'sweep'})}")
    parameter = _require(cfg, "parameter", "config")
    if parameter not in _SWEEPABLE:
        raise ValidationError(f"sweep parameter must be one of {sorted(_SWEEPABLE)}")
    if task not in _SWEEPABLE[parameter]:
        raise ValidationError(
            f"parameter {parameter!r} cannot be swept for task {task!r} "
            f"(supported tasks: {sorted(_SWEEPABLE[parameter])})"
        )
    values = _require(cfg, "values", "config")
    if not isinstance(values, list) or not values:
        raise ValidationError("values must be a non-empty list")
    base = _require(cfg, "config", "config")
    if not isinstance(base, dict):
        raise ValidationError("config (the inner task config) must be an object")
    path_spec = _SWEEPABLE[parameter][task]

    runs = []
    n_ok = 0
    for idx, value in enumerate(values):
        sub = copy.deepcopy(base)
        sub.setdefault("schema_version", reporting.SCHEMA_VERSION)
        sub.pop("output_dir", None)
        sub_dir_name = f"value_{idx:03d}"
        entry = {"index": idx, "parameter": parameter, "value": value,
                 "dir": sub_dir_name}
        try:
            if parameter == "n":
                v = int(value)
                if not isinstance(base.get("operator"), dict):
                    raise ValidationError("sweeping n needs an inline operator object")
            elif parameter == "N":
                v = int(value)
            else:
                v = float(value)
            _set_nested(sub, path_spec, v)
            sub = json.loads(json.dumps(sub))  # normalize like a fresh config load
            summary = _COMMANDS[task](sub, out_dir / sub_dir_name)
            entry["status"] = "ok"
            entry["summary"] = summary
            n_ok += 1
        except ValidationError as exc:
            entry["status"] = "invalid"
            entry["message"] = str(exc)
        except NumericalError as exc:
            entry["status"] = "numerical_failure"
            entry["message"] = str(exc)
        runs.append(entry)

    doc = reporting.artifact("sweep", {
        "config": cfg,
        "task": task,
        "parameter": parameter,
        "n_values": len(values),
        "n_ok": n_ok,
        "runs": runs,
    })
    path = reporting.write_json(_out_path(out_dir, cfg, "sweep_index.json"), doc)
    print(f"sweep over {parameter}: {n_ok}/{len(values)} runs succeeded")
    print(f"wrote {path}")
    return {"n_ok": n_ok, "n_values": len(values)}


_COMMANDS = {
    "exponent": cmd_exponent,
    "envelope": cmd_envelope,
    "mu-check": cmd_mu_check,
    "simulate": cmd_simulate,
    "decay": cmd_decay,
    "residual": cmd_residual,
    "sweep": cmd_sweep,
}


def _resolve_out_dir(flag_value: str | None, cfg: dict) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get("CRITEVO_OUT")
    if env:
        return Path(env)
    if cfg.get("output_dir"):
        return Path(cfg["output_dir"])
    return Path.cwd()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="critevo",
        description="critical-exponent reports, admissibility checks, and "
                    "spectral simulations for higher-order evolution models",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    parsers = {}
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} task from a JSON config")
        p.add_argument("--config", default=None, help="path to the JSON config")
        p.add_argument("--out-dir", default=None,
                       help="artifact directory (overrides CRITEVO_OUT and the config)")
        parsers[name] = p
    for name in ("exponent", "envelope", "decay"):
        parsers[name].add_argument("--operator", default=None,
                                   help="operator spec file (alternative to --config)")
        parsers[name].add_argument("--ell", type=int, default=None,
                                   help="time-derivative level the nonlinearity acts on")
        parsers[name].add_argument("--n", type=int, default=None,
                                   help="override the operator's space dimension")
    parsers["envelope"].add_argument("--samples", type=int, default=None,
                                     help="number of sampled eta values")
    parsers["envelope"].add_argument("--eta-max", default=None,
                                     help="largest sampled eta (rational accepted)")
    parsers["mu-check"].add_argument("--family", default=None,
                                     help="mu family: constant | power | iterated_log")
    parsers["mu-check"].add_argument("--gamma", type=float, default=None,
                                     help="iterated_log exponent")
    parsers["mu-check"].add_argument("--depth", type=int, default=None,
                                     help="iterated_log depth k")
    parsers["mu-check"].add_argument("--epsilon", type=float, default=None,
                                     help="power-family exponent")
    parsers["mu-check"].add_argument("--value", type=float, default=None,
                                     help="constant-family value")
    parsers["mu-check"].add_argument("--c0", type=float, default=None,
                                     help="upper limit of the integral criterion")
    parsers["decay"].add_argument("--mode", default=None,
                                  choices=["whole-space", "torus"])
    parsers["decay"].add_argument("--q", type=float, action="append", default=None,
                                  help="Lebesgue index to fit (repeatable)")
    parsers["decay"].add_argument("--window", type=float, nargs=2, default=None,
                                  metavar=("T0", "T1"), help="fit window")
    parsers["decay"].add_argument("--target", type=float, default=None,
                                  help="explicit target rate for every fitted q")
    parsers["decay"].add_argument("--width", type=float, default=None,
                                  help="gaussian data width")
    return parser


def _config_from_args(args: argparse.Namespace) -> dict:
    """Merge direct flags over the config file (or over a fresh document)."""
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = {"schema_version": reporting.SCHEMA_VERSION}
    if getattr(args, "operator", None) is not None:
        cfg["operator"] = args.operator
    if getattr(args, "ell", None) is not None:
        cfg["ell"] = args.ell
    if getattr(args, "n", None) is not None:
        cfg["n"] = args.n
    if getattr(args, "samples", None) is not None:
        cfg["samples"] = args.samples
    if getattr(args, "eta_max", None) is not None:
        cfg["eta_max"] = args.eta_max
    if args.command == "mu-check":
        mu = dict(cfg.get("mu", {}))
        if args.family is not None:
            mu["family"] = args.family
        for key in ("gamma", "depth", "epsilon", "value"):
            v = getattr(args, key)
            if v is not None:
                mu[key] = v
        if mu:
            cfg["mu"] = mu
        if args.c0 is not None:
            cfg["c0"] = args.c0
    if args.command == "decay":
        if args.mode is not None:
            cfg["mode"] = args.mode
        if args.q is not None:
            cfg["q_list"] = args.q
        if args.window is not None:
            cfg["window"] = list(args.window)
        if args.width is not None:
            cfg["width"] = args.width
        if args.target is not None:
            qs = cfg.get("q_list", [2])
            cfg["targets"] = {str(float(q)): args.target for q in qs}
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path.cwd()
    try:
        cfg = _config_from_args(args)
        out_dir = _resolve_out_dir(args.out_dir, cfg)
        _COMMANDS[args.command](cfg, out_dir)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        where = getattr(exc, "filename", None) or out_dir
        print(f"error: cannot write artifacts at {where}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
