"""Batch front end: simulate, fit, bayes, diagnose, lob-sim, mc-study.

Every run is driven by a flat key-value config file plus command-line
overrides (flags win). Commands that produce files write them into --out
together with a manifest.json holding the fully resolved configuration,
the library version, and a sha256 per output file, so any artifact can be
regenerated bit-exactly from its manifest. Exit codes: 0 ok, 1 input
error, 2 convergence or statistical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    check_keys,
    get_bool,
    get_float,
    get_floats,
    get_int,
    get_mask,
    get_matrix,
    get_str,
    load_config,
)
from .diagnostics import diagnose, report_to_json, write_trace_csv
from .estimation import (
    NoConvergence,
    PoorMixing,
    SingularInformation,
    bayes_report,
    fit_report,
    qbe,
    qmle,
)
from .events import EventDataError, read_events, write_events
from .likelihood import QuadratureError
from .models import (
    HawkesModel,
    HawkesParams,
    LinearLOBModel,
    LinearLOBParams,
    LOBState,
    ParamBox,
    PoissonModel,
    PoissonParams,
    hawkes_spectral_radius,
)
from .simulation import SimConfig, simulate_exact, simulate_lob, simulate_thinning
from .study import report_to_json as study_to_json
from .study import run_mc_study, write_rows_csv

__all__ = ["main", "build_parser"]

_MODELS = {"poisson", "hawkes", "lob-linear"}
_SAMPLERS = {"thinning", "exact"}

# keys shared by the model/parameter block of every command
_MODEL_KEYS = {
    "model", "d", "rate", "nu", "c", "a", "mask",
    "m", "x0", "limit_rates", "cancel_coeffs", "market_rates", "rates",
}
_FIT_KEYS = {"starts", "tol", "max_iter", "lower", "upper", "level"}
_MCMC_KEYS = {"chains", "burn", "thin", "steps", "init_scale", "lower", "upper"}


class _CliError(Exception):
    """Input-side failure; code is a stable machine-readable tag."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(outdir, command: str, resolved: dict, files: list[str]) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": resolved,
        "outputs": {name: _sha256(os.path.join(outdir, name)) for name in files},
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ensure_outdir(args) -> str:
    if not args.out:
        raise _CliError("CONFIG", "this command writes files; pass --out DIR")
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _merge_config(args, flag_keys: dict[str, str]) -> dict[str, str]:
    """Config file under CLI flags; every value normalizes to a string."""
    cfg = load_config(args.config) if args.config else {}
    for attr, key in flag_keys.items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = str(val)
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing required key {key!r}")
    return cfg[key]


def _infer_d(cfg: dict, stream=None) -> int:
    d = get_int(cfg, "d")
    if d is None and stream is not None:
        return stream.d
    if d is None:
        raise ConfigError("missing required key 'd'")
    if d < 1:
        raise ConfigError(f"key 'd': must be >= 1, got {d}")
    return d


def _build_model(cfg: dict, stream=None):
    """Model object from config; theta comes separately (it may be absent)."""
    name = get_str(cfg, "model", choices=_MODELS)
    if name is None:
        raise ConfigError("missing required key 'model'")
    if name == "poisson":
        rate = get_floats(cfg, "rate")
        d = get_int(cfg, "d", rate.size if rate is not None else None)
        if d is None and stream is not None:
            d = stream.d
        if d is None:
            raise ConfigError("poisson needs 'd' or 'rate'")
        return PoissonModel(d)
    if name == "hawkes":
        nu = get_floats(cfg, "nu")
        d = get_int(cfg, "d", nu.size if nu is not None else None)
        if d is None and stream is not None:
            d = stream.d
        if d is None:
            raise ConfigError("hawkes needs 'd' or 'nu'")
        # config mask uses 1 = active entry; internally True marks the zeros
        active = get_mask(cfg, "mask", d)
        return HawkesModel(d, None if active is None else ~active)
    m = get_int(cfg, "m")
    if m is None:
        lim = get_floats(cfg, "limit_rates")
        if lim is not None:
            m = lim.size
        elif stream is not None:
            m = (stream.d - 2) // 2
        else:
            raise ConfigError("lob-linear needs 'm' or 'limit_rates'")
    x0 = cfg.get("x0")
    if x0 is not None:
        vals = get_floats(cfg, "x0")
        state = LOBState(np.asarray(vals, dtype=np.int64))
    else:
        state = LOBState.empty(m)
    return LinearLOBModel(m, state)


def _theta_from_config(cfg: dict, model) -> np.ndarray | None:
    """Parameter vector in the model's packed layout, if the config has one."""
    if isinstance(model, PoissonModel):
        rate = get_floats(cfg, "rate")
        if rate is None:
            return None
        return model.pack(PoissonParams(rate=rate))
    if isinstance(model, HawkesModel):
        nu = get_floats(cfg, "nu")
        c = get_matrix(cfg, "c", model.d)
        a = get_matrix(cfg, "a", model.d)
        if nu is None and c is None and a is None:
            return None
        if nu is None or c is None or a is None:
            raise ConfigError("hawkes parameters need all of 'nu', 'c', 'a'")
        if model.sparsity_mask is not None:
            # structural zeros must actually be zero in the supplied kernel
            if np.any(c[model.sparsity_mask] != 0.0):
                raise ConfigError("key 'c': nonzero entry at a masked position")
            c = np.where(model.sparsity_mask, 0.0, c)
            a = np.where(model.sparsity_mask, 1.0, a)
        return model.pack(HawkesParams(nu=nu, c=c, a=a, sparsity_mask=model.sparsity_mask))
    lim = get_floats(cfg, "limit_rates")
    can = get_floats(cfg, "cancel_coeffs")
    mkt = get_floats(cfg, "market_rates")
    if lim is None and can is None and mkt is None:
        return None
    if lim is None or can is None or mkt is None or mkt.size != 2:
        raise ConfigError(
            "lob-linear parameters need 'limit_rates', 'cancel_coeffs' and "
            "two 'market_rates'"
        )
    return model.pack(
        LinearLOBParams(
            limit_rates=lim,
            cancel_coeffs=can,
            market_rate_bid=float(mkt[0]),
            market_rate_ask=float(mkt[1]),
        )
    )


def _box_from_config(cfg: dict, model) -> ParamBox | None:
    lo = get_floats(cfg, "lower")
    hi = get_floats(cfg, "upper")
    if lo is None and hi is None:
        return None
    if lo is None or hi is None:
        raise ConfigError("box override needs both 'lower' and 'upper'")
    if lo.size != model.dim or hi.size != model.dim:
        raise ConfigError(
            f"box bounds must have {model.dim} entries (free coordinates)"
        )
    return ParamBox(lower=lo, upper=hi)


def _check_stationary(model, theta) -> None:
    if isinstance(model, HawkesModel):
        rho = hawkes_spectral_radius(model.unpack(theta))
        if rho >= 1.0:
            raise _CliError(
                "NONSTATIONARY",
                f"branching spectral radius {rho:.4f} >= 1: the process has "
                "no stationary regime; refusing to simulate",
            )


def _resolved_model_block(cfg: dict, model, theta) -> dict:
    out: dict = {"model": model.name}
    if isinstance(model, LinearLOBModel):
        out["m"] = model.m
        out["x0"] = model.x0.queues.tolist()
    else:
        out["d"] = model.d
    if isinstance(model, HawkesModel) and model.sparsity_mask is not None:
        # echoed in the config convention: 1 = active kernel entry
        out["mask"] = [
            "".join("0" if v else "1" for v in row) for row in model.sparsity_mask
        ]
    if theta is not None:
        out["theta"] = [float(v) for v in theta]
        out["param_names"] = model.param_names()
    return out


def _load_stream(args, cfg):
    horizon = get_float(cfg, "horizon")
    if horizon is None:
        raise ConfigError("missing required key 'horizon' (observation window)")
    d = get_int(cfg, "d")
    if d is None and get_str(cfg, "model") == "lob-linear":
        m = get_int(cfg, "m")
        if m is not None:
            d = 2 * m + 2
    try:
        return read_events(args.events, horizon=horizon, d=d)
    except FileNotFoundError as e:
        raise _CliError("INPUT", f"events file not found: {args.events}") from e


# ---------------------------------------------------------------- commands


def _cmd_simulate(args) -> int:
    cfg = _merge_config(
        args,
        {"model": "model", "horizon": "horizon", "seed": "seed",
         "sampler": "sampler", "mask": "mask"},
    )
    check_keys(cfg, _MODEL_KEYS | {"horizon", "seed", "sampler", "burn_in", "out"})
    model = _build_model(cfg)
    if isinstance(model, LinearLOBModel):
        raise ConfigError("use the lob-sim command for order-book simulation")
    theta = _theta_from_config(cfg, model)
    if theta is None:
        raise ConfigError("simulate needs the model parameters in the config")
    sampler = get_str(cfg, "sampler", "thinning", choices=_SAMPLERS)
    seed = get_int(cfg, "seed", 0)
    sim = SimConfig(
        horizon=_require_float(cfg, "horizon"),
        seed=seed,
        burn_in=get_float(cfg, "burn_in", 0.0),
    )
    _check_stationary(model, theta)
    if sampler == "exact":
        if not isinstance(model, HawkesModel):
            raise ConfigError("the exact sampler applies to the hawkes model only")
        stream = simulate_exact(model.unpack(theta), sim)
    else:
        stream = simulate_thinning(model, theta, sim)
    outdir = _ensure_outdir(args)
    write_events(stream, os.path.join(outdir, "events.csv"))
    resolved = _resolved_model_block(cfg, model, theta)
    resolved.update(
        {"horizon": sim.horizon, "seed": seed, "sampler": sampler,
         "burn_in": sim.burn_in, "n_events": stream.n}
    )
    _write_manifest(outdir, "simulate", resolved, ["events.csv"])
    print(f"simulate: {stream.n} events on (0, {sim.horizon}] -> {outdir}/events.csv")
    return 0


def _require_float(cfg, key) -> float:
    val = get_float(cfg, key)
    if val is None:
        raise ConfigError(f"missing required key {key!r}")
    return val


def _cmd_fit(args) -> int:
    cfg = _merge_config(
        args,
        {"model": "model", "horizon": "horizon", "seed": "seed", "mask": "mask"},
    )
    check_keys(cfg, _MODEL_KEYS | _FIT_KEYS | {"horizon", "seed", "out"})
    stream = _load_stream(args, cfg)
    model = _build_model(cfg, stream)
    box = _box_from_config(cfg, model)
    options = {}
    if "starts" in cfg:
        options["starts"] = get_int(cfg, "starts")
    if "tol" in cfg:
        options["tol"] = get_float(cfg, "tol")
    if "max_iter" in cfg:
        options["max_iter"] = get_int(cfg, "max_iter")
    options["seed"] = get_int(cfg, "seed", 0)
    fit = qmle(stream, model, box=box, options=options)
    report = fit_report(model, fit, level=get_float(cfg, "level", 0.95))
    report["n_events"] = stream.n
    report["horizon"] = stream.horizon
    code = 0 if fit.converged else 2
    if args.out:
        outdir = _ensure_outdir(args)
        with open(os.path.join(outdir, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        resolved = _resolved_model_block(cfg, model, None)
        resolved.update(
            {"horizon": stream.horizon, "seed": options["seed"],
             "events_sha256": _sha256(args.events)}
        )
        _write_manifest(outdir, "fit", resolved, ["report.json"])
        print(
            "fit: converged=%s loglik=%.6f -> %s/report.json"
            % (fit.converged, fit.loglik, outdir)
        )
    else:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        print()
    if code:
        print("error[NO_CONVERGENCE]: fit did not meet the score tolerance",
              file=sys.stderr)
    return code


def _cmd_bayes(args) -> int:
    cfg = _merge_config(
        args,
        {"model": "model", "horizon": "horizon", "seed": "seed", "mask": "mask"},
    )
    check_keys(cfg, _MODEL_KEYS | _MCMC_KEYS | {"horizon", "seed", "out"})
    stream = _load_stream(args, cfg)
    model = _build_model(cfg, stream)
    box = _box_from_config(cfg, model)
    mcmc = {"seed": get_int(cfg, "seed", 0)}
    for key, getter in (("chains", get_int), ("burn", get_int),
                        ("thin", get_int), ("steps", get_int)):
        if key in cfg:
            mcmc["burn_in" if key == "burn" else key] = getter(cfg, key)
    if "init_scale" in cfg:
        mcmc["init_scale"] = get_floats(cfg, "init_scale")
    with warnings.catch_warnings():
        warnings.simplefilter("always", PoorMixing)
        result = qbe(stream, model, box=box, mcmc=mcmc)
    report = bayes_report(model, result)
    report["n_events"] = stream.n
    report["horizon"] = stream.horizon
    if args.out:
        outdir = _ensure_outdir(args)
        with open(os.path.join(outdir, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        resolved = _resolved_model_block(cfg, model, None)
        resolved.update(
            {"horizon": stream.horizon, "mcmc": {k: (v.tolist() if hasattr(v, "tolist") else v) for k, v in mcmc.items()},
             "events_sha256": _sha256(args.events)}
        )
        _write_manifest(outdir, "bayes", resolved, ["report.json"])
        print(
            "bayes: acceptance=%.3f min-ess=%.0f -> %s/report.json"
            % (result.acceptance_rate, result.effective_sample_size.min(), outdir)
        )
    else:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        print()
    return 0


def _cmd_diagnose(args) -> int:
    cfg = _merge_config(
        args,
        {"model": "model", "horizon": "horizon", "seed": "seed", "mask": "mask",
         "statistic": "statistic"},
    )
    check_keys(
        cfg,
        _MODEL_KEYS
        | {"horizon", "seed", "out", "statistic", "mixing", "coupling",
           "n_paths", "sim_horizon", "probe_scales"},
    )
    stream = _load_stream(args, cfg)
    model = _build_model(cfg, stream)
    theta = _theta_from_config(cfg, model)
    if theta is None:
        raise ConfigError("diagnose needs the parameter values in the config")
    grid = None
    scales = get_floats(cfg, "probe_scales")
    if scales is not None:
        # axis-aligned lattice: each free coordinate scaled one at a time
        rows = []
        for k in range(theta.size):
            for s in scales:
                row = theta.copy()
                row[k] *= s
                rows.append(row)
        grid = np.array(rows)
    report = diagnose(
        stream,
        model,
        theta,
        ergodic_statistic=get_str(cfg, "statistic", "mean-intensity"),
        identifiability_grid=grid,
        run_mixing=get_bool(cfg, "mixing", False),
        run_coupling=get_bool(cfg, "coupling", False),
        n_paths=get_int(cfg, "n_paths", 8),
        sim_horizon=get_float(cfg, "sim_horizon", 2000.0),
        seed=get_int(cfg, "seed", 0),
    )
    blob = report_to_json(report)
    blob["n_events"] = stream.n
    blob["horizon"] = stream.horizon
    if args.out:
        outdir = _ensure_outdir(args)
        files = ["report.json"]
        with open(os.path.join(outdir, "report.json"), "w") as fh:
            json.dump(blob, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if report.ergodic is not None:
            for alpha in range(report.ergodic.values.shape[1]):
                name = f"trace_ergodic_c{alpha}.csv"
                write_trace_csv(
                    os.path.join(outdir, name),
                    report.ergodic.times,
                    report.ergodic.values[:, alpha],
                )
                files.append(name)
        if report.mixing is not None:
            write_trace_csv(
                os.path.join(outdir, "trace_mixing.csv"),
                report.mixing.lags,
                report.mixing.estimates,
                report.mixing.stderr,
            )
            files.append("trace_mixing.csv")
        if report.coupling is not None:
            write_trace_csv(
                os.path.join(outdir, "trace_coupling.csv"),
                report.coupling.grid,
                report.coupling.mean_gap,
                report.coupling.stderr,
            )
            files.append("trace_coupling.csv")
        resolved = _resolved_model_block(cfg, model, theta)
        resolved.update(
            {"horizon": stream.horizon, "seed": get_int(cfg, "seed", 0),
             "events_sha256": _sha256(args.events)}
        )
        _write_manifest(outdir, "diagnose", resolved, files)
        print(f"diagnose: {len(report.notes)} notes -> {outdir}/report.json")
    else:
        json.dump(blob, sys.stdout, indent=2, sort_keys=True)
        print()
    return 0


def _cmd_lob_sim(args) -> int:
    cfg = _merge_config(args, {"horizon": "horizon", "seed": "seed", "m": "m"})
    check_keys(
        cfg,
        {"m", "horizon", "seed", "burn_in", "out", "x0",
         "limit_rates", "cancel_coeffs", "market_rates", "rates"},
    )
    m = get_int(cfg, "m")
    rates = get_floats(cfg, "rates")
    if rates is not None:
        if m is None:
            if rates.size % 2 or rates.size < 6:
                raise ConfigError("key 'rates': need 2m+2 entries with m >= 2")
            m = (rates.size - 2) // 2
        if rates.size != 2 * m + 2:
            raise ConfigError(f"key 'rates': need {2 * m + 2} entries")
        params = PoissonParams(rate=rates)
    else:
        lim = get_floats(cfg, "limit_rates")
        can = get_floats(cfg, "cancel_coeffs")
        mkt = get_floats(cfg, "market_rates")
        if lim is None or can is None or mkt is None or mkt.size != 2:
            raise ConfigError(
                "lob-sim needs either 'rates' (constant flavor) or "
                "'limit_rates' + 'cancel_coeffs' + two 'market_rates'"
            )
        if m is None:
            m = lim.size
        params = LinearLOBParams(
            limit_rates=lim,
            cancel_coeffs=can,
            market_rate_bid=float(mkt[0]),
            market_rate_ask=float(mkt[1]),
        )
    sim = SimConfig(
        horizon=_require_float(cfg, "horizon"),
        seed=get_int(cfg, "seed", 0),
        burn_in=get_float(cfg, "burn_in", 0.0),
    )
    stream, trajectory = simulate_lob(params, m, sim)
    outdir = _ensure_outdir(args)
    write_events(stream, os.path.join(outdir, "events.csv"))
    with open(os.path.join(outdir, "trajectory.json"), "w") as fh:
        json.dump(trajectory.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    resolved = {
        "m": m,
        "flavor": "poisson" if rates is not None else "linear",
        "horizon": sim.horizon,
        "seed": sim.seed,
        "burn_in": sim.burn_in,
        "n_events": stream.n,
    }
    if rates is not None:
        resolved["rates"] = rates.tolist()
    else:
        resolved.update(
            {"limit_rates": params.limit_rates.tolist(),
             "cancel_coeffs": params.cancel_coeffs.tolist(),
             "market_rates": [params.market_rate_bid, params.market_rate_ask]}
        )
    _write_manifest(outdir, "lob-sim", resolved, ["events.csv", "trajectory.json"])
    print(f"lob-sim: {stream.n} events, {2 * m + 2} types -> {outdir}")
    return 0


def _cmd_mc_study(args) -> int:
    cfg = _merge_config(
        args,
        {"model": "model", "seed": "seed", "jobs": "jobs", "mask": "mask"},
    )
    check_keys(
        cfg,
        _MODEL_KEYS | _FIT_KEYS | _MCMC_KEYS
        | {"seed", "jobs", "out", "t_list", "n_reps", "estimators"},
    )
    model = _build_model(cfg)
    if isinstance(model, LinearLOBModel):
        raise ConfigError("mc-study covers the poisson and hawkes models")
    theta = _theta_from_config(cfg, model)
    if theta is None:
        raise ConfigError("mc-study needs the true parameters in the config")
    _check_stationary(model, theta)
    t_list = get_floats(cfg, "t_list")
    if t_list is None or t_list.size == 0:
        raise ConfigError("missing required key 't_list'")
    n_reps = get_int(cfg, "n_reps")
    if n_reps is None:
        raise ConfigError("missing required key 'n_reps'")
    estimators = tuple(
        s.strip() for s in get_str(cfg, "estimators", "qmle").split(",") if s.strip()
    )
    fit_options = {}
    for key, getter in (("starts", get_int), ("tol", get_float), ("max_iter", get_int)):
        if key in cfg:
            fit_options[key] = getter(cfg, key)
    mcmc_options = {}
    for key in ("chains", "burn", "thin", "steps"):
        if key in cfg:
            mcmc_options["burn_in" if key == "burn" else key] = get_int(cfg, key)
    report = run_mc_study(
        model,
        theta,
        t_list,
        n_reps,
        estimators=estimators,
        seed=get_int(cfg, "seed", 0),
        jobs=get_int(cfg, "jobs", 1),
        fit_options=fit_options or None,
        mcmc_options=mcmc_options or None,
    )
    outdir = _ensure_outdir(args)
    write_rows_csv(report, os.path.join(outdir, "rows.csv"))
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(study_to_json(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    resolved = _resolved_model_block(cfg, model, theta)
    resolved.update(
        {"t_list": report.t_list, "n_reps": n_reps, "estimators": list(estimators),
         "seed": report.seed, "fit_options": fit_options,
         "mcmc_options": mcmc_options}
    )
    _write_manifest(outdir, "mc-study", resolved, ["rows.csv", "report.json"])
    print(
        "mc-study: %d rows, %.1f%% failed -> %s"
        % (len(report.rows), 100.0 * report.failure_fraction, outdir)
    )
    if report.rows and report.failure_fraction > 0.10:
        print(
            "error[STUDY_FAILURES]: more than 10% of replications failed",
            file=sys.stderr,
        )
        return 2
    return 0


# ---------------------------------------------------------------- plumbing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlpp",
        description="Point-process simulation, quasi-likelihood estimation, "
        "and diagnostics, driven by flat config files.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, events=False):
        if events:
            p.add_argument("events", help="event CSV (time,component)")
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--horizon", type=float, help="observation window length")
        p.add_argument("--model", choices=sorted(_MODELS))
        p.add_argument(
            "--mask",
            help="hawkes kernel structure, rows like 110;011;111 (1 = active)",
        )

    p = sub.add_parser("simulate", help="draw one stream and write events.csv")
    common(p)
    p.add_argument("--sampler", choices=sorted(_SAMPLERS))
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="point estimate on an event file")
    common(p, events=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("bayes", help="posterior-mean estimate on an event file")
    common(p, events=True)
    p.set_defaults(func=_cmd_bayes)

    p = sub.add_parser("diagnose", help="model-adequacy probes on an event file")
    common(p, events=True)
    p.add_argument(
        "--statistic",
        choices=["mean-intensity", "mean-inverse-intensity", "mean-information"],
    )
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("lob-sim", help="simulate the order-book event flow")
    common(p)
    p.add_argument("--m", type=int, help="number of price levels")
    p.set_defaults(func=_cmd_lob_sim)

    p = sub.add_parser("mc-study", help="replicated simulate-then-fit study")
    common(p)
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.set_defaults(func=_cmd_mc_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error[CONFIG]: {e}", file=sys.stderr)
        return 1
    except _CliError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return 1
    except NoConvergence as e:
        print(f"error[NO_CONVERGENCE]: {e}", file=sys.stderr)
        return 2
    except (QuadratureError, SingularInformation) as e:
        print(f"error[NUMERIC]: {e}", file=sys.stderr)
        return 2
    except (EventDataError, FileNotFoundError) as e:
        print(f"error[INPUT]: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        # covers model/parameter validation and zero-intensity mismatches
        print(f"error[INPUT]: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
