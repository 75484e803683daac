"""Config-driven command line front end.

Subcommands wire models, test functions, and finiteness tests into
reproducible experiments::

    levyint simulate       sample paths, write skeleton CSV
    levyint potential      Monte Carlo potential measure (+ closed-form check)
    levyint test           comparison/finiteness tests on one (model, f) pair
    levyint diagnose       horizon-ladder finiteness diagnosis
    levyint counterexample lattice-sine or transient-trap reconstruction
    levyint scan           sublevel-set grid of x -> P(I^x > a)

Exit codes: 0 success, 2 configuration error, 3 model rejected,
4 verification assertion failure.  Every artifact embeds the config digest
and master seed; reruns with the same config byte-reproduce all artifacts
regardless of the thread count.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import functions as fn
from .counterexamples import (
    TrapConstructionError,
    build_transient_trap,
    estimate_overshoot_cdf,
    lattice_counterexample,
    verify_counterexample,
)
from .criteria import (
    RegionCoverageError,
    RegionSpec,
    blackwell_equivalence_check,
    dk_test,
    erickson_maller_test,
    full_line,
    half_line,
    khasminskii_J,
    potential_integral,
)
from .models import (
    CompoundPoisson,
    LevyModel,
    ModelRejectionError,
    TruncatedStable,
    build_model,
    describe,
    simulate_path,
)
from .perpetual import (
    batty_inequality_check,
    estimate_I_distribution,
    estimate_L_set,
    finiteness_diagnosis,
    khasminskii_exponential_check,
)
from .potential import analytic_potential, estimate_potential
from . import rng as _rng

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_VERIFY = 4


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config plumbing

# keys excluded from the digest: they must not break byte-reproducibility
# across reruns (different output dirs) or worker pools (thread counts)
_DIGEST_EXCLUDE = {"out", "threads"}

_NAMED_MODELS = {
    "lattice_cpp": lambda: build_model(
        jumps=CompoundPoisson(rate=2.0, atoms=((1.0, 1.0),)), lattice_span=1.0),
    "bm": lambda: build_model(drift=1.0, gaussian_var=1.0),
    "tstable": lambda: build_model(jumps=TruncatedStable(activity=1.0, index=0.5, cutoff=1.0)),
    "drift": lambda: build_model(drift=1.0),
}

_NAMED_FUNCTIONS = {
    "exp_decay": fn.exp_decay,
    "inverse_square": lambda: fn.inverse_power(2.0),
    "inverse_first": lambda: fn.inverse_power(1.0),
    "unit_indicator": lambda: fn.indicator(0.0, 1.0),
    "lattice_sine": fn.lattice_sine,
}


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return data


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = load_config(args.config) if args.config else {}
    for key in ("seed", "paths", "horizon", "threads", "out"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "model", None):
        cfg["model"] = args.model
    if getattr(args, "function", None):
        cfg["function"] = args.function
    if getattr(args, "mode", None):
        cfg["mode"] = args.mode
    if cfg.get("seed") is None:
        raise ConfigError("a master seed is required (config key 'seed' or --seed); "
                          "there is no wall-clock default")
    cfg["seed"] = int(cfg["seed"])
    cfg.setdefault("threads", 1)
    cfg.setdefault("out", "out")
    return cfg


def config_digest(cfg: dict) -> str:
    slim = {k: v for k, v in cfg.items() if k not in _DIGEST_EXCLUDE}
    blob = json.dumps(slim, sort_keys=True, default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing required config key '{key}'")
    return cfg[key]


def model_from_config(spec) -> LevyModel:
    """Build a model from a registry name or a parameter mapping."""
    if isinstance(spec, str):
        if spec not in _NAMED_MODELS:
            raise ConfigError(f"unknown model '{spec}' (known: {sorted(_NAMED_MODELS)})")
        return _NAMED_MODELS[spec]()
    if not isinstance(spec, dict):
        raise ConfigError("model spec must be a name or a mapping")
    kind = spec.get("kind")
    try:
        if kind in ("drift", "deterministic"):
            return build_model(drift=spec.get("drift", 1.0))
        if kind in ("bm", "brownian"):
            return build_model(drift=spec.get("drift", 1.0),
                               gaussian_var=spec.get("gaussian_var", 1.0))
        if kind in ("cpp", "compound_poisson"):
            atoms = spec.get("atoms")
            law = spec.get("law")
            if atoms is not None:
                jumps = CompoundPoisson(rate=float(spec.get("rate", 1.0)),
                                        atoms=tuple((float(v), float(p)) for v, p in atoms))
            elif law is not None:
                jumps = CompoundPoisson(rate=float(spec.get("rate", 1.0)),
                                        law=(str(law[0]), *map(float, law[1:])))
            else:
                raise ConfigError("compound Poisson spec needs 'atoms' or 'law'")
            return build_model(drift=spec.get("drift", 0.0),
                               gaussian_var=spec.get("gaussian_var", 0.0),
                               jumps=jumps, lattice_span=spec.get("lattice_span"))
        if kind in ("tstable", "truncated_stable"):
            jumps = TruncatedStable(activity=float(spec.get("activity", 1.0)),
                                    index=float(spec.get("index", 0.5)),
                                    cutoff=float(spec.get("cutoff", 1.0)))
            return build_model(drift=spec.get("drift", 0.0), jumps=jumps)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"bad model spec: {exc}") from exc
    raise ConfigError(f"unknown model kind '{kind}'")


def function_from_config(spec) -> fn.TestFunction:
    if isinstance(spec, str):
        if spec not in _NAMED_FUNCTIONS:
            raise ConfigError(f"unknown function '{spec}' (known: {sorted(_NAMED_FUNCTIONS)})")
        return _NAMED_FUNCTIONS[spec]()
    if not isinstance(spec, dict):
        raise ConfigError("function spec must be a name or a mapping")
    kind = spec.get("kind")
    try:
        if kind == "exp_decay":
            return fn.exp_decay()
        if kind == "inverse_power":
            return fn.inverse_power(float(spec.get("power", 1.0)))
        if kind == "indicator":
            return fn.indicator(float(spec["lo"]), float(spec["hi"]))
        if kind == "constant":
            return fn.constant(float(spec.get("value", 1.0)))
        if kind == "step":
            return fn.step_function([(float(c), float(a), float(b))
                                     for c, a, b in spec["pieces"]])
        if kind == "lattice_sine":
            return fn.lattice_sine(float(spec.get("span", 1.0)))
        if kind == "triangle_train":
            return fn.triangle_train([float(v) for v in spec["starts"]],
                                     [float(v) for v in spec["widths"]])
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"bad function spec: {exc}") from exc
    raise ConfigError(f"unknown function kind '{kind}'")


def region_from_config(spec) -> RegionSpec:
    if spec is None:
        return half_line(0.0)
    if spec == "full_line":
        return full_line()
    if not isinstance(spec, dict):
        raise ConfigError("region spec must be a mapping or 'full_line'")
    if "half_line" in spec:
        return half_line(float(spec["half_line"]))
    if "intervals" in spec:
        return RegionSpec(intervals=[(float(a), float(b)) for a, b in spec["intervals"]],
                          describes_complement=bool(spec.get("complement", False)),
                          name=spec.get("name", "region"))
    raise ConfigError("region spec needs 'half_line' or 'intervals'")


def grid_from_config(spec, model: LevyModel = None,
                     default_lo=0.0, default_hi=64.0, default_bins=64) -> np.ndarray:
    if spec is None:
        if model is not None and model.lattice_span is not None:
            # one bin per lattice site, edges between sites
            alpha = model.lattice_span
            return alpha * (np.arange(default_bins + 1) - 0.5)
        return np.linspace(default_lo, default_hi, default_bins + 1)
    if isinstance(spec, dict):
        if "edges" in spec:
            return np.asarray([float(v) for v in spec["edges"]])
        return np.linspace(float(spec.get("lo", default_lo)), float(spec.get("hi", default_hi)),
                           int(spec.get("bins", default_bins)) + 1)
    raise ConfigError("grid spec must be a mapping with lo/hi/bins or edges")


# ---------------------------------------------------------------------------
# deterministic writers

def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return dataclasses.asdict(obj)
    if obj == math.inf:
        return "inf"
    raise TypeError(f"not serializable: {type(obj)}")


def write_json(path: Path, payload: dict, cfg: dict) -> None:
    payload = dict(payload)
    payload["config_digest"] = config_digest(cfg)
    payload["master_seed"] = cfg["seed"]
    path.parent.mkdir(parents=True, exist_ok=True)
    # allow_nan keeps inf sentinels readable; sort_keys pins the byte layout
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, default=_jsonable) + "\n")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header: list[str], rows, cfg: dict, extra_meta: dict = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"config_digest": config_digest(cfg), "master_seed": cfg["seed"]}
    meta.update(extra_meta or {})
    with open(path, "w", newline="") as fh:
        for k in sorted(meta):
            fh.write(f"# {k}: {meta[k]}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _outdir(cfg: dict) -> Path:
    p = Path(cfg["out"])
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(cfg: dict, args) -> int:
    model = model_from_config(_require(cfg, "model"))
    paths = int(cfg.get("paths", 10))
    horizon = float(cfg.get("horizon", 50.0))
    step = cfg.get("step")
    out = _outdir(cfg)

    rows = []
    finals = []
    for i in range(paths):
        path = simulate_path(model, horizon, step=step,
                             rng=_rng.derive_rng(cfg["seed"], _rng.STREAM_PATH, i))
        finals.append(path.values[-1])
        for t, v in zip(path.times, path.values):
            rows.append((i, t, v))
    write_csv(out / "paths.csv", ["path", "time", "value"], rows, cfg,
              {"model": describe(model), "horizon": repr(horizon)})
    finals = np.array(finals)
    write_json(out / "simulate_summary.json", {
        "model": describe(model), "paths": paths, "horizon": horizon,
        "final_value_mean": float(finals.mean()),
        "final_value_min": float(finals.min()),
        "final_value_max": float(finals.max()),
        "expected_final": model.mean * horizon if math.isfinite(model.mean) else "inf",
    }, cfg)
    print(f"wrote {paths} paths to {out / 'paths.csv'}")
    return EXIT_OK


def cmd_potential(cfg: dict, args) -> int:
    model = model_from_config(_require(cfg, "model"))
    edges = grid_from_config(cfg.get("grid"), model)
    paths = int(cfg.get("paths", 2000))
    out = _outdir(cfg)
    pm = estimate_potential(model, edges, paths=paths, seed=cfg["seed"],
                            horizon=cfg.get("horizon"), step=cfg.get("step"),
                            threads=int(cfg["threads"]))
    pm.meta["config_digest"] = config_digest(cfg)
    pm.to_csv(out / "potential.csv")

    report = {"model": describe(model), "paths": paths, "bins": len(pm.masses),
              "total_mass": float(pm.masses.sum())}
    closed = analytic_potential(model, edges)
    if closed is not None:
        z = np.abs(pm.masses - closed.masses) / np.maximum(pm.stderr, 1e-300)
        report["closed_form_available"] = True
        report["max_abs_z"] = float(z.max())
        report["bins_beyond_3se"] = int((z > 3.0).sum())
    else:
        report["closed_form_available"] = False
    write_json(out / "potential_report.json", report, cfg)
    print(f"wrote potential measure ({len(pm.masses)} bins) to {out / 'potential.csv'}")
    return EXIT_OK


def _pm_for_tests(cfg, model):
    edges = grid_from_config(cfg.get("grid"), model)
    return estimate_potential(model, edges, paths=int(cfg.get("paths", 2000)),
                              seed=cfg["seed"], horizon=cfg.get("horizon"),
                              step=cfg.get("step"), threads=int(cfg["threads"]))


def cmd_test(cfg: dict, args) -> int:
    model = model_from_config(_require(cfg, "model"))
    f = function_from_config(_require(cfg, "function"))
    which = cfg.get("tests", ["dk", "potential_integral"])
    x = float(cfg.get("x", 0.0))
    cutoff = float(cfg.get("lower_cutoff", 1.0))
    out = _outdir(cfg)

    pm = None
    if set(which) & {"potential_integral", "erickson_maller", "blackwell", "khasminskii_j"}:
        pm = _pm_for_tests(cfg, model)

    reports = {}
    comparison = []
    model_id, f_id = describe(model), f.name
    for name in which:
        if name == "dk":
            rep = dk_test(f, float(cfg.get("dk_cutoff", 0.0)))
            reports[name] = rep.to_dict()
            comparison.append((name, rep.value, rep.verdict))
        elif name == "potential_integral":
            region = region_from_config(cfg.get("region"))
            rep = potential_integral(f, pm, region, x=x)
            reports[name] = rep.to_dict()
            comparison.append((name, rep.value, rep.verdict))
        elif name == "erickson_maller":
            rep = erickson_maller_test(f, pm, cutoff)
            reports[name] = rep.to_dict()
            comparison.append((name, rep.value, rep.verdict))
        elif name == "blackwell":
            reports[name] = blackwell_equivalence_check(f, pm, cutoff)
        elif name == "khasminskii_j":
            xg = cfg.get("x_grid")
            grid = (np.asarray([float(v) for v in xg]) if isinstance(xg, list)
                    else np.linspace(-2.0, 2.0, 41))
            reports[name] = khasminskii_J(f, pm, grid)
        elif name == "batty":
            rep = batty_inequality_check(
                f, model, x, a=float(cfg.get("a", 1.0)), t=float(cfg.get("t", 10.0)),
                n_outer=int(cfg.get("paths", 400)), seed=cfg["seed"], step=cfg.get("step"))
            reports[name] = rep.__dict__
        elif name == "mgf":
            rep = khasminskii_exponential_check(
                f, model, x, theta=float(cfg.get("theta", 1.0)),
                horizon=float(cfg.get("horizon", 50.0)), paths=int(cfg.get("paths", 2000)),
                seed=cfg["seed"], j_value=cfg.get("j_value"), step=cfg.get("step"),
                threads=int(cfg["threads"]))
            reports[name] = rep.__dict__
        else:
            raise ConfigError(f"unknown test '{name}'")

    write_json(out / "tests.json", {"model": model_id, "f": f_id, "reports": reports}, cfg)
    write_csv(out / "comparison.csv", ["test", "value", "verdict", "model_id", "f_id"],
              [(n, v, verdict, model_id, f_id) for n, v, verdict in comparison],
              cfg)
    for n, v, verdict in comparison:
        print(f"{n}: {verdict} (value {v})")
    return EXIT_OK


def cmd_diagnose(cfg: dict, args) -> int:
    model = model_from_config(_require(cfg, "model"))
    f = function_from_config(_require(cfg, "function"))
    horizon = float(cfg.get("horizon", 80.0))
    ladder = cfg.get("ladder")
    if ladder is None:
        n_rungs = int(cfg.get("rungs", 4))
        ladder = [horizon / 2 ** (n_rungs - 1 - i) for i in range(n_rungs)]
    out = _outdir(cfg)
    verdict = finiteness_diagnosis(f, model, x=float(cfg.get("x", 0.0)),
                                   rungs=ladder, paths=int(cfg.get("paths", 2000)),
                                   seed=cfg["seed"], step=cfg.get("step"),
                                   threads=int(cfg["threads"]))
    ev = verdict.evidence
    write_json(out / "diagnosis.json",
               {"outcome": verdict.outcome, "note": verdict.note, "evidence": ev}, cfg)
    write_csv(out / "ladder.csv", ["horizon", "median_I", "mean_I", "censored_fraction"],
              zip(ev["rungs"], ev["medians"], ev["means"], ev["censored_fraction"]),
              cfg, {"model": describe(model), "f": f.name})
    print(f"diagnosis: {verdict.outcome}")
    return EXIT_OK


def cmd_counterexample(cfg: dict, args) -> int:
    mode = cfg.get("mode", "lattice")
    out = _outdir(cfg)
    if mode == "lattice":
        model = model_from_config(cfg.get("model", "lattice_cpp"))
        report = lattice_counterexample(model, paths=int(cfg.get("paths", 200)),
                                        horizon=float(cfg.get("horizon", 100.0)),
                                        seed=cfg["seed"])
        write_json(out / "lattice_counterexample.json", report.to_dict(), cfg)
        print(f"lattice counterexample: tail test {report.dk_verdict}, "
              f"max |I| {report.max_integral:.3g} -> "
              f"{'PASS' if report.passed else 'FAIL'}")
        return EXIT_OK if report.passed else EXIT_VERIFY

    if mode == "trap":
        model = model_from_config(cfg.get("model", "tstable"))
        levels = cfg.get("levels", [2, 3, 4, 6, 8, 12, 16, 22, 30])
        table = estimate_overshoot_cdf(model, levels,
                                       paths=int(cfg.get("overshoot_paths", 4000)),
                                       seed=cfg["seed"], threads=int(cfg["threads"]))
        write_csv(out / "overshoot_cdfs.csv", ["level", "eps", "cdf"],
                  [(lv, e, c) for li, lv in enumerate(table.levels)
                   for e, c in zip(table.eps_grid, table.cdfs[li])],
                  cfg, {"paths_per_level": table.paths_per_level,
                        "limit_gap": repr(table.limit_gap)})
        trap = build_transient_trap(table, n_max=int(cfg.get("n_max", 12)),
                                    safety=float(cfg.get("safety", 2.0)))
        write_json(out / "trap_construction.json", trap.to_dict(), cfg)
        verification = verify_counterexample(model, trap,
                                             paths=int(cfg.get("paths", 2000)),
                                             seed=cfg["seed"] + 1,
                                             threads=int(cfg["threads"]))
        write_json(out / "trap_verification.json", verification.to_dict(), cfg)
        print(f"trap verification: visits {verification.visit_fraction:.4f} "
              f"<= {verification.visit_bound:.4f} [{verification.visit_ok}], "
              f"diagnosis {verification.diagnosis_outcome}, "
              f"off-trap potential integral {verification.potential_integral_value}, "
              f"tail test {verification.dk_verdict} -> "
              f"{'PASS' if verification.passed else 'FAIL'}")
        return EXIT_OK if verification.passed else EXIT_VERIFY

    raise ConfigError(f"unknown counterexample mode '{mode}' (lattice or trap)")


def cmd_scan(cfg: dict, args) -> int:
    model = model_from_config(_require(cfg, "model"))
    f = function_from_config(_require(cfg, "function"))
    scan = cfg.get("scan", {})
    xspec = scan.get("x", {})
    xs = (np.asarray([float(v) for v in xspec]) if isinstance(xspec, list)
          else np.linspace(float(xspec.get("lo", -2.0)), float(xspec.get("hi", 6.0)),
                           int(xspec.get("points", 17))))
    out = _outdir(cfg)
    approx = estimate_L_set(f, model, a=float(scan.get("a", 1.0)),
                            q=float(scan.get("q", 0.5)), x_grid=xs,
                            horizon=float(cfg.get("horizon", 50.0)),
                            paths=int(cfg.get("paths", 1000)), seed=cfg["seed"],
                            step=cfg.get("step"), threads=int(cfg["threads"]))
    write_csv(out / "lset.csv", ["x", "g_hat", "stderr", "member"],
              zip(approx.xs, approx.g_hat, approx.stderr, approx.member),
              cfg, {"a": repr(approx.a), "q": repr(approx.q),
                    "model": describe(model), "f": f.name})
    write_json(out / "lset_summary.json", {
        "a": approx.a, "q": approx.q, "model": describe(model), "f": f.name,
        "member_count": int(approx.member.sum()), "grid_points": len(approx.xs),
        "member_min_x": float(approx.xs[approx.member].min()) if approx.member.any() else None,
    }, cfg)
    print(f"scan: {int(approx.member.sum())}/{len(approx.xs)} grid points in the sublevel set")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "potential": cmd_potential,
    "test": cmd_test,
    "diagnose": cmd_diagnose,
    "counterexample": cmd_counterexample,
    "scan": cmd_scan,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levyint",
                                description="perpetual-integral finiteness toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML experiment config")
        sp.add_argument("--seed", type=int, help="master seed (mandatory if absent from config)")
        sp.add_argument("--paths", type=int, help="Monte Carlo path budget")
        sp.add_argument("--horizon", type=float, help="time horizon")
        sp.add_argument("--threads", type=int, help="worker threads (does not change results)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--model", help="named model from the registry")
        if name in ("test", "diagnose", "scan"):
            sp.add_argument("--function", help="named test function from the registry")
        if name == "counterexample":
            sp.add_argument("--mode", choices=["lattice", "trap"])
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegionCoverageError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelRejectionError as exc:
        print(f"model rejected: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except TrapConstructionError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
