"""Command-line front end.

Usage::

    python -m gibbs_maxent <subcommand> --config cfg.json --out runs/x --seed 7

Subcommands: ``reconstruct``, ``verify``, ``fig-pinsker``, ``bounds``,
``tc-check`` and ``shadows``.  Every run writes ``manifest.json`` listing the
configuration hash, tool version, timestamps, per-stage seeds and output
files.  A manifest can be passed back as ``--config`` to replay the run; all
outputs except the manifest itself are byte-identical on replay.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import chain as ch
from . import experiments as ex
from .gibbs import GibbsModel, expectations, gibbs_state, load_model
from .operators import LocalOperator, SiteSystem
from .shadows import ShadowScheme, default_batches, default_delta, estimate, plan_samples, sample, write_batch
from .solver import SolverOptions
from .wasserstein import tc_constant_local, tc_verify

SUBCOMMANDS = ("reconstruct", "verify", "fig-pinsker", "bounds", "tc-check", "shadows")


class ConfigError(ValueError):
    """Invalid configuration; raised before any computation starts."""


# ---------------------------------------------------------------------------
# output helpers


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps(obj) -> str:
    """Deterministic JSON (sorted keys; ``inf``/``nan`` written as strings)."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


class Outputs:
    """Tracks files written by a run so the manifest lists all of them."""

    def __init__(self, root: Path):
        self.root = root
        self.files = []

    def path(self, name):
        self.files.append(name)
        return self.root / name

    def json(self, name, obj):
        self.path(name).write_text(dumps(obj))

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                            for v in r])


# ---------------------------------------------------------------------------
# configuration


def _resolve(base: Path, p):
    p = Path(p)
    return p if p.is_absolute() else (base / p)


def _need(cfg, key, kind, where):
    if key not in cfg:
        raise ConfigError(f"{where}: missing field {key!r}")
    if not isinstance(cfg[key], kind):
        raise ConfigError(f"{where}: field {key!r} has the wrong type")
    return cfg[key]


def _load_model_cfg(cfg, base):
    ref = cfg.get("model")
    if ref is None:
        raise ConfigError("missing field 'model'")
    try:
        if isinstance(ref, dict):
            from .gibbs import model_from_dict

            return model_from_dict(ref)
        path = _resolve(base, ref)
        if not path.exists():
            raise ConfigError(f"model file {str(path)!r} does not exist")
        return load_model(path)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid model: {exc}") from None


def _solver_opts(cfg):
    try:
        return ex.solver_options(cfg.get("solver"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None


def _validate(sub, cfg, base):
    """Parse everything the run needs; raises :class:`ConfigError`."""
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a JSON/TOML object")
    plan = {}
    if sub == "reconstruct":
        kind = cfg.get("kind", "quantum")
        if kind == "quantum":
            plan["model"], plan["lambda"] = _load_model_cfg(cfg, base)
            est = dict(cfg.get("estimation", {"source": "exact"}))
            if est.get("source", "exact") in ("exact", "shadows") and plan["lambda"] is None:
                raise ConfigError("estimation from the state needs 'lambda' in the model file")
            if est.get("source") == "file":
                vals = est.get("values")
                if vals is None and "path" in est:
                    path = _resolve(base, est["path"])
                    if not path.exists():
                        raise ConfigError(f"estimate file {str(path)!r} does not exist")
                    with open(path) as fh:
                        vals = [float(r["estimate"]) for r in csv.DictReader(fh)]
                if vals is None or len(vals) != plan["model"].m:
                    raise ConfigError("estimation.values must have one entry per basis element")
                est["values"] = vals
            elif est.get("source", "exact") not in ("exact", "shadows"):
                raise ConfigError(f"unknown estimation source {est.get('source')!r}")
            plan["estimation"] = est
        elif kind == "chain":
            c = cfg.get("chain")
            if not isinstance(c, dict):
                raise ConfigError("chain reconstruction needs a 'chain' object")
            if "path" in c:
                path = _resolve(base, c["path"])
                if not path.exists():
                    raise ConfigError(f"chain file {str(path)!r} does not exist")
                plan["spec"] = ch.ChainSpec.from_dict(json.loads(path.read_text()))
            else:
                _need(c, "n", int, "chain")
                plan["random"] = {"n": c["n"], "beta": float(c.get("beta", 1.0)),
                                  "boundary": c.get("boundary", "open"), "fields": bool(c.get("fields", False))}
            plan["samples"] = int(cfg.get("samples", 1000))
            plan["stderr_delta_mu"] = bool(cfg.get("delta_mu_from_stderr", False))
        else:
            raise ConfigError(f"unknown reconstruction kind {kind!r}")
        plan["kind"] = kind
        plan["opts"] = _solver_opts(cfg)
    elif sub == "verify":
        plan["model"], plan["lambda"] = _load_model_cfg(cfg, base)
        if plan["lambda"] is None:
            raise ConfigError("verify needs a model with known 'lambda'")
        plan["n_points"] = int(cfg.get("n_points", 3))
        plan["fault_injection"] = cfg.get("fault_injection")
        if plan["fault_injection"] not in (None, "hessian"):
            raise ConfigError("fault_injection must be null or 'hessian'")
    elif sub == "fig-pinsker":
        nv = _need(cfg, "n_values", list, "fig-pinsker")
        if not nv or not all(isinstance(n, int) and n >= 3 for n in nv):
            raise ConfigError("n_values must be a non-empty list of integers >= 3")
        plan["n_values"] = nv
        plan["seeds"] = int(cfg.get("seeds", 20))
        plan["kwargs"] = {"samples": int(cfg.get("samples", 1000)), "beta": float(cfg.get("beta", 1.0)),
                          "depth": int(cfg.get("depth", 3)), "solver": cfg.get("solver")}
        _solver_opts(cfg)
    elif sub == "bounds":
        if "model" in cfg:
            model, _ = _load_model_cfg(cfg, base)
            plan["models"] = lambda b, m=model: GibbsModel(m.basis, b, m.system)
            betas = cfg.get("betas", [model.beta])
        else:
            ic = cfg.get("ising_chain", {"n": 4})
            plan["models"] = lambda b, ic=ic: ex.ising_chain_model(int(ic.get("n", 4)), b, bool(ic.get("fields", True)))
            betas = cfg.get("betas", [1.0])
        if not isinstance(betas, list) or not betas:
            raise ConfigError("betas must be a non-empty list")
        plan["betas"] = [float(b) for b in betas]
        plan["grid_points"] = int(cfg.get("grid_points", 3))
        plan["max_points"] = int(cfg.get("max_points", 64))
        m0 = plan["models"](plan["betas"][0])
        if not m0.commuting_flag:
            raise ConfigError("bounds need a commuting basis")
    elif sub == "tc-check":
        plan["w1_mode"] = cfg.get("w1_mode", "hamming")
        if plan["w1_mode"] not in ("hamming", "loc"):
            raise ConfigError("w1_mode must be 'hamming' or 'loc'")
        sig = cfg.get("sigma", {"product": {"n": 4, "p": 0.8}})
        if "product" in sig:
            plan["product"] = {"n": int(sig["product"].get("n", 4)), "p": float(sig["product"].get("p", 0.8))}
        elif "two_local" in sig:
            tl = sig["two_local"]
            plan["two_local"] = {"n": int(tl.get("n", 6)), "beta_fraction": float(tl.get("beta_fraction", 0.5))}
        else:
            raise ConfigError("sigma must be {'product': ...} or {'two_local': ...}")
        ens = cfg.get("ensemble", {})
        plan["size"] = int(ens.get("size", 20))
        plan["strength"] = float(ens.get("strength", 0.3))
        plan["alpha"] = cfg.get("alpha")
        plan["sweeps"] = cfg.get("sweeps")
        plan["k"], plan["g"] = cfg.get("k"), cfg.get("g")
    elif sub == "shadows":
        plan["model"], plan["lambda"] = _load_model_cfg(cfg, base)
        if plan["lambda"] is None:
            raise ConfigError("shadows needs a model with known 'lambda'")
        if plan["model"].system.d != 2 or any(E.pauli is None for E in plan["model"].basis):
            raise ConfigError("shadows need a qubit model with a Pauli-string basis")
        plan["eps"] = float(cfg.get("eps", 0.1))
        plan["delta"] = cfg.get("delta")
        plan["N"] = cfg.get("N")
        plan["batches"] = cfg.get("batches")
        plan["workers"] = int(cfg.get("workers", 1))
    return plan


# ---------------------------------------------------------------------------
# subcommands


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ex.StageError:
        raise
    except Exception as exc:
        raise ex.StageError(name, f"{type(exc).__name__}: {exc}") from exc


def _result_json(result, extra=None):
    cert = result.certificate
    out = {
        "mu_star": result.mu_star,
        "halting": result.halting,
        "iterations": result.n_iters,
        "residual": result.residual,
        "U": result.U,
        "certificate": {
            "d_sym_bound": cert.d_sym_bound,
            "trace_dist_bound": cert.trace_dist_bound,
            "valid": cert.valid,
            "exact_d_sym": cert.exact_d_sym,
            "exact_trace_dist": cert.exact_trace_dist,
        },
    }
    out.update(extra or {})
    return out


def cmd_reconstruct(plan, out: Outputs, seed, threads, seeds_used):
    opts = plan["opts"]
    if plan["kind"] == "quantum":
        model, lam = plan["model"], plan["lambda"]
        e_hat, report, result, s = _stage("estimate+solve", ex.reconstruct_quantum, model, lam,
                                          plan["estimation"], opts, seed)
        seeds_used.update(s)
        if report is not None:
            report.to_csv(out.path("estimates.csv"))
        out.json("result.json", _result_json(result, {"e_hat": e_hat}))
    else:
        if "spec" in plan:
            spec = plan["spec"]
        else:
            r = plan["random"]
            seeds_used["couplings"] = ex.derive_seed(seed, "couplings")
            spec = ch.random_chain(r["n"], r["beta"], np.random.default_rng(seeds_used["couplings"]),
                                   r["boundary"], r["fields"])
        fields = bool(np.any(spec.h != 0)) or plan.get("random", {}).get("fields", False)
        family = ch.ChainFamily(spec.n, spec.beta, spec.boundary, fields)
        seeds_used["samples"] = ex.derive_seed(seed, "samples")
        configs = _stage("sample", ch.chain_sample, spec, plan["samples"], seeds_used["samples"]).configurations
        from .shadows import estimate_classical

        report = _stage("estimate", estimate_classical, configs, family.observables())
        report.to_csv(out.path("estimates.csv"))
        if plan["stderr_delta_mu"]:
            delta_mu = float(np.linalg.norm(report.stderr))
            opts = SolverOptions(**{**opts.__dict__, "delta_mu": delta_mu})
        lam = family.params(spec)
        rec, result = _stage("solve", ch.chain_maxent_reconstruct, report.estimates, spec.n, spec.beta, opts,
                             spec.boundary, fields, None, lam)
        out.json("true_chain.json", spec.to_dict())
        out.json("reconstructed_chain.json", rec.to_dict())
        out.json("result.json", _result_json(result, {"e_hat": report.estimates}))
    out.csv("trajectory.csv", ["iter", "f", "grad_norm", "d_sym_exact"], result.trajectory_rows())
    return 0


def cmd_verify(plan, out: Outputs, seed, threads, seeds_used):
    seeds_used["verify"] = ex.derive_seed(seed, "verify")
    items = _stage("verify", ex.verify_model, plan["model"], plan["lambda"], seed, plan["n_points"],
                   plan["fault_injection"])
    out.json("verify_report.json", {"items": items, "all_passed": all(i["passed"] for i in items)})
    return 0


FIG_COLUMNS = ["n", "seed", "samples", "d_sym_bound", "observable_error", "bound", "d_sym_exact",
               "pinsker_exact_bound", "tc_style_bound", "halting", "iterations", "circuit_seed", "error"]


def cmd_fig_pinsker(plan, out: Outputs, seed, threads, seeds_used):
    rows = ex.run_fig_pinsker(plan["n_values"], plan["seeds"], seed, threads=threads, **plan["kwargs"])
    seeds_used["fig-pinsker"] = "derive_seed(master, 'fig-pinsker/<stage>/n=<n>', seed_index)"
    out.csv("fig_pinsker.csv", FIG_COLUMNS, [[r.get(c) for c in FIG_COLUMNS] for r in rows])
    circuits = []
    for r in rows:
        if "circuit_seed" in r:
            circ = ch.brickwork_circuit(r["n"], plan["kwargs"]["depth"], r["circuit_seed"])
            layers = circ.to_dict()["layers"]
            circuits.append({"n": r["n"], "seed": r["seed"], "circuit_seed": r["circuit_seed"],
                             "layer_gates": [{"re": l[0]["re"], "im": l[0]["im"]} if l else None
                                             for l in layers]})
    out.json("circuits.json", {"shared_gate_per_layer": True, "circuits": circuits})
    return 0


def cmd_bounds(plan, out: Outputs, seed, threads, seeds_used):
    seeds_used["grid"] = ex.derive_seed(seed, "bounds/grid")
    rng = np.random.default_rng(seeds_used["grid"])
    reports = []
    for beta in plan["betas"]:
        model = plan["models"](beta)
        mus = ex.mu_grid(model.m, plan["grid_points"], plan["max_points"], rng)
        reports.append(_stage("bounds", ex.bounds_report, model, mus, None, seeds_used["grid"] % 2**32))
    summary = []
    for rep in reports:
        conds = [r["condition_number"] for r in rep["rows"]]
        summary.append({"beta": rep["beta"], "max_condition_number": max(conds),
                        "all_sandwich": all(r["sandwich_holds"] for r in rep["rows"])})
    fit = None
    if len(summary) >= 2:
        b = np.array([s["beta"] for s in summary])
        y = np.log([s["max_condition_number"] for s in summary])
        fit = {"exponent": float(np.polyfit(b, y, 1)[0])}
    out.json("bounds.json", {"reports": reports, "summary": summary, "condition_growth_fit": fit})
    return 0


def cmd_tc_check(plan, out: Outputs, seed, threads, seeds_used):
    seeds_used["ensemble"] = ex.derive_seed(seed, "tc/ensemble")
    rng = np.random.default_rng(seeds_used["ensemble"])
    if "product" in plan:
        n, p = plan["product"]["n"], plan["product"]["p"]
        system = SiteSystem(n)
        from .operators import product_state

        sigma = product_state([np.diag([p, 1 - p])] * n)
        ensemble = ex.perturbed_product_ensemble(n, p, plan["size"], plan["strength"], rng)
        alpha = float(plan["alpha"] if plan["alpha"] is not None else 0.5)
        k, g = plan["k"] or 1, plan["g"] or 1.0
        meta = {"sigma": f"tau_{p}^(x){n}"}
    else:
        n = plan["two_local"]["n"]
        k, g = plan["k"] or 2, plan["g"] or 1.0
        beta_c = tc_constant_local(k, g, 0.0)["beta_c"]
        beta = plan["two_local"]["beta_fraction"] * beta_c
        tc = tc_constant_local(k, g, beta)
        model = ex.two_local_model(n, beta)
        lam = np.full(model.m, 0.5)
        sigma = np.asarray(gibbs_state(model, lam))
        ensemble = ex.gibbs_ensemble(model, lam, plan["size"], plan["strength"], rng)
        system = model.system
        alpha = float(plan["alpha"]) if plan["alpha"] is not None else 1 / (2 * tc["tc_factor"]**2)
        meta = {"sigma": "two-local XX+ZZ chain", "beta": beta, **tc}
    report = _stage("tc", tc_verify, sigma, ensemble, system, alpha, plan["w1_mode"], k, g, plan["sweeps"])
    out.json("tc_report.json", {"alpha": alpha, "w1_mode": plan["w1_mode"], "k": k, "g": g, **meta,
                                "rows": list(report.rows), "n_violations": report.n_violations})
    return 0


def cmd_shadows(plan, out: Outputs, seed, threads, seeds_used):
    model, lam = plan["model"], plan["lambda"]
    delta = plan["delta"] or default_delta(model.system.n)
    k = max(E.locality for E in model.basis)
    N = int(plan["N"] or plan_samples(k, model.m, plan["eps"], delta))
    K = int(plan["batches"] or default_batches(model.m, delta))
    seeds_used["shadows"] = ex.derive_seed(seed, "shadows")
    batch = _stage("sample", sample, gibbs_state(model, lam), ShadowScheme(K, seeds_used["shadows"]), N,
                   n=model.system.n, workers=plan["workers"], state_id="sigma(lambda)")
    write_batch(out.path("shadow_batch.tsv"), batch)
    report = _stage("estimate", estimate, batch, model.basis, plan["eps"], delta)
    report.to_csv(out.path("estimates.csv"))
    exact = expectations(model, lam)
    out.json("shadow_summary.json", {"N": N, "batches": K, "eps": plan["eps"], "delta": delta,
                                     "max_abs_error": float(np.abs(report.estimates - exact).max())})
    return 0


COMMANDS = {"reconstruct": cmd_reconstruct, "verify": cmd_verify, "fig-pinsker": cmd_fig_pinsker,
            "bounds": cmd_bounds, "tc-check": cmd_tc_check, "shadows": cmd_shadows}


# ---------------------------------------------------------------------------
# entry point


def _read_config(path: Path):
    if not path.exists():
        raise ConfigError(f"config file {str(path)!r} does not exist")
    try:
        if path.suffix.lower() == ".toml":
            import tomli

            return tomli.loads(path.read_text())
        return json.loads(path.read_text())
    except ValueError as exc:
        raise ConfigError(f"cannot parse {str(path)!r}: {exc}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="gibbs-maxent", description=__doc__.split("\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON/TOML config, or a manifest.json to replay")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="master seed (overrides the config's 'seed')")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--tc-alpha", type=float, help="TC constant for tc-check")
    p.add_argument("--w1-mode", choices=("hamming", "loc"), help="W1 mode for tc-check")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config_path = Path(args.config)
    try:
        cfg = _read_config(config_path)
        base = config_path.parent
        if isinstance(cfg, dict) and "manifest_version" in cfg:
            if cfg.get("subcommand") != args.subcommand:
                raise ConfigError(f"manifest was written by {cfg.get('subcommand')!r}")
            base = Path(cfg.get("config_dir", base))
            seed = cfg["master_seed"] if args.seed is None else args.seed
            cfg = cfg["config"]
        else:
            seed = args.seed if args.seed is not None else (cfg.get("seed") if isinstance(cfg, dict) else None)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("a non-negative integer master seed is required (--seed or 'seed')")
        if args.tc_alpha is not None:
            cfg = {**cfg, "alpha": args.tc_alpha}
        if args.w1_mode is not None:
            cfg = {**cfg, "w1_mode": args.w1_mode}
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        plan = _validate(args.subcommand, cfg, base)
    except ConfigError as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return 2

    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    out = Outputs(root)
    seeds_used = {}
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    try:
        code = COMMANDS[args.subcommand](plan, out, seed, args.threads, seeds_used)
    except ex.StageError as exc:
        print(f"stage failure {exc}", file=sys.stderr)
        code = 3
    except Exception as exc:  # anything not tagged by a stage
        print(f"stage failure [{args.subcommand}] {type(exc).__name__}: {exc}", file=sys.stderr)
        code = 3
    canonical = json.dumps(_clean(cfg), sort_keys=True)
    manifest = {
        "manifest_version": 1,
        "tool_version": __version__,
        "subcommand": args.subcommand,
        "config": cfg,
        "config_dir": str(base.resolve()),
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "master_seed": seed,
        "seeds": seeds_used,
        "outputs": sorted(out.files),
        "started_utc": started,
        "finished_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "exit_code": code,
    }
    (root / "manifest.json").write_text(dumps(manifest))
    return code


if __name__ == "__main__":
    sys.exit(main())
