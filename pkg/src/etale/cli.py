"""Command-line interface.

Every subcommand loads a model JSON, runs one analysis, and emits a
report: ``{tool_version, model_digest, operation, parameters, results,
verdict}``.  With ``--out DIR`` the report goes to ``DIR/report.json``
and tabular data to ``DIR/tables/*.csv``; otherwise the report is
printed.  Output is byte-reproducible for a fixed seed.

Exit codes: 0 all checked properties passed, 1 a property failed,
2 usage, model, or budget errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import (CcFunction, delta as delta_fn, function_from_json,
                      length_weighted, load_function, sphere_indicator)
from .errors import (BudgetError, GrowthHypothesisError, KernelDomainError,
                     KernelPositivityError, ModelError, PreconditionError)
from .exotic import (certificate, extension_criteria, threshold_band,
                     witness_ratio)
from .kernels import (gns_build, gns_isometry_defect, haagerup_witness_check,
                      kernel_from_json, psd_check)
from .metric import (band_check, growth_stats, hyperbolicity_delta,
                     overlap_constant)
from .model import FreeGroup, GroupoidElement, GroupoidModel, MeasureContext, load_model
from .spectral import power_sequence_norm, reduced_norm, reduced_norm_at_unit, verify_norm_bound

USAGE_ERRORS = (ModelError, BudgetError, GrowthHypothesisError, PreconditionError,
                KernelDomainError, KernelPositivityError, ValueError, KeyError,
                OSError, json.JSONDecodeError)


def _load_config(args) -> dict:
    if args.config is None:
        return {}
    with open(args.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ModelError("config must be a JSON object")
    return cfg


def _take(cfg: dict, defaults: dict) -> dict:
    unknown = set(cfg) - set(defaults)
    if unknown:
        raise ModelError(f"unknown config keys: {sorted(unknown)}")
    out = dict(defaults)
    out.update(cfg)
    missing = [k for k, v in out.items() if v is _REQUIRED]
    if missing:
        raise ModelError(f"missing required config keys: {missing}")
    return out


_REQUIRED = object()


def _resolve_function(model: GroupoidModel, spec, budget) -> CcFunction:
    """Function inputs: {"sphere": k}, {"sphere_weighted": {"alpha", "k"}},
    {"delta": {"unit", "word"}}, {"file": path}, or an inline entry list."""
    if isinstance(spec, list):
        return function_from_json(model, spec)
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ModelError("function spec must be a one-key object or an entry list")
    kind, val = next(iter(spec.items()))
    if kind == "sphere":
        return sphere_indicator(model, int(val), budget=budget)
    if kind == "sphere_weighted":
        return length_weighted(model, float(val["alpha"]), int(val["k"]), budget=budget)
    if kind == "delta":
        g = GroupoidElement(int(val.get("unit", 0)),
                            model.backend.word_from_json(val["word"]))
        return delta_fn(model, g, complex(val.get("re", 1.0), val.get("im", 0.0)))
    if kind == "file":
        return load_function(model, val)
    raise ModelError(f"unknown function spec {kind!r}")


def _random_fiber_tuple(model: GroupoidModel, rng, max_size: int, max_len: int):
    u = int(rng.integers(model.units))
    pool = model.ball(u, max_len)
    size = int(rng.integers(1, max_size + 1))
    size = min(size, len(pool))
    idx = rng.choice(len(pool), size=size, replace=False)
    return [pool[i] for i in sorted(idx)]


# -- handlers ---------------------------------------------------------------
# each returns (results, verdict, passed, tables)

def _run_growth(model, mu, cfg, rng, budget):
    opts = _take(cfg, {"K": 8, "k_min": 1})
    rep = growth_stats(model, int(opts["K"]), k_min=int(opts["k_min"]))
    ok = rep.certified_upper and rep.certified_lower
    verdict = "pass" if ok else "fail"
    if rep.subexponential:
        verdict += " (subexponential: growth hypothesis unmet)"
    return rep.to_dict(), verdict, ok, {"growth": rep.csv_rows()}, opts


def _run_delta(model, mu, cfg, rng, budget):
    opts = _take(cfg, {"radius": 3, "units": [0], "quad_budget": 100_000_000})
    units = list(range(model.units)) if opts["units"] == "all" else [int(u) for u in opts["units"]]
    rows = [("unit", "radius", "delta", "n_points", "quadruples")]
    reports = []
    for u in units:
        est = hyperbolicity_delta(model, u, int(opts["radius"]),
                                  quad_budget=int(opts["quad_budget"]))
        reports.append(est.to_dict())
        rows.append((u, est.radius, est.delta, est.n_points, est.quadruples))
    top = max(r["delta"] for r in reports)
    results = {"per_unit": reports, "delta": top,
               "overlap_constant": overlap_constant(model, top)}
    return results, "pass", True, {"delta": rows}, opts


def _run_pdcheck(model, mu, cfg, rng, budget):
    opts = _take(cfg, {"kernel": {"exp_length": 0.5}, "mode": {"ball": {"unit": 0, "k": 2}},
                       "tol": 1e-9})
    kern = kernel_from_json(model, opts["kernel"])
    mode = opts["mode"]
    tuples = []
    if "ball" in mode:
        tuples.append(model.ball(int(mode["ball"].get("unit", 0)),
                                 int(mode["ball"]["k"]), budget=budget))
    elif "random" in mode:
        r = mode["random"]
        for _ in range(int(r.get("count", 100))):
            tuples.append(_random_fiber_tuple(model, rng,
                                              int(r.get("max_size", 10)),
                                              int(r.get("max_len", 4))))
    else:
        raise ModelError("pdcheck mode must be 'ball' or 'random'")
    rows = [("tuple", "size", "min_eig", "passed")]
    results = []
    ok = True
    for i, t in enumerate(tuples):
        res = psd_check(model, kern, t, tol=float(opts["tol"]))
        results.append(res.to_dict())
        rows.append((i, res.size, res.min_eig, res.passed))
        ok = ok and res.passed
    return ({"checks": results, "all_passed": ok}, "pass" if ok else "fail",
            ok, {"pdcheck": rows}, opts)


def _run_gns(model, mu, cfg, rng, budget):
    opts = _take(cfg, {"kernel": {"exp_length": 0.5}, "unit": 0, "k": 1,
                       "null_tol": 1e-10, "isometry_tol": 1e-10})
    kern = kernel_from_json(model, opts["kernel"])
    u, k = int(opts["unit"]), int(opts["k"])
    data = gns_build(model, kern, u, k, null_tol=float(opts["null_tol"]), budget=budget)
    defects = []
    for w in model.backend.sphere_words(1):
        x = GroupoidElement(u, w)
        defects.append(gns_isometry_defect(model, kern, x, k, budget=budget))
    worst = max(defects, default=0.0)
    ok = worst <= float(opts["isometry_tol"])
    results = {"unit": u, "k": k, "dim": data.dim, "null_dim": data.null_dim,
               "quotient_dim": data.quotient_dim,
               "min_eig": float(data.eigenvalues[0]) if data.dim else 0.0,
               "max_isometry_defect": worst}
    return results, "pass" if ok else "fail", ok, {}, opts


def _run_haagerup(model, mu, cfg, rng, budget):
    opts = _take(cfg, {"n_list": [2, 3, 4], "k_list": [1, 2, 4, 8],
                       "eps_list": [0.1, 0.01]})
    rep = haagerup_witness_check(model, opts["n_list"], opts["k_list"], opts["eps_list"])
    rows = [("n", "k", "sup_dev", "expected", "ok")]
    for r in rep.deviation_rows:
        rows.append((r["n"], r["k"], r["sup_dev"], r["expected"], r["ok"]))
    return rep.to_dict(), "pass" if rep.passed else "fail", rep.passed, {"haagerup": rows}, opts


def _run_bandcheck(model, mu, cfg, rng, budget):
    opts = _take(cfg, {"k": 2, "n": 1, "unit": 0, "delta_radius": 3,
                       "support_cap": 200, "tol": 1e-9})
    k, n, u = int(opts["k"]), int(opts["n"]), int(opts["unit"])
    est = hyperbolicity_delta(model, 0, int(opts["delta_radius"]))
    C = overlap_constant(model, est.delta)

    def random_sphere_function(kk, bound_one):
        full = []
        for uu in range(model.units):
            full.extend(model.sphere(uu, kk, budget=budget))
        cap = int(opts["support_cap"])
        if len(full) > cap:
            idx = sorted(rng.choice(len(full), size=cap, replace=False).tolist())
            full = [full[i] for i in idx]
        vals = rng.uniform(-1, 1, size=len(full)) + 1j * rng.uniform(-1, 1, size=len(full))
        if bound_one:
            peak = max(np.abs(vals)) if len(vals) else 1.0
            vals = vals / max(1.0, peak)
        return CcFunction(model, dict(zip(full, vals)))

    f = random_sphere_function(k, bound_one=False)
    g = random_sphere_function(n, bound_one=True)
    rep = band_check(f, g, k, n, u, C, tol=float(opts["tol"]))
    rows = [("m", "l1_mass", "bound", "ok")] + [list(r) for r in rep.rows]
    results = rep.to_dict()
    results["delta"] = est.delta
    return results, "pass" if rep.passed else "fail", rep.passed, {"bandcheck": rows}, opts


def _run_norm(model, mu, cfg, rng, budget):
    opts = _take(cfg, {"function": {"sphere": 1}, "L": 8, "unit": None,
                       "max_iter": 2000, "tol": 1e-10, "ladder": None})
    f = _resolve_function(model, opts["function"], budget)
    kwargs = dict(max_iter=int(opts["max_iter"]), tol=float(opts["tol"]),
                  ladder=opts["ladder"], budget=budget)
    if opts["unit"] is None:
        est = reduced_norm(f, int(opts["L"]), **kwargs)
    else:
        est = reduced_norm_at_unit(f, int(opts["unit"]), int(opts["L"]), **kwargs)
    ok = est.monotone
    return est.to_dict(), "pass" if ok else "fail", ok, {"norm_trace": est.csv_rows()}, opts


def _run_powerseq(model, mu, cfg, rng, budget):
    opts = _take(cfg, {"function": {"sphere": 1}, "n_max": 3, "conv_budget": 10_000_000})
    f = _resolve_function(model, opts["function"], budget)
    seq = power_sequence_norm(f, int(opts["n_max"]), mu, budget=int(opts["conv_budget"]))
    return seq.to_dict(), "pass", True, {"powerseq": seq.csv_rows()}, opts


def _run_normbound(model, mu, cfg, rng, budget):
    opts = _take(cfg, {"alpha": 0.5, "k": 1, "p": 2, "L": 6, "delta_radius": 3,
                       "max_iter": 2000, "tol": 1e-10})
    est = hyperbolicity_delta(model, 0, int(opts["delta_radius"]))
    C = overlap_constant(model, est.delta)
    rep = verify_norm_bound(model, mu, float(opts["alpha"]), int(opts["k"]),
                            float(opts["p"]), C, L=int(opts["L"]),
                            max_iter=int(opts["max_iter"]), tol=float(opts["tol"]),
                            budget=budget)
    results = rep.to_dict()
    results["delta"] = est.delta
    return results, "pass" if rep.passed else "fail", rep.passed, {}, opts


def _run_extend(model, mu, cfg, rng, budget):
    opts = _take(cfg, {"alpha": _REQUIRED, "p": _REQUIRED, "K": None,
                       "beta_grid": [0.9, 0.99, 0.999]})
    rep = extension_criteria(model, mu, float(opts["alpha"]), float(opts["p"]),
                             K=opts["K"] if opts["K"] is None else int(opts["K"]),
                             beta_grid=[float(b) for b in opts["beta_grid"]])
    rows = [("k", "cond2_ratio", "cond3_partial")]
    for (k, r2), (_, r3) in zip(rep.cond2_trace, rep.cond3_partials):
        rows.append((k, r2, r3))
    return rep.to_dict(), rep.verdict, True, {"extension_trace": rows}, opts


def _run_band(model, mu, cfg, rng, budget):
    opts = _take(cfg, {"q": _REQUIRED, "p": _REQUIRED, "K": 8, "k_min": 1})
    growth = growth_stats(model, int(opts["K"]), k_min=int(opts["k_min"]))
    band = threshold_band(growth, float(opts["q"]), float(opts["p"]))
    return band.to_dict(), "pass", True, {}, opts


def _run_certify(model, mu, cfg, rng, budget):
    opts = _take(cfg, {"q": _REQUIRED, "p": _REQUIRED, "alpha": None, "K": None,
                       "growth_K": 8, "delta_radius": 3, "witness_cap": 400})
    growth = growth_stats(model, int(opts["growth_K"]))
    cert = certificate(model, mu, growth, float(opts["q"]), float(opts["p"]),
                       alpha=None if opts["alpha"] is None else float(opts["alpha"]),
                       K=None if opts["K"] is None else int(opts["K"]),
                       delta_radius=int(opts["delta_radius"]),
                       witness_cap=int(opts["witness_cap"]))
    rows = [("k", "witness_ratio")] + [list(r) for r in cert.witness_rows]
    ok = cert.verdict == "Certified"
    return cert.to_dict(), cert.verdict, ok, {"witness": rows}, opts


HANDLERS = {
    "growth": _run_growth,
    "delta": _run_delta,
    "pdcheck": _run_pdcheck,
    "gns": _run_gns,
    "haagerup": _run_haagerup,
    "bandcheck": _run_bandcheck,
    "norm": _run_norm,
    "powerseq": _run_powerseq,
    "normbound": _run_normbound,
    "extend": _run_extend,
    "band": _run_band,
    "certify": _run_certify,
}


def _plain(obj):
    """Coerce stray numpy scalars/arrays so reports stay JSON-clean."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _write_report(report: dict, tables: dict, out_dir) -> None:
    report = _plain(report)
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out_dir is None:
        sys.stdout.write(text)
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(text)
    if tables:
        tdir = out / "tables"
        tdir.mkdir(exist_ok=True)
        for name, rows in tables.items():
            with open(tdir / f"{name}.csv", "w", newline="\n") as fh:
                csv.writer(fh, lineterminator="\n").writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="etale",
        description="finite-truncation analysis of groupoid convolution algebras")
    sub = parser.add_subparsers(dest="operation", required=True)
    for name in HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("--model", required=True, help="model JSON file")
        p.add_argument("--config", help="JSON file with operation parameters")
        p.add_argument("--out", help="output directory for report.json and tables/")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--budget", type=int, default=None,
                       help="enumeration budget (elements per ball)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        model = load_model(args.model)
        mu = MeasureContext.uniform(model)
        cfg = _load_config(args)
        rng = np.random.default_rng(args.seed)
        results, verdict, passed, tables, opts = HANDLERS[args.operation](
            model, mu, cfg, rng, args.budget)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parameters = dict(opts)
    parameters["seed"] = args.seed
    parameters["budget"] = args.budget
    report = {
        "tool_version": __version__,
        "model_digest": model.digest(),
        "operation": args.operation,
        "parameters": parameters,
        "results": results,
        "verdict": verdict,
    }
    _write_report(report, tables, args.out)
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
