"""`hot-tuner` command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 numeric divergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, lyapunov, verify
from .config import ConfigError, load_config
from .tuner import NonFiniteError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NONFINITE = 3


def _thread_count():
    env = os.environ.get("HOT_TUNER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _fmt(x):
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, sort_keys=True, indent=2, allow_nan=True)
        fh.write("\n")


def _constants_payload(cfg, consts):
    payload = {
        "c1": consts.c1, "c2": consts.c2, "c3": consts.c3,
        "c4": consts.c4, "c5": consts.c5, "c_hat": consts.c_hat,
        "K": None if consts.degenerate else consts.K,
        "T": None if consts.degenerate else consts.T,
        "degenerate": consts.degenerate,
        "c2_variant": consts.c2_variant,
        "gamma_max": lyapunov.gamma_max(cfg.gains.beta, cfg.gains.mu)
        if 0 < cfg.gains.mu < 1 else None,
    }
    if not consts.degenerate:
        alpha = cfg.effective_alpha(consts)
        payload["alpha"] = alpha
        payload["theorem4_radius"] = lyapunov.theorem4_radius(alpha, consts)
    return payload


def _write_trace_csv(path, trace):
    n = trace.theta.shape[1]
    header = (["k"] + [f"theta_{i}" for i in range(n)]
              + [f"vartheta_{i}" for i in range(n)]
              + ["V", "Vhat", "e_y", "eta", "phi_norm"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(trace.k.size):
            row = ([str(int(trace.k[i]))]
                   + [_fmt(float(v)) for v in trace.theta[i]]
                   + [_fmt(float(v)) for v in trace.vartheta[i]]
                   + [_fmt(float(trace.V[i])), _fmt(float(trace.Vhat[i])),
                      _fmt(float(trace.e_y[i])), _fmt(float(trace.eta[i])),
                      _fmt(float(trace.phi_norm[i]))])
            w.writerow(row)


def cmd_simulate(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.base_seed = args.seed
    trials = args.trials if args.trials is not None else cfg.ensemble
    if trials < 1:
        raise ConfigError("trials", "must be >= 1")
    os.makedirs(args.out, exist_ok=True)
    consts = cfg.constants()

    def one(t):
        trace = verify.run_trajectory(cfg, cfg.trial_seed(t))
        _write_trace_csv(os.path.join(args.out, f"trace_{t}.csv"), trace)
        return trace

    with ThreadPoolExecutor(max_workers=min(_thread_count(), trials)) as pool:
        traces = list(pool.map(one, range(trials)))

    summary = {
        "version": __version__,
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": cfg.raw,
        "base_seed": cfg.base_seed,
        "trials": trials,
        "constants": _constants_payload(cfg, consts),
        "sup_V_per_trial": [float(np.max(t.V)) for t in traces],
        "terminal_error_per_trial": [
            float(np.linalg.norm(t.theta[-1] - cfg.true_model.theta_star))
            for t in traces],
    }
    _write_json(os.path.join(args.out, "summary.json"), summary)

    if args.emit_plot_data:
        alpha = cfg.effective_alpha(consts)
        K4 = lyapunov.theorem4_radius(alpha, consts)
        V = np.stack([t.V for t in traces])
        vhat = lyapunov.clipped_V(V, K4)
        mean = np.mean(vhat, axis=0)
        env = (1.0 - alpha) ** np.arange(mean.size) * float(np.max(vhat[:, 0]))
        step = max(1, mean.size // 1000)
        with open(os.path.join(args.out, "plotdata.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "mean_Vhat", "envelope"])
            for i in range(0, mean.size, step):
                w.writerow([str(i), _fmt(float(mean[i])), _fmt(float(env[i]))])
    return EXIT_OK


def _decrement_payload(report):
    return {
        "z": report.z,
        "resamples": report.resamples,
        "passed": report.all_pass,
        "probes": [{
            "label": p.label, "noise_kind": p.noise_kind, "V_k": p.V_k,
            "mean_V_next": p.mean_V_next, "stderr": p.stderr, "bound": p.bound,
            "passed": p.passed, "strictly_decreasing": p.strictly_decreasing,
        } for p in report.probes],
    }


def cmd_verify(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.base_seed = args.seed
    os.makedirs(args.out, exist_ok=True)
    consts = cfg.constants()
    if consts.degenerate and args.check in ("bound", "rate", "all"):
        raise ConfigError("gains", "degenerate constants (mu*gamma*beta = 0)")

    results = {}
    all_ok = True

    if args.check in ("decrement", "all"):
        report = verify.decrement_report(cfg, consts)
        results["decrement"] = _decrement_payload(report)
        all_ok = all_ok and report.all_pass

    if args.check in ("bound", "rate", "all"):
        ens = verify.run_ensemble(cfg)
        if args.check in ("bound", "all"):
            summary = verify.boundedness_check(ens, consts)
            results["bound"] = {
                "passed": summary.passed,
                "max_sup_V": summary.max_sup,
                "threshold": summary.threshold,
                "margin": summary.margin,
                "frac_steps_above_T": summary.frac_steps_above_T,
                "all_reenter": summary.all_reenter,
                "note": "finite-horizon proxy for an almost-sure statement",
            }
            all_ok = all_ok and summary.passed
        if args.check in ("rate", "all"):
            alpha = cfg.effective_alpha(consts)
            try:
                report = verify.rate_check(ens, alpha, consts)
            except lyapunov.InvalidAlphaError as exc:
                raise ConfigError("alpha", str(exc)) from exc
            results["rate"] = {
                "passed": report.passed,
                "alpha": report.alpha,
                "clip_radius": report.clip_radius,
                "z": report.z,
                "failing_steps": [int(i) for i in
                                  np.flatnonzero(~report.pass_per_step)[:20]],
            }
            all_ok = all_ok and report.passed

    payload = {
        "version": __version__,
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": cfg.raw,
        "base_seed": cfg.base_seed,
        "constants": _constants_payload(cfg, consts),
        "checks": results,
        "passed": all_ok,
    }
    _write_json(os.path.join(args.out, f"verify_{args.check}.json"), payload)
    for name, res in results.items():
        print(f"{name}: {'PASS' if res['passed'] else 'FAIL'}")
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def cmd_constants(args):
    cfg = load_config(args.config)
    consts = cfg.constants()
    payload = _constants_payload(cfg, consts)
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "constants.json"), payload)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hot-tuner",
        description="Noise-robust high-order tuner: simulation and stability checks")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run trajectories and write CSV traces")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--emit-plot-data", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the stochastic stability checks")
    p.add_argument("config")
    p.add_argument("--check", choices=["decrement", "bound", "rate", "all"],
                   default="all")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("constants", help="print the decrement-bound constants")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_constants)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE


if __name__ == "__main__":
    sys.exit(main())
