"""Command-line entry point: ``sacesim <subcommand> --config run.ini``.

Exit codes: 0 success, 2 configuration error, 3 numerical blow-up,
4 self-test failure.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import warnings

import numpy as np

from . import __version__, analysis, kernels, selftest
from .config import ExperimentConfig, check_divides, load_config, parse_config
from .errors import ConfigError, PreconditionError
from .noise import BoundaryRegularityWarning, RngStream
from .scheme import run_trajectory

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_SELFTEST = 0, 2, 3, 4

SUBCOMMANDS = ("simulate", "weak-error", "spatial-error", "moments", "ergodic", "invariant", "self-test")


def _num(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _json_value(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.bool_):
        return bool(x)
    return x


class Artifact:
    """A table plus scalar summary, rendered as CSV or JSON."""

    def __init__(self, kind, columns, rows, summary, cfg: ExperimentConfig):
        self.kind = kind
        self.columns = columns
        self.rows = rows
        self.summary = summary
        self.cfg = cfg

    def meta(self):
        return {
            "artifact": self.kind,
            "version": __version__,
            "seed": self.cfg.run.master_seed,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.meta().items():
            buf.write(f"# {k}={v}\n")
        buf.write("# config=" + json.dumps(self.cfg.echo, sort_keys=True) + "\n")
        for k, v in self.summary.items():
            buf.write(f"# {k}={_num(v) if not isinstance(v, str) else v}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_num(v) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        doc = dict(self.meta())
        doc["config"] = dict(sorted(self.cfg.echo.items()))
        doc.update({k: _json_value(v) for k, v in self.summary.items()})
        doc["rows"] = [
            {c: _json_value(v) for c, v in zip(self.columns, row)} for row in self.rows
        ]
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"

    def render(self, fmt):
        return self.to_json() if fmt == "json" else self.to_csv()


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg, threads):
    sc, run = cfg.scheme, cfg.run
    cols = ["sample", "step", "t", "functional"] + [f"c{k}" for k in range(1, sc.n_modes + 1)]
    rows, diverged = [], 0
    for i in range(run.M):
        rec = run_trajectory(sc, cfg.params, cfg.spectrum, cfg.u0, run.functional,
                             RngStream(run.master_seed, i), run.save_stride, keep_states=True)
        diverged += rec.diverged
        for t, phi, V in zip(rec.step_times[1:], rec.functionals[1:], rec.states[1:]):
            step = int(round(t / sc.tau))
            rows.append([i, step, t, phi] + list(V.coeffs))
    summary = {"backend": "single-field", "n_diverged": diverged}
    return Artifact("simulate", cols, rows, summary, cfg), diverged > 0


def _weak_artifact(kind, cfg, rep):
    cols = ["tau", "N", "mean", "stderr", "error_vs_ref", "error_stderr"]
    rows = [[r.tau, r.N, r.mean, r.stderr, r.error_vs_ref, r.error_stderr] for r in rep.rows]
    summary = {
        "ref_tau": rep.ref_tau, "ref_N": rep.ref_N, "ref_mean": rep.ref_mean,
        "ref_stderr": rep.ref_stderr, "fitted_rate_tau": rep.fitted_rate_tau,
        "fitted_rate_N": rep.fitted_rate_N,
        "rate_confidence_halfwidth": rep.rate_confidence_halfwidth,
        "rate_indeterminate": rep.indeterminate, "n_fit_points": rep.n_fit_points,
        "n_diverged": rep.n_diverged, "beta_at_boundary": rep.beta_at_boundary,
    }
    return Artifact(kind, cols, rows, summary, cfg), rep.n_diverged > 0


def cmd_weak_error(cfg, threads):
    sc, run = cfg.scheme, cfg.run
    for tau in run.tau_list:
        check_divides(tau, run.tau_ref, "run.tau_ref must divide every tau in run.tau_list")
        check_divides(sc.horizon, tau, "scheme horizon K*tau must be a multiple of every tau")
    rep = analysis.weak_error_sweep(
        run.tau_list, sc.n_modes, run.tau_ref, cfg.params, cfg.spectrum, cfg.u0,
        run.functional, run.M, run.master_seed, sc.horizon, sc.variant, threads,
    )
    return _weak_artifact("weak-error", cfg, rep)


def cmd_spatial_error(cfg, threads):
    sc, run = cfg.scheme, cfg.run
    if run.n_ref < 4 * max(run.n_list):
        raise ConfigError("run.n_ref must be at least 4 * max(run.n_list)")
    rep = analysis.spatial_error_sweep(
        run.n_list, sc.tau, run.n_ref, cfg.params, cfg.spectrum, cfg.u0,
        run.functional, run.M, run.master_seed, sc.horizon, sc.variant, threads,
    )
    return _weak_artifact("spatial-error", cfg, rep)


def cmd_moments(cfg, threads):
    run = cfg.run
    curve = analysis.moment_curve(cfg.scheme, cfg.params, cfg.spectrum, cfg.u0, tuple(run.p),
                                  run.M, run.master_seed, run.save_stride, threads)
    cols = ["t"]
    for p in run.p:
        cols += [f"moment_p{p}", f"stderr_p{p}"]
    rows = []
    for i, t in enumerate(curve.times):
        row = [t]
        for p in run.p:
            row += [curve.estimates[p][i], curve.standard_errors[p][i]]
        rows.append(row)
    summary = {f"flatness_p{p}": curve.flatness[p] for p in run.p}
    summary["n_diverged"] = curve.n_diverged
    return Artifact("moments", cols, rows, summary, cfg), curve.n_diverged > 0


def cmd_ergodic(cfg, threads):
    run = cfg.run
    fit = analysis.ergodic_decay(cfg.params, cfg.spectrum, cfg.scheme, cfg.u0, cfg.u0_b,
                                 run.functional, run.M, run.master_seed, threads)
    cols = ["t", "gap", "gap_stderr"]
    rows = [[t, g, s] for t, g, s in zip(fit.times, fit.gaps, fit.gap_stderr)]
    summary = {"rate": fit.rate, "rate_halfwidth": fit.halfwidth, "floor": fit.floor,
               "rate_indeterminate": fit.indeterminate,
               "window_start": fit.window[0], "window_stop": fit.window[1]}
    return Artifact("ergodic", cols, rows, summary, cfg), False


def cmd_invariant(cfg, threads):
    run = cfg.run
    est = analysis.invariant_measure_estimate(cfg.scheme, cfg.params, cfg.spectrum, run.functional,
                                              run.burn_in, run.M, run.master_seed, cfg.u0, threads)
    cols = ["time_average", "time_stderr", "ensemble_average", "ensemble_stderr", "gap", "gap_stderr"]
    rows = [[est.time_average, est.time_stderr, est.ensemble_average, est.ensemble_stderr,
             est.gap, est.gap_stderr]]
    summary = {"burn_in_steps": est.burn_in_steps, "burn_in_short": est.burn_in_short}
    return Artifact("invariant", cols, rows, summary, cfg), False


COMMANDS = {
    "simulate": cmd_simulate,
    "weak-error": cmd_weak_error,
    "spatial-error": cmd_spatial_error,
    "moments": cmd_moments,
    "ergodic": cmd_ergodic,
    "invariant": cmd_invariant,
}


def run_self_test(out=None) -> int:
    out = out or sys.stdout
    results, elapsed = selftest.run_all()
    for r in results:
        print(r.line(), file=out)
    ok = all(r.passed for r in results)
    print(f"{'PASS' if ok else 'FAIL'}  self-test ({len(results)} checks, {elapsed:.2f} s, "
          f"kernel={kernels.BACKEND})", file=out)
    return EXIT_OK if ok else EXIT_SELFTEST


def dispatch(subcommand, cfg=None, threads=1, out=None, fmt=None):
    """Run ``subcommand``; returns (exit status, rendered artifact text or None)."""
    if subcommand == "self-test":
        return run_self_test(), None
    if subcommand not in COMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    fmt = fmt or cfg.run.format
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoundaryRegularityWarning)
            artifact, blew_up = COMMANDS[subcommand](cfg, threads)
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from exc
    text = artifact.render(fmt)
    path = out or cfg.run.output
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return (EXIT_BLOWUP if blew_up else EXIT_OK), text


def build_parser():
    ap = argparse.ArgumentParser(prog="sacesim", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="experiment config (INI sections model/noise/scheme/initial/run)")
    ap.add_argument("--seed", type=int, help="override run.master_seed (u64)")
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads")
    ap.add_argument("--out", help="output path (default: run.output, else stdout)")
    ap.add_argument("--format", choices=("csv", "json"), help="override run.format")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.subcommand == "self-test":
        return run_self_test()
    try:
        cfg = load_config(args.config) if args.config else parse_config("")
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.with_seed(args.seed)
        status, text = dispatch(args.subcommand, cfg, max(1, args.threads), args.out, args.format)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not (args.out or cfg.run.output):
        sys.stdout.write(text)
    if status == EXIT_BLOWUP:
        print("numerical blow-up detected (see n_diverged)", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
