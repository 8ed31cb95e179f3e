"""Command line front end: ``banditmdp run|sweep|verify|inspect-env``."""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, checks, plotting
from . import config as cfgmod
from . import mdp as mdpcore
from .config import ConfigError, ExperimentConfig
from .envs import ENV_KINDS, EnvSpec, make_env
from .runner import horizon, run_doubling, run_main, save_trace

OUT_ENV_VAR = "BANDITMDP_OUT"
DEFAULT_OUT_ROOT = "banditmdp-out"


# -- helpers -------------------------------------------------------------------------


def resolve_config(args) -> ExperimentConfig:
    cfg = cfgmod.load(args.config) if args.config else ExperimentConfig()
    if args.env:
        cfg.env = EnvSpec(args.env, {})
    if getattr(args, "seed", None):
        cfg.run.seeds = cfgmod.parse_seeds(args.seed, "--seed")
    if getattr(args, "plot", False):
        cfg.output.plot = True
    if getattr(args, "only", None):
        cfg.verify.only = tuple(n for item in args.only for n in item.split(",") if n)
    return cfg


def output_dir(args, cfg: ExperimentConfig, command: str) -> Path:
    if args.out:
        path = Path(args.out)
    elif cfg.output.dir:
        path = Path(cfg.output.dir)
    else:
        path = Path(os.environ.get(OUT_ENV_VAR, DEFAULT_OUT_ROOT)) / command
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {path} is not writable: {exc}") from None
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
    return path


def header_lines(command: str, cfg: ExperimentConfig, digest: str) -> list:
    return [f"# banditmdp {command}", f"# config {cfg.to_json()}", f"# input-sha1 {digest}"]


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return repr(float(x))


def write_table(path, header, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header:
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_num(v) for v in row) + "\n")


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def simulate(cfg: ExperimentConfig, T: int, seed: int):
    """One Main run for ``cfg`` with ``T`` steps; returns the trace."""
    m = make_env(cfg.env)
    run = cfg.run
    base_meta = {"learner": cfg.learner.kind, "wrapper": cfg.learner.wrapper}
    if run.doubling:
        tr = run_doubling(m, T, lambda n, H: cfg.learner.factory(m.num_actions, m.gamma, n, H), seed,
                          initial_state=run.initial_state, raw_discount=run.raw_discount)
        tr.meta.update(base_meta)
        return tr
    H = horizon(m.gamma, T)
    factory, eta = cfg.learner.factory(m.num_actions, m.gamma, T, H)
    return run_main(m, T, factory, seed, H=H, initial_state=run.initial_state, snapshot_every=run.snapshot_every,
                    raw_discount=run.raw_discount, meta={**base_meta, "eta": eta})


def _run_job(cfg: ExperimentConfig, seed: int):
    tr = simulate(cfg, cfg.run.T, seed)
    if tr.snapshot_every != 1:
        return tr, None, None
    m = make_env(cfg.env)
    ta = analysis.TraceAnalysis(tr, m)
    return tr, analysis.run_series(ta), analysis.split_regret(ta) | {"c_hat": ta.c_hat}


def _sweep_job(cfg: ExperimentConfig, T: int, seed: int):
    tr = simulate(cfg, T, seed)
    m = make_env(cfg.env)
    ta = analysis.TraceAnalysis(tr, m)
    _, total = analysis.global_regret(ta)
    return T, seed, tr.meta["H"], tr.meta.get("eta"), total


# -- subcommands ------------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    out = output_dir(args, cfg, "run")
    m = make_env(cfg.env)
    digest = cfgmod.input_hash(cfg, mdpcore.dumps(m))
    header = header_lines("run", cfg, digest)
    seeds = list(cfg.run.seeds)
    results = _map(_run_job, [(cfg, s) for s in seeds], cfg.run.workers)
    S = m.num_states
    rows, summary = [], []
    for seed, (tr, series, split) in zip(seeds, results):
        tr.meta.update({"config": cfg.to_dict(), "input_sha1": digest})
        path = out / f"trace_seed{seed}.tsv"
        save_trace(tr, path)
        print(f"trace: {path}")
        if series is None:
            continue
        g = series["cumulative_global_regret"]
        loc = series["cumulative_local_regret"]
        for i in range(tr.T):
            rows.append([seed, i + 1, g[i], *loc[i], series["change_rate"][i], series["nu_mu_gap"][i]])
        H = tr.meta["H"] if isinstance(tr.meta["H"], int) else None
        eta = tr.meta.get("eta")
        summary.append([seed, tr.T, H, eta if not isinstance(eta, list) else None, g[-1], g[-1] / math.sqrt(tr.T),
                        split["c_hat"], split["fs"], split["ob"], split["un"], split["ob_tilde"], split["un_tilde"]])
    if rows:
        cols = ["seed", "t", "cumulative_global_regret", *[f"local_regret_s{s}" for s in range(S)], "change_rate",
                "nu_mu_gap"]
        write_table(out / "regret.csv", header, cols, rows)
        print(f"regret: {out / 'regret.csv'}")
        write_table(out / "summary.csv", header,
                    ["seed", "T", "H", "eta", "global_regret", "regret_per_sqrt_T", "change_rate_max", "full_span",
                     "observed", "unobserved", "observed_stationary", "unobserved_stationary"], summary)
        print(f"summary: {out / 'summary.csv'}")
    else:
        print("note: snapshot_every > 1, regret columns need every-step snapshots; wrote traces only")
    if cfg.output.plot and rows:
        cum = {seed: r[1]["cumulative_global_regret"] for seed, r in zip(seeds, results)}
        gaps = {seed: r[1]["nu_mu_gap"] for seed, r in zip(seeds, results)}
        rates = {seed: r[1]["change_rate"] for seed, r in zip(seeds, results)}
        for p in plotting.regret_plots(cum, out) + plotting.diagnostic_plots(gaps, rates, out):
            print(f"plot: {p}")
    return 0


def sweep_rows(results, T_values):
    by_T = {T: [r[4] for r in results if r[0] == T] for T in T_values}
    rows, prev = [], None
    for T in T_values:
        vals = np.array(by_T[T])
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        rows.append([T, int(vals.size), mean, se, None if prev is None else mean / prev, mean / math.sqrt(T)])
        prev = mean
    return rows


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    out = output_dir(args, cfg, "sweep")
    m = make_env(cfg.env)
    digest = cfgmod.input_hash(cfg, mdpcore.dumps(m))
    header = header_lines("sweep", cfg, digest)
    T_values = list(cfg.sweep.T)
    jobs = [(cfg, T, s) for T in T_values for s in cfg.run.seeds]
    results = _map(_sweep_job, jobs, cfg.run.workers)
    write_table(out / "sweep_runs.csv", header, ["T", "seed", "H", "eta", "global_regret"],
                [[T, s, H if isinstance(H, int) else None, e if not isinstance(e, list) else None, g]
                 for T, s, H, e, g in results])
    rows = sweep_rows(results, T_values)
    write_table(out / "sweep.csv", header,
                ["T", "seeds", "mean_regret", "se_regret", "ratio_to_previous", "regret_per_sqrt_T"], rows)
    for r in rows:
        ratio = "" if r[4] is None else f"  ratio {r[4]:.3f}"
        print(f"T={r[0]:>7}  regret {r[2]:.4g} +- {r[3]:.2g}{ratio}  regret/sqrt(T) {r[5]:.4g}")
    print(f"summary: {out / 'sweep.csv'}")
    if cfg.output.plot:
        plotting.sweep_plot(T_values, np.array([r[2] for r in rows]), out / "sweep.svg")
        print(f"plot: {out / 'sweep.svg'}")
    return 0


def cmd_verify(args) -> int:
    cfg = resolve_config(args)
    out = output_dir(args, cfg, "verify")
    m = make_env(cfg.env)
    digest = cfgmod.input_hash(cfg, mdpcore.dumps(m))
    report = checks.verify_suite(m, cfg.learner, cfg.verify, env_label=cfg.env.kind)
    path = out / "verify.tsv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(header_lines("verify", cfg, digest)) + "\n")
        fh.write(report.to_text())
    sys.stdout.write(report.summary_table())
    for c in report.warnings:
        print(f"warning: {c.name}: {c.verdict} ({c.note})", file=sys.stderr)
    for c in report.hard_failures:
        print(f"FAILED: {c.name}: lhs={c.lhs!r} rhs={c.rhs!r} ({c.note})", file=sys.stderr)
    print(f"report: {path}")
    return 0 if report.ok else 1


def cmd_inspect_env(args) -> int:
    cfg = resolve_config(args)
    m = make_env(cfg.env)
    print(f"env: {cfg.env.kind} {cfg.to_dict()['env']}")
    print(f"states: {m.num_states}")
    print(f"actions: {m.num_actions}")
    print(f"gamma: {m.gamma!r}")
    asm = checks.assess_assumptions(m)
    if np.isfinite(asm.beta):
        print(f"beta_hat: {asm.beta!r} ({asm.beta_note}; estimate, upper bound on the true floor)")
    else:
        print(f"WARNING: stationary floor assumption violated: {asm.beta_note}")
    if np.isfinite(asm.tau):
        print(f"tau_hat: {asm.tau!r}")
        print(f"worst_contraction_factor: {asm.factor!r} ({asm.mixing_note})")
    else:
        print(f"worst_contraction_factor: {asm.factor!r}")
        print(f"WARNING: one-step mixing assumption violated: {asm.mixing_note}")
    for T in (10**3, 10**4, 10**5):
        print(f"H(T={T}): {horizon(m.gamma, T)}")
    _, star = mdpcore.optimal_policy(m)
    print(f"optimal_value_range: {float(star.v.min())!r} .. {float(star.v.max())!r}")
    return 0


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="banditmdp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeds=True, plot=True):
        p.add_argument("--config", metavar="PATH", help="TOML experiment config")
        p.add_argument("--env", choices=ENV_KINDS, help="replace the config's environment by this kind with defaults")
        p.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV_VAR}/<command>)")
        if seeds:
            p.add_argument("--seed", metavar="N..M", help="seed or inclusive seed range")
        if plot:
            p.add_argument("--plot", action="store_true", help="also write SVG figures")

    p = sub.add_parser("run", help="simulate the per-state learners for each seed; write traces, regret CSV and summary")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="run each T of the sweep for every seed; write regret scaling table")
    common(p)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("verify", help="run the verification suite")
    common(p, seeds=False, plot=False)
    p.add_argument("--only", action="append", metavar="CHECK",
                   help=f"restrict to checks or groups (repeatable, comma separated): {', '.join(checks.CHECK_NAMES)}")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("inspect-env", help="print environment diagnostics")
    common(p, seeds=False, plot=False)
    p.set_defaults(func=cmd_inspect_env)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
