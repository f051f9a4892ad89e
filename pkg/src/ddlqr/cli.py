"""Command-line front end: every pipeline as a subcommand over a flat
key-value config file.

Exit codes: 0 success, 2 malformed config or bad arguments, 3 numerical
failure (with the failing stage named), 4 infeasible synthesis program.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import acceptance, bench, plots
from .config import ConfigError, RunConfig, parse_config
from .data import derive, generate_dataset, least_squares_id, load_dataset, save_dataset
from .design import Method, certificates, solution_to_dict, stability_test, synthesize
from .errors import DdlqrError, Infeasible, InvalidInput, NotIdentifiable
from .system import NoiseSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddlqr",
        description="Data-driven LQR synthesis, certificates, and Monte-Carlo sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="run configuration file")
        p.add_argument("--out", type=Path, help="output directory (default from config)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        return p

    common(sub.add_parser("simulate", help="generate a dataset and write CSV + sidecar"))
    p = common(sub.add_parser("identify", help="least-squares identification report"))
    p.add_argument("--data", type=Path, help="dataset CSV (generated from config when omitted)")
    p = common(sub.add_parser("synthesize", help="run one synthesis method, write solution JSON"))
    p.add_argument("--data", type=Path)
    p = common(sub.add_parser("certify", help="certificates and noise-bound stability test"))
    p.add_argument("--data", type=Path)
    p.add_argument("--delta", type=float, help="noise magnitude bound (default ||D0||_2)")
    p.add_argument("--eta1", type=float, help="performance relaxation factor")
    common(sub.add_parser("sweep-lambda", help="regularization coefficient sweep"))
    common(sub.add_parser("sweep-noise", help="noise sweep across regularization regimes"))
    p = common(sub.add_parser("verify", help="run the acceptance suite, print a pass/fail table"))
    p.add_argument("--quick", action="store_true", help="fast subset of the suite")
    p.add_argument("--trials", type=int, help="override trial count (full suite uses 100)")
    p.add_argument("--datasets", type=int, help="override dataset count (full suite uses 50)")
    return parser


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = int(args.seed)
    if args.out is not None:
        cfg.out = str(args.out)
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dataset_from(cfg: RunConfig, args):
    if getattr(args, "data", None):
        return load_dataset(args.data)
    sys_ = cfg.resolve_system()
    return generate_dataset(
        sys_,
        cfg.T,
        NoiseSpec("gaussian_iid", cfg.input_scale, cfg.seed),
        NoiseSpec("gaussian_iid", cfg.sigma, cfg.seed) if cfg.sigma > 0 else NoiseSpec("zero", 0.0, cfg.seed),
        x0=cfg.x0,
    )


def _method_from(cfg: RunConfig) -> Method:
    return Method(cfg.method, lam=cfg.lam, rho=cfg.rho, norm_kind=cfg.norm)


def _named_methods(cfg: RunConfig):
    named = dict(bench.table2_methods(ce_lam=cfg.ce_lambda, mixed_lam=cfg.mixed_lambda, rho=cfg.table_rho))
    out = []
    for name in cfg.methods:
        if name in named:
            out.append((name, named[name]))
        else:
            out.append((name, Method(name, lam=cfg.lam, rho=cfg.rho, norm_kind=cfg.norm)))
    return out


# ---------------------------------------------------------------------------


def _cmd_simulate(cfg: RunConfig, args) -> int:
    ds = _dataset_from(cfg, args)
    out = _out_dir(cfg)
    meta = {
        "seed": cfg.seed,
        "input": NoiseSpec("gaussian_iid", cfg.input_scale, cfg.seed),
        "noise": NoiseSpec("gaussian_iid", cfg.sigma, cfg.seed) if cfg.sigma > 0 else NoiseSpec("zero", 0.0, cfg.seed),
    }
    ds = type(ds)(U0=ds.U0, X0=ds.X0, X1=ds.X1, D0=ds.D0, meta=meta)
    path = out / "dataset.csv"
    save_dataset(ds, path)
    print(f"wrote {path} and {path}.json (T={ds.T}, n={ds.n}, m={ds.m})")
    return EXIT_OK


def _cmd_identify(cfg: RunConfig, args) -> int:
    ds = _dataset_from(cfg, args)
    dd = derive(ds)
    print(f"identifiable: {dd.identifiable} (rank condition on W0)")
    if dd.snr is not None:
        print(f"snr: {dd.snr!r} ({dd.snr_db!r} dB)")
    if not dd.identifiable:
        print("not identifiable (rank W0 < n+m)", file=sys.stderr)
        return EXIT_NUMERICAL
    identified = least_squares_id(ds, dd)
    np.set_printoptions(precision=6, suppress=True)
    print("A_hat:")
    print(identified.A)
    print("B_hat:")
    print(identified.B)
    return EXIT_OK


def _cmd_synthesize(cfg: RunConfig, args) -> int:
    ds = _dataset_from(cfg, args)
    sys_ = cfg.resolve_system()
    w = cfg.resolve_weights(sys_)
    method = _method_from(cfg)
    sol = synthesize(ds, w, method)
    out = _out_dir(cfg)
    path = out / "solution.json"
    certs = None
    if sol.optimal and ds.D0 is not None:
        certs = certificates(sol, ds)
    path.write_text(json.dumps(solution_to_dict(sol, certs), indent=2) + "\n")
    print(f"wrote {path} (status: {sol.status}, objective: {sol.objective!r})")
    if not sol.optimal:
        print(f"synthesis did not reach optimality: {sol.failure_reason}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_certify(cfg: RunConfig, args) -> int:
    ds = _dataset_from(cfg, args)
    sys_ = cfg.resolve_system()
    w = cfg.resolve_weights(sys_)
    sol = synthesize(ds, w, _method_from(cfg))
    if not sol.optimal:
        print(f"synthesis did not reach optimality: {sol.failure_reason}", file=sys.stderr)
        return EXIT_NUMERICAL
    eta1 = args.eta1 if args.eta1 is not None else (cfg.eta1 or 2.0)
    delta = args.delta if args.delta is not None else cfg.delta
    if delta is None:
        if ds.D0 is None:
            print("certify: need --delta when the dataset has no recorded D0", file=sys.stderr)
            return EXIT_CONFIG
        delta = float(np.linalg.norm(ds.D0, 2))
    report = {"delta": delta, "eta1": eta1}
    report["stability_test"] = stability_test(sol, ds, delta, eta1)
    if ds.D0 is not None:
        certs = certificates(sol, ds, sys_, w)
        report["lemma1_holds"] = certs.lemma1_holds(eta1)
        report["eta1_margin"] = certs.eta1_margin
        report["smallest_passing_eta1"] = certs.smallest_passing_eta1()
        report["eta2_margin"] = certs.eta2_margin
    out = _out_dir(cfg)
    path = out / "certify.json"
    path.write_text(json.dumps(report, indent=2) + "\n")
    for key, value in report.items():
        print(f"{key}: {value}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_sweep_lambda(cfg: RunConfig, args) -> int:
    sys_ = cfg.resolve_system()
    w = cfg.resolve_weights(sys_)
    results = bench.sweep_lambda(
        sys_, w, cfg.T, cfg.sigma, cfg.lambda_grid, cfg.trials, cfg.seed,
        rho=cfg.rho, norm_kind=cfg.norm, jobs=args.jobs,
    )
    out = _out_dir(cfg)
    bench.write_trials_csv(results, out / "lambda_trials.csv")
    bench.write_summary_csv(results, out / "lambda_summary.csv")
    print(f"wrote {out / 'lambda_trials.csv'} and {out / 'lambda_summary.csv'}")
    if cfg.plot:
        fig = plots.plot_lambda_sweep(results, out / "lambda_sweep.png")
        print(f"wrote {fig}")
    return EXIT_OK


def _cmd_sweep_noise(cfg: RunConfig, args) -> int:
    sys_ = cfg.resolve_system()
    w = cfg.resolve_weights(sys_)
    results = bench.sweep_noise(
        sys_, w, cfg.T, cfg.sigma_grid, _named_methods(cfg), cfg.trials, cfg.seed, jobs=args.jobs,
    )
    out = _out_dir(cfg)
    bench.write_trials_csv(results, out / "noise_trials.csv")
    bench.write_summary_csv(results, out / "noise_summary.csv")
    print(f"wrote {out / 'noise_trials.csv'} and {out / 'noise_summary.csv'}")
    if cfg.plot:
        fig = plots.plot_noise_sweep(results, out / "noise_sweep.png")
        print(f"wrote {fig}")
    return EXIT_OK


def _cmd_verify(cfg: RunConfig, args) -> int:
    ctx = acceptance.AcceptanceContext(jobs=args.jobs, seed=cfg.seed)
    if args.trials:
        ctx.trials = args.trials
    if args.datasets:
        ctx.datasets = args.datasets
    results = acceptance.run_all(ctx, quick=args.quick)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_OK if not failed else EXIT_NUMERICAL


_COMMANDS = {
    "simulate": _cmd_simulate,
    "identify": _cmd_identify,
    "synthesize": _cmd_synthesize,
    "certify": _cmd_certify,
    "sweep-lambda": _cmd_sweep_lambda,
    "sweep-noise": _cmd_sweep_noise,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(exc.render(args.config), file=sys.stderr)
        return EXIT_CONFIG
    stage = args.command
    try:
        return _COMMANDS[stage](cfg, args)
    except ConfigError as exc:
        print(exc.render(args.config or "<defaults>"), file=sys.stderr)
        return EXIT_CONFIG
    except Infeasible as exc:
        print(f"infeasible in stage {stage}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NotIdentifiable as exc:
        print(f"not identifiable (rank W0 < n+m) in stage {stage}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InvalidInput as exc:
        print(f"invalid configuration for stage {stage}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DdlqrError as exc:
        print(f"numerical failure in stage {stage}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
