"""Figure rendering for sweep outputs.

Kept out of the benchmark layer on purpose: the harness emits plot-ready
CSVs, and only the CLI report path turns them into files. Uses the Agg
backend so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .bench import SweepResult


def plot_lambda_sweep(results: list[SweepResult], out_path) -> Path:
    """Two-panel coefficient sweep: stabilization rate and median error on
    top, box plot of the per-trial errors below."""
    lams = [r.summary.lam for r in results]
    S = [r.summary.S for r in results]
    M = [r.summary.M for r in results]
    errors = [[t.error for t in r.trials if t.stabilizing] for r in results]

    fig, (ax_top, ax_box) = plt.subplots(2, 1, figsize=(7, 7), sharex=False)

    ax_top.plot(lams, S, "o-", color="tab:blue", linewidth=1.0, markersize=3, label="stabilizing %")
    ax_top.set_xscale("log")
    ax_top.set_ylabel("stabilizing trials (%)", color="tab:blue")
    ax_top.set_ylim(-5, 105)
    ax_top.grid(True, alpha=0.3)
    ax_err = ax_top.twinx()
    ax_err.plot(lams, M, "s-", color="tab:red", linewidth=1.0, markersize=3, label="median error")
    ax_err.set_yscale("log")
    ax_err.set_ylabel("median relative error", color="tab:red")
    ax_top.set_xlabel("regularization coefficient")

    filled = [e if e else [float("nan")] for e in errors]
    ax_box.boxplot(filled, positions=range(len(lams)), widths=0.6, whis=(5, 95), showfliers=True)
    ax_box.set_yscale("log")
    ax_box.set_xticks(range(len(lams)))
    ax_box.set_xticklabels([f"{v:.2g}" for v in lams], rotation=60, fontsize=7)
    ax_box.set_xlabel("regularization coefficient")
    ax_box.set_ylabel("relative error")
    ax_box.grid(True, alpha=0.3)

    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_noise_sweep(results: list[SweepResult], out_path) -> Path:
    """Median error vs noise level, one curve per method, with the
    stabilization percentage annotated where it drops below 100."""
    by_method: dict[str, list] = {}
    for r in results:
        by_method.setdefault(r.summary.method, []).append(r.summary)

    fig, ax = plt.subplots(figsize=(7, 5))
    for method, summaries in by_method.items():
        summaries = sorted(summaries, key=lambda s: s.sigma)
        sig = [s.sigma for s in summaries]
        med = [s.M for s in summaries]
        line, = ax.plot(sig, med, "o-", linewidth=1.2, markersize=4, label=method)
        for s in summaries:
            if s.S < 100.0 and s.M is not None:
                ax.annotate(f"S={s.S:.0f}%", (s.sigma, s.M), textcoords="offset points",
                            xytext=(4, 4), fontsize=7, color=line.get_color())
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("noise level")
    ax.set_ylabel("median relative error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()

    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
