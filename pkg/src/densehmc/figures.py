"""Figure rendering for run reports and benchmark sweeps.

Every CLI report path drops a PNG next to its delimited output: `fit`
renders the log-kernel trace with the annealing schedule, and `bench`
renders timing (or speedup) against dimension, one panel per sample size,
colored by class count. Rendering always uses the Agg canvas so it works
headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import TimingRecord, _ratio_map
from .sampler import Phase, SampleStore


def save_trace_figure(store: SampleStore, path) -> Path:
    """Log-kernel trace over all iterations plus the temperature schedule."""
    records = store.records
    if not records:
        raise ValueError("store holds no iteration records")
    logk = [r.log_kernel for r in records]
    temps = [r.temperature for r in records]
    n_burn = sum(1 for r in records if r.phase == "burnin")

    fig, (ax_top, ax_bot) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax_top.plot(logk, lw=0.8, color="tab:blue")
    if 0 < n_burn < len(records):
        ax_top.axvline(n_burn, color="tab:red", ls="--", lw=0.8, label="sampling starts")
        ax_top.legend(loc="lower right", fontsize=8)
    ax_top.set_ylabel("log kernel")
    parts = []
    for phase in (Phase.BURNIN, Phase.SAMPLING):
        if any(r.phase == phase.value for r in records):
            parts.append(f"{phase.value} {store.acceptance_rate(phase):.2f}")
    fig.suptitle("acceptance rate: " + ", ".join(parts) if parts else "trace")
    ax_bot.plot(temps, lw=0.8, color="tab:orange")
    ax_bot.set_yscale("log")
    ax_bot.set_ylabel("temperature")
    ax_bot.set_xlabel("iteration")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_bench_figure(records: list[TimingRecord], path) -> Path:
    """Timing panels per sample size: mean seconds (or speedup) vs p."""
    timed = [r for r in records if r.mean_s is not None]
    if not timed:
        raise ValueError("no timed records to plot")
    backends = sorted({r.backend for r in timed})
    ratios = _ratio_map(records) if len(backends) > 1 else {}
    n_values = sorted({r.n for r in timed})
    k_values = sorted({r.k for r in timed})
    cmap = plt.get_cmap("viridis")
    k_color = {k: cmap(i / max(1, len(k_values) - 1)) for i, k in enumerate(k_values)}
    markers = {"gradient": "o", "leapfrog": "^"}

    ncols = min(2, len(n_values))
    nrows = (len(n_values) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(5.5 * ncols, 4 * nrows), squeeze=False)
    use_ratio = bool(ratios) and any(r.backend != "reference" for r in timed)

    for ax, n in zip(axes.ravel(), n_values):
        for r in timed:
            if r.n != n:
                continue
            if use_ratio:
                if r.backend == "reference":
                    continue
                y = ratios.get(r.key)
                if y is None:
                    continue
            else:
                y = r.mean_s
            ax.scatter(r.p, y, color=k_color[r.k], marker=markers.get(r.op, "s"), s=22, alpha=0.8)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_title(f"N = {n}")
        ax.set_xlabel("p (features)")
        ax.set_ylabel("reference time / backend time" if use_ratio else "mean seconds")
        if use_ratio:
            ax.axhline(1.0, color="black", lw=0.8)
    for ax in axes.ravel()[len(n_values):]:
        ax.set_visible(False)

    handles = [plt.Line2D([], [], color=k_color[k], marker="o", ls="", label=f"K={k}") for k in k_values]
    handles += [plt.Line2D([], [], color="gray", marker=m, ls="", label=op) for op, m in markers.items()]
    fig.legend(handles=handles, loc="lower center", ncol=min(8, len(handles)), fontsize=8)
    fig.tight_layout(rect=(0, 0.06, 1, 1))
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_validate_figure(hmc_store: SampleStore, rwmh_store: SampleStore, path) -> Path:
    """Marginal-variance comparison of both samplers against the target."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for store, label, color in ((hmc_store, "hmc", "tab:blue"), (rwmh_store, "rwmh", "tab:orange")):
        draws = np.stack([p.data.ravel() for p in store.positions])
        ax.plot(draws.var(axis=0), marker="o", ls="-", lw=0.8, label=label, color=color)
    ax.axhline(1.0, color="black", lw=0.8, ls="--")
    ax.set_xlabel("coordinate")
    ax.set_ylabel("marginal variance")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
