"""SVG figures derived from experiment CSVs.

Plots are a pure function of the raw CSV: the summary is recomputed from the
rows and the SVG writer is pinned (fixed hash salt, no date) so that the same
CSV always produces byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import read_csv, summarize  # noqa: E402
from .signals import ParameterError  # noqa: E402

__all__ = ["emit_plots"]

_PLOTTED = ("sparsity_sweep", "noise_sweep", "gamma_attack", "channel_noise_attack",
            "protocol_demo")
_RC = {"svg.hashsalt": "fdbbd", "svg.fonttype": "none", "font.size": 9}


def _save(fig, path: Path) -> str:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return str(path)


def _heatmap(summary, x, y, value, title, path):
    xs = sorted({r[x] for r in summary})
    ys = sorted({r[y] for r in summary})
    grid = np.full((len(ys), len(xs)), np.nan)
    for r in summary:
        grid[ys.index(r[y]), xs.index(r[x])] = r[value]
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(grid, origin="lower", cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(xs)), [str(v) for v in xs])
    ax.set_yticks(range(len(ys)), [str(v) for v in ys])
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label=value)
    fig.tight_layout()
    return _save(fig, path)


def _lines(summary, x, series, title, path, group=None, logy=False):
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    groups = sorted({r[group] for r in summary}) if group else [None]
    for g in groups:
        sub = [r for r in summary if group is None or r[group] == g]
        sub.sort(key=lambda r: r[x])
        xs = [r[x] for r in sub]
        for col in series:
            label = col if g is None else f"{col} ({g})"
            ax.plot(xs, [r[col] for r in sub], marker="o", ms=3, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def emit_plots(csv_path, out_dir=None) -> list[str]:
    """Write the SVG figures for one raw experiment CSV and return their paths."""
    csv_path = Path(csv_path)
    rows = read_csv(csv_path)
    exp = rows[0].get("experiment")
    if exp not in _PLOTTED:
        raise ParameterError(f"no plot defined for experiment {exp!r}")
    summary = summarize(rows)
    out = Path(out_dir) if out_dir else csv_path.parent
    out.mkdir(parents=True, exist_ok=True)
    stem = csv_path.stem
    written = []
    with plt.rc_context(_RC):
        if exp == "sparsity_sweep":
            for dims in sorted({r["dims"] for r in summary}):
                sub = [r for r in summary if r["dims"] == dims]
                written.append(_heatmap(sub, "s", "k", "rmse_mean", f"mean RMSE, (n, mu) = {dims}",
                                        out / f"{stem}_{dims}.svg"))
        elif exp == "noise_sweep":
            written.append(_heatmap(summary, "snr_db", "k", "rmse_mean", "mean RMSE vs SNR",
                                    out / f"{stem}.svg"))
        elif exp == "gamma_attack":
            written.append(_lines(summary, "gamma", ["success_mean", "rmse_to_alice_mean",
                                                     "rmse_to_bob_mean"],
                                  "attack success and RMSE", out / f"{stem}.svg"))
        elif exp == "channel_noise_attack":
            written.append(_lines(summary, "deviation_snr_db", ["mse_to_true_median",
                                                                "mse_to_true_mean"],
                                  "Eve's MSE to the true secret", out / f"{stem}.svg",
                                  group="channel_mode", logy=True))
        elif exp == "protocol_demo":
            written.append(_lines(summary, "grid_idx", ["rmse_mean", "key_agreement_mean"],
                                  "protocol demo", out / f"{stem}.svg"))
    return written
