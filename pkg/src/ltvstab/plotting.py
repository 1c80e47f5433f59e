"""PNG figures of the report series."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .report import iter_series  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def render_figures(report: dict, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series = {name: (t, v) for name, t, v in iter_series(report)}
    paths = []

    crit = [k for k in ("cond1", "cond2", "cond2prime_intE") if k in series]
    if crit:
        fig, axes = plt.subplots(len(crit), 1, figsize=(7, 2.4 * len(crit)), sharex=True, squeeze=False)
        for ax, name in zip(axes[:, 0], crit):
            t, v = series[name]
            ax.plot(t, v, lw=1.2)
            ax.set_ylabel(name)
            ax.grid(alpha=0.3)
        axes[0, 0].set_title(f"criterion curves, verdict {report['verdict']}")
        axes[-1, 0].set_xlabel("t")
        paths.append(_save(fig, out_dir / "criterion.png"))

    rivals = [k for k in series if k.startswith("rival_")]
    if rivals:
        fig, ax = plt.subplots(figsize=(7, 3.2))
        for name in rivals:
            t, v = series[name]
            ax.plot(t, v, lw=1.0, label=name[len("rival_"):])
        ax.set_xlabel("t")
        ax.set_title("rival method curves")
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
        paths.append(_save(fig, out_dir / "rivals.png"))

    if "empirical_worst_ratio" in series:
        t, v = series["empirical_worst_ratio"]
        fig, ax = plt.subplots(figsize=(7, 3.0))
        ax.semilogy(t, [max(x, 1e-300) if x is not None else float("nan") for x in v], lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel("max |x(t)| / |x(t0)|")
        ax.set_title(f"basis trajectories: {report['empirical']['classification']}")
        ax.grid(alpha=0.3, which="both")
        paths.append(_save(fig, out_dir / "empirical.png"))
    return paths
