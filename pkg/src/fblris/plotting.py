"""SVG line charts of resilience against blocklength."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so reruns write identical bytes
matplotlib.rcParams["svg.hashsalt"] = "fblris"
matplotlib.rcParams["svg.fonttype"] = "none"


def _fmt_mbps(bps: float) -> str:
    return f"{bps / 1e6:g} Mbps"


def resilience_chart(curves, path: Path, title: str, eta_axis: str = "log", ylabel: str = "resilience r"):
    """One line per curve with its interquartile band.

    ``curves`` is a list of (label, etas, median, q25, q75).
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, etas, med, q25, q75 in curves:
        etas = np.asarray(etas, dtype=float)
        ax.plot(etas, med, marker="o", markersize=3, label=label)
        ax.fill_between(etas, q25, q75, alpha=0.2, linewidth=0)
    if eta_axis == "log":
        ax.set_xscale("log")
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("blocklength η (channel uses)")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _curve(summary, m, label):
    entries = [e for e in summary if e["m"] == m]
    return (
        label,
        [e["eta"] for e in entries],
        [e["r_median"] for e in entries],
        [e["r_q25"] for e in entries],
        [e["r_q75"] for e in entries],
    )


def sweep_charts(summaries: dict, m_grid, out_dir: Path, eta_axis: str = "log") -> list:
    """Charts for a set of sweeps keyed by rate target (bit/s).

    One chart per RIS size with a curve per rate target, and one chart per
    rate target with a curve per RIS size.
    """
    out_dir = Path(out_dir)
    written = []
    for m in m_grid:
        curves = [_curve(summary, m, f"r_des = {_fmt_mbps(target)}") for target, summary in summaries.items()]
        path = out_dir / f"r_vs_eta_m{m}.svg"
        written.append(resilience_chart(curves, path, f"M = {m}", eta_axis))
    for target, summary in summaries.items():
        curves = [_curve(summary, m, f"M = {m}") for m in m_grid]
        path = out_dir / f"r_vs_eta_rdes{target / 1e6:g}mbps.svg"
        written.append(resilience_chart(curves, path, f"r_des = {_fmt_mbps(target)}", eta_axis))
    return written
