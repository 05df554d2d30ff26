"""Render sweep results as the three tradeoff panels (noise, utility, rate).

SVG output is made byte-reproducible by pinning the hash salt and stripping
the date metadata, so re-running a sweep with equal inputs yields identical
figure files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .accountants import Method
from .tradeoff import TradeoffPoint, ValidityCaps

__all__ = ["render_sweep_panels"]

_COLORS = {
    Method.PROPOSED: "tab:blue",
    Method.MA: "tab:orange",
    Method.AC1: "tab:red",
    Method.AC2: "tab:green",
}
_LINESTYLES = ("-", "--", "-.", ":")

_PANELS = (
    ("noise", "sigma_k_sq", r"noise variance $\sigma_k^2$", True),
    ("utility", "utility_lb", "utility lower bound", True),
    ("rate", "rate_ub_bits", "rate upper bound (bits)", False),
)


def render_sweep_panels(
    rows: Sequence[TradeoffPoint],
    caps_by_rounds: Mapping[int, ValidityCaps],
    out_stem: Path | str,
) -> list[Path]:
    """Write one SVG per panel next to the sweep CSV; returns the paths."""
    matplotlib.rcParams["svg.hashsalt"] = "fedldp"
    out_stem = Path(out_stem)
    t_values = sorted({row.rounds for row in rows})
    styles = {t: _LINESTYLES[i % len(_LINESTYLES)] for i, t in enumerate(t_values)}
    written: list[Path] = []
    for panel, attr, ylabel, log_y in _PANELS:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for method in Method:
            for t in t_values:
                pts = [
                    (row.epsilon, getattr(row, attr))
                    for row in rows
                    if row.method == method
                    and row.rounds == t
                    and not row.error
                    and getattr(row, attr) is not None
                ]
                if not pts:
                    continue
                xs, ys = zip(*sorted(pts))
                ax.plot(
                    xs,
                    ys,
                    color=_COLORS[method],
                    linestyle=styles[t],
                    marker=".",
                    markersize=4,
                    linewidth=1.2,
                    label=f"{method.value}, T={t:g}",
                )
        cap_values = set()
        for t in t_values:
            caps = caps_by_rounds.get(t)
            if caps is None:
                continue
            cap = {
                "noise": caps.sigma_sq_cap,
                "utility": caps.utility_cap,
                "rate": caps.rate_cap_bits,
            }[panel]
            cap_values.add(cap)
        for cap in sorted(cap_values):
            ax.axhline(cap, color="black", linestyle="--", linewidth=1.0)
        if log_y:
            ax.set_yscale("log")
        ax.set_xlabel(r"target privacy $\epsilon_k$")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=7, ncol=2)
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        path = out_stem.parent / f"{out_stem.name}_{panel}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
