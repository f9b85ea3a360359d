"""Figures for census reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def census_figure(sections: dict, path, title=None):
    """Grouped bars of reachable and livelock markings per pipeline stage."""
    stages = [s for s, v in sections.items() if "reachable" in v]
    reach = [int(sections[s]["reachable"]) for s in stages]
    live = [int(sections[s]["livelock"]) for s in stages]
    fig, ax = plt.subplots(figsize=(6, 3.6))
    xs = range(len(stages))
    w = 0.38
    b1 = ax.bar([x - w / 2 for x in xs], reach, w, label="reachable", color="#4c72b0")
    b2 = ax.bar([x + w / 2 for x in xs], live, w, label="livelock", color="#dd8452")
    ax.bar_label(b1, fontsize=8)
    ax.bar_label(b2, fontsize=8)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(stages)
    ax.set_ylabel("markings")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
