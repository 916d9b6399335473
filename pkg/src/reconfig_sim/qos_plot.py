"""
qos_plot.py

What this file does:
  - PURE rendering. Given the per-tick rows of a run (time_ms, overall_qos,
    intrinsic, contextual, config_id, in_flight) and, optionally, the completion
    times of reconfiguration orders, it draws the overall QoS curve to a PNG

What this file does NOT do:
  - Run simulations or read trace files (the CLI hands rows over)
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping, Sequence

import matplotlib
matplotlib.use("Agg")  # headless-safe

import matplotlib.pyplot as plt

BG_COLOR = "#0B1020"
TEXT_COLOR = "#FFFFFF"
SUB_TEXT_COLOR = "#B7BCC7"
OVERALL_COLOR = "#6FA8FF"
INTRINSIC_COLOR = "#51c38d"
CONTEXTUAL_COLOR = "#FF6B6B"
ORDER_COLOR = "#dcdee0"
IN_FLIGHT_COLOR = "#A352CC"


def _style_axis(ax: plt.Axes) -> None:
    ax.set_facecolor("none")
    for spine in ax.spines.values():
        spine.set_color((1, 1, 1, 0.2))
    ax.tick_params(axis="both", colors=TEXT_COLOR)
    ax.grid(True, color=(1, 1, 1, 0.08))


def render_qos_curve_png(
    rows: Sequence[Mapping[str, Any]],
    output_path: str | Path,
    *,
    order_times: Sequence[int] = (),
    title: str = "Application QoS",
    show_criteria: bool = True,
) -> Path:
    """
    Overall QoS as a step curve over simulated time, with the intrinsic and
    contextual criteria dashed behind it, shaded spans where an order was in
    flight and a vertical marker at each completed reconfiguration.
    """
    if not rows:
        raise ValueError("no samples to plot")
    times = [int(r["time_ms"]) / 1000.0 for r in rows]

    fig, ax = plt.subplots(figsize=(12, 5), facecolor=BG_COLOR)
    fig.subplots_adjust(bottom=0.14, top=0.88, left=0.07, right=0.98)
    _style_axis(ax)

    start = None
    for t, r in zip(times, rows):
        if int(r["in_flight"]) and start is None:
            start = t
        elif not int(r["in_flight"]) and start is not None:
            ax.axvspan(start, t, color=IN_FLIGHT_COLOR, alpha=0.18, linewidth=0)
            start = None
    if start is not None:
        ax.axvspan(start, times[-1], color=IN_FLIGHT_COLOR, alpha=0.18, linewidth=0)

    if show_criteria:
        ax.step(times, [float(r["intrinsic"]) for r in rows], where="post",
                color=INTRINSIC_COLOR, linestyle="--", linewidth=1.2, label="intrinsic")
        ax.step(times, [float(r["contextual"]) for r in rows], where="post",
                color=CONTEXTUAL_COLOR, linestyle="--", linewidth=1.2, label="contextual")
    ax.step(times, [float(r["overall_qos"]) for r in rows], where="post",
            color=OVERALL_COLOR, linewidth=2.4, label="overall")

    for i, at in enumerate(order_times):
        ax.axvline(at / 1000.0, color=ORDER_COLOR, linestyle=":", linewidth=1.0,
                   label="reconfiguration" if i == 0 else None)

    ax.set_xlim(times[0], times[-1])
    ax.set_ylim(-0.02, 1.05)
    ax.set_xlabel("Simulated time (s)", color=SUB_TEXT_COLOR, fontsize=11)
    ax.set_ylabel("QoS mark", color=SUB_TEXT_COLOR, fontsize=11)
    ax.set_title(title, fontsize=16, color=TEXT_COLOR, pad=10)

    leg = ax.legend(loc="lower right", frameon=False, fontsize=10)
    for t in leg.get_texts():
        t.set_color(TEXT_COLOR)

    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output_path, dpi=200, transparent=False, facecolor=fig.get_facecolor(), bbox_inches="tight", pad_inches=0.25)
    plt.close(fig)
    return output_path
