"""Figure rendering for waveforms and sweep summaries (file output only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .engine import Waveform  # noqa: E402


def _time_scale(t_max: float) -> tuple[float, str]:
    if t_max >= 0.5:
        return 1.0, "s"
    if t_max >= 0.5e-3:
        return 1e3, "ms"
    if t_max >= 0.5e-6:
        return 1e6, "us"
    return 1e9, "ns"


def save_waveform_figure(w: Waveform, path, title: str | None = None) -> None:
    scale, unit = _time_scale(float(w.t[-1]) if len(w) else 1.0)
    fig, (ax_v, ax_i) = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    t = w.t * scale
    ax_v.plot(t, w.v_load, lw=1.0, label="v_load")
    ax_v.plot(t, w.v_out, lw=0.8, ls="--", color="gray", label="v_out (stack)")
    ax_v.set_ylabel("voltage [V]")
    ax_v.legend(loc="upper right", fontsize=8)
    ax_v.grid(alpha=0.3)
    ax_i.plot(t, w.i_load_ma, lw=1.0, color="tab:red")
    ax_i.set_ylabel("i_load [mA]")
    ax_i.set_xlabel(f"time [{unit}]")
    ax_i.grid(alpha=0.3)
    if title:
        ax_v.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(values, rows, param: str, path) -> None:
    """Summary-vs-parameter panels; rows are dicts from the sweep runner."""
    fig, (ax_v, ax_i) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    v_out = [r["peak_v_out_V"] for r in rows]
    i_pk = [r["peak_i_mA"] for r in rows]
    ax_v.plot(values, v_out, marker=".", lw=1.0)
    ax_v.set_ylabel("peak v_out [V]")
    ax_v.grid(alpha=0.3)
    ax_i.plot(values, i_pk, marker=".", lw=1.0, color="tab:red")
    ax_i.set_ylabel("peak |i| [mA]")
    ax_i.set_xlabel(param)
    ax_i.grid(alpha=0.3)
    if param == "frequency" and len(values) > 1 and min(values) > 0 \
            and max(values) / min(values) > 50:
        ax_i.set_xscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
