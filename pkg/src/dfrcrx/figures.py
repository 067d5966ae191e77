"""Matplotlib renderings of designs, maps, and Monte-Carlo curves.

Figures are rendered off-screen to PNG bytes so the CLI can stage them
alongside the delimited outputs; the config hash rides along as PNG text
metadata.
"""

from __future__ import annotations

import io

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def render_png(fig, digest: str = "") -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=130,
                metadata={"config_hash": digest} if digest else None)
    plt.close(fig)
    return buf.getvalue()


def _to_db(mag, floor_db=-120.0):
    mag = np.asarray(mag, dtype=float)
    ref = mag.max()
    if ref <= 0:
        return np.full_like(mag, floor_db)
    return np.maximum(20.0 * np.log10(np.maximum(mag, 1e-300) / ref), floor_db)


def filter_response_figure(responses: dict, digest: str = "") -> bytes:
    """Overlay per-waveform |response| in dB, one panel per design.

    ``responses`` maps design label -> (K, N) complex output array; for a
    coherent design the K traces coincide.
    """
    n = len(responses)
    fig, axes = plt.subplots(n, 1, figsize=(8.5, 2.6 * n), sharex=False,
                             squeeze=False)
    for ax, (label, outputs) in zip(axes[:, 0], responses.items()):
        outputs = np.asarray(outputs)
        ref = np.abs(outputs).max()
        for k in range(outputs.shape[0]):
            level = 20.0 * np.log10(np.maximum(np.abs(outputs[k]), 1e-300) / ref)
            ax.plot(np.maximum(level, -90.0), lw=0.8, label=f"waveform {k}")
        ax.set_ylim(-90, 3)
        ax.set_ylabel("response (dB)")
        ax.set_title(label, fontsize=10)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7, ncol=2, loc="upper right")
    axes[-1, 0].set_xlabel("output sample")
    fig.tight_layout()
    return render_png(fig, digest)


def range_doppler_figure(rdmap, title: str, digest: str = "",
                         central_gates: int = 100) -> bytes:
    """Image of the map in dB; only the central gates are shown by default."""
    mag = rdmap.magnitudes
    n_rows = mag.shape[0]
    if central_gates and central_gates < n_rows:
        mid = n_rows // 2
        lo = max(mid - central_gates // 2, 0)
        hi = lo + central_gates
        mag = mag[lo:hi]
        gates = rdmap.range_axis[lo:hi]
    else:
        gates = rdmap.range_axis
    fig, ax = plt.subplots(figsize=(7.5, 5))
    level = _to_db(mag)
    im = ax.imshow(level, aspect="auto", origin="lower", cmap="viridis",
                   extent=[rdmap.doppler_axis[0], rdmap.doppler_axis[-1],
                           gates[0], gates[-1]],
                   vmin=-80, vmax=0)
    ax.set_xlabel("normalized Doppler (cycles/pulse)")
    ax.set_ylabel("range gate")
    ax.set_title(title, fontsize=10)
    fig.colorbar(im, ax=ax, label="magnitude (dB)")
    fig.tight_layout()
    return render_png(fig, digest)


def curves_figure(curves: dict, ylabel: str, digest: str = "",
                  logy: bool = False) -> bytes:
    """Monte-Carlo curves with Wilson-interval bands, one trace per design."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, points in curves.items():
        x = [p.x for p in points]
        y = [p.y for p in points]
        lo = [p.wilson_ci[0] for p in points]
        hi = [p.wilson_ci[1] for p in points]
        line, = ax.plot(x, y, marker="o", ms=3.5, label=label)
        ax.fill_between(x, lo, hi, alpha=0.2, color=line.get_color())
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return render_png(fig, digest)
