"""Figure rendering for the CLI report paths.

Each renderer reads one of the emitted CSV artifacts and writes a PNG
next to it. Kept separate from the computation so the data files stay
the source of truth.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _floats(rows, key):
    return [float(r[key]) if r[key] != "" else float("nan") for r in rows]


def render_rates_csv(csv_path, png_path=None) -> Path:
    rows = _read_csv(csv_path)
    png_path = Path(png_path) if png_path else Path(csv_path).with_suffix(".png")
    eta = _floats(rows, "eta")
    fig, ax1 = plt.subplots(figsize=(6.4, 4.2))
    ax1.plot(eta, _floats(rows, "kappa_bound"), label="certified min-entropy rate", color="C0")
    ax1.plot(eta, _floats(rows, "final_len_per_m"), label="final key bits per round", color="C1")
    ax1.axhline(0, color="grey", lw=0.6)
    ax1.set_xlabel("tolerated error rate eta")
    ax1.set_ylabel("rate")
    ax1.legend()
    ax1.set_title("Key rate vs tolerated error rate")
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return png_path


def render_sweep_csv(csv_path, png_path=None) -> Path:
    rows = _read_csv(csv_path)
    png_path = Path(png_path) if png_path else Path(csv_path).with_suffix(".png")
    xs = _floats(rows, "noise")
    xlabel = "device noise"
    if len(set(xs)) <= 1:
        xs = _floats(rows, "eta")
        xlabel = "tolerated error rate eta"
    fig, ax1 = plt.subplots(figsize=(6.4, 4.2))
    ax1.plot(xs, _floats(rows, "abort_rate"), "o-", color="C3", label="abort rate")
    ax1.set_xlabel(xlabel)
    ax1.set_ylabel("abort rate", color="C3")
    ax1.set_ylim(-0.02, 1.02)
    ax2 = ax1.twinx()
    ax2.plot(xs, _floats(rows, "mean_key_len"), "s-", color="C0", label="mean key length")
    ax2.set_ylabel("mean key length (bits)", color="C0")
    ax1.set_title("Protocol sweep")
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return png_path


def render_attack_csv(csv_path, png_path=None) -> Path:
    rows = _read_csv(csv_path)
    png_path = Path(png_path) if png_path else Path(csv_path).with_suffix(".png")
    names = [r["name"] for r in rows]
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    pos = range(len(rows))
    ax.bar([p - 0.2 for p in pos], _floats(rows, "abort_rate"), width=0.4, label="abort rate")
    ax.bar([p + 0.2 for p in pos], _floats(rows, "per_bit_guess_rate"), width=0.4,
           label="per-bit raw-key guess rate")
    ax.set_xticks(list(pos))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.set_title("Attack battery")
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return png_path
