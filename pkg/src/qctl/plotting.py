"""Figure rendering to image files (non-interactive backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_LEVEL_STYLE = {"0": ("P0", "tab:blue"), "1": ("P1", "tab:orange"), "e": ("Pe", "tab:green")}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_sweep(rows, path, title: str = ""):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for lam in sorted({r.lam for r in rows}):
        pts = [(r.epsilon, r.fidelity) for r in rows if r.lam == lam and r.fidelity is not None]
        if pts:
            e, f = zip(*pts)
            ax.plot(e, f, label=f"lambda={lam:g}")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("F(T)")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)


def plot_populations(result, path, title: str = ""):
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for i, level in enumerate(("0", "1", "e")):
        label, color = _LEVEL_STYLE[level]
        ax.plot(result.times, result.populations[:, i], label=label, color=color)
    for c in result.checkpoints:
        ax.plot(c.time, c.value, "k.", ms=4)
    ax.set_xlabel("t / T")
    ax.set_ylabel("population")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(title)
    ax.legend(loc="center right")
    _save(fig, path)


def plot_pulses(fields, path, title: str = ""):
    t = np.asarray(fields.at_time)
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    for name in ("delta_e", "delta_1", "delta_0"):
        a1.plot(t, getattr(fields, name), label=name)
    for name in ("omega_0", "omega_1", "omega_2"):
        a2.plot(t, getattr(fields, name), label=name)
    a1.set_ylabel("detuning (1/T)")
    a2.set_ylabel("Rabi amplitude (1/T)")
    a2.set_xlabel("t / T")
    a1.legend(fontsize=8)
    a2.legend(fontsize=8)
    a1.set_title(title)
    _save(fig, path)


def plot_error_rotation(times, m, path, title: str = ""):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for k, n in ((0, 1), (0, 2), (1, 2)):
        ax.plot(times, np.abs(m[:, k, n]), label=f"|M{k + 1}{n + 1}|")
    ax.set_xlabel("t / T")
    ax.set_ylabel("magnitude")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)
