"""Matplotlib figure rendering for the CLI report paths.

Figures are written next to the delimited outputs with fixed metadata so that
repeated runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_META = {"Software": "se3harm"}


def _save(fig, path):
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def plot_translation_profiles(path, z, curves_max, curves_f0, reference=None):
    """Two panels: max_n phi(z n_z, n) and the j=0 component, one curve per run."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for label, y in curves_max.items():
        ax1.plot(z, y, label=label, lw=1.2)
    ax1.set_xlabel("z offset [voxels]")
    ax1.set_title("max over orientations")
    ax1.legend(fontsize=8)
    for label, y in curves_f0.items():
        ax2.plot(z, y, label=label, lw=1.2)
    if reference is not None:
        ax2.plot(z, reference, "k--", label="1-D reference", lw=1.0)
    ax2.set_xlabel("z offset [voxels]")
    ax2.set_title("j = 0 component")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_crossing_scores(path, rows):
    """f-score vs crossing angle, one curve per absolute angle.

    rows: iterable of dicts with keys angle, alpha, fscore."""
    fig, ax = plt.subplots(figsize=(6, 4))
    alphas = sorted({r["alpha"] for r in rows})
    for a in alphas:
        pts = sorted((r["angle"], r["fscore"]) for r in rows if r["alpha"] == a)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3,
                label=f"alpha = {a:g} deg")
    ax.set_xlabel("crossing angle [deg]")
    ax.set_ylabel("f-score")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_voting_maps(path, rhos, stack):
    """Maximum-intensity projections of the voting map at a few radii."""
    picks = np.linspace(0, len(rhos) - 1, min(6, len(rhos))).astype(int)
    fig, axes = plt.subplots(1, len(picks), figsize=(2.2 * len(picks), 2.6))
    if len(picks) == 1:
        axes = [axes]
    for ax, k in zip(axes, picks):
        ax.imshow(stack[k].max(axis=2).T, origin="lower", cmap="magma")
        ax.set_title(f"rho = {rhos[k]:.1f}", fontsize=8)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    _save(fig, path)


def plot_detection_scatter(path, dets_angles, truth_angles, tol_deg=10.0):
    """phi-theta scatter of detected directions with truth crosshairs."""
    fig, ax = plt.subplots(figsize=(5, 4))
    if len(dets_angles):
        d = np.asarray(dets_angles)
        ax.plot(d[:, 0], d[:, 1], ".", ms=2, alpha=0.6)
    for phi, theta in truth_angles:
        ax.axvline(phi, color="r", lw=0.8)
        ax.axhline(theta, color="r", lw=0.8)
        ax.add_patch(
            plt.Circle((phi, theta), tol_deg, fill=False, ls=":", color="r", lw=0.8)
        )
    ax.set_xlabel("phi [deg]")
    ax.set_ylabel("theta [deg]")
    fig.tight_layout()
    _save(fig, path)
