"""Figure rendering next to the CSV outputs (headless matplotlib)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def render_quality_cdf(path, rows) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if rows:
        n = len(rows)
        qualities = [q for _, q in rows]
        ax.step(qualities, [r / n for r, _ in rows], where="post")
    ax.set_xlabel("average delivered quality")
    ax.set_ylabel("fraction of users")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, linestyle="--", linewidth=0.5, alpha=0.6)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep_cdf(path, cdf_by_v) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for v in sorted(cdf_by_v):
        rows = cdf_by_v[v]
        if not rows:
            continue
        n = len(rows)
        ax.step(
            [q for _, q in rows],
            [r / n for r, _ in rows],
            where="post",
            label=f"V = {v:.3g}".replace("+", ""),
        )
    ax.set_xlabel("average delivered quality")
    ax.set_ylabel("fraction of users")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, linestyle="--", linewidth=0.5, alpha=0.6)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_association(path, log, user: int) -> None:
    helpers = log.admitted_helper[user]
    chunks = [c for c, h in enumerate(helpers) if h >= 0]
    served = [helpers[c] for c in chunks]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(chunks, served, ".", markersize=2)
    ax.set_xlabel("chunk index")
    ax.set_ylabel("serving helper")
    ax.grid(True, linestyle="--", linewidth=0.5, alpha=0.6)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_playback(path, log, user: int) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(log.buffer_run[user], label="playable run")
    ax.plot(log.playhead[user], label="playhead", linestyle="--")
    ax.set_xlabel("slot")
    ax.set_ylabel("chunks")
    ax.grid(True, linestyle="--", linewidth=0.5, alpha=0.6)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_backlog(path, log) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot([b / 1e6 for b in log.total_backlog])
    ax.set_xlabel("slot")
    ax.set_ylabel("total backlog (Mbit)")
    ax.grid(True, linestyle="--", linewidth=0.5, alpha=0.6)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_run(run_dir, log, summaries, assoc_user) -> dict:
    """All per-run figures; returns {name: path} for the bundle."""
    from .output import emit_quality_cdf

    run_dir = Path(run_dir)
    paths = {
        "quality_cdf_png": run_dir / "quality_cdf.png",
        "backlog_png": run_dir / "backlog.png",
    }
    render_quality_cdf(paths["quality_cdf_png"], emit_quality_cdf(log))
    render_backlog(paths["backlog_png"], log)
    if assoc_user is not None and log.num_users:
        paths["association_png"] = run_dir / "association.png"
        paths["playback_png"] = run_dir / "playback_buffer.png"
        render_association(paths["association_png"], log, assoc_user)
        render_playback(paths["playback_png"], log, assoc_user)
    return paths
