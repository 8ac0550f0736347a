"""Figure rendering for the CLI report path.

Each subcommand drops a PNG next to its delimited artifacts.  The figures
are a convenience view; the CSV/JSON files remain the canonical outputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "render_solve",
    "render_sweep",
    "render_decompose",
    "render_voronoi",
    "render_asymptotics",
]


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_solve(space, marginal, codebook, partition, path) -> None:
    """Marginal mass colored by cell, with codepoints marked (1-D/2-D)."""
    dim = space.stats.shape[1]
    fig, ax = plt.subplots(figsize=(7, 4))
    cmap = plt.get_cmap("tab20")
    colors = [cmap(j % 20) for j in partition.assignment]
    if dim == 1:
        ax.bar(space.stats[:, 0], marginal.r, color=colors, width=0.8)
        for j, cp in enumerate(codebook.codepoints):
            ax.axvline(
                _codepoint_stat(cp, space, partition, j),
                color=cmap(j % 20), linestyle="--", linewidth=0.8,
            )
        ax.set_xlabel("statistic")
        ax.set_ylabel("marginal mass r(x)")
    else:
        ax.scatter(
            space.stats[:, 0], space.stats[:, 1],
            c=colors, s=900.0 * marginal.r + 4.0,
        )
        ax.set_xlabel("statistic 1")
        ax.set_ylabel("statistic 2")
    ax.set_title(f"partition into k={codebook.k} cells")
    _finish(fig, path)


def _codepoint_stat(codepoint, space, partition, j):
    # place the marker at the cell's statistic range midpoint; the
    # codepoint itself lives in parameter space, not data space
    members = partition.members(j)
    vals = space.stats[members, 0]
    return 0.5 * (vals.min() + vals.max())


def render_sweep(rows, best_k, path) -> None:
    """Codelength against cell count."""
    ks = [r[0] for r in rows]
    nats = [r[1] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, nats, marker="o")
    ax.axvline(best_k, color="tab:red", linestyle=":", label=f"best k={best_k}")
    ax.set_xlabel("cells k")
    ax.set_ylabel("codelength I(P) [nats]")
    ax.legend()
    _finish(fig, path)


def render_decompose(cells, path) -> None:
    """Stacked per-cell assertion/detail contributions in nats."""
    idx = [row["cell"] for row in cells]
    assertion = np.array([row["assertion_nats"] for row in cells])
    detail = np.array([row["detail_nats"] for row in cells])
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(idx, assertion, label="assertion  -q log q")
    ax.bar(idx, detail, bottom=assertion, label="detail  q H(pbar, p)")
    ax.set_xlabel("cell")
    ax.set_ylabel("contribution [nats]")
    ax.legend()
    _finish(fig, path)


def render_voronoi(rows, dim, path) -> None:
    """Sites with assertion mass; 1-D adds realized cell diameters."""
    fig, ax = plt.subplots(figsize=(7, 4))
    q = [row["q"] for row in rows]
    if dim == 1:
        sites = [row["site"][0] for row in rows]
        ax.stem(sites, q, basefmt=" ")
        ax2 = ax.twinx()
        ax2.plot(
            sites, [row["diameter"] for row in rows],
            color="tab:orange", marker=".", linestyle="--", linewidth=0.8,
        )
        ax2.set_ylabel("realized diameter [arc]", color="tab:orange")
        ax.set_xlabel("site")
    else:
        xs = [row["site"][0] for row in rows]
        ys = [row["site"][1] for row in rows]
        sc = ax.scatter(xs, ys, c=q, cmap="viridis", s=36)
        fig.colorbar(sc, ax=ax, label="q")
        ax.set_xlabel("site axis 1")
        ax.set_ylabel("site axis 2")
    ax.set_ylabel("assertion probability q")
    ax.set_title("weighted Fisher-Voronoi tessellation")
    _finish(fig, path)


def render_asymptotics(report, path) -> None:
    """Four-panel summary across the n grid."""
    rows = report.rows
    ns = np.array([row["n"] for row in rows], dtype=float)
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))

    ax = axes[0, 0]
    ax.plot(ns, [row["agreement"] for row in rows], marker="o")
    ax.set_xscale("log")
    ax.set_ylim(0.0, 1.02)
    ax.set_xlabel("n")
    ax.set_ylabel("exact vs Voronoi agreement")

    ax = axes[0, 1]
    ax.loglog(ns, [row["median_err"] for row in rows], marker="o",
              label="codepoint")
    ax.loglog(ns, [row["median_err_mle"] for row in rows], marker="s",
              label="MLE control")
    slope = report.slopes.get("err_vs_n")
    if slope is not None:
        ax.set_title(f"median error, slope {slope:.3f}")
    ax.set_xlabel("n")
    ax.set_ylabel("median error")
    ax.legend()

    ax = axes[1, 0]
    ax.plot(ns, [row["median_sqrt_n_gap"] for row in rows], marker="o")
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("median sqrt(n) codepoint-MLE gap")

    ax = axes[1, 1]
    ax.plot(ns, [row["max_remainder_central"] for row in rows], marker="o",
            label="information remainder")
    ax.plot(ns, [row["max_sqrt_n_eps_central"] for row in rows], marker="s",
            label="sqrt(n) residual (central)")
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.legend()

    _finish(fig, path)
