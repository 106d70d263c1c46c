"""Deterministic figure rendering for the game-experiment CSV outputs.

Reads the CSVs written by the `afgame` CLI (comment line, header row,
17-digit numbers) and renders one of three fixed layouts.  Rendering is
byte-stable: Agg backend, pinned font, no timestamps or software tags in
the PNG metadata.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["SchemaError", "FigureSpec", "read_table", "render"]

plt.rcParams.update({
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
})

_REQUIRED = {
    "fig2": {
        "fig2_variance.csv": ["mu_b", "var_true_af", "var_proxy_af", "var_true_base"],
        "fig2_detect.csv": ["mu_b", "daf_af", "daf_baseline"],
        "fig2_trajectories.csv": ["t", "path", "x_a_af", "x_b_af", "v_af",
                                  "x_a_base", "x_b_base", "u_base"],
    },
    "fig3": {
        "fig3_variance.csv": ["mu_a", "mu_b", "var_true_af", "var_true_baseline"],
    },
    "fig4": {
        "fig4_variance.csv": ["lambda", "rho", "var_true_af", "var_true_base",
                              "var_proxy_af", "var_proxy_base"],
    },
}


class SchemaError(ValueError):
    """An input CSV does not match the expected schema."""


@dataclass(frozen=True)
class FigureSpec:
    """Which figure to draw, from which directory, into which file."""

    figure: str
    in_dir: Path
    out_file: Path

    def __post_init__(self):
        if self.figure not in _REQUIRED:
            raise SchemaError(f"unknown figure id {self.figure!r}")


def read_table(path: Path, required: list[str]) -> dict[str, np.ndarray]:
    """Read a CSV with optional '#' comment lines into named float columns.

    Raises SchemaError naming the first missing column, or on an empty
    table.
    """
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: empty CSV")
    header, data = rows[0], rows[1:]
    for col in required:
        if col not in header:
            raise SchemaError(f"{path}: missing column '{col}'")
    if not data:
        raise SchemaError(f"{path}: no data rows")
    arr = np.array(data, dtype=float)
    return {name: arr[:, i] for i, name in enumerate(header)}


def _load(spec: FigureSpec) -> dict[str, dict[str, np.ndarray]]:
    return {name: read_table(Path(spec.in_dir) / name, cols)
            for name, cols in _REQUIRED[spec.figure].items()}


def _draw_fig2(tables):
    traj = tables["fig2_trajectories.csv"]
    var = tables["fig2_variance.csv"]
    det = tables["fig2_detect.csv"]
    fig, axes = plt.subplots(2, 2, figsize=(8.0, 6.0))
    ax = axes[0, 0]
    for p in np.unique(traj["path"]):
        m = traj["path"] == p
        ax.plot(traj["t"][m], traj["x_a_af"][m], color="C0",
                label="state A, info-seeking" if p == 0 else None)
        ax.plot(traj["t"][m], traj["x_a_base"][m], color="C1", ls="--",
                label="state A, baseline" if p == 0 else None)
    ax.set_xlabel("t")
    ax.set_ylabel("state")
    ax.set_title("sampled state paths")
    ax.legend(fontsize=7)
    ax = axes[0, 1]
    for p in np.unique(traj["path"]):
        m = traj["path"] == p
        ax.plot(traj["t"][m], traj["v_af"][m], color="C0",
                label="info-seeking control" if p == 0 else None)
        ax.plot(traj["t"][m], traj["u_base"][m], color="C1", ls="--",
                label="baseline control" if p == 0 else None)
    ax.set_xlabel("t")
    ax.set_ylabel("control")
    ax.set_title("sampled controls")
    ax.legend(fontsize=7)
    ax = axes[1, 0]
    ax.plot(var["mu_b"], var["var_true_af"], "o-", label="true variance")
    ax.plot(var["mu_b"], var["var_proxy_af"], "s-", label="proxy variance")
    ax.plot(var["mu_b"], var["var_true_base"], "^--", label="true, baseline play")
    ax.set_xlabel(r"$\mu_B$")
    ax.set_ylabel("asymptotic variance")
    ax.set_title("information vs prior accuracy")
    ax.legend(fontsize=7)
    ax = axes[1, 1]
    width = 0.03
    ax.bar(det["mu_b"] - width / 2, det["daf_af"], width, label="info-seeking")
    ax.bar(det["mu_b"] + width / 2, det["daf_baseline"], width, label="baseline")
    ax.set_xlabel(r"$\mu_B$")
    ax.set_ylabel("detection score")
    ax.set_title("detectability")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _draw_fig3(tables):
    var = tables["fig3_variance.csv"]
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for i, mu_a in enumerate(np.unique(var["mu_a"])):
        m = var["mu_a"] == mu_a
        order = np.argsort(var["mu_b"][m])
        ax.plot(var["mu_b"][m][order], var["var_true_af"][m][order], "o-",
                color=f"C{i}", label=rf"$\mu_A$={mu_a:g}")
        ax.plot(var["mu_b"][m][order], var["var_true_baseline"][m][order], "--",
                color=f"C{i}", alpha=0.6)
    ax.set_xlabel(r"$\mu_B$")
    ax.set_ylabel("true asymptotic variance")
    ax.set_title("mean misspecification (solid: info-seeking, dashed: baseline)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _draw_fig4(tables):
    var = tables["fig4_variance.csv"]
    fig, axes = plt.subplots(2, 1, figsize=(6.4, 6.6), sharex=True)
    for ax, col_af, col_base, title in (
            (axes[0], "var_true_af", "var_true_base", "true asymptotic variance"),
            (axes[1], "var_proxy_af", "var_proxy_base", "proxy asymptotic variance")):
        for i, rho in enumerate(np.unique(var["rho"])):
            m = var["rho"] == rho
            order = np.argsort(var["lambda"][m])
            ax.plot(var["lambda"][m][order], var[col_af][m][order], "o-",
                    color=f"C{i}", label=rf"$\rho$={rho:g}")
            ax.plot(var["lambda"][m][order], var[col_base][m][order], "--",
                    color=f"C{i}", alpha=0.6)
        ax.set_ylabel(title)
        ax.legend(fontsize=7)
    axes[1].set_xlabel(r"information weight $\lambda$")
    axes[0].set_title("solid: info-seeking play, dashed: baseline play")
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> Path:
    """Render the figure and return the output path.

    The PNG carries no software or timestamp metadata, so re-rendering the
    same inputs reproduces identical bytes.
    """
    tables = _load(spec)
    draw = {"fig2": _draw_fig2, "fig3": _draw_fig3, "fig4": _draw_fig4}[spec.figure]
    fig = draw(tables)
    out = Path(spec.out_file)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(out, format="png", metadata={"Software": None})
    finally:
        plt.close(fig)
    return out
