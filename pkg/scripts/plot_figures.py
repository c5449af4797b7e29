"""Static plots from the CSV files written by reproduce_figures.py.

    python scripts/plot_figures.py --data results/ --out figures/

Requires matplotlib (``pip install artifact[plots]``).
"""

from __future__ import annotations

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def load(path: Path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    raw = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=str)
    raw = np.atleast_2d(raw)
    out = {}
    for k, name in enumerate(header):
        col = raw[:, k]
        try:
            out[name] = np.array([float(x) if x else np.nan for x in col])
        except ValueError:
            out[name] = col
    return out


def heatmap(ax, data, x, y, z, title):
    xs, ys = np.unique(data[x]), np.unique(data[y])
    grid = np.full((len(ys), len(xs)), np.nan)
    for xv, yv, zv in zip(data[x], data[y], data[z]):
        grid[np.searchsorted(ys, yv), np.searchsorted(xs, xv)] = zv
    im = ax.imshow(grid, origin="lower", extent=(xs[0], xs[-1], ys[0], ys[-1]), aspect="auto", cmap="viridis")
    ax.set_xlabel(f"{x} (deg)")
    ax.set_ylabel(f"{y} (deg)")
    ax.set_title(title)
    plt.colorbar(im, ax=ax)


def curves(ax, data, label_col, title):
    for label in np.unique(data[label_col]):
        sel = data[label_col] == label
        cp, m, se = data["checkpoint"][sel], data["mean_ip"][sel], data["stderr_ip"][sel]
        name = f"{label:g}" if isinstance(label, float) else str(label)
        ax.plot(cp, m, label=name)
        ax.fill_between(cp, m - se, m + se, alpha=0.3)
    ax.set_xscale("log")
    ax.set_xlabel("turn")
    ax.set_ylabel("I_p (instantaneous pondered index)")
    ax.set_title(title)
    ax.legend()


def main(argv=None) -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", default="results")
    ap.add_argument("--out", default="figures")
    args = ap.parse_args(argv)
    data_dir, out = Path(args.data), Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    d = load(data_dir / "singlet_grid.csv")
    fig, axes = plt.subplots(1, 3, figsize=(15, 4))
    heatmap(axes[0], d, "theta_1", "theta_2", "exp_total", "singlet: expected total reward")
    heatmap(axes[1], d, "theta_1", "theta_2", "exp_jain", "singlet: Jain index")
    heatmap(axes[2], d, "theta_1", "theta_2", "mc_ip", "singlet: Monte Carlo I_p")
    fig.savefig(out / "singlet_grid.png", dpi=120, bbox_inches="tight")

    fig, ax = plt.subplots(figsize=(6, 4))
    curves(ax, load(data_dir / "realign_n2.csv"), "policy", "N=2 realignment")
    fig.savefig(out / "realign_n2.png", dpi=120, bbox_inches="tight")

    d = load(data_dir / "psi3_grid.csv")
    sl = d["theta_3"] == 0
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    heatmap(axes[0], {k: v[sl] for k, v in d.items()}, "theta_1", "theta_2", "exp_ip", "psi3, theta_3 = 0: I_p")
    heatmap(axes[1], {k: v[sl] for k, v in d.items()}, "theta_1", "theta_2", "conflict_prob", "psi3, theta_3 = 0: conflict")
    fig.savefig(out / "psi3_slice.png", dpi=120, bbox_inches="tight")

    fig, axes = plt.subplots(1, 3, figsize=(15, 4))
    curves(axes[0], load(data_dir / "realign_n3.csv"), "n_active", "N=3 realignment by active players")
    for ax, name in zip(axes[1:], ("stability_1active.csv", "stability_2active.csv")):
        s = load(data_dir / name)
        for j in (1, 2, 3):
            role = "active" if s[f"active_{j}"][0] else "passive"
            ax.plot(s["checkpoint"], s[f"reward_{j}"], label=f"player {j} ({role})")
        ax.set_xscale("log")
        ax.set_xlabel("turn")
        ax.set_ylabel("expected reward per turn")
        ax.legend()
    fig.savefig(out / "realign_n3.png", dpi=120, bbox_inches="tight")

    for name in ["s4_grid", "a4_phi0_grid", "a4_phi90_grid", "a4_phi180_grid"]:
        d = load(data_dir / f"{name}.csv")
        sl = d["theta_3"] == 0
        fig, ax = plt.subplots(figsize=(5, 4))
        heatmap(ax, {k: v[sl] for k, v in d.items()}, "theta_1", "theta_2", "exp_ip", f"{name}: I_p, theta_3 = theta_4 = 0")
        fig.savefig(out / f"{name}.png", dpi=120, bbox_inches="tight")
    plt.close("all")
    print(f"figures in {out}")


if __name__ == "__main__":
    main()
