"""Render figures from a finished run directory.

Reads the delimited outputs a scenario wrote and saves matplotlib figures
next to them. Kept out of the solver paths on purpose: runs emit only
CSV/JSON, and this module post-processes those files, so any other
plotting tool can consume the same data.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FIG_KW = {"dpi": 160, "bbox_inches": "tight"}


def _read_csv(path):
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    return header, rows


def _column(header, rows, name, cast=float):
    idx = header.index(name)
    out = []
    for row in rows:
        val = row[idx]
        out.append(cast(val) if val != "" else None)
    return out


def _pivot(path, row_key, col_key, value_key):
    header, rows = _read_csv(path)
    rk = _column(header, rows, row_key)
    ck = _column(header, rows, col_key)
    vv = _column(header, rows, value_key)
    row_vals = sorted(set(rk))
    col_vals = sorted(set(ck))
    grid = [[float("nan")] * len(col_vals) for _ in row_vals]
    ri = {v: i for i, v in enumerate(row_vals)}
    ci = {v: i for i, v in enumerate(col_vals)}
    for r, c, v in zip(rk, ck, vv):
        grid[ri[r]][ci[c]] = v
    return row_vals, col_vals, grid


def render_run(run_dir: str) -> list[str]:
    """Render every figure the run's outputs support; returns file paths."""
    meta_path = os.path.join(run_dir, "metadata.json")
    kind = None
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            kind = json.load(fh).get("kind")
    written = []
    if kind == "dmrg" or os.path.exists(os.path.join(run_dir, "sweeps.csv")):
        written += _render_dmrg(run_dir)
    if kind == "tdvp" or os.path.exists(os.path.join(run_dir, "trajectory.csv")):
        written += _render_tdvp(run_dir)
    if kind == "eos" or os.path.exists(os.path.join(run_dir, "eos.csv")):
        written += _render_eos(run_dir)
    return written


def _render_dmrg(run_dir: str) -> list[str]:
    written = []
    path = os.path.join(run_dir, "sweeps.csv")
    if os.path.exists(path):
        header, rows = _read_csv(path)
        sweeps = _column(header, rows, "sweep")
        energy = _column(header, rows, "energy")
        leak = _column(header, rows, "leakage")
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6, 6))
        e_last = energy[-1]
        conv = [max(abs(e - e_last), 1e-16) for e in energy[:-1]]
        ax1.semilogy(sweeps[:-1], conv, "o-")
        ax1.set_ylabel(r"$|E - E_{\rm final}|$")
        if any(x is not None for x in leak):
            ax2.semilogy(
                [s for s, l in zip(sweeps, leak) if l is not None],
                [max(l, 1e-16) for l in leak if l is not None], "s-",
                color="tab:red",
            )
        ax2.set_ylabel("leakage")
        ax2.set_xlabel("sweep")
        out = os.path.join(run_dir, "convergence.png")
        fig.savefig(out, **FIG_KW)
        plt.close(fig)
        written.append(out)
    for suffix in ("", "_q2"):
        path = os.path.join(run_dir, f"entropy{suffix}.csv")
        if os.path.exists(path):
            header, rows = _read_csv(path)
            if "time" in header:
                continue
            bonds = _column(header, rows, "bond")
            ent = _column(header, rows, "entropy")
            fig, ax = plt.subplots(figsize=(6, 3.5))
            ax.plot(bonds, ent, "o-")
            ax.set_xlabel("bond")
            ax.set_ylabel(r"$S_n$")
            out = os.path.join(run_dir, f"entropy_profile{suffix}.png")
            fig.savefig(out, **FIG_KW)
            plt.close(fig)
            written.append(out)
    path = os.path.join(run_dir, "occupation.csv")
    if os.path.exists(path):
        header, rows = _read_csv(path)
        if "time" not in header:
            sites = _column(header, rows, "site")
            dens = _column(header, rows, "density")
            fig, ax = plt.subplots(figsize=(6, 3.5))
            ax.plot(sites, dens, "o-")
            ax.set_xlabel("site")
            ax.set_ylabel(r"$\langle n_x \rangle$")
            ax.set_ylim(-0.05, 1.05)
            out = os.path.join(run_dir, "occupation.png")
            fig.savefig(out, **FIG_KW)
            plt.close(fig)
            written.append(out)
    return written


def _render_tdvp(run_dir: str) -> list[str]:
    written = []
    for suffix in ("", "_q2", "_resumed"):
        traj = os.path.join(run_dir, f"trajectory{suffix}.csv")
        if not os.path.exists(traj):
            continue
        header, rows = _read_csv(traj)
        times = _column(header, rows, "time")
        smax = _column(header, rows, "max_entropy")
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.plot(times, smax, "o-")
        ax.set_xlabel("time")
        ax.set_ylabel(r"max$_n$ $S_n$")
        out = os.path.join(run_dir, f"entropy_growth{suffix}.png")
        fig.savefig(out, **FIG_KW)
        plt.close(fig)
        written.append(out)
        occ = os.path.join(run_dir, f"occupation{suffix}.csv")
        if os.path.exists(occ) and os.path.getsize(occ) > 40:
            tv, xv, grid = _pivot(occ, "time", "site", "density")
            fig, ax = plt.subplots(figsize=(6, 4))
            im = ax.imshow(
                grid, aspect="auto", origin="lower",
                extent=(min(xv) - 0.5, max(xv) + 0.5, min(tv), max(tv)),
                vmin=0.0, vmax=1.0, cmap="viridis",
            )
            fig.colorbar(im, ax=ax, label=r"$\langle n_x \rangle$")
            ax.set_xlabel("site")
            ax.set_ylabel("time")
            out = os.path.join(run_dir, f"occupation_heatmap{suffix}.png")
            fig.savefig(out, **FIG_KW)
            plt.close(fig)
            written.append(out)
        dist = os.path.join(run_dir, f"distances{suffix}.csv")
        if os.path.exists(dist) and os.path.getsize(dist) > 40:
            tv, nv, grid = _pivot(dist, "time", "particle", "mean_distance")
            fig, ax = plt.subplots(figsize=(6, 4))
            im = ax.imshow(
                grid, aspect="auto", origin="lower",
                extent=(min(nv) - 0.5, max(nv) + 0.5, min(tv), max(tv)),
                cmap="magma",
            )
            fig.colorbar(im, ax=ax, label=r"$\langle q_n \rangle$")
            ax.set_xlabel("particle")
            ax.set_ylabel("time")
            out = os.path.join(run_dir, f"distance_heatmap{suffix}.png")
            fig.savefig(out, **FIG_KW)
            plt.close(fig)
            written.append(out)
        ent = os.path.join(run_dir, f"entropy{suffix}.csv")
        if os.path.exists(ent) and os.path.getsize(ent) > 40:
            tv, bv, grid = _pivot(ent, "time", "bond", "entropy")
            fig, ax = plt.subplots(figsize=(6, 4))
            im = ax.imshow(
                grid, aspect="auto", origin="lower",
                extent=(min(bv) - 0.5, max(bv) + 0.5, min(tv), max(tv)),
                cmap="inferno",
            )
            fig.colorbar(im, ax=ax, label=r"$S_n$")
            ax.set_xlabel("bond")
            ax.set_ylabel("time")
            out = os.path.join(run_dir, f"entropy_heatmap{suffix}.png")
            fig.savefig(out, **FIG_KW)
            plt.close(fig)
            written.append(out)
    return written


def _render_eos(run_dir: str) -> list[str]:
    path = os.path.join(run_dir, "eos.csv")
    if not os.path.exists(path):
        return []
    header, rows = _read_csv(path)
    dens = _column(header, rows, "density")
    energy = _column(header, rows, "energy")
    on_hull = _column(header, rows, "on_hull", cast=lambda s: bool(int(s)))
    mu_lo = _column(header, rows, "mu_lo")
    mu_hi = _column(header, rows, "mu_hi")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.8))
    ax1.plot(dens, energy, "o-", label="E(N)")
    hull_d = [d for d, h in zip(dens, on_hull) if h]
    hull_e = [e for e, h in zip(energy, on_hull) if h]
    ax1.plot(hull_d, hull_e, "--", color="tab:red", label="lower hull")
    off_d = [d for d, h in zip(dens, on_hull) if not h]
    off_e = [e for e, h in zip(energy, on_hull) if not h]
    if off_d:
        ax1.plot(off_d, off_e, "x", color="tab:orange", markersize=9,
                 label="off hull")
    ax1.set_xlabel(r"$\rho$")
    ax1.set_ylabel("E")
    ax1.legend()
    # step curve rho(mu): plot each hull interval as a horizontal segment
    finite = [
        abs(m) for m in mu_lo + mu_hi if m is not None and abs(m) != float("inf")
    ]
    span = max(finite) * 1.2 + 1.0 if finite else 1.0
    for d, h, lo, hi in zip(dens, on_hull, mu_lo, mu_hi):
        if not h or lo is None:
            continue
        lo = max(lo, -span)
        hi = min(hi, span)
        ax2.hlines(d, lo, hi, color="tab:blue", lw=2)
    ax2.set_xlabel(r"$\mu$")
    ax2.set_ylabel(r"$\rho$")
    out = os.path.join(run_dir, "eos.png")
    fig.savefig(out, **FIG_KW)
    plt.close(fig)
    return [out]
