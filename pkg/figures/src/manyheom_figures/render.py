"""Figure rendering from persisted CSV outputs.

Reads only the documented CSV schemas (docs/outputs.md in the simulation
package); no in-process coupling to the solver.  Rendering is
deterministic: fixed style, fixed sizes, data-driven content only, and it
never mutates its inputs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update(
    {
        "figure.dpi": 110,
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "savefig.bbox": "tight",
    }
)


class SchemaError(ValueError):
    pass


def load_table(path, required):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"missing input file {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path} is empty")
    header = rows[0]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(
            f"{path} lacks required columns {missing}; found {header}"
        )
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    return {name: data[:, k] for k, name in enumerate(header)}


def _subdirs_with(data_dir, filename):
    root = Path(data_dir)
    out = sorted(
        d for d in root.iterdir() if d.is_dir() and (d / filename).exists()
    )
    if not out:
        raise SchemaError(f"no subdirectories of {root} contain {filename}")
    return out


def fig1a(data_dir, out_path):
    t = load_table(
        Path(data_dir) / "timeseries.csv", ["t", "Sx", "Sy", "Sz", "xi2"]
    )
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    for key, color in (("Sx", "C0"), ("Sy", "C1"), ("Sz", "C2")):
        ax.plot(t["t"], t[key], color=color, label=key)
        oracle = key + "_oracle"
        if oracle in t:
            ax.plot(t["t"], t[oracle], "--", color="k", lw=0.8)
    ax.set_xlabel("t [1/kappa]")
    ax.set_ylabel("collective spin")
    ax.legend(loc="upper right", fontsize=7)
    inset = fig.add_axes([0.2, 0.22, 0.25, 0.25])
    inset.plot(t["t"], t["xi2"], "C3")
    if "xi2_oracle" in t:
        inset.plot(t["t"], t["xi2_oracle"], "k--", lw=0.8)
    inset.axhline(1.0, color="gray", lw=0.6)
    inset.set_title("xi^2", fontsize=7)
    inset.tick_params(labelsize=6)
    if "corr3" in t:
        inset2 = fig.add_axes([0.55, 0.22, 0.25, 0.25])
        inset2.plot(t["t"], t["corr3"], "C4")
        inset2.set_title("3-body error", fontsize=7)
        inset2.tick_params(labelsize=6)
    fig.savefig(out_path)
    plt.close(fig)


def fig1c(data_dir, out_path):
    t = load_table(Path(data_dir) / "timeseries.csv", ["t", "Sz", "photon"])
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    ax.plot(t["t"], t["Sz"], "C0", label="reduced hierarchy")
    if "Sz_oracle" in t:
        ax.plot(t["t"], t["Sz_oracle"], "k--", lw=0.9, label="exact")
    if "Sz_mf" in t:
        ax.plot(t["t"], t["Sz_mf"], "C1", lw=0.9, label="mean field")
    ax.set_xlabel("t [1/kappa]")
    ax.set_ylabel("S_z")
    ax.legend(fontsize=7)
    fig.savefig(out_path)
    plt.close(fig)


def fig1d(data_dir, out_path):
    dirs = _subdirs_with(data_dir, "timeseries.csv")
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    peaks = []
    for d in dirs:
        t = load_table(d / "timeseries.csv", ["t", "photon"])
        cfg = json.loads((d / "config_echo.json").read_text())
        n = cfg["model"]["n"]
        ax.plot(t["t"], t["photon"] / n**2, label=f"N = {n}")
        peaks.append((n, t["photon"].max()))
    ax.set_xlabel("t [1/kappa]")
    ax.set_ylabel("photon / N^2")
    ax.legend(fontsize=7)
    peaks.sort()
    inset = fig.add_axes([0.58, 0.55, 0.28, 0.3])
    ns = [p[0] for p in peaks]
    vals = [p[1] for p in peaks]
    inset.loglog(ns, vals, "o-C3", ms=3)
    inset.set_title("peak photon", fontsize=7)
    inset.tick_params(labelsize=6)
    fig.savefig(out_path)
    plt.close(fig)


def fig2d(data_dir, out_path):
    j = load_table(Path(data_dir) / "jeff.csv", ["omega", "J"])
    b = load_table(
        Path(data_dir) / "bcf.csv",
        ["tau", "alpha_re", "alpha_im", "fit_re", "fit_im"],
    )
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(j["omega"], j["J"], "C2")
    ax.set_xlabel("omega [cm^-1]")
    ax.set_ylabel("J_eff")
    inset = fig.add_axes([0.52, 0.5, 0.35, 0.35])
    inset.plot(b["tau"], b["alpha_re"], "C0", lw=0.9, label="Re alpha")
    inset.plot(b["tau"], b["fit_re"], "k--", lw=0.8)
    inset.plot(b["tau"], b["alpha_im"], "C1", lw=0.9, label="Im alpha")
    inset.plot(b["tau"], b["fit_im"], "k:", lw=0.8)
    inset.legend(fontsize=6)
    inset.tick_params(labelsize=6)
    fig.savefig(out_path)
    plt.close(fig)


def fig3ab(data_dir, out_path):
    full = load_table(
        Path(data_dir) / "full/summary.csv", ["e_drive", "p_e", "photon"]
    )
    inco = load_table(
        Path(data_dir) / "incoherent/summary.csv", ["e_drive", "p_e", "photon"]
    )
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.4, 3.1))
    ax1.plot(full["e_drive"], full["p_e"], "o-C1", ms=3, label="full model")
    ax1.plot(inco["e_drive"], inco["p_e"], "x--k", ms=4, label="incoherent")
    ax1.set_xlabel("E_d [cm^-1]")
    ax1.set_ylabel("p_e")
    ax1.legend(fontsize=7)
    ax2.plot(full["e_drive"], full["photon"], "o-C1", ms=3)
    ax2.plot(inco["e_drive"], inco["photon"], "x--k", ms=4)
    ax2.set_xlabel("E_d [cm^-1]")
    ax2.set_ylabel("photon")
    fig.savefig(out_path)
    plt.close(fig)


def _hubbard_axes(data_dir, out_path, with_inset=True):
    path = Path(data_dir) / "timeseries.csv"
    t = load_table(path, ["t", "mu", "n0", "min_eig_F1"])
    occ_cols = sorted(
        c for c in t if c.startswith("n") and c[1:].isdigit()
    )
    fig, ax = plt.subplots(figsize=(5.4, 3.4))
    ax.plot(t["t"], t["mu"], "C0", label="dipole")
    if "mu_oracle" in t:
        ax.plot(t["t"], t["mu_oracle"], "k--", lw=0.9, label="exact")
    ax.set_xlabel("t [1/J]")
    ax.set_ylabel("dipole")
    ax.legend(fontsize=7, loc="upper right")
    if with_inset:
        inset = fig.add_axes([0.18, 0.2, 0.26, 0.26])
        for c in occ_cols:
            inset.plot(t["t"], t[c], lw=0.7)
        inset.set_title("occupations", fontsize=7)
        inset.tick_params(labelsize=6)
        inset2 = fig.add_axes([0.56, 0.2, 0.26, 0.26])
        inset2.plot(t["t"], t["min_eig_F1"], "C3", lw=0.8)
        inset2.axhline(0.0, color="gray", lw=0.6)
        inset2.set_title("min eig F1", fontsize=7)
        inset2.tick_params(labelsize=6)
    fig.savefig(out_path)
    plt.close(fig)


def fig_quench(data_dir, out_path):
    _hubbard_axes(data_dir, out_path)


def fig_telegraph(data_dir, out_path):
    _hubbard_axes(data_dir, out_path)


def fig_phonon(data_dir, out_path):
    w = load_table(Path(data_dir) / "with/timeseries.csv", ["t", "mu"])
    wo = load_table(Path(data_dir) / "without/timeseries.csv", ["t", "mu"])
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(w["t"], w["mu"], "C0", label="with phonon bath")
    ax.plot(wo["t"], wo["mu"], "--", color="gray", label="without")
    ax.set_xlabel("t [1/J]")
    ax.set_ylabel("dipole")
    ax.legend(fontsize=7)
    fig.savefig(out_path)
    plt.close(fig)


def figG(data_dir, out_path):
    t = load_table(Path(data_dir) / "summary.csv", ["detuning", "b_abs"])
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.loglog(t["detuning"], t["b_abs"], "o-C0", ms=3)
    ax.set_xlabel("detuning")
    ax.set_ylabel("|<b>|")
    fig.savefig(out_path)
    plt.close(fig)


FIGURES = {
    "fig1a": fig1a,
    "fig1c": fig1c,
    "fig1d": fig1d,
    "fig2d": fig2d,
    "fig3ab": fig3ab,
    "fig_quench": fig_quench,
    "fig_telegraph": fig_telegraph,
    "fig_phonon": fig_phonon,
    "figG": figG,
}


def render(figure_id, data_dir, out_path):
    if figure_id not in FIGURES:
        raise SchemaError(
            f"unknown figure id {figure_id!r}; available: {sorted(FIGURES)}"
        )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    FIGURES[figure_id](data_dir, out_path)
    return out_path
