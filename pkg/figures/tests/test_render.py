"""Renderer tests against synthetic data matching the documented schemas.

These run without the simulation package installed: the fixtures write the
CSVs directly.
"""

import json

import numpy as np
import pytest

from manyheom_figures import FIGURES, SchemaError, render


def write_csv(path, header, columns):
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = ["".join(",".join(header))]
    rows = [",".join(header)]
    for vals in zip(*columns):
        rows.append(",".join("%.17e" % v for v in vals))
    path.write_text("\n".join(rows) + "\n")


@pytest.fixture
def benchmark_dir(tmp_path):
    """A completed benchmark data directory covering every figure id."""
    t = np.linspace(0, 10, 41)
    root = tmp_path / "data"

    sq = root / "tc_squeezing"
    write_csv(
        sq / "timeseries.csv",
        ["t", "Sx", "Sy", "Sz", "xi2", "Sx_oracle", "Sy_oracle", "Sz_oracle",
         "xi2_oracle", "corr3"],
        [t, 50 * np.cos(t), 50 * np.sin(t), 50 - t, 1 - 0.01 * t,
         50 * np.cos(t), 50 * np.sin(t), 50 - t, 1 - 0.01 * t, 0.001 * t],
    )

    sr = root / "tc_superradiance"
    write_csv(
        sr / "timeseries.csv",
        ["t", "Sz", "photon", "Sz_oracle", "photon_oracle",
         "Sx_mf", "Sy_mf", "Sz_mf"],
        [t, 20 - 2 * t, np.exp(-((t - 3) ** 2)), 20 - 2 * t,
         np.exp(-((t - 3) ** 2)), 0 * t, 0 * t, 20 + 0 * t],
    )

    for k, n in enumerate((20, 40)):
        d = root / "superradiance_scan" / f"point_{k:03d}"
        write_csv(
            d / "timeseries.csv",
            ["t", "Sz", "photon"],
            [t, n - t, n**2 * 1e-3 * np.exp(-((t - 3) ** 2))],
        )
        (d / "config_echo.json").write_text(json.dumps({"model": {"n": n}}))

    bf = root / "bath_fit"
    om = np.linspace(1, 4000, 200)
    write_csv(bf / "jeff.csv", ["omega", "J"], [om, np.exp(-((om - 1250) / 70) ** 2)])
    tau = np.linspace(0, 0.05, 100)
    write_csv(
        bf / "bcf.csv",
        ["tau", "alpha_re", "alpha_im", "fit_re", "fit_im"],
        [tau, np.cos(1250 * tau), -np.sin(1250 * tau),
         np.cos(1250 * tau), -np.sin(1250 * tau)],
    )

    las = root / "lasing"
    drives = np.linspace(100, 2000, 20)
    for sub in ("full", "incoherent"):
        write_csv(
            las / sub / "summary.csv",
            ["e_drive", "p_e", "photon", "converged", "t_steady"],
            [drives, 0.5 * drives / (drives + 500), 0.01 * drives / 2000,
             np.ones(20), 0.1 * np.ones(20)],
        )

    hub = root / "hubbard_quench"
    occ = [1 + 0.3 * np.sin(t + i) for i in range(4)]
    write_csv(
        hub / "timeseries.csv",
        ["t", "mu"] + [f"n{i}" for i in range(4)]
        + ["min_eig_F1", "trace_defect", "photon", "mu_oracle"]
        + [f"n{i}_oracle" for i in range(4)] + ["photon_oracle"],
        [t, np.sin(t)] + occ + [-0.001 * t, 0.01 * t, 0.001 * t, np.sin(t)]
        + occ + [0.001 * t],
    )

    ph = root / "hubbard_phonon"
    write_csv(
        ph / "with/timeseries.csv",
        ["t", "mu", "n0", "min_eig_F1"],
        [t, np.sin(t) * np.exp(-0.1 * t), 1 + 0 * t, 0 * t],
    )
    write_csv(
        ph / "without/timeseries.csv",
        ["t", "mu", "n0", "min_eig_F1"],
        [t, np.sin(t), 1 + 0 * t, 0 * t],
    )

    toy = root / "toy_resonance"
    det = np.geomspace(0.03, 0.3, 9)
    write_csv(
        toy / "summary.csv",
        ["detuning", "b_abs", "b_rot_re", "b_rot_im"],
        [det, 0.05 / det, 0.05 / det, 0 * det],
    )
    return root


FIGURE_INPUTS = {
    "fig1a": "tc_squeezing",
    "fig1c": "tc_superradiance",
    "fig1d": "superradiance_scan",
    "fig2d": "bath_fit",
    "fig3ab": "lasing",
    "fig_quench": "hubbard_quench",
    "fig_telegraph": "hubbard_quench",
    "fig_phonon": "hubbard_phonon",
    "figG": "toy_resonance",
}


def test_every_figure_id_renders(benchmark_dir, tmp_path):
    assert set(FIGURE_INPUTS) == set(FIGURES)
    for fid, sub in FIGURE_INPUTS.items():
        out = tmp_path / f"{fid}.png"
        render(fid, benchmark_dir / sub, out)
        assert out.exists() and out.stat().st_size > 2000


def test_render_idempotent_and_inputs_untouched(benchmark_dir, tmp_path):
    src = benchmark_dir / "tc_squeezing/timeseries.csv"
    before = src.read_bytes()
    out1 = tmp_path / "a.png"
    out2 = tmp_path / "b.png"
    render("fig1a", benchmark_dir / "tc_squeezing", out1)
    render("fig1a", benchmark_dir / "tc_squeezing", out2)
    assert src.read_bytes() == before
    assert out1.read_bytes() == out2.read_bytes()


def test_schema_drift_fails_loudly(benchmark_dir, tmp_path):
    # remove the xi2 column
    path = benchmark_dir / "tc_squeezing/timeseries.csv"
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    keep = [i for i, h in enumerate(header) if h != "xi2"]
    new = [",".join(header[i] for i in keep)]
    for line in lines[1:]:
        vals = line.split(",")
        new.append(",".join(vals[i] for i in keep))
    path.write_text("\n".join(new) + "\n")
    with pytest.raises(SchemaError, match="xi2"):
        render("fig1a", benchmark_dir / "tc_squeezing", tmp_path / "x.png")


def test_unknown_figure_and_missing_file(tmp_path):
    with pytest.raises(SchemaError, match="unknown figure"):
        render("fig_nope", tmp_path, tmp_path / "x.png")
    with pytest.raises(SchemaError, match="missing input"):
        render("fig1a", tmp_path, tmp_path / "x.png")


def test_cli_exit_codes(benchmark_dir, tmp_path):
    from manyheom_figures.cli import main

    assert (
        main(
            ["render", "--figure", "figG",
             "--data", str(benchmark_dir / "toy_resonance"),
             "--out", str(tmp_path / "g.png")]
        )
        == 0
    )
    assert (
        main(
            ["render", "--figure", "figG", "--data", str(tmp_path),
             "--out", str(tmp_path / "g2.png")]
        )
        == 2
    )
