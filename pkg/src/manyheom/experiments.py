"""Experiment implementations behind the batch runner.

Each experiment consumes a resolved config (see config.py), runs the
required propagations, and writes CSV time series plus JSON metadata into
its output directory.  CSV bodies are deterministic: full double precision,
scientific notation, no timestamps.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from . import bbgky, observables as obs
from . import qlinalg as ql
from .bath import (
    LorentzianDensity,
    SuperohmicDensity,
    TabulatedDensity,
    bcf_from_spectral_density,
    composite_phonon_density,
    export_tabulated_csv,
    fit_exponentials,
)
from .config import config_hash
from .models import (
    HubbardOracle,
    HubbardParams,
    LasingParams,
    PotentialSchedule,
    TavisCummingsParams,
    build_cavity_hubbard,
    build_incoherent_lasing_model,
    build_lasing_model,
    build_tavis_cummings,
    dicke_lindblad_oracle,
    effective_density_from_table,
    fit_vibrational_bath,
    ground_state_orbitals,
    mean_field_baseline,
    relax_to_steady_state,
    toy_resonance_model,
)
from .models.lasing import DEFAULT_MODE_TABLE
from .models.hubbard import hopping_matrix, site_positions

FMT = "%.17e"


def write_csv(path, header, columns):
    columns = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([FMT % v for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    return header, data


class RunMetadata:
    """Written with status 'running' before the work, finalized after."""

    def __init__(self, out_dir, resolved):
        from . import __version__

        self.path = Path(out_dir) / "metadata.json"
        self.record = {
            "artifact_version": __version__,
            "experiment": resolved["experiment"],
            "config_hash": config_hash(resolved),
            "status": "running",
            "wall_time_s": None,
            "diagnostics": {},
        }
        self._t0 = time.monotonic()
        self.flush()

    def flush(self):
        self.path.write_text(json.dumps(self.record, indent=2, sort_keys=True))

    def finalize(self, **diagnostics):
        self.record["diagnostics"].update(diagnostics)
        self.record["status"] = "completed"
        self.record["wall_time_s"] = time.monotonic() - self._t0
        self.flush()


def prepare_dir(resolved, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_echo.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True)
    )
    return out, RunMetadata(out, resolved)


# ---------------------------------------------------------------------------
# Tavis-Cummings experiments


def _tc_params(mc):
    return TavisCummingsParams(
        n=mc["n"],
        delta_z=mc["delta_z"],
        delta_c=mc["delta_c"],
        omega_drive=mc["omega_drive"],
        g=mc["g"],
        kappa=mc["kappa"],
    )


def _tc_reduced_run(resolved, initial):
    mc, nc = resolved["model"], resolved["numerics"]
    p = _tc_params(mc)
    model = build_tavis_cummings(p)
    times = np.linspace(0.0, nc["t_end"], nc["n_samples"])
    if initial == "plus_x":
        plus = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
        st = bbgky.initial_state_factory("product", model, nc["depth"], rho=plus)
    else:
        st = bbgky.initial_state_factory("fully_excited", model, nc["depth"])
    snaps, _ = bbgky.propagate_reduced(
        model,
        st,
        (0.0, nc["t_end"]),
        times,
        atol=nc["abs_tol"],
        rtol=nc["rel_tol"],
        collect_reports=False,
    )
    return p, times, snaps


def _tc_spin_series(snaps, n):
    mom = []
    for s in snaps:
        f1 = bbgky.contract_F1(s.physical, n)
        mom.append(obs.spin_moments_from_rdm(f1, s.physical, n))
    return mom


def _xi2_series(moments, n):
    out = []
    for m in moments:
        try:
            out.append(obs.spin_squeezing(m, n).xi2)
        except ValueError:
            out.append(np.nan)
    return np.array(out)


def run_tc_squeezing(resolved, out_dir):
    out, meta = prepare_dir(resolved, out_dir)
    mc, nc, oc = resolved["model"], resolved["numerics"], resolved["oracle"]
    p, times, snaps = _tc_reduced_run(resolved, mc["initial"])
    moments = _tc_spin_series(snaps, p.n)
    header = ["t", "Sx", "Sy", "Sz", "xi2"]
    cols = [
        times,
        [m.mean[0] for m in moments],
        [m.mean[1] for m in moments],
        [m.mean[2] for m in moments],
        _xi2_series(moments, p.n),
    ]
    diagnostics = {}
    if oc["enabled"]:
        oracle = dicke_lindblad_oracle(
            p,
            oc["photon_cutoff"],
            (0.0, nc["t_end"]),
            times,
            initial=mc["initial"],
            atol=nc["abs_tol"],
            rtol=nc["rel_tol"],
        )
        header += ["Sx_oracle", "Sy_oracle", "Sz_oracle", "xi2_oracle"]
        cols += [
            [m.mean[0] for m in oracle.moments],
            [m.mean[1] for m in oracle.moments],
            [m.mean[2] for m in oracle.moments],
            _xi2_series(oracle.moments, p.n),
        ]
        diagnostics["oracle_cutoff"] = oracle.cutoff
    if oc["reduced_n"] >= 3:
        corr3 = _tc_corr3_series(p, oc["reduced_n"], times, nc, mc["initial"])
        header.append("corr3")
        cols.append(corr3)
    write_csv(out / "timeseries.csv", header, cols)
    meta.finalize(depth=nc["depth"], **diagnostics)
    return 0


def _tc_corr3_series(p, n_red, times, nc, initial):
    """Exact few-emitter run (full hierarchy) feeding the three-body
    correlation diagnostic; the collective coupling g sqrt(N) is held
    fixed when reducing N."""
    from . import heom_full
    from .bath import ExponentialBathModel

    g_red = p.g * np.sqrt(p.n / n_red)
    eye = np.eye(2)
    sp = ql.spin_ops()

    def op_sum(op):
        out = 0
        for i in range(n_red):
            ops = [eye] * n_red
            ops[i] = op
            out = out + ql.kron_all(*ops)
        return out

    h = p.delta_z * op_sum(sp["z"]) + p.omega_drive * op_sum(sp["x"])
    bm = ExponentialBathModel([(g_red**2, p.kappa + 1j * p.delta_c)])
    hm = heom_full.HeomModel(h_sys=h, baths=[(bm, op_sum(sp["-"]))])
    dim = 2**n_red
    if initial == "plus_x":
        vec = np.ones(dim, dtype=complex) / np.sqrt(dim)
    else:
        vec = np.zeros(dim, dtype=complex)
        vec[0] = 1.0
    rho0 = np.outer(vec, vec.conj())
    snaps = heom_full.propagate(
        hm, rho0, (times[0], times[-1]), times, depth=5,
        atol=nc["abs_tol"], rtol=nc["rel_tol"],
    )
    dims = [2] * n_red
    corr = []
    for s in snaps:
        rho3 = s.physical
        f12 = n_red * (n_red - 1) * ql.partial_trace(rho3, dims, keep=[0, 1])
        f1 = bbgky.contract_F1(f12, n_red)
        corr.append(obs.three_body_correlation_norm(rho3, f1, f12, n_red))
    return np.array(corr)


def run_tc_superradiance(resolved, out_dir):
    out, meta = prepare_dir(resolved, out_dir)
    mc, nc, oc = resolved["model"], resolved["numerics"], resolved["oracle"]
    p, times, snaps = _tc_reduced_run(resolved, "fully_excited")
    moments = _tc_spin_series(snaps, p.n)
    photon = np.array(
        [obs.photon_number(s, 0, p.g**2) for s in snaps]
    )
    header = ["t", "Sz", "photon"]
    cols = [times, [m.mean[2] for m in moments], photon]
    diagnostics = {"peak_photon": float(photon.max())}
    if oc["enabled"]:
        oracle = dicke_lindblad_oracle(
            p, oc["photon_cutoff"], (0.0, nc["t_end"]), times,
            initial="fully_excited", atol=nc["abs_tol"], rtol=nc["rel_tol"],
        )
        header += ["Sz_oracle", "photon_oracle"]
        cols += [oracle.s_z, oracle.photon]
        diagnostics["peak_photon_oracle"] = float(oracle.photon.max())
    if resolved["mean_field"]["enabled"]:
        mf = mean_field_baseline(
            p, (0.0, nc["t_end"]), times, initial="fully_excited"
        )
        header += ["Sx_mf", "Sy_mf", "Sz_mf"]
        cols += [mf.s_x, mf.s_y, mf.s_z]
    write_csv(out / "timeseries.csv", header, cols)
    meta.finalize(depth=nc["depth"], **diagnostics)
    return 0


# ---------------------------------------------------------------------------
# lasing experiments


def _lasing_drives(nc, e_max):
    return np.linspace(0.0, nc["drive_max_frac"] * e_max, nc["n_drives"] + 1)[1:]


def run_lasing_sweep(resolved, out_dir):
    out, meta = prepare_dir(resolved, out_dir)
    mc, nc = resolved["model"], resolved["numerics"]
    base = LasingParams(
        n=mc["n"],
        e_drive=1.0,
        omega0=mc["omega0"],
        gamma_down=None if mc["gamma_down"] < 0 else mc["gamma_down"],
        n_exp=mc["n_exp"],
    )
    table = mc["mode_table"] or None
    j_eff = effective_density_from_table(base, table_path=table)
    if mc["omit_band_hi"] > mc["omit_band_lo"]:
        vals = j_eff.values.copy()
        band = (j_eff.omega >= mc["omit_band_lo"]) & (
            j_eff.omega <= mc["omit_band_hi"]
        )
        vals[band] = 0.0
        j_eff = TabulatedDensity(j_eff.omega, vals)
    export_tabulated_csv(j_eff, out / "jeff.csv")
    vib, residual = fit_vibrational_bath(
        base, j_eff, tau_max=nc["fit_tau_max"], n_samples=nc["fit_samples"]
    )
    drives = _lasing_drives(nc, base.e_max)
    rows = []
    warm = None
    for e_d in drives:
        params = LasingParams(
            n=mc["n"],
            e_drive=float(e_d),
            omega0=mc["omega0"],
            gamma_down=None if mc["gamma_down"] < 0 else mc["gamma_down"],
            n_exp=mc["n_exp"],
        )
        model = build_lasing_model(params, vib)
        res = relax_to_steady_state(
            model,
            nc["depth"],
            window=10.0 / (params.kappa_factor * params.e_drive),
            initial=warm,
            rel_change=nc["rel_change"],
            max_windows=nc["max_windows"],
            atol=nc["abs_tol"],
            rtol=nc["rel_tol"],
        )
        warm = res.state
        rows.append(
            (e_d, res.p_excited, res.photon, float(res.converged), res.t_reached)
        )
    write_csv(
        out / "summary.csv",
        ["e_drive", "p_e", "photon", "converged", "t_steady"],
        list(zip(*rows)),
    )
    meta.finalize(fit_residual=residual, depth=nc["depth"],
                  gamma_down=base.gamma_down)
    return 0


def run_lasing_incoherent_sweep(resolved, out_dir):
    out, meta = prepare_dir(resolved, out_dir)
    mc, nc = resolved["model"], resolved["numerics"]
    e_max = 0.1 * mc["omega0"]
    drives = _lasing_drives(nc, e_max)
    rows = []
    for e_d in drives:
        params = LasingParams(
            n=mc["n"],
            e_drive=float(e_d),
            omega0=mc["omega0"],
            gamma_down=None if mc["gamma_down"] < 0 else mc["gamma_down"],
        )
        model = build_incoherent_lasing_model(params)
        res = relax_to_steady_state(
            model,
            nc["depth"],
            window=10.0 / (params.kappa_factor * params.e_drive),
            rel_change=nc["rel_change"],
            max_windows=nc["max_windows"],
            atol=nc["abs_tol"],
            rtol=nc["rel_tol"],
        )
        rows.append(
            (e_d, res.p_excited, res.photon, float(res.converged), res.t_reached)
        )
    write_csv(
        out / "summary.csv",
        ["e_drive", "p_e", "photon", "converged", "t_steady"],
        list(zip(*rows)),
    )
    meta.finalize(depth=nc["depth"])
    return 0


# ---------------------------------------------------------------------------
# Hubbard experiments


def _hubbard_params(mc, schedule):
    return HubbardParams(
        n_sites=mc["n_sites"],
        u=mc["u"],
        cavity_g=mc["cavity_g"],
        cavity_omega=mc["cavity_omega"],
        cavity_kappa=mc["cavity_kappa"],
        spacing=mc["spacing"],
        schedule=schedule,
    )


def _hubbard_initial(mc, p, model, depth):
    if mc["initial"] == "ground":
        orbs = ground_state_orbitals(p)
    else:
        orbs = [int(x) for x in mc["initial"].split(",")]
    st = bbgky.initial_state_factory("slater", model, depth, orbitals=orbs)
    return orbs, st


def _run_hubbard(resolved, out_dir, schedule, extra_meta=None, phonon=None):
    out, meta = prepare_dir(resolved, out_dir)
    mc, nc, oc = resolved["model"], resolved["numerics"], resolved["oracle"]
    p = _hubbard_params(mc, schedule)
    model = build_cavity_hubbard(p, phonon_bath=phonon)
    orbs, st = _hubbard_initial(mc, p, model, nc["depth"])
    times = np.linspace(0.0, nc["t_end"], nc["n_samples"])
    snaps, reports = bbgky.propagate_reduced(
        model,
        st,
        (0.0, nc["t_end"]),
        times,
        atol=nc["abs_tol"],
        rtol=nc["rel_tol"],
    )
    mus, occs = [], []
    for s in snaps:
        f1 = bbgky.contract_F1(s.physical, p.n_electrons)
        mu, occ = obs.dipole_and_occupations(f1, p.n_sites, p.spacing)
        mus.append(mu)
        occs.append(occ)
    occs = np.array(occs)
    header = (
        ["t", "mu"]
        + [f"n{i}" for i in range(p.n_sites)]
        + ["min_eig_F1", "trace_defect", "photon"]
    )
    photon = np.array(
        [obs.photon_number(s, 0, p.cavity_g**2) for s in snaps]
        if nc["depth"] >= 2
        else np.zeros(len(snaps))
    )
    cols = (
        [times, mus]
        + [occs[:, i] for i in range(p.n_sites)]
        + [
            [r.min_eig_f1 for r in reports],
            [r.trace_defect for r in reports],
            photon,
        ]
    )
    diagnostics = {"min_eig_f1": float(min(r.min_eig_f1 for r in reports))}
    if oc["enabled"]:
        oracle = HubbardOracle(p, photon_cutoff=oc["photon_cutoff"])
        res = oracle.run(orbs, (0.0, nc["t_end"]), times,
                         atol=nc["abs_tol"], rtol=nc["rel_tol"])
        header += ["mu_oracle"] + [f"n{i}_oracle" for i in range(p.n_sites)] + [
            "photon_oracle"
        ]
        cols += [res.dipole] + [
            res.occupations[:, i] for i in range(p.n_sites)
        ] + [res.photon]
        scale = max(np.max(np.abs(res.dipole)), 1e-12)
        diagnostics["max_dipole_dev_rel"] = float(
            np.max(np.abs(np.array(mus) - res.dipole)) / scale
        )
    write_csv(out / "timeseries.csv", header, cols)
    if schedule is not None:
        write_csv(
            out / "schedule.csv",
            ["switch_time"],
            [np.array(schedule.all_switch_times)],
        )
        (out / "schedule.json").write_text(
            json.dumps(
                {
                    "kind": schedule.kind,
                    "amplitudes": list(schedule.amplitudes),
                    "switch_times": list(schedule.all_switch_times),
                },
                indent=2,
            )
        )
    meta.finalize(depth=nc["depth"], **(extra_meta or {}), **diagnostics)
    return 0


def run_hubbard_quench(resolved, out_dir):
    mc = resolved["model"]
    amps = [
        mc["quench_scale"] / (5.0 * (i + 1)) for i in range(mc["n_sites"])
    ]
    schedule = PotentialSchedule(amplitudes=amps, kind="step", t_on=0.0)
    return _run_hubbard(resolved, out_dir, schedule)


def run_hubbard_telegraph(resolved, out_dir):
    mc, nc = resolved["model"], resolved["numerics"]
    amps = [
        mc["amplitude_scale"] / (5.0 * (i + 1)) for i in range(mc["n_sites"])
    ]
    schedule = PotentialSchedule(
        amplitudes=amps,
        kind="telegraph",
        seed=resolved["seed"],
        rate=mc["rate"],
        t_max=nc["t_end"],
    )
    return _run_hubbard(
        resolved, out_dir, schedule,
        extra_meta={"n_switches": len(schedule.switch_times)},
    )


def run_hubbard_phonon(resolved, out_dir):
    mc, pc = resolved["model"], resolved["phonon"]
    background = SuperohmicDensity(pc["background_amp"], pc["background_cutoff"])
    peaks = [
        LorentzianDensity(w, c, hw)
        for c, hw, w in zip(
            pc["peak_centers"], pc["peak_widths"], pc["peak_weights"]
        )
    ]
    j_phon = composite_phonon_density(pc["total_coupling_sq"], background, peaks)
    bcf = bcf_from_spectral_density(
        j_phon, pc["fit_tau_max"], pc["fit_samples"]
    )
    bath_model, residual = fit_exponentials(bcf, pc["n_exp"])
    amps = [
        mc["quench_scale"] / (5.0 * (i + 1)) for i in range(mc["n_sites"])
    ]
    schedule = PotentialSchedule(amplitudes=amps, kind="step", t_on=0.0)
    return _run_hubbard(
        resolved, out_dir, schedule,
        extra_meta={"phonon_fit_residual": residual},
        phonon=bath_model,
    )


# ---------------------------------------------------------------------------
# toy resonance and bath fitting


def run_toy_resonance(resolved, out_dir):
    out, meta = prepare_dir(resolved, out_dir)
    mc, nc = resolved["model"], resolved["numerics"]
    rows = []
    for det in mc["detunings"]:
        res = toy_resonance_model(
            mc["e_drive"],
            2.0 * mc["e_drive"] + det,
            mc["g_vib"],
            boson_cutoff=mc["boson_cutoff"],
            gamma_factor=mc["gamma_factor"],
            atol=nc["abs_tol"],
            rtol=nc["rel_tol"],
        )
        rows.append((det, res.b_mag, res.b_mean.real, res.b_mean.imag))
    write_csv(
        out / "summary.csv",
        ["detuning", "b_abs", "b_rot_re", "b_rot_im"],
        list(zip(*rows)),
    )
    meta.finalize()
    return 0


def run_bath_fit(resolved, out_dir):
    out, meta = prepare_dir(resolved, out_dir)
    mc = resolved["model"]
    params = LasingParams(
        n=2,
        e_drive=1.0,
        broadening_amp=mc["broadening_amp"],
        broadening_cutoff=mc["broadening_cutoff"],
        n_exp=mc["n_exp"],
    )
    grid = np.linspace(1.0, mc["grid_max"], mc["grid_points"])
    j_eff = effective_density_from_table(
        params, table_path=mc["mode_table"] or None, grid=grid
    )
    export_tabulated_csv(j_eff, out / "jeff.csv")
    bcf = bcf_from_spectral_density(j_eff, mc["tau_max"], mc["n_samples"])
    model, residual = fit_exponentials(bcf, mc["n_exp"])
    fitted = model.evaluate(bcf.tau)
    write_csv(
        out / "bcf.csv",
        ["tau", "alpha_re", "alpha_im", "fit_re", "fit_im"],
        [bcf.tau, bcf.values.real, bcf.values.imag, fitted.real, fitted.imag],
    )
    write_csv(
        out / "fit.csv",
        ["G_re", "G_im", "W_re", "W_im"],
        [
            [g.real for g, w in model.terms],
            [g.imag for g, w in model.terms],
            [w.real for g, w in model.terms],
            [w.imag for g, w in model.terms],
        ],
    )
    meta.finalize(residual=residual)
    return 0


RUNNERS = {
    "tc_squeezing": run_tc_squeezing,
    "tc_superradiance": run_tc_superradiance,
    "lasing_sweep": run_lasing_sweep,
    "lasing_incoherent_sweep": run_lasing_incoherent_sweep,
    "hubbard_quench": run_hubbard_quench,
    "hubbard_telegraph": run_hubbard_telegraph,
    "hubbard_phonon": run_hubbard_phonon,
    "toy_resonance": run_toy_resonance,
    "bath_fit": run_bath_fit,
}
