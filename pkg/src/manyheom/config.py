"""Strict experiment-config parsing.

Configs are TOML with one table per section; unknown keys are rejected by
name and every default is materialized into the echoed config, so a run
directory always contains the complete parameter record.
"""

from __future__ import annotations

import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    pass


# schema entry: (type, default) -- REQUIRED means no default
REQUIRED = object()

_NUMERICS_COMMON = {
    "depth": (int, REQUIRED),
    "abs_tol": (float, 1e-10),
    "rel_tol": (float, 1e-8),
    "t_end": (float, REQUIRED),
    "n_samples": (int, 201),
}

SCHEMAS = {
    "tc_squeezing": {
        "model": {
            "n": (int, REQUIRED),
            "delta_z": (float, REQUIRED),
            "delta_c": (float, REQUIRED),
            "omega_drive": (float, REQUIRED),
            "g": (float, REQUIRED),
            "kappa": (float, 1.0),
            "initial": (str, "plus_x"),
        },
        "numerics": dict(_NUMERICS_COMMON),
        "oracle": {
            "enabled": (bool, True),
            "photon_cutoff": (int, 6),
            "reduced_n": (int, 0),  # 0 disables the 3-body diagnostic
        },
    },
    "tc_superradiance": {
        "model": {
            "n": (int, REQUIRED),
            "delta_z": (float, REQUIRED),
            "delta_c": (float, REQUIRED),
            "omega_drive": (float, REQUIRED),
            "g": (float, REQUIRED),
            "kappa": (float, 1.0),
        },
        "numerics": dict(_NUMERICS_COMMON),
        "oracle": {
            "enabled": (bool, True),
            "photon_cutoff": (int, 8),
        },
        "mean_field": {"enabled": (bool, False)},
    },
    "lasing_sweep": {
        "model": {
            "n": (int, REQUIRED),
            "n_exp": (int, 5),
            "omega0": (float, 20857.0),
            "gamma_down": (float, -1.0),  # -1: default 0.01 E_max
            "mode_table": (str, ""),
            "omit_band_lo": (float, 0.0),
            "omit_band_hi": (float, 0.0),
        },
        "numerics": {
            "depth": (int, 2),
            "abs_tol": (float, 1e-9),
            "rel_tol": (float, 1e-7),
            "n_drives": (int, 20),
            "drive_max_frac": (float, 1.0),
            "rel_change": (float, 1e-5),
            "max_windows": (int, 60),
            "fit_tau_max": (float, 0.06),
            "fit_samples": (int, 600),
        },
    },
    "lasing_incoherent_sweep": {
        "model": {
            "n": (int, REQUIRED),
            "omega0": (float, 20857.0),
            "gamma_down": (float, -1.0),
        },
        "numerics": {
            "depth": (int, 3),
            "abs_tol": (float, 1e-9),
            "rel_tol": (float, 1e-7),
            "n_drives": (int, 20),
            "drive_max_frac": (float, 1.0),
            "rel_change": (float, 1e-5),
            "max_windows": (int, 60),
        },
    },
    "hubbard_quench": {
        "model": {
            "n_sites": (int, 4),
            "u": (float, 0.1),
            "cavity_g": (float, 0.1),
            "cavity_omega": (float, 0.5),
            "cavity_kappa": (float, 0.2),
            "spacing": (float, 1.0),
            "quench_scale": (float, 1.0),  # V_i = scale / (5 (i+1))
            "initial": (str, "ground"),  # or comma list of spin-orbitals
        },
        "numerics": dict(_NUMERICS_COMMON),
        "oracle": {"enabled": (bool, False), "photon_cutoff": (int, 6)},
    },
    "hubbard_telegraph": {
        "model": {
            "n_sites": (int, 4),
            "u": (float, 0.1),
            "cavity_g": (float, 0.1),
            "cavity_omega": (float, 0.5),
            "cavity_kappa": (float, 0.2),
            "spacing": (float, 1.0),
            "amplitude_scale": (float, 1.0),
            "rate": (float, 0.1),
            "initial": (str, "ground"),
        },
        "numerics": dict(_NUMERICS_COMMON),
        "oracle": {"enabled": (bool, False), "photon_cutoff": (int, 6)},
    },
    "hubbard_phonon": {
        "model": {
            "n_sites": (int, 4),
            "u": (float, 0.1),
            "cavity_g": (float, 0.1),
            "cavity_omega": (float, 0.5),
            "cavity_kappa": (float, 0.2),
            "spacing": (float, 1.0),
            "quench_scale": (float, 4.0),
            "initial": (str, "ground"),
        },
        "phonon": {
            "total_coupling_sq": (float, 0.01),
            "background_amp": (float, 1.0),
            "background_cutoff": (float, 1.0),
            "peak_centers": (list, [0.4, 0.9]),
            "peak_widths": (list, [0.02, 0.02]),
            "peak_weights": (list, [0.5, 0.5]),
            "n_exp": (int, 4),
            "fit_tau_max": (float, 30.0),
            "fit_samples": (int, 600),
        },
        "numerics": dict(_NUMERICS_COMMON),
        "oracle": {"enabled": (bool, False), "photon_cutoff": (int, 6)},
    },
    "toy_resonance": {
        "model": {
            "e_drive": (float, REQUIRED),
            "g_vib": (float, REQUIRED),
            "detunings": (list, REQUIRED),  # omega_vib = 2 e_drive + det
            "boson_cutoff": (int, 6),
            "gamma_factor": (float, 1e-3),
        },
        "numerics": {
            "abs_tol": (float, 1e-9),
            "rel_tol": (float, 1e-7),
        },
    },
    "bath_fit": {
        "model": {
            "mode_table": (str, ""),
            "n_exp": (int, 5),
            "broadening_amp": (float, 0.025),
            "broadening_cutoff": (float, 3500.0),
            "grid_max": (float, 4500.0),
            "grid_points": (int, 3000),
            "tau_max": (float, 0.06),
            "n_samples": (int, 600),
        },
    },
}

_TOP_KEYS = {"experiment", "output_dir", "seed"}


def validate(raw):
    """Validate a parsed config dict against its experiment schema and
    materialize all defaults.  Unknown keys fail by name."""
    if "experiment" not in raw:
        raise ConfigError("missing top-level key 'experiment'")
    name = raw["experiment"]
    if name not in SCHEMAS:
        raise ConfigError(
            f"unknown experiment {name!r}; choose from {sorted(SCHEMAS)}"
        )
    schema = SCHEMAS[name]
    for key in raw:
        if key in _TOP_KEYS:
            continue
        if key not in schema:
            raise ConfigError(f"unknown section {key!r} for {name}")
    resolved = {
        "experiment": name,
        "output_dir": raw.get("output_dir", ""),
        "seed": int(raw.get("seed", 0)),
    }
    for section, keys in schema.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section {section!r} must be a table")
        for key in given:
            if key not in keys:
                raise ConfigError(
                    f"unknown key {section}.{key!r} for experiment {name}"
                )
        out = {}
        for key, (typ, default) in keys.items():
            if key in given:
                val = given[key]
                if typ is float and isinstance(val, int):
                    val = float(val)
                if typ is list and not isinstance(val, list):
                    raise ConfigError(f"{section}.{key} must be a list")
                if typ is not list and not isinstance(val, typ):
                    raise ConfigError(
                        f"{section}.{key} must be {typ.__name__}, "
                        f"got {type(val).__name__}"
                    )
                out[key] = val
            elif default is REQUIRED:
                raise ConfigError(f"missing required key {section}.{key}")
            else:
                out[key] = default
        resolved[section] = out
    return resolved


def load(path):
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return validate(raw)


def config_hash(resolved):
    blob = json.dumps(resolved, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def set_by_path(resolved, dotted, value):
    """Assign e.g. 'model.g' = value, validating the path exists."""
    parts = dotted.split(".")
    node = resolved
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"unknown parameter path {dotted!r}")
        node = node[p]
    leaf = parts[-1]
    if leaf not in node:
        raise ConfigError(f"unknown parameter path {dotted!r}")
    old = node[leaf]
    if isinstance(old, bool):
        node[leaf] = bool(value)
    elif isinstance(old, int) and not isinstance(old, bool):
        node[leaf] = int(value)
    elif isinstance(old, float):
        node[leaf] = float(value)
    else:
        node[leaf] = value
