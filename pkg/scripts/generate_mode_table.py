#!/usr/bin/env python3
"""Regenerate the bundled synthetic vibrational mode table.

107 normal modes of a methylene-blue-like dye: two strong clusters plus a
weak congested background.  The cluster frequencies are chosen so the
effective (ohmically broadened) spectral density peaks near 0.60 and 1.30
times the maximum drive used by the lasing experiments; the ohmic
broadening shifts each resonance down by roughly A*Lambda, which is
compensated here.  Deterministic by construction; edit and rerun to ship a
different dataset.
"""

import csv
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parents[1] / "src/manyheom/data/methylene_blue_modes.csv"


def build():
    rng = np.random.default_rng(20250810)
    modes = []

    # dominant ring-stretch cluster: J_eff peak near 1250 cm^-1
    for w, s in [
        (1322.0, 0.130),
        (1331.0, 0.175),
        (1339.0, 0.190),
        (1348.0, 0.170),
        (1356.0, 0.135),
    ]:
        modes.append((w, s))

    # secondary high-frequency cluster: J_eff peak near 2711 cm^-1
    for w, s in [(2748.0, 0.070), (2759.0, 0.095), (2770.0, 0.085)]:
        modes.append((w, s))

    # 99 weak background modes across the fingerprint region
    n_bg = 107 - len(modes)
    base = np.linspace(150.0, 3350.0, n_bg)
    jitter = rng.uniform(-12.0, 12.0, n_bg)
    freqs = np.clip(base + jitter, 40.0, 3400.0)
    weights = rng.uniform(0.4, 1.0, n_bg)
    # keep the background well below the clusters, heavier at low frequency
    s_bg = 0.004 * weights * (1.0 + 2.0 * np.exp(-freqs / 900.0))
    for w, s in zip(freqs, s_bg):
        modes.append((float(w), float(s)))

    modes.sort()
    assert len(modes) == 107
    return modes


def main():
    modes = build()
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w", newline="") as fh:
        w = csv.writer(fh)
        fh.write("# synthetic vibrational mode table, methylene-blue-like dye\n")
        fh.write("# regenerate with scripts/generate_mode_table.py\n")
        w.writerow(["omega_cm1", "huang_rhys"])
        for freq, s in modes:
            w.writerow([f"{freq:.6f}", f"{s:.8f}"])
    print(f"wrote {len(modes)} modes to {OUT}")


if __name__ == "__main__":
    main()
