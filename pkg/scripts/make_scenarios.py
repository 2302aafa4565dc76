"""Write the bundled example scenarios into src/unispp/data/scenarios/.

The pump sets are the optimum pump settings reported for the CLS and CLSE
case studies.  Launch spectra are flat, with the per-channel power chosen so
the total signal power sits 7.5 dB below the total pump power.
"""
from pathlib import Path

import yaml

from unispp.scenario import flat_a0_for_gap

OUT = Path(__file__).resolve().parents[1] / "src" / "unispp" / "data" / "scenarios"

BANDS = [
    ("L", 184.50, 190.35, 6.0),
    ("C", 190.75, 196.60, 5.0),
    ("S", 197.00, 202.85, 6.0),
    ("E", 203.25, 209.07, 7.0),
]

PUMPS = {
    "CLS-max": (0.0, [(205.1, 21.5), (211.5, 27.7), (214.0, 26.6)]),
    "CLS-flat-w05": (0.5, [(206.7, 21.3), (212.4, 26.6), (214.8, 26.8)]),
    "CLS-flat-w1": (1.0, [(212.4, 22.2), (214.0, 25.2), (217.0, 25.5)]),
    "CLSE-max": (0.0, [(212.4, 22.6), (217.5, 25.7), (220.6, 28.7)]),
    "CLSE-flat-w05": (0.5, [(213.1, 22.2), (217.8, 25.7), (220.8, 28.9)]),
    "CLSE-flat-w1": (1.0, [(214.0, 17.4), (219.2, 24.0), (221.7, 27.9)]),
}


def scenario(name, w, pumps):
    bands = BANDS[:3] if name.startswith("CLS-") else BANDS
    n_ch = 50 * len(bands)
    a0 = flat_a0_for_gap(pumps, n_ch, 7.5)
    return {
        "name": name,
        "description": f"{'+'.join(b[0] for b in bands)} bands, 10 x 100 km, 3 backward pumps; "
                       f"flatness weight w = {w}",
        "bands": [{"name": b, "low_thz": lo, "high_thz": hi, "channels": 50, "spacing_ghz": 118.75,
                   "nf_db": nf, "symbol_rate_gbaud": 100.0, "roll_off": 0.1}
                  for b, lo, hi, nf in bands],
        "spectrum": {b[0]: [a0, 0.0, 0.0, 0.0] for b in bands},
        "pumps": [{"f_thz": f, "p_dbm": p} for f, p in pumps],
        "fiber": {"loss_table": "builtin:loss_smf.csv", "raman_table": "builtin:raman_smf.csv",
                  "length_km": 100.0, "dz_km": 0.1, "lumped_loss_db": 4.0,
                  "rayleigh_kappa_db_km": -40.0},
        "spans": [{"repeat": 10}],
        "throughput_curve": "builtin",
        "nli": {"model": "cubic", "eta_per_w2": 300.0},
        "solver": {"tol_db": 1e-4, "max_iter": 1000, "integrator": "matrix"},
        "reference": {"method": "auto"},
        "noise": {"drb": True, "drb_method": "direct"},
        "optimizer": {"w": w, "budget": 2000, "seed": 1, "restarts": 3, "dz_km": 0.5},
    }


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for name, (w, pumps) in PUMPS.items():
        text = yaml.safe_dump(scenario(name, w, pumps), sort_keys=False, default_flow_style=None)
        (OUT / f"{name}.yaml").write_text(text)
        print("wrote", name)
