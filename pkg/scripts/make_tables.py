"""Regenerate the bundled fiber tables in src/unispp/data.

Loss: Rayleigh (lambda^-4) plus infrared absorption tail, scaled so the
distributed loss is 0.18 dB/km at 193 THz.

Raman: antisymmetrised sum of Gaussian vibrational modes of fused silica
(mode positions/amplitudes/widths after Hollenbeck and Cantrell, 2002),
peak scaled to 0.42 1/(W km) for a 206.5 THz pump.
"""
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "unispp" / "data"
C_UM_THZ = 299.792458  # c in um*THz
CM1_THZ = 0.0299792458  # 1 cm^-1 in THz

# position [cm^-1], amplitude, gaussian FWHM [cm^-1]
MODES = np.array([
    [56.25, 1.00, 52.10],
    [100.00, 11.40, 110.42],
    [231.25, 36.67, 175.00],
    [362.50, 67.67, 162.50],
    [463.00, 74.00, 135.33],
    [497.00, 4.50, 24.50],
    [611.50, 6.80, 41.50],
    [691.67, 4.60, 155.00],
    [793.67, 4.20, 59.50],
    [835.50, 4.50, 64.30],
    [930.00, 2.70, 150.00],
    [1080.00, 3.10, 91.00],
    [1215.00, 3.00, 160.00],
])


def loss_db_km(f_thz):
    lam = C_UM_THZ / f_thz
    ir = 7.81e11 * np.exp(-48.48 / lam)
    lam0 = C_UM_THZ / 193.0
    ir0 = 7.81e11 * np.exp(-48.48 / lam0)
    rayleigh = (0.18 - ir0) * lam0**4
    return rayleigh / lam**4 + ir


def raman_shape(df_thz):
    pos = MODES[:, 0] * CM1_THZ
    amp = MODES[:, 1]
    sig = MODES[:, 2] * CM1_THZ / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    d = df_thz[:, None]
    g = amp * (np.exp(-0.5 * ((d - pos) / sig) ** 2) - np.exp(-0.5 * ((d + pos) / sig) ** 2))
    return g.sum(axis=1)


def main():
    f = np.round(np.arange(180.0, 235.0 + 1e-9, 0.25), 6)
    with open(DATA / "loss_smf.csv", "w") as fh:
        fh.write("f_thz,loss_db_km\n")
        for fi, li in zip(f, loss_db_km(f)):
            fh.write(f"{fi:.2f},{li:.6f}\n")

    df = np.round(np.arange(0.0, 45.0 + 1e-9, 0.1), 6)
    g = np.clip(raman_shape(df), 0.0, None)
    g *= 0.42 / g.max()
    g[0] = 0.0
    with open(DATA / "raman_smf.csv", "w") as fh:
        fh.write("f_ref_thz=206.5\n")
        fh.write("df_thz,cr_per_w_km\n")
        for di, gi in zip(df, g):
            fh.write(f"{di:.2f},{gi:.6e}\n")


if __name__ == "__main__":
    main()
