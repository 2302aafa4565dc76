"""Link model: lightwaves, fiber spans, band plans and the frequency lookups.

Units used throughout the package:

* frequency in THz, lengths in km, powers in mW (dBm in files)
* Raman gain coefficients in 1/(W km) as tabulated, 1/(mW km) once coupled
* attenuation ``alpha`` in the field convention, i.e. a lone lightwave obeys
  ``P(z) = P(0) exp(-2 alpha z)``
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FORWARD = "forward"
BACKWARD = "backward"
KINDS = ("channel", "brp", "frp")

DB_KM_TO_FIELD_ALPHA = math.log(10.0) / 20.0


class ConfigurationError(ValueError):
    """Invalid link, span or scenario description."""


class FrequencyRangeError(ConfigurationError):
    """A frequency falls outside a tabulated range."""


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(x)


@dataclass(frozen=True)
class Lightwave:
    """A WDM channel or a Raman pump."""

    id: int
    f: float
    kind: str
    p_launch: float
    band: str = ""
    symbol_rate: float | None = None
    roll_off: float | None = None
    direction: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"lightwave {self.id}: unknown kind {self.kind!r}")
        expected = BACKWARD if self.kind == "brp" else FORWARD
        if not self.direction:
            object.__setattr__(self, "direction", expected)
        elif self.direction != expected:
            raise ConfigurationError(
                f"lightwave {self.id}: kind {self.kind} must propagate {expected}")
        if not self.f > 0:
            raise ConfigurationError(f"lightwave {self.id}: frequency must be > 0")
        if not self.p_launch > 0:
            raise ConfigurationError(f"lightwave {self.id}: launch power must be > 0")

    @property
    def is_pump(self) -> bool:
        return self.kind != "channel"

    @property
    def is_backward(self) -> bool:
        return self.direction == BACKWARD


@dataclass(frozen=True, eq=False)
class RamanGainProfile:
    """Raman gain vs. pump-probe offset, measured with a pump at ``f_ref``."""

    f_ref: float
    df: np.ndarray
    gain: np.ndarray

    def __post_init__(self):
        df = np.asarray(self.df, dtype=float)
        g = np.asarray(self.gain, dtype=float)
        if df.ndim != 1 or df.shape != g.shape or df.size < 2:
            raise ConfigurationError("Raman profile needs matching 1-D offset/gain columns")
        if np.any(np.diff(df) <= 0) or df[0] < 0:
            raise ConfigurationError("Raman offsets must be non-negative and increasing")
        if np.any(g < 0):
            raise ConfigurationError("Raman gain samples must be >= 0")
        if df[0] == 0 and g[0] != 0:
            raise ConfigurationError("Raman gain at zero offset must be 0")
        object.__setattr__(self, "df", df)
        object.__setattr__(self, "gain", g)

    def lookup(self, df):
        """Unscaled gain at offset(s) ``df`` >= 0; zero outside the table."""
        df = np.asarray(df, dtype=float)
        out = np.interp(df, self.df, self.gain, left=0.0, right=0.0)
        return np.where(df == 0.0, 0.0, out)

    @classmethod
    def zero(cls, f_ref: float = 206.5) -> "RamanGainProfile":
        return cls(f_ref, np.array([0.0, 50.0]), np.array([0.0, 0.0]))


@dataclass(frozen=True, eq=False)
class FiberSpan:
    length: float
    dz: float
    loss_f: np.ndarray
    loss_db_km: np.ndarray
    raman: RamanGainProfile
    lumped_loss: float = 0.0
    rayleigh_kappa: float = -40.0
    name: str = ""

    def __post_init__(self):
        if not (self.length > 0 and self.dz > 0):
            raise ConfigurationError("span length and step must be > 0")
        m = round(self.length / self.dz)
        if m < 1 or abs(m * self.dz - self.length) > 1e-9 * self.length:
            raise ConfigurationError(
                f"step {self.dz} km does not divide span length {self.length} km")
        f = np.asarray(self.loss_f, dtype=float)
        loss = np.asarray(self.loss_db_km, dtype=float)
        if f.ndim != 1 or f.shape != loss.shape or f.size < 1:
            raise ConfigurationError("loss table needs matching 1-D columns")
        if np.any(np.diff(f) <= 0):
            raise ConfigurationError("loss table frequencies must be increasing")
        if np.any(loss <= 0):
            raise ConfigurationError("loss table values must be > 0")
        object.__setattr__(self, "loss_f", f)
        object.__setattr__(self, "loss_db_km", loss)

    @property
    def n_steps(self) -> int:
        """Number of spatial steps M; the grid has M + 1 points."""
        return round(self.length / self.dz)

    @property
    def z(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dz

    @property
    def kappa_lin(self) -> float:
        return 10.0 ** (self.rayleigh_kappa / 10.0)


def resolve_alpha(span: FiberSpan, f):
    """Field attenuation [1/km] at frequency ``f``, linearly interpolated.

    Raises FrequencyRangeError outside the tabulated range.
    """
    f_arr = np.asarray(f, dtype=float)
    lo, hi = span.loss_f[0], span.loss_f[-1]
    if np.any(f_arr < lo) or np.any(f_arr > hi):
        raise FrequencyRangeError(
            f"frequency outside loss table range [{lo}, {hi}] THz")
    loss = np.interp(f_arr, span.loss_f, span.loss_db_km)
    out = loss * DB_KM_TO_FIELD_ALPHA
    return float(out) if out.ndim == 0 else out


def raman_gain(profile: RamanGainProfile, f_probe, f_pump):
    """Raman coefficient C_R [1/(W km)] between two frequencies.

    The tabulated profile is shifted to the actual offset and scaled by the
    higher of the two frequencies relative to ``profile.f_ref``.  The result
    is symmetric in its arguments; gain/depletion direction is applied by
    :func:`sigma` and the coupling sign.
    """
    f_probe = np.asarray(f_probe, dtype=float)
    f_pump = np.asarray(f_pump, dtype=float)
    df = np.abs(f_pump - f_probe)
    scale = np.maximum(f_pump, f_probe) / profile.f_ref
    out = scale * profile.lookup(df)
    return float(out) if out.ndim == 0 else out


def sigma(f_n, f_j):
    """Photon-energy factor: f_n/f_j if f_n > f_j, 1 if f_n < f_j, 0 if equal."""
    f_n = np.asarray(f_n, dtype=float)
    f_j = np.asarray(f_j, dtype=float)
    out = np.where(f_n > f_j, f_n / f_j, np.where(f_n < f_j, 1.0, 0.0))
    return float(out) if out.ndim == 0 else out


def coupling_matrix(freqs: Sequence[float], profile: RamanGainProfile) -> np.ndarray:
    """Signed Raman coupling K[n, j] in 1/(mW km).

    Positive when lightwave n is amplified by a higher-frequency j, negative
    (with the photon-energy factor) when n is depleted by a lower-frequency j.
    """
    f = np.asarray(freqs, dtype=float)
    fn, fj = f[:, None], f[None, :]
    mag = sigma(fn, fj) * raman_gain(profile, fn, fj)
    sign = np.where(fn > fj, -1.0, 1.0)
    return np.asarray(sign * mag * 1e-3)


@dataclass(frozen=True)
class Band:
    name: str
    low: float
    high: float
    n_channels: int
    spacing_ghz: float
    nf_db: float
    symbol_rate: float = 100.0
    roll_off: float = 0.1

    @property
    def center(self) -> float:
        return 0.5 * (self.low + self.high)

    def channel_frequencies(self) -> np.ndarray:
        k = np.arange(self.n_channels) - 0.5 * (self.n_channels - 1)
        return self.center + k * self.spacing_ghz * 1e-3


@dataclass(frozen=True)
class BandPlan:
    bands: tuple[Band, ...]

    def __post_init__(self):
        bands = tuple(self.bands)
        object.__setattr__(self, "bands", bands)
        for b in bands:
            if not b.high > b.low:
                raise ConfigurationError(f"band {b.name}: high edge must exceed low edge")
            if b.n_channels < 1:
                raise ConfigurationError(f"band {b.name}: needs at least one channel")
            f = b.channel_frequencies()
            if f[0] < b.low - 1e-9 or f[-1] > b.high + 1e-9:
                raise ConfigurationError(
                    f"band {b.name}: {b.n_channels} channels at {b.spacing_ghz} GHz "
                    f"exceed edges [{b.low}, {b.high}] THz")
        for a, b in zip(bands, bands[1:]):
            if not b.low > a.high:
                raise ConfigurationError(f"bands {a.name} and {b.name} overlap or are not ascending")

    def band(self, name: str) -> Band:
        for b in self.bands:
            if b.name == name:
                return b
        raise KeyError(name)

    def band_of(self, f: float) -> Band:
        for b in self.bands:
            if b.low <= f <= b.high:
                return b
        raise FrequencyRangeError(f"{f} THz is not inside any band")

    @property
    def n_channels(self) -> int:
        return sum(b.n_channels for b in self.bands)

    @property
    def max_signal_frequency(self) -> float:
        return float(self.bands[-1].channel_frequencies()[-1])


@dataclass(frozen=True)
class LaunchSpectrum:
    """Per-band cubic launch spectrum in dBm around each band's center."""

    coeffs: dict = field(default_factory=dict)  # band name -> (a0, a1, a2, a3)
    centers: dict = field(default_factory=dict)  # band name -> f_c
    edges: dict = field(default_factory=dict)  # band name -> (low, high)

    @classmethod
    def from_plan(cls, plan: BandPlan, coeffs) -> "LaunchSpectrum":
        """``coeffs`` maps band name to a0..a3, or is a flat sequence of 4 per band."""
        if not isinstance(coeffs, dict):
            flat = list(coeffs)
            if len(flat) != 4 * len(plan.bands):
                raise ConfigurationError(
                    f"expected {4 * len(plan.bands)} spectrum coefficients, got {len(flat)}")
            coeffs = {b.name: flat[4 * i:4 * i + 4] for i, b in enumerate(plan.bands)}
        out = {}
        for b in plan.bands:
            if b.name not in coeffs:
                raise ConfigurationError(f"no launch spectrum coefficients for band {b.name}")
            a = tuple(float(x) for x in coeffs[b.name])
            if len(a) != 4:
                raise ConfigurationError(f"band {b.name}: need exactly 4 coefficients a0..a3")
            out[b.name] = a
        return cls(out, {b.name: b.center for b in plan.bands},
                   {b.name: (b.low, b.high) for b in plan.bands})

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.coeffs[name] for name in self.coeffs])


def evaluate_spectrum_dBm(spec: LaunchSpectrum, f: float) -> float:
    for name, (lo, hi) in spec.edges.items():
        if lo <= f <= hi:
            a0, a1, a2, a3 = spec.coeffs[name]
            x = f - spec.centers[name]
            return a0 + x * (a1 + x * (a2 + x * a3))
    raise FrequencyRangeError(f"{f} THz lies in a guard band")


def build_channel_grid(plan: BandPlan, spec: LaunchSpectrum, first_id: int = 0) -> list[Lightwave]:
    channels = []
    i = first_id
    for b in plan.bands:
        for f in b.channel_frequencies():
            p = 10.0 ** (evaluate_spectrum_dBm(spec, f) / 10.0)
            channels.append(Lightwave(i, float(f), "channel", p, b.name, b.symbol_rate, b.roll_off))
            i += 1
    return channels


def make_pumps(freqs: Iterable[float], powers_dbm: Iterable[float], first_id: int) -> list[Lightwave]:
    return [Lightwave(first_id + k, float(f), "brp", 10.0 ** (p / 10.0), "pump")
            for k, (f, p) in enumerate(zip(freqs, powers_dbm))]


# -- table I/O -------------------------------------------------------------

def _read_table(path, header: str):
    path = Path(path)
    meta, rows = {}, []
    seen_header = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip().lstrip("#").strip()
            if not line:
                continue
            if not seen_header:
                if "=" in line:
                    k, v = line.split("=", 1)
                    meta[k.strip()] = v.strip()
                    continue
                if line.replace(" ", "") != header:
                    raise ConfigurationError(f"{path}:{lineno}: expected header {header!r}")
                seen_header = True
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError:
                raise ConfigurationError(f"{path}:{lineno}: malformed row {line!r}") from None
            if len(rows[-1]) != 2:
                raise ConfigurationError(f"{path}:{lineno}: expected 2 columns")
    if not rows:
        raise ConfigurationError(f"{path}: no data rows")
    arr = np.array(rows)
    return meta, arr[:, 0], arr[:, 1]


def load_loss_csv(path):
    """Read ``f_thz,loss_db_km``; returns (f, loss_db_km)."""
    _, f, loss = _read_table(path, "f_thz,loss_db_km")
    return f, loss


def load_raman_csv(path) -> RamanGainProfile:
    meta, df, g = _read_table(path, "df_thz,cr_per_w_km")
    if "f_ref_thz" not in meta:
        raise ConfigurationError(f"{path}: missing metadata line f_ref_thz=<value>")
    return RamanGainProfile(float(meta["f_ref_thz"]), df, g)


DATA_DIR = Path(__file__).resolve().parent / "data"


def default_span(length: float = 100.0, dz: float = 0.1, lumped_loss: float = 4.0,
                 rayleigh_kappa: float = -40.0, raman: bool = True) -> FiberSpan:
    """The bundled SMF span: 0.18 dB/km at 193 THz and a silica Raman profile."""
    f, loss = load_loss_csv(DATA_DIR / "loss_smf.csv")
    profile = load_raman_csv(DATA_DIR / "raman_smf.csv") if raman else RamanGainProfile.zero()
    return FiberSpan(length, dz, f, loss, profile, lumped_loss, rayleigh_kappa, "smf")
