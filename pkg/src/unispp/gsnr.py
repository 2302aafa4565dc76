"""GSNR assembly, GSNR-to-throughput mapping, objectives and NLI estimators."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .link import ConfigurationError, FiberSpan, Lightwave, _read_table
from .noise import NoiseBudget
from .unidir import PowerMatrix

NONLINEAR_MARGIN_DB = 3.0


def _db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def _ratio(p, noise):
    p = np.asarray(p, dtype=float)
    noise = np.asarray(noise, dtype=float)
    out = np.full(np.broadcast(p, noise).shape, np.inf)
    np.divide(p, noise, out=out, where=noise > 0)
    return out


@dataclass
class ChannelResult:
    """Per-channel signal-to-noise ratios (linear) and throughput."""

    ids: np.ndarray
    f: np.ndarray
    p_ch: np.ndarray
    gsnr: np.ndarray
    osnr: np.ndarray
    osnr_dfa: np.ndarray
    gsnr_nli: np.ndarray
    gsnr_drb: np.ndarray
    tput: np.ndarray | None = None

    @property
    def gsnr_db(self):
        return _db(self.gsnr)

    @property
    def osnr_db(self):
        return _db(self.osnr)

    @property
    def osnr_dfa_db(self):
        return _db(self.osnr_dfa)

    @property
    def gsnr_nli_db(self):
        return _db(self.gsnr_nli)

    @property
    def gsnr_drb_db(self):
        return _db(self.gsnr_drb)

    @property
    def nonlinear(self) -> np.ndarray:
        """GSNR_NLI within 3 dB of OSNR; a diagnostic only."""
        return (self.gsnr_nli_db - self.osnr_db) < NONLINEAR_MARGIN_DB

    @property
    def spread_db(self) -> float:
        g = self.gsnr_db
        return float(np.max(g) - np.min(g))


def gsnr(p_ch, budget: NoiseBudget) -> ChannelResult:
    p = np.asarray(p_ch, dtype=float)
    if np.any(p <= 0):
        raise ValueError("channel power must be > 0")
    total = budget.p_ase + budget.p_nli + budget.p_drb
    return ChannelResult(
        ids=np.asarray(budget.ids), f=np.asarray(budget.f), p_ch=p,
        gsnr=_ratio(p, total), osnr=_ratio(p, budget.p_ase),
        osnr_dfa=_ratio(p, budget.p_ase_dfa), gsnr_nli=_ratio(p, budget.p_nli),
        gsnr_drb=_ratio(p, budget.p_drb))


@dataclass(frozen=True, eq=False)
class ThroughputCurve:
    """Net per-channel throughput [Gb/s] vs GSNR [dB], piecewise linear, clamped."""

    gsnr_db: np.ndarray
    tput_gbps: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gsnr_db, dtype=float)
        t = np.asarray(self.tput_gbps, dtype=float)
        if g.ndim != 1 or g.shape != t.shape or g.size < 1:
            raise ConfigurationError("throughput curve needs matching 1-D columns")
        if np.any(np.diff(g) <= 0):
            raise ConfigurationError("throughput curve GSNR nodes must be strictly increasing")
        if np.any(np.diff(t) < 0):
            raise ConfigurationError("throughput must be non-decreasing in GSNR")
        object.__setattr__(self, "gsnr_db", g)
        object.__setattr__(self, "tput_gbps", t)

    def __call__(self, gsnr_db):
        return np.interp(gsnr_db, self.gsnr_db, self.tput_gbps)

    def scaled(self, factor: float) -> "ThroughputCurve":
        return ThroughputCurve(self.gsnr_db, self.tput_gbps * factor)

    @classmethod
    def default(cls) -> "ThroughputCurve":
        # Stand-in for a ~100 GBaud probabilistically shaped transceiver; not measured data.
        return cls(np.array([5.0, 25.0]), np.array([200.0, 1400.0]))

    @classmethod
    def from_csv(cls, path) -> "ThroughputCurve":
        _, g, t = _read_table(path, "gsnr_db,tput_gbps")
        return cls(g, t)


def throughput_from_gsnr(curve: ThroughputCurve, gsnr_db):
    return curve(gsnr_db)


def objective(tput, w: float = 0.0) -> float:
    """Mean throughput minus ``w`` times its peak-to-peak spread."""
    t = np.asarray(tput, dtype=float)
    if t.size == 0:
        raise ValueError("objective of an empty result set")
    if w < 0:
        raise ValueError("flatness weight must be >= 0")
    mean = float(np.mean(t))
    if w == 0:
        return mean
    return mean - w * abs(float(np.max(t)) - float(np.min(t)))


# -- NLI estimators ----------------------------------------------------------

class NLIEstimator(Protocol):
    """Receiver-referred NLI power [mW] per channel.

    ``profiles[k]`` is the converged PowerMatrix of ``spans[k]``; its ``ids``
    map rows to lightwave ids.
    """

    def __call__(self, channels: Sequence[Lightwave], spans: Sequence[FiberSpan],
                 profiles: Sequence[PowerMatrix]) -> np.ndarray: ...


class ZeroNLI:
    name = "zero"

    def __call__(self, channels, spans, profiles):
        return np.zeros(len(channels))


class TableNLI:
    """Fixed per-channel GSNR_NLI [dB], e.g. exported from an external model run."""

    name = "table"

    def __init__(self, gsnr_nli_db: Mapping[int, float]):
        self.gsnr_nli_db = dict(gsnr_nli_db)

    @classmethod
    def from_csv(cls, path) -> "TableNLI":
        path = Path(path)
        table = {}
        with open(path) as fh:
            header = fh.readline().strip().replace(" ", "")
            if header != "channel_id,gsnr_nli_db":
                raise ConfigurationError(f"{path}:1: expected header 'channel_id,gsnr_nli_db'")
            for lineno, line in enumerate(fh, 2):
                if not line.strip():
                    continue
                try:
                    cid, g = line.split(",")
                    table[int(cid)] = float(g)
                except ValueError:
                    raise ConfigurationError(f"{path}:{lineno}: malformed row {line.strip()!r}") from None
        return cls(table)

    def __call__(self, channels, spans, profiles):
        missing = [c.id for c in channels if c.id not in self.gsnr_nli_db]
        if missing:
            raise ConfigurationError(f"NLI table has no entry for channels {missing[:5]}"
                                     + ("..." if len(missing) > 5 else ""))
        g = np.array([self.gsnr_nli_db[c.id] for c in channels])
        p = np.array([c.p_launch for c in channels])
        return p / 10.0 ** (g / 10.0)


class CubicNLI:
    """Incoherent cubic stand-in, ``eta * P^3 * (Leff / Leff_ref)^2`` per span.

    ``Leff`` is the channel's effective length read from its own profile, so
    distributed Raman gain raises NLI.  ``eta`` is in 1/W^2 per span at the
    reference effective length ``leff_ref`` [km].  This is a placeholder
    for a closed-form GN/EGN model, not one.
    """

    name = "cubic"

    def __init__(self, eta_per_w2: float, leff_ref: float = 21.7):
        self.eta = eta_per_w2 * 1e-6  # 1/mW^2
        self.leff_ref = leff_ref

    def __call__(self, channels, spans, profiles):
        p = np.array([c.p_launch for c in channels])
        total = np.zeros(len(channels))
        cache = {}
        for prof in profiles:
            key = id(prof)
            if key not in cache:
                rows = [prof.ids.index(c.id) for c in channels]
                v = prof.values[rows]
                norm = v / v[:, :1]
                leff = prof.dz * (np.sum(norm, axis=1) - 0.5 * (norm[:, 0] + norm[:, -1]))
                cache[key] = self.eta * p ** 3 * (leff / self.leff_ref) ** 2
            total += cache[key]
        return total


def make_estimator(spec: str | Mapping | None) -> NLIEstimator:
    """``zero``, ``table:<path>``, ``cubic:<eta_per_w2>`` or a mapping with ``model``."""
    if spec is None:
        return ZeroNLI()
    if isinstance(spec, str):
        kind, _, arg = spec.partition(":")
        spec = {"model": kind}
        if kind == "table":
            spec["path"] = arg
        elif kind == "cubic" and arg:
            spec["eta_per_w2"] = float(arg)
    model = spec.get("model", "zero")
    if model == "zero":
        return ZeroNLI()
    if model == "table":
        if not spec.get("path"):
            raise ConfigurationError("table NLI estimator needs a path")
        return TableNLI.from_csv(spec["path"])
    if model == "cubic":
        return CubicNLI(float(spec.get("eta_per_w2", 300.0)), float(spec.get("leff_ref_km", 21.7)))
    raise ConfigurationError(f"unknown NLI model {model!r}")
