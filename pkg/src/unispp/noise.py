"""Per-span noise from converged profiles: DFA ASE, Raman ASE and DRB.

All budget entries are referred to the receiver input (equivalently to the
launch point of a transparent span) in a bandwidth equal to each channel's
symbol rate.

Raman ASE model (not taken from measured data): spontaneous emission seeded
by every pump above the channel frequency,
``dP_A/dz = g(z) P_A + sum_p C_R P_p(z) 2 h f B n_sp``, where ``g`` is the
channel's own net gain rate read from its profile and
``n_sp = 1 + 1/(exp(h df / kT) - 1)`` at T = 300 K.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .link import BandPlan, FiberSpan, Lightwave, raman_gain
from .unidir import PowerMatrix

H_PLANCK = 6.62607015e-34
K_BOLTZMANN = 1.380649e-23
T_FIBER = 300.0


@dataclass
class NoiseBudget:
    ids: np.ndarray
    f: np.ndarray
    p_ase_dfa: np.ndarray
    p_ase_raman: np.ndarray
    p_drb: np.ndarray
    p_nli: np.ndarray

    @property
    def p_ase(self) -> np.ndarray:
        return self.p_ase_dfa + self.p_ase_raman

    def __add__(self, other: "NoiseBudget") -> "NoiseBudget":
        if not np.array_equal(self.ids, other.ids):
            raise ValueError("noise budgets refer to different channels")
        return NoiseBudget(self.ids, self.f, self.p_ase_dfa + other.p_ase_dfa,
                           self.p_ase_raman + other.p_ase_raman,
                           self.p_drb + other.p_drb, self.p_nli + other.p_nli)

    def scaled(self, factor: float) -> "NoiseBudget":
        return NoiseBudget(self.ids, self.f, self.p_ase_dfa * factor, self.p_ase_raman * factor,
                           self.p_drb * factor, self.p_nli * factor)

    @classmethod
    def zeros(cls, ids, f) -> "NoiseBudget":
        z = np.zeros(len(ids))
        return cls(np.asarray(ids), np.asarray(f, dtype=float), z.copy(), z.copy(), z.copy(), z.copy())


def dfa_gain(p_launch, p_end, lumped_loss_db: float = 0.0):
    """Linear gain restoring ``p_launch`` after the span and its lumped loss."""
    p_end = np.asarray(p_end, dtype=float)
    if np.any(p_end <= 0):
        raise ValueError("end-of-span power must be > 0")
    return np.asarray(p_launch) / (p_end * 10.0 ** (-lumped_loss_db / 10.0))


def ase_dfa(gain, nf_db, f_thz, b_ref_ghz):
    """ASE [mW] of a lumped amplifier, ``NF h f (G - 1) B``; zero for G < 1."""
    g = np.asarray(gain, dtype=float)
    p = 10.0 ** (np.asarray(nf_db) / 10.0) * H_PLANCK * np.asarray(f_thz) * 1e12 \
        * (g - 1.0) * np.asarray(b_ref_ghz) * 1e9 * 1e3
    return np.where(g < 1.0, 0.0, p)


def phonon_factor(df_thz):
    """Spontaneous factor 1 + n_th for a Stokes shift ``df_thz`` > 0."""
    x = H_PLANCK * np.asarray(df_thz, dtype=float) * 1e12 / (K_BOLTZMANN * T_FIBER)
    return 1.0 + 1.0 / np.expm1(x)


def ase_raman(profiles: PowerMatrix, lightwaves: Sequence[Lightwave], span: FiberSpan,
              channels: Sequence[int] | None = None):
    """Distributed Raman ASE [mW] at the span end for each channel row.

    ``channels`` selects rows (default: every lightwave of kind channel).
    """
    lws = list(lightwaves)
    rows = [i for i, lw in enumerate(lws) if lw.kind == "channel"] if channels is None else list(channels)
    pump_rows = [i for i, lw in enumerate(lws) if lw.is_pump]
    out = np.zeros(len(rows))
    if not pump_rows:
        return out
    v = profiles.values
    fp = np.array([lws[j].f for j in pump_rows])
    pp = v[pump_rows]
    for k, i in enumerate(rows):
        ch = lws[i]
        above = fp > ch.f
        if not np.any(above):
            continue
        cr = raman_gain(span.raman, ch.f, fp[above]) * 1e-3  # 1/(mW km)
        nsp = phonon_factor(fp[above] - ch.f)
        quantum = 2.0 * H_PLANCK * ch.f * 1e12 * ch.symbol_rate * 1e9 * 1e3  # mW
        source = quantum * (np.atleast_1d(cr * nsp) @ pp[above])
        p = v[i]
        integrand = source / p
        acc = 0.5 * profiles.dz * float(np.sum(integrand[1:] + integrand[:-1]))
        out[k] = p[-1] * acc
    return out


def drb_span(row, p_launch: float, g_dfa: float, kappa_lin: float, dz: float, method: str = "direct"):
    """DRB power [mW] of one channel over one span.

    ``row`` is the channel profile on grid points 0..M.  Sum over scattering
    pairs z2 < z1 of ``P_ch G_net dz^2 kappa^2 (P(z1)/P(z2))^2`` times the DFA
    gain, where ``G_net = P(L)/P(0)``.  ``method='direct'`` forms the full
    O(M^2) pair sum, ``'prefix'`` the equivalent O(M) running sum.
    """
    r = np.asarray(row, dtype=float)
    r = r / r[0]
    if method == "direct":
        ratio2 = (r[:, None] / r[None, :]) ** 2
        pair_sum = float(np.sum(np.tril(ratio2, k=-1)))
    elif method == "prefix":
        inv2 = np.cumsum(r[:-1] ** -2)
        pair_sum = float(np.sum(r[1:] ** 2 * inv2))
    else:
        raise ValueError(f"unknown DRB method {method!r}")
    g_net = r[-1]
    return g_dfa * p_launch * g_net * dz ** 2 * kappa_lin ** 2 * pair_sum


def span_noise(profiles: PowerMatrix, lightwaves: Sequence[Lightwave], span: FiberSpan,
               plan: BandPlan, include_drb: bool = True, drb_method: str = "direct") -> NoiseBudget:
    """Receiver-referred ASE and DRB contributions of one transparent span."""
    lws = list(lightwaves)
    rows = [i for i, lw in enumerate(lws) if lw.kind == "channel"]
    chans = [lws[i] for i in rows]
    ids = np.array([c.id for c in chans])
    f = np.array([c.f for c in chans])
    p0 = np.array([c.p_launch for c in chans])
    b = np.array([c.symbol_rate for c in chans])
    nf = np.array([plan.band(c.band).nf_db for c in chans])
    v = profiles.values
    p_end = v[rows, -1]
    g = dfa_gain(p0, p_end, span.lumped_loss)
    p_dfa = ase_dfa(g, nf, f, b)
    p_ram = ase_raman(profiles, lws, span, rows) * p0 / p_end
    p_drb = span_drb(profiles, lws, span, drb_method) if include_drb else np.zeros(len(rows))
    return NoiseBudget(ids, f, p_dfa, p_ram, p_drb, np.zeros(len(rows)))


def span_drb(profiles: PowerMatrix, lightwaves: Sequence[Lightwave], span: FiberSpan,
             method: str = "direct") -> np.ndarray:
    """DRB [mW] of every channel of one span, in channel order."""
    lws = list(lightwaves)
    rows = [i for i, lw in enumerate(lws) if lw.kind == "channel"]
    v = profiles.values
    p0 = np.array([lws[i].p_launch for i in rows])
    g = dfa_gain(p0, v[rows, -1], span.lumped_loss)
    kap = span.kappa_lin
    return np.array([drb_span(v[i], p0[k], g[k], kap, span.dz, method) for k, i in enumerate(rows)])


def accumulate_link_noise(per_span: Sequence[NoiseBudget], n_spans: int) -> NoiseBudget:
    """Sum of per-span budgets for a transparent link of ``n_spans`` spans."""
    if len(per_span) != n_spans:
        raise ValueError(f"expected {n_spans} span budgets, got {len(per_span)}")
    if n_spans < 1:
        raise ValueError("link needs at least one span")
    total = per_span[0]
    for b in per_span[1:]:
        total = total + b
    return total
