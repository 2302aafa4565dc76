"""Brute-force two-point boundary value Raman solvers.

``relaxation`` (default): alternating sweeps.  Forward lightwaves are
integrated from z = 0 with a classical RK4 while backward ones are held fixed,
then backward lightwaves are integrated from z = L with the forward ones held,
each family under-relaxed in the log domain.

``shooting``: the whole system is integrated from z = 0 with RK4 in log
power; the unknown z = 0 powers of the backward lightwaves are found by Newton
iteration on the z = L mismatch, with continuation in the pump launch power.
Needed when gain and depletion are so strong that relaxation oscillates.

``auto`` runs relaxation, aborting early on a growing residual, then shooting.

Both are slow but independent of the unidirectional iteration, so they serve
as the accuracy oracle and as the fallback when that iteration diverges.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .link import FiberSpan, Lightwave, coupling_matrix, resolve_alpha
from .unidir import NotConverged, PowerMatrix

_LOG_CAP = math.log(1e7)  # 10 kW; no physical profile gets near it
_LOG_FLOOR = math.log(1e-300)
DB_PER_NEPER = 10.0 / math.log(10.0)


@dataclass
class RelaxationSettings:
    damping: float = 0.3
    max_sweeps: int = 500
    tol_db: float = 1e-5
    inner_steps: int = 4  # RK4 steps per output grid step
    method: str = "relaxation"  # "relaxation", "shooting" or "auto"
    # auto mode: abandon relaxation once the residual exceeds this multiple of its minimum
    blowup_factor: float = 10.0
    newton_tol_db: float = 1e-7
    continuation_step_db: float = 2.5

    def __post_init__(self):
        if self.method not in ("relaxation", "shooting", "auto"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must be in (0, 1]")
        if not self.tol_db > 0:
            raise ValueError("tolerance must be > 0")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")


@dataclass
class RelaxationReport:
    sweeps: int = 0
    converged: bool = False
    residual_db: float = math.inf
    boundary_residual_db: float = 0.0
    wall_time_ms: float = 0.0
    residuals: list = field(default_factory=list, repr=False)
    solver: str = "reference"
    method: str = "relaxation"
    ivp_solves: int = 0

    def as_text(self) -> str:
        return "\n".join([
            f"solver                 : {self.solver} ({self.method})",
            f"converged              : {self.converged}",
            f"sweeps                 : {self.sweeps}",
            f"IVP solves             : {self.ivp_solves}",
            f"residual               : {self.residual_db:.3e} dB",
            f"boundary residual      : {self.boundary_residual_db:.3e} dB",
            f"wall time              : {self.wall_time_ms:.1f} ms",
        ])


def _midpoints(z, logp):
    if logp.shape[0] == 0:
        return np.empty((0, z.size - 1))
    zm = 0.5 * (z[1:] + z[:-1])
    return CubicSpline(z, logp, axis=1)(zm)


def _rk4_family(y0, zsign, a, Kself, drive_nodes, drive_mid, h, n_steps, reverse):
    """Integrate d(lnP)/dz = zsign * (-2a + Kself exp(lnP) + drive) over the fine grid.

    ``drive_nodes``/``drive_mid`` hold the held family's contribution at grid
    nodes and midpoints.  With ``reverse`` the integration runs from z = L.
    """
    nf = n_steps + 1
    out = np.empty((y0.size, nf))
    step = -h if reverse else h
    idx = nf - 1 if reverse else 0
    y = y0.copy()
    out[:, idx] = y
    base = -2.0 * a

    def rhs(yv, drive):
        return zsign * (base + Kself @ np.exp(np.minimum(yv, _LOG_CAP)) + drive)

    for _ in range(n_steps):
        nxt = idx - 1 if reverse else idx + 1
        mid = nxt if reverse else idx
        d0, dm, d1 = drive_nodes[:, idx], drive_mid[:, mid], drive_nodes[:, nxt]
        k1 = rhs(y, d0)
        k2 = rhs(y + 0.5 * step * k1, dm)
        k3 = rhs(y + 0.5 * step * k2, dm)
        k4 = rhs(y + step * k3, d1)
        y = y + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y = np.clip(y, _LOG_FLOOR, _LOG_CAP)
        out[:, nxt] = y
        idx = nxt
    return out


class _System:
    def __init__(self, lws, span, inner_steps):
        self.lws = list(lws)
        self.f = np.array([lw.f for lw in self.lws])
        self.alpha = np.atleast_1d(resolve_alpha(span, self.f))
        self.K = coupling_matrix(self.f, span.raman)
        self.bwd = np.array([lw.is_backward for lw in self.lws], dtype=bool)
        self.fi, self.bi = np.flatnonzero(~self.bwd), np.flatnonzero(self.bwd)
        self.p0 = np.array([lw.p_launch for lw in self.lws])
        self.n_steps = span.n_steps * inner_steps
        self.h = span.dz / inner_steps
        self.z = np.arange(self.n_steps + 1) * self.h
        self.L = span.length


def solve_bvp_span(lightwaves: Sequence[Lightwave], span: FiberSpan,
                   settings: RelaxationSettings | None = None, raise_on_failure: bool = True):
    """Profiles on the span grid from a two-point boundary value solve.

    Returns ``(PowerMatrix, RelaxationReport)``; raises NotConverged (with the
    best-effort profiles attached) on failure, unless ``raise_on_failure`` is
    False.
    """
    st = settings or RelaxationSettings()
    t0 = time.perf_counter()
    sysm = _System(lightwaves, span, st.inner_steps)
    if st.method == "shooting":
        logp, report = _shoot(sysm, st)
    else:
        logp, report = _relax(sysm, st, abort_on_blowup=st.method == "auto")
        if st.method == "auto" and not report.converged:
            sweeps = report.sweeps
            logp, report = _shoot(sysm, st)
            report.sweeps = sweeps

    fi, bi, p0 = sysm.fi, sysm.bi, sysm.p0
    out = np.exp(logp[:, ::st.inner_steps])
    bnd = np.concatenate([np.abs(logp[fi, 0] - np.log(p0[fi])), np.abs(logp[bi, -1] - np.log(p0[bi]))])
    report.boundary_residual_db = float(bnd.max() * DB_PER_NEPER) if bnd.size else 0.0
    report.wall_time_ms = (time.perf_counter() - t0) * 1e3
    result = PowerMatrix(out, span.dz, tuple(lw.id for lw in sysm.lws))
    if not report.converged and raise_on_failure:
        raise NotConverged(f"reference solver ({report.method}) did not converge "
                           f"(residual {report.residual_db:.2e} dB)", result, report)
    return result, report


def _relax(sysm: _System, st: RelaxationSettings, abort_on_blowup: bool):
    fi, bi, p0, alpha, K = sysm.fi, sysm.bi, sysm.p0, sysm.alpha, sysm.K
    n_steps, h, z, L = sysm.n_steps, sysm.h, sysm.z, sysm.L
    logp = np.empty((len(sysm.lws), z.size))
    logp[fi] = np.log(p0[fi])[:, None] - 2.0 * alpha[fi, None] * z[None, :]
    logp[bi] = np.log(p0[bi])[:, None] - 2.0 * alpha[bi, None] * (L - z[None, :])

    K_ff, K_fb = K[np.ix_(fi, fi)], K[np.ix_(fi, bi)]
    K_bb, K_bf = K[np.ix_(bi, bi)], K[np.ix_(bi, fi)]
    report = RelaxationReport()
    # a lone family is an initial value problem: take the full step
    w = st.damping if (fi.size and bi.size) else 1.0

    for sweep in range(1, st.max_sweeps + 1):
        resid = 0.0
        if fi.size:
            held = logp[bi]
            drive = K_fb @ np.exp(held)
            drive_mid = K_fb @ np.exp(_midpoints(z, held))
            new = _rk4_family(logp[fi, 0], 1.0, alpha[fi], K_ff, drive, drive_mid, h, n_steps, False)
            resid = max(resid, float(np.max(np.abs(new - logp[fi]))))
            logp[fi] += w * (new - logp[fi])
        if bi.size:
            held = logp[fi]
            drive = K_bf @ np.exp(held)
            drive_mid = K_bf @ np.exp(_midpoints(z, held))
            new = _rk4_family(logp[bi, -1], -1.0, alpha[bi], K_bb, drive, drive_mid, h, n_steps, True)
            resid = max(resid, float(np.max(np.abs(new - logp[bi]))))
            logp[bi] += w * (new - logp[bi])
        resid_db = resid * DB_PER_NEPER
        report.residuals.append(resid_db)
        report.sweeps = sweep
        if not np.all(np.isfinite(logp)):
            break
        if resid_db < st.tol_db or not (fi.size and bi.size):
            report.converged = bool(np.isfinite(resid_db))
            break
        if abort_on_blowup and resid_db > st.blowup_factor * min(report.residuals):
            break
    report.residual_db = report.residuals[-1] if report.residuals else 0.0
    return logp, report


def _integrate_all(sysm: _System, y0: np.ndarray) -> np.ndarray:
    """RK4 of every lightwave from z = 0, backward ones with flipped signs."""
    sgn = np.where(sysm.bwd, -1.0, 1.0)
    base = sgn * -2.0 * sysm.alpha
    Ks = sysm.K * sgn[:, None]
    h = sysm.h
    ys = np.empty((y0.size, sysm.n_steps + 1))
    y = y0.copy()
    ys[:, 0] = y

    def rhs(yv):
        return base + Ks @ np.exp(np.minimum(yv, _LOG_CAP))

    for i in range(sysm.n_steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = np.clip(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), _LOG_FLOOR, _LOG_CAP)
        ys[:, i + 1] = y
    return ys


def _newton_level(sysm, st, y0, xt, tgt, report):
    """Newton iterations on the backward z = 0 log powers for one pump level."""
    bi = sysm.bi
    ys_t, resid_db = None, math.inf
    for _ in range(30):
        y0[bi] = xt
        ys_t = _integrate_all(sysm, y0)
        report.ivp_solves += 1
        r = ys_t[bi, -1] - tgt
        resid_db = float(np.max(np.abs(r))) * DB_PER_NEPER
        report.residuals.append(resid_db)
        if not np.isfinite(resid_db):
            break
        if resid_db < st.newton_tol_db:
            return xt, ys_t, resid_db, True
        jac = np.empty((bi.size, bi.size))
        eps = 1e-6
        for j in range(bi.size):
            y1 = y0.copy()
            y1[bi[j]] += eps
            jac[:, j] = (_integrate_all(sysm, y1)[bi, -1] - ys_t[bi, -1]) / eps
            report.ivp_solves += 1
        try:
            dx = -np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            break
        big = float(np.max(np.abs(dx)))
        if big > 5.0:
            dx *= 5.0 / big
        xt = xt + dx
    return xt, ys_t, resid_db, False


def _shoot(sysm: _System, st: RelaxationSettings):
    """Newton shooting on the backward lightwaves' z = 0 log powers."""
    report = RelaxationReport(method="shooting")
    fi, bi, p0 = sysm.fi, sysm.bi, sysm.p0
    y0 = np.log(p0)
    if not bi.size:
        report.converged = True
        report.residual_db = 0.0
        report.ivp_solves = 1
        return _integrate_all(sysm, y0), report

    target = np.log(p0[bi])
    # continuation in pump level, starting where pump and channel sums coincide
    start = 0.0
    if fi.size and p0[bi].sum() > p0[fi].sum():
        start = 10.0 * math.log10(p0[bi].sum() / p0[fi].sum())
    x = target - start / DB_PER_NEPER - 2.0 * sysm.alpha[bi] * sysm.L
    level, step = start, st.continuation_step_db
    ys = ys_t = None
    resid_db = math.inf
    while True:
        trial = level if ys is None else max(level - step, 0.0)
        xt, ys_t, resid_db, ok = _newton_level(sysm, st, y0, xt=x.copy(),
                                               tgt=target - trial / DB_PER_NEPER, report=report)
        if ok:
            x, ys, level = xt, ys_t, trial
            report.sweeps += 1
            if level == 0.0:
                report.converged = True
                break
            step = min(step * 1.5, st.continuation_step_db)
        elif ys is None or step < 1e-3:
            break
        else:
            step /= 2.0
    report.residual_db = resid_db
    if ys is None:
        ys = ys_t
    return ys, report


def compare_profiles(a: PowerMatrix, b: PowerMatrix, sample_interval: float | None = None):
    """Max |10 log10(a/b)| over all rows and sample points.

    Returns ``(max_db, (row, column))`` with the column index on the full grid.
    """
    va, vb = np.asarray(a.values), np.asarray(b.values)
    if va.shape != vb.shape:
        raise ValueError(f"shape mismatch {va.shape} vs {vb.shape}")
    stride = 1
    if sample_interval is not None:
        stride = round(sample_interval / a.dz)
        if stride < 1 or abs(stride * a.dz - sample_interval) > 1e-9:
            raise ValueError("sample interval must be a multiple of the grid step")
    cols = np.arange(0, va.shape[1], stride)
    diff = np.abs(10.0 * np.log10(va[:, cols] / vb[:, cols]))
    r, c = np.unravel_index(np.argmax(diff), diff.shape)
    return float(diff[r, c]), (int(r), int(cols[c]))


def solve_with_fallback(lightwaves: Sequence[Lightwave], span: FiberSpan, options=None,
                        settings: RelaxationSettings | None = None, model=None):
    """Unidirectional solve, falling back to the reference solver.

    Falls back on divergence or when the iteration cap is hit.  The returned
    report is a SolverReport; when the fallback ran, ``solver`` is
    ``"reference"``, ``fallback_reason`` says why and ``converged`` reflects
    the reference solve.  Raises NotConverged only if both solvers fail.
    """
    from .unidir import Diverged, SolverReport, solve_span

    try:
        return solve_span(lightwaves, span, options, model=model)
    except (Diverged, NotConverged) as exc:
        reason = f"{type(exc).__name__}: {exc}"
        if isinstance(exc, Diverged) and exc.iteration is not None:
            reason += f" (iteration {exc.iteration})"
    st = settings or RelaxationSettings(method="auto")
    profiles, ref = solve_bvp_span(lightwaves, span, st, raise_on_failure=False)
    report = SolverReport(iterations=ref.sweeps, converged=ref.converged, residual_db=ref.residual_db,
                          pump_boundary_error_db=ref.boundary_residual_db,
                          wall_time_ms=ref.wall_time_ms, solver="reference", fallback_reason=reason)
    if not ref.converged:
        raise NotConverged(f"both solvers failed; {reason}", profiles, report)
    return profiles, report
