"""Unidirectional fixed-point solver for Raman-coupled spatial power profiles.

Every lightwave, including backward pumps, is propagated from z = 0 towards
z = L.  Backward pumps get flipped loss and Raman signs; their unknown z = 0
values are fixed by rescaling each pump row to a reference launch power at
z = L after every iteration.  The references ramp up from a scaled-down start
to the nominal launch powers following a linearly decreasing dB step.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .link import FiberSpan, Lightwave, coupling_matrix, resolve_alpha


class Diverged(RuntimeError):
    """The iteration produced non-finite values or an overflowing exponent."""

    def __init__(self, msg, iteration=None):
        super().__init__(msg)
        self.iteration = iteration


class NotConverged(RuntimeError):
    """Iteration cap reached; ``profiles`` and ``report`` hold the best effort."""

    def __init__(self, msg, profiles=None, report=None):
        super().__init__(msg)
        self.profiles = profiles
        self.report = report


@dataclass
class PowerMatrix:
    """N x (M+1) powers [mW]; row n is lightwave ``ids[n]`` at z = m dz."""

    values: np.ndarray
    dz: float
    ids: tuple = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not self.ids:
            self.ids = tuple(range(self.values.shape[0]))

    @property
    def z(self) -> np.ndarray:
        return np.arange(self.values.shape[1]) * self.dz

    @property
    def db(self) -> np.ndarray:
        return 10.0 * np.log10(self.values)

    def is_valid(self) -> bool:
        v = self.values
        return bool(np.all(np.isfinite(v)) and np.all(v > 0))

    def row(self, lw_id: int) -> np.ndarray:
        return self.values[self.ids.index(lw_id)]


@dataclass
class SolverOptions:
    tol_db: float = 1e-4
    max_iter: int = 1000
    min_iter: int = 10
    use_schedule: bool = True
    integrator: str = "matrix"  # "matrix" (U operator) or "cumulative"
    exp_limit: float = 700.0
    # log-domain under-relaxation of successive iterates; 1.0 is the plain update.
    # With adaptive_damping, once the schedule is done, the factor is halved
    # (down to min_damping) and the iteration restarts from the best iterate
    # whenever the residual rises above twice its running minimum or a step
    # overflows.
    damping: float = 1.0
    adaptive_damping: bool = True
    min_damping: float = 1.0 / 16.0


@dataclass
class IterationSchedule:
    t_s: float
    n_iter: int
    steps_db: np.ndarray  # delta(k), k = 1..n_iter
    ref_db: np.ndarray  # (n_iter + 1, n_pumps); row 0 is the scaled-down start

    def reference_mw(self, k: int) -> np.ndarray:
        return 10.0 ** (self.ref_db[min(k, self.n_iter)] / 10.0)


@dataclass
class SolverReport:
    iterations: int = 0
    scheduled_iterations: int = 0
    converged: bool = False
    residual_db: float = math.inf
    pump_boundary_error_db: float = 0.0
    wall_time_ms: float = 0.0
    t_s_db: float = 0.0
    damping: float = 1.0
    solver: str = "unidir"
    fallback_reason: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def refinement_iterations(self) -> int:
        return max(self.iterations - self.scheduled_iterations, 0)

    def as_text(self) -> str:
        lines = [
            f"solver                 : {self.solver}",
            f"converged              : {self.converged}",
            f"iterations             : {self.iterations}",
            f"scheduled iterations   : {self.scheduled_iterations}",
            f"pump scale-down t_s    : {self.t_s_db:.4f} dB",
            f"residual               : {self.residual_db:.3e} dB",
            f"pump boundary error    : {self.pump_boundary_error_db:.3e} dB",
            f"final damping          : {self.damping:g}",
            f"wall time              : {self.wall_time_ms:.1f} ms",
        ]
        if self.fallback_reason:
            lines.append(f"fallback reason        : {self.fallback_reason}")
        return "\n".join(lines)


def trapezoid_matrix(m: int, dz: float = 1.0) -> np.ndarray:
    """Cumulative trapezoid operator for ``m`` samples, scaled by ``dz``.

    ``p @ trapezoid_matrix(m, dz)`` gives the running integral of ``p`` with
    value 0 at the first sample.
    """
    if m < 2:
        raise ValueError("trapezoid operator needs at least 2 samples")
    u = np.triu(np.ones((m, m)), k=1)
    u[0, 1:] = 0.5
    idx = np.arange(1, m)
    u[idx, idx] = 0.5
    return u * dz


def _cumulative_trapezoid(p: np.ndarray, dz: float) -> np.ndarray:
    out = np.zeros_like(p)
    np.cumsum(0.5 * dz * (p[:, 1:] + p[:, :-1]), axis=1, out=out[:, 1:])
    return out


class SpanModel:
    """Per-span constants of the iteration: attenuation, coupling, signs, grid."""

    def __init__(self, lightwaves: Sequence[Lightwave], span: FiberSpan, integrator: str = "matrix"):
        self.lightwaves = list(lightwaves)
        self.span = span
        self.f = np.array([lw.f for lw in self.lightwaves])
        self.alpha = np.atleast_1d(resolve_alpha(span, self.f))
        self.K = coupling_matrix(self.f, span.raman)
        self.sign = np.array([-1.0 if lw.is_backward else 1.0 for lw in self.lightwaves])
        self.backward = self.sign < 0
        self.p_launch = np.array([lw.p_launch for lw in self.lightwaves])
        self.dz = span.dz
        self.z = span.z
        self.ids = tuple(lw.id for lw in self.lightwaves)
        self.loss_exponent = (self.sign * -2.0 * self.alpha)[:, None] * self.z[None, :]
        if integrator not in ("matrix", "cumulative"):
            raise ValueError(f"unknown integrator {integrator!r}")
        self.integrator = integrator
        self.exp_limit = 700.0
        self._U = trapezoid_matrix(self.z.size, self.dz) if integrator == "matrix" else None

    def integrate(self, p: np.ndarray) -> np.ndarray:
        if self._U is not None:
            return p @ self._U
        return _cumulative_trapezoid(p, self.dz)


def init_profiles(model: SpanModel):
    """Loss-only starting profiles and the pump scale-down t_s [dB]."""
    a = model.alpha[:, None]
    zf = model.z[None, :]
    L = model.span.length
    fwd = np.exp(-2.0 * a * zf)
    bwd = np.exp(-2.0 * a * (L - zf))
    p0 = model.p_launch[:, None] * np.where(model.backward[:, None], bwd, fwd)
    pump_sum = model.p_launch[model.backward].sum()
    chan_sum = model.p_launch[~model.backward].sum()
    t_s = 0.0
    if pump_sum > 0 and chan_sum > 0 and pump_sum > chan_sum:
        t_s = 10.0 * math.log10(pump_sum / chan_sum)
        p0[model.backward] *= 10.0 ** (-t_s / 10.0)
    return p0, t_s


def plan_schedule(t_s: float, pump_launch_mw, min_iter: int = 10) -> IterationSchedule:
    """Linear-ramp pump references recovering ``t_s`` dB at 10 dB per 100 iterations."""
    if t_s < 0:
        raise ValueError("t_s must be >= 0")
    nominal_db = 10.0 * np.log10(np.asarray(pump_launch_mw, dtype=float))
    n = max(math.ceil(t_s * 10.0 - 1e-9), min_iter)
    k = np.arange(1, n + 1)
    steps = 2.0 * t_s / n * (1.0 - (k - 1) / (n - 1)) if n > 1 else np.full(1, t_s)
    ref = np.empty((n + 1, nominal_db.size))
    ref[0] = nominal_db - t_s
    ref[1:] = ref[0] + np.cumsum(steps)[:, None]
    ref[-1] = nominal_db
    return IterationSchedule(t_s, n, steps, ref)


def iterate_once(p: np.ndarray, model: SpanModel) -> np.ndarray:
    """One forward pass of the integral equations on the current profiles."""
    raman = model.K @ model.integrate(p)
    expo = model.loss_exponent + model.sign[:, None] * raman
    peak = np.max(expo) if expo.size else 0.0
    if not np.isfinite(peak) or peak > model.exp_limit:
        raise Diverged(f"exponent overflow (max {peak:.3g})")
    out = p[:, :1] * np.exp(expo)
    if not np.all(np.isfinite(out)):
        raise Diverged("non-finite power in iterate")
    return out


def rescale_pumps(p: np.ndarray, model: SpanModel, ref_mw) -> np.ndarray:
    """Scale each backward row so its z = L value equals ``ref_mw``."""
    out = p.copy()
    end = out[model.backward, -1]
    if np.any(~np.isfinite(end)) or np.any(end <= 0):
        raise Diverged("pump power at span end is zero or non-finite")
    out[model.backward] *= (np.asarray(ref_mw) / end)[:, None]
    return out


def solve_span(lightwaves: Sequence[Lightwave], span: FiberSpan, options: SolverOptions | None = None,
               model: SpanModel | None = None):
    """Spatial power profiles of all lightwaves in one span.

    Returns ``(PowerMatrix, SolverReport)``.  Raises Diverged on overflow or
    NaN, NotConverged when ``options.max_iter`` is exhausted.
    """
    opts = options or SolverOptions()
    t0 = time.perf_counter()
    if model is None:
        model = SpanModel(lightwaves, span, opts.integrator)
    model.exp_limit = opts.exp_limit
    p, t_s = init_profiles(model)
    pumps = model.p_launch[model.backward]
    coupled = bool(np.any(model.K))
    if (not opts.use_schedule or not coupled) and t_s > 0:
        p[model.backward] *= 10.0 ** (t_s / 10.0)
        t_s = 0.0
    # without Raman coupling the loss-only start is already the fixed point
    sched = plan_schedule(t_s, pumps, opts.min_iter if coupled else 1)
    report = SolverReport(scheduled_iterations=sched.n_iter, t_s_db=t_s)
    has_pumps = bool(model.backward.any())
    log_prev = np.log(p)

    omega = opts.damping
    best = (math.inf, p, log_prev)  # smallest post-schedule residual and its iterate
    k = 0
    while k < opts.max_iter:
        k += 1
        ref = sched.reference_mw(k)
        adaptive = opts.adaptive_damping and k > sched.n_iter
        try:
            p_new = iterate_once(p, model)
            if has_pumps:
                p_new = rescale_pumps(p_new, model, ref)
            log_new = np.log(p_new)
            if not np.all(np.isfinite(log_new)):
                raise Diverged("power underflow in iterate")
            if omega < 1.0:
                log_new = log_prev + omega * (log_new - log_prev)
                p_new = np.exp(log_new)
                if has_pumps:
                    p_new = rescale_pumps(p_new, model, ref)
                    log_new = np.log(p_new)
        except Diverged as exc:
            if adaptive and omega > opts.min_damping and math.isfinite(best[0]):
                omega = max(omega / 2.0, opts.min_damping)
                _, p, log_prev = best
                report.history.append(math.inf)
                continue
            exc.iteration = k
            report.iterations = k
            report.wall_time_ms = (time.perf_counter() - t0) * 1e3
            raise
        change = float(np.max(np.abs(log_new - log_prev))) * 10.0 / math.log(10.0)
        report.history.append(change)
        p, log_prev = p_new, log_new
        if k >= sched.n_iter and change < opts.tol_db:
            report.converged = True
            break
        if adaptive:
            if change < best[0]:
                best = (change, p, log_prev)
            elif change > 2.0 * best[0] and omega > opts.min_damping:
                # growing oscillation: restart from the best iterate, more damped
                omega = max(omega / 2.0, opts.min_damping)
                _, p, log_prev = best

    report.damping = omega
    report.iterations = k
    report.residual_db = report.history[-1] if report.history else 0.0
    if has_pumps:
        err = 10.0 * np.log10(p[model.backward, -1] / pumps)
        report.pump_boundary_error_db = float(np.max(np.abs(err)))
    report.wall_time_ms = (time.perf_counter() - t0) * 1e3
    result = PowerMatrix(p, model.dz, model.ids)
    if not report.converged:
        raise NotConverged(f"no convergence after {k} iterations "
                           f"(residual {report.residual_db:.2e} dB)", result, report)
    return result, report
