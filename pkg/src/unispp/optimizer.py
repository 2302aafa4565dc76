"""Derivative-free search over launch-spectrum coefficients and pump settings.

Layout of a parameter vector: ``a0..a3`` for every band in plan order, then
``(f_thz, p_dbm)`` for every pump.  The search runs Nelder-Mead in the unit
cube of the box bounds with seeded restarts and a final coordinate polish;
every candidate goes through :func:`project_feasible` before evaluation.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .assess import Assessment, assess_link
from .gsnr import objective
from .link import ConfigurationError
from .scenario import Scenario
from .unidir import NotConverged

PUMP_GAP_THZ = 2.0
PUMP_SPACING_THZ = 0.5
INFEASIBLE = -math.inf


@dataclass(frozen=True)
class ParamLayout:
    bands: tuple[str, ...]
    n_pumps: int
    lower: np.ndarray
    upper: np.ndarray
    signal_max: float

    @property
    def size(self) -> int:
        return 4 * len(self.bands) + 2 * self.n_pumps

    @property
    def pump_f_slice(self) -> slice:
        return slice(4 * len(self.bands), self.size, 2)

    @property
    def pump_p_slice(self) -> slice:
        return slice(4 * len(self.bands) + 1, self.size, 2)

    @property
    def pump_floor(self) -> float:
        return self.signal_max + PUMP_GAP_THZ

    def labels(self) -> list[str]:
        out = [f"{b}_a{k}" for b in self.bands for k in range(4)]
        for i in range(self.n_pumps):
            out += [f"pump{i}_f_thz", f"pump{i}_p_dbm"]
        return out

    @classmethod
    def for_scenario(cls, scen: Scenario) -> "ParamLayout":
        o = scen.optimizer
        smax = scen.signal_max
        f_lo, f_hi = o.pump_f_thz or (smax + PUMP_GAP_THZ, smax + 18.0)
        f_lo = max(f_lo, smax + PUMP_GAP_THZ)
        n_p = len(scen.pumps)
        if n_p and f_hi - f_lo < PUMP_SPACING_THZ * (n_p - 1):
            raise ConfigurationError("pump frequency bounds too narrow for the pump count")
        coeff = [o.a0_dbm, o.a1_db_per_thz, o.a2_db_per_thz2, o.a3_db_per_thz3]
        lo, hi = [], []
        for _ in scen.plan.bands:
            lo += [c[0] for c in coeff]
            hi += [c[1] for c in coeff]
        for _ in range(n_p):
            lo += [f_lo, o.pump_p_dbm[0]]
            hi += [f_hi, o.pump_p_dbm[1]]
        return cls(tuple(b.name for b in scen.plan.bands), n_p, np.array(lo), np.array(hi), smax)


@dataclass
class ParamVector:
    values: np.ndarray
    layout: ParamLayout

    @classmethod
    def from_scenario(cls, scen: Scenario, layout: ParamLayout | None = None) -> "ParamVector":
        layout = layout or ParamLayout.for_scenario(scen)
        vals = [x for b in layout.bands for x in scen.spectrum[b]]
        for f, p in scen.pumps:
            vals += [f, p]
        return cls(np.array(vals, dtype=float), layout)

    def spectrum(self) -> dict:
        return {b: [float(x) for x in self.values[4 * i:4 * i + 4]] for i, b in enumerate(self.layout.bands)}

    def pumps(self) -> list[tuple[float, float]]:
        lay = self.layout
        return list(zip(self.values[lay.pump_f_slice].tolist(), self.values[lay.pump_p_slice].tolist()))

    def is_feasible(self) -> bool:
        lay = self.layout
        v = self.values
        if np.any(v < lay.lower) or np.any(v > lay.upper):
            return False
        f = np.sort(v[lay.pump_f_slice])
        if f.size and f[0] < lay.pump_floor:
            return False
        return bool(np.all(np.diff(f) >= PUMP_SPACING_THZ - 1e-9))


def project_feasible(params: ParamVector) -> ParamVector:
    """Clip to the box, keep pumps 2 THz above the signals and 0.5 THz apart.

    Pumps are processed in frequency order (ties by index); a pump too close
    to its lower neighbour is pushed up, and if that runs past the upper
    bound the stack is pushed back down from the top.  Idempotent.
    """
    lay = params.layout
    v = np.clip(params.values, lay.lower, lay.upper)
    f = v[lay.pump_f_slice].copy()
    if f.size:
        lo = max(lay.lower[lay.pump_f_slice][0], lay.pump_floor)
        hi = lay.upper[lay.pump_f_slice][0]
        order = np.argsort(f, kind="stable")
        fs = np.maximum(f[order], lo)
        for i in range(1, fs.size):
            fs[i] = max(fs[i], fs[i - 1] + PUMP_SPACING_THZ)
        fs[-1] = min(fs[-1], hi)
        for i in range(fs.size - 2, -1, -1):
            fs[i] = min(fs[i], fs[i + 1] - PUMP_SPACING_THZ)
        f[order] = fs
        v[lay.pump_f_slice] = f
    return ParamVector(v, lay)


@dataclass
class Evaluation:
    f_obj: float
    assessment: Assessment | None


def evaluate_candidate(params: ParamVector, scenario: Scenario, w: float | None = None,
                       include_drb: bool | None = None) -> Evaluation:
    """Objective of one candidate; ``-inf`` when both solvers fail on some span."""
    scen = scenario.with_params(params.spectrum(), params.pumps())
    w = scen.optimizer.w if w is None else w
    drb = scen.include_drb if include_drb is None else include_drb
    try:
        a = assess_link(scen.lightwaves(), scen.spans, scen.plan, scen.nli_estimator(), scen.curve,
                        scen.solver, scen.reference, drb, scen.drb_method)
    except NotConverged:
        return Evaluation(INFEASIBLE, None)
    return Evaluation(objective(a.results.tput, w), a)


def seed_point(layout: ParamLayout) -> ParamVector:
    """Flat -1 dBm per channel; pumps spread 2..10 THz above the top band at 20..27 dBm."""
    v = np.zeros(layout.size)
    for i in range(len(layout.bands)):
        v[4 * i] = -1.0
    n = layout.n_pumps
    if n:
        v[layout.pump_f_slice] = layout.signal_max + np.linspace(2.0, 10.0, n)
        v[layout.pump_p_slice] = np.linspace(20.0, 27.0, n)
    return project_feasible(ParamVector(v, layout))


@dataclass
class OptimizationResult:
    best: ParamVector
    best_f: float
    history: list = field(default_factory=list)  # (params array, f_obj) per evaluation
    evaluations: int = 0
    stop_reason: str = ""
    wall_time_s: float = 0.0

    def best_so_far(self) -> np.ndarray:
        return np.maximum.accumulate(np.array([f for _, f in self.history]))


class _Stop(Exception):
    pass


class _Search:
    def __init__(self, scen: Scenario, layout: ParamLayout, w: float, budget: int, window: int, rtol: float):
        self.scen, self.layout, self.w = scen, layout, w
        self.budget, self.window, self.rtol = budget, window, rtol
        self.history: list = []
        self.best_f = INFEASIBLE
        self.best_x: np.ndarray | None = None
        self.best_trace: list[float] = []
        self.cache: dict = {}
        self.phase_start = 0

    def to_params(self, u) -> ParamVector:
        lay = self.layout
        x = lay.lower + np.clip(u, 0.0, 1.0) * (lay.upper - lay.lower)
        return project_feasible(ParamVector(x, lay))

    def to_unit(self, x) -> np.ndarray:
        span = self.layout.upper - self.layout.lower
        return np.divide(x - self.layout.lower, span, out=np.zeros_like(x), where=span > 0)

    def evaluate(self, params: ParamVector) -> float:
        if len(self.history) >= self.budget:
            raise _Stop("budget")
        key = params.values.tobytes()
        if key not in self.cache:
            self.cache[key] = evaluate_candidate(params, self.scen, self.w).f_obj
        f = self.cache[key]
        self.history.append((params.values.copy(), f))
        if f > self.best_f:
            self.best_f, self.best_x = f, params.values.copy()
        self.best_trace.append(self.best_f)
        return f

    def plateaued(self) -> bool:
        n = len(self.best_trace)
        if n - self.phase_start <= self.window:
            return False
        old, new = self.best_trace[-1 - self.window], self.best_trace[-1]
        if not math.isfinite(old):
            return False
        return (new - old) <= self.rtol * max(abs(old), 1e-12)

    def cost(self, u) -> float:
        f = self.evaluate(self.to_params(u))
        if self.plateaued():
            raise _Stop("plateau")
        outside = float(np.sum((u - np.clip(u, 0.0, 1.0)) ** 2))
        return (-f if math.isfinite(f) else 1e12) + 1e3 * outside

    def nelder_mead(self, u0, step, rng) -> str:
        n = u0.size
        simplex = [u0]
        for i in range(n):
            d = np.zeros(n)
            d[i] = step * (1.0 + 0.2 * rng.standard_normal())
            v = u0 + d if u0[i] + d[i] <= 1.0 else u0 - d
            simplex.append(v)
        self.phase_start = len(self.best_trace)
        try:
            minimize(self.cost, u0, method="Nelder-Mead",
                     options={"initial_simplex": np.array(simplex), "maxfev": 10 ** 9,
                              "xatol": 1e-6, "fatol": 1e-9, "adaptive": True})
        except _Stop as stop:
            return str(stop)
        return "converged"

    def polish(self, step: float) -> str:
        """Coordinate search around the incumbent, halving the step on failure."""
        self.phase_start = len(self.best_trace)
        u = self.to_unit(self.best_x)
        try:
            while step > 1e-3:
                improved = False
                for i in range(u.size):
                    for sgn in (1.0, -1.0):
                        trial = u.copy()
                        trial[i] = np.clip(trial[i] + sgn * step, 0.0, 1.0)
                        before = self.best_f
                        self.cost(trial)
                        if self.best_f > before:
                            u = self.to_unit(self.best_x)
                            improved = True
                            break
                if not improved:
                    step /= 2.0
        except _Stop as stop:
            return str(stop)
        return "converged"


def optimize(scenario: Scenario, w: float | None = None, budget: int | None = None,
             seed: int | None = None, start: ParamVector | None = None) -> OptimizationResult:
    """Maximize the mean-throughput objective (``w`` = 0) or its flatness-weighted form."""
    opts = scenario.optimizer
    w = opts.w if w is None else w
    budget = opts.budget if budget is None else budget
    seed = opts.seed if seed is None else seed
    if budget < 1:
        raise ValueError("budget must be >= 1")
    t0 = time.perf_counter()
    scen = scenario.with_step(opts.dz_km) if opts.dz_km else scenario
    layout = ParamLayout.for_scenario(scen)
    rng = np.random.default_rng(seed)
    search = _Search(scen, layout, w, budget, opts.plateau_window, opts.plateau_rtol)
    x0 = start if start is not None else seed_point(layout)
    reason = ""
    try:
        search.evaluate(project_feasible(x0))
        u0 = search.to_unit(search.history[0][0])
        polish_share = max(budget // 10, 1)
        nm_budget = budget - polish_share
        runs = 1 + opts.restarts
        for r in range(runs):
            search.budget = min(budget, len(search.history) + max((nm_budget - len(search.history)) // (runs - r), 1))
            if r == 0:
                start_u, step = u0, 0.15
            else:
                base = search.to_unit(search.best_x) if search.best_x is not None else u0
                start_u = np.clip(base + 0.15 * rng.standard_normal(base.size), 0.0, 1.0)
                step = 0.1
            reason = search.nelder_mead(start_u, step, rng)
        search.budget = budget
        if search.best_x is not None:
            reason = search.polish(0.05)
    except _Stop as stop:
        reason = str(stop)
    if not any(math.isfinite(f) for _, f in search.history):
        raise RuntimeError("no feasible candidate found")
    return OptimizationResult(ParamVector(search.best_x, layout), search.best_f, search.history,
                              len(search.history), reason, time.perf_counter() - t0)
