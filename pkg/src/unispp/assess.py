"""Full link assessment: SPPs per span, noise, NLI, GSNR and throughput."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gsnr import ChannelResult, NLIEstimator, ThroughputCurve, ZeroNLI, gsnr
from .link import BandPlan, FiberSpan, Lightwave
from .noise import NoiseBudget, accumulate_link_noise, span_drb, span_noise
from .reference import RelaxationSettings, solve_with_fallback
from .unidir import PowerMatrix, SolverOptions, SolverReport, SpanModel


@dataclass
class Assessment:
    results: ChannelResult
    budget: NoiseBudget
    profiles: list[PowerMatrix]
    reports: list[SolverReport]
    timings: dict = field(default_factory=dict)  # seconds per stage: spp, ase, drb, nli

    @property
    def total_throughput_tbps(self) -> float:
        return float(np.sum(self.results.tput)) * 1e-3

    @property
    def mean_throughput(self) -> float:
        return float(np.mean(self.results.tput))

    @property
    def used_fallback(self) -> bool:
        return any(r.solver != "unidir" for r in self.reports)

    def timing_breakdown(self) -> dict:
        total = sum(self.timings.values())
        return {k: (v, 100.0 * v / total if total > 0 else 0.0) for k, v in self.timings.items()}


def assess_link(lightwaves: Sequence[Lightwave], spans: Sequence[FiberSpan], plan: BandPlan,
                nli: NLIEstimator | None = None, curve: ThroughputCurve | None = None,
                options: SolverOptions | None = None, settings: RelaxationSettings | None = None,
                include_drb: bool = True, drb_method: str = "direct") -> Assessment:
    """Assess a transparent link whose spans all start from the nominal launch spectrum.

    Spans that are the same FiberSpan object share one solve, since the
    launch condition of every transparent span is identical.  Raises
    NotConverged when both solvers fail on some span.
    """
    lws = list(lightwaves)
    opts = options or SolverOptions()
    nli = nli or ZeroNLI()
    curve = curve or ThroughputCurve.default()
    channels = [lw for lw in lws if lw.kind == "channel"]
    timings = dict.fromkeys(("spp", "ase", "drb", "nli"), 0.0)
    solved: dict[int, tuple] = {}
    profiles, reports, budgets = [], [], []
    for span in spans:
        key = id(span)
        if key not in solved:
            t0 = time.perf_counter()
            model = SpanModel(lws, span, opts.integrator)
            prof, rep = solve_with_fallback(lws, span, opts, settings, model=model)
            t1 = time.perf_counter()
            budget = span_noise(prof, lws, span, plan, include_drb=False)
            t2 = time.perf_counter()
            if include_drb:
                budget.p_drb = span_drb(prof, lws, span, drb_method)
            t3 = time.perf_counter()
            timings["spp"] += t1 - t0
            timings["ase"] += t2 - t1
            timings["drb"] += t3 - t2
            solved[key] = (prof, rep, budget)
        prof, rep, budget = solved[key]
        profiles.append(prof)
        reports.append(rep)
        budgets.append(budget)
    total = accumulate_link_noise(budgets, len(spans))
    t0 = time.perf_counter()
    total.p_nli = np.asarray(nli(channels, list(spans), profiles), dtype=float)
    timings["nli"] += time.perf_counter() - t0
    res = gsnr([c.p_launch for c in channels], total)
    res.tput = curve(res.gsnr_db)
    return Assessment(res, total, profiles, reports, timings)
