import numpy as np
import pytest

from unispp.link import (Band, BandPlan, FiberSpan, LaunchSpectrum, RamanGainProfile,
                         build_channel_grid, default_span, make_pumps)

CLS_PUMPS = [(205.1, 21.5), (211.5, 27.7), (214.0, 26.6)]


def cls_plan():
    return BandPlan((Band("L", 184.50, 190.35, 50, 118.75, 6.0),
                     Band("C", 190.75, 196.60, 50, 118.75, 5.0),
                     Band("S", 197.00, 202.85, 50, 118.75, 6.0)))


def cls_lightwaves(pumps=CLS_PUMPS, gap_db=7.5):
    plan = cls_plan()
    total = sum(10 ** (p / 10) for _, p in pumps)
    a0 = 10 * np.log10(total) - gap_db - 10 * np.log10(plan.n_channels)
    spec = LaunchSpectrum.from_plan(plan, {b.name: (a0, 0, 0, 0) for b in plan.bands})
    ch = build_channel_grid(plan, spec)
    return ch + make_pumps([f for f, _ in pumps], [p for _, p in pumps], len(ch))


def flat_span(length=10.0, dz=0.01, loss_db_km=0.2, raman=None, **kw):
    f = np.array([150.0, 250.0])
    return FiberSpan(length, dz, f, np.full(2, loss_db_km), raman or RamanGainProfile.zero(), **kw)


@pytest.fixture(scope="session")
def cls_case():
    return cls_lightwaves(), default_span()


@pytest.fixture(scope="session")
def cls_unidir(cls_case):
    from unispp.unidir import solve_span
    lws, span = cls_case
    return solve_span(lws, span)


@pytest.fixture(scope="session")
def cls_reference(cls_case):
    from unispp.reference import solve_bvp_span
    lws, span = cls_case
    return solve_bvp_span(lws, span)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
