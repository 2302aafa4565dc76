import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import cumulative_trapezoid, solve_ivp

from unispp.link import DATA_DIR, Lightwave, coupling_matrix, load_raman_csv, resolve_alpha
from unispp.unidir import (Diverged, NotConverged, PowerMatrix, SolverOptions, SpanModel,
                           init_profiles, iterate_once, plan_schedule, rescale_pumps, solve_span,
                           trapezoid_matrix)

from conftest import flat_span

RAMAN = load_raman_csv(DATA_DIR / "raman_smf.csv")


def test_trapezoid_constant_and_ramp():
    U = trapezoid_matrix(4, 0.5)
    assert np.allclose(np.full(4, 3.0) @ U, [0, 1.5, 3.0, 4.5], rtol=0, atol=1e-15)
    assert np.array_equal(np.arange(4.0) @ trapezoid_matrix(4), [0, 0.5, 2, 4.5])
    assert np.all(U[:, 0] == 0)


def test_trapezoid_size_error():
    with pytest.raises(ValueError):
        trapezoid_matrix(1)


@given(arrays(np.float64, 50, elements=st.floats(-1e3, 1e3)), st.floats(1e-3, 10.0))
def test_trapezoid_matches_scalar_oracle(p, dz):
    got = p @ trapezoid_matrix(50, dz)
    want = [0.0]
    for m in range(1, 50):  # scalar prefix rule, written independently
        want.append(want[-1] + 0.5 * dz * (p[m - 1] + p[m]))
    assert np.allclose(got, want, rtol=1e-12, atol=1e-9)


def test_schedule_cls_gap_case():
    s = plan_schedule(7.5, [10.0, 100.0])
    assert s.n_iter == 75
    assert s.steps_db[0] == pytest.approx(0.2, abs=1e-12)
    assert s.steps_db[-1] == 0.0
    assert np.sum(s.steps_db) == pytest.approx(7.5, abs=1e-9)
    assert np.all(np.diff(s.steps_db) <= 0)
    assert np.array_equal(s.reference_mw(75), [10.0, 100.0])


def test_schedule_ten_db_and_zero():
    s = plan_schedule(10.0, [1.0])
    assert s.n_iter == 100 and np.sum(s.steps_db) == pytest.approx(10.0, abs=1e-9)
    z = plan_schedule(0.0, [5.0, 7.0])
    assert z.n_iter == 10 and np.all(z.steps_db == 0)
    assert np.allclose(z.reference_mw(1), [5.0, 7.0], rtol=1e-15)


@given(st.floats(0.0, 40.0))
def test_schedule_properties(t_s):
    s = plan_schedule(t_s, [1.0, 2.0, 3.0])
    assert abs(np.sum(s.steps_db) - t_s) < 1e-9
    assert s.steps_db[-1] == 0.0 and np.all(np.diff(s.steps_db) <= 1e-15)
    assert s.n_iter == max(math.ceil(t_s * 10 - 1e-9), 10)
    assert np.array_equal(s.reference_mw(s.n_iter), 10 ** (10 * np.log10([1.0, 2.0, 3.0]) / 10))


def test_init_profiles_t_s(cls_case):
    lws, span = cls_case
    p0, t_s = init_profiles(SpanModel(lws, span))
    assert t_s == pytest.approx(7.5, abs=1e-9)
    pumps = np.array([lw.p_launch for lw in lws if lw.is_pump])
    assert np.allclose(p0[-3:, -1], pumps * 10 ** (-0.75), rtol=1e-13)


def test_init_profiles_weak_pumps_unchanged():
    span = flat_span()
    lws = [Lightwave(0, 193.0, "channel", 10.0), Lightwave(1, 206.0, "brp", 1.0)]
    p0, t_s = init_profiles(SpanModel(lws, span))
    assert t_s == 0.0
    assert p0[1, -1] == 1.0
    alpha = resolve_alpha(span, 206.0)
    assert p0[1, 0] == pytest.approx(math.exp(-2 * alpha * span.length), rel=1e-13)


def test_loss_only_is_fixed_point():
    span = flat_span(length=50.0, dz=0.1)
    lws = [Lightwave(0, 193.0, "channel", 1.0), Lightwave(1, 199.0, "channel", 2.0)]
    model = SpanModel(lws, span)
    exact = np.array([lw.p_launch for lw in lws])[:, None] * np.exp(-2 * model.alpha[:, None] * span.z)
    assert np.allclose(iterate_once(exact, model), exact, rtol=1e-12, atol=0)


def test_rescale_pumps():
    span = flat_span()
    lws = [Lightwave(0, 193.0, "channel", 1.0), Lightwave(1, 206.0, "brp", 1.0),
           Lightwave(2, 210.0, "brp", 1.0), Lightwave(3, 213.0, "brp", 1.0)]
    model = SpanModel(lws, span)
    rng = np.random.default_rng(3)
    p = rng.uniform(0.1, 5.0, (4, span.z.size))
    ref = np.array([0.5, 2.0, 3.0])
    out = rescale_pumps(p, model, ref)
    assert np.array_equal(out[0], p[0])
    assert np.allclose(out[1:, -1], ref, rtol=1e-15)
    halved = p.copy()
    halved[1] = p[1] * (ref[0] * 2 / p[1, -1])
    assert np.allclose(rescale_pumps(halved, model, ref)[1], halved[1] / 2, rtol=1e-14)
    same = rescale_pumps(out, model, ref)
    assert np.allclose(same, out, rtol=1e-15)
    bad = p.copy()
    bad[2, -1] = 0.0
    with pytest.raises(Diverged):
        rescale_pumps(bad, model, ref)


def test_loss_only_solution_exact():
    span = flat_span(length=100.0, dz=0.1)
    lws = [Lightwave(0, 190.0, "channel", 1.0), Lightwave(1, 195.0, "channel", 0.5),
           Lightwave(2, 205.0, "brp", 100.0)]
    pm, rep = solve_span(lws, span)
    assert rep.converged and rep.refinement_iterations <= 2
    a = resolve_alpha(span, np.array([190.0, 195.0, 205.0]))
    want = np.array([1.0, 0.5, 100.0])[:, None] * np.exp(-2 * a[:, None] * span.z)
    want[2] = 100.0 * np.exp(-2 * a[2] * (span.length - span.z))
    assert np.max(np.abs(pm.db - 10 * np.log10(want))) < 1e-10


def test_two_forward_lightwaves_match_ivp():
    span = flat_span(length=100.0, dz=0.1, raman=RAMAN)
    lws = [Lightwave(0, 193.0, "channel", 20.0), Lightwave(1, 206.0, "frp", 200.0)]
    pm, rep = solve_span(lws, span)
    f = np.array([193.0, 206.0])
    K = coupling_matrix(f, RAMAN)
    a = resolve_alpha(span, f)
    sol = solve_ivp(lambda z, p: p * (-2 * a + K @ p), (0, 100), [20.0, 200.0], method="DOP853",
                    t_eval=span.z, rtol=1e-12, atol=1e-14)
    diff = np.abs(pm.db - 10 * np.log10(sol.y))
    assert rep.converged and np.max(diff) < 1e-3


def _photon_flux(dz):
    span = flat_span(length=20.0, dz=dz, loss_db_km=1e-12, raman=RAMAN)
    f = [190.0, 194.0, 198.0, 203.0, 208.0]
    lws = [Lightwave(i, fi, "channel", p) for i, (fi, p) in enumerate(zip(f, [5.0, 5.0, 5.0, 100.0, 300.0]))]
    pm, _ = solve_span(lws, span, SolverOptions(tol_db=1e-12, max_iter=500))
    flux = np.sum(pm.values / np.array(f)[:, None], axis=0)
    return np.max(np.abs(flux / flux[0] - 1))


def test_photon_flux_conserved_with_quadratic_refinement():
    e1, e2 = _photon_flux(0.01), _photon_flux(0.02)
    assert e1 <= 1e-6
    assert math.log2(e2 / e1) > 1.8


def test_pump_bends_channel_up():
    span = flat_span(length=100.0, dz=0.1, raman=RAMAN, loss_db_km=0.2)
    lws = [Lightwave(0, 193.0, "channel", 1.0), Lightwave(1, 206.0, "brp", 500.0)]
    pm, rep = solve_span(lws, span)
    ch, pump = pm.values
    assert rep.converged
    assert ch[-1] > ch[-200]  # rising near the far end
    assert np.all(np.diff(pump) > 0)  # pump decays towards z = 0
    assert pump[-1] == pytest.approx(500.0, rel=1e-12)


def test_cls_schedule_and_boundaries(cls_case, cls_unidir):
    lws, _ = cls_case
    pm, rep = cls_unidir
    assert rep.converged
    assert rep.t_s_db == pytest.approx(7.5, abs=1e-9) and rep.scheduled_iterations == 75
    assert rep.pump_boundary_error_db <= 1e-6
    launch = np.array([lw.p_launch for lw in lws])
    ch = np.array([not lw.is_pump for lw in lws])
    assert np.array_equal(pm.values[ch, 0], launch[ch])
    assert "converged" in rep.as_text()


def test_cumulative_integrator_agrees(cls_case, cls_unidir):
    lws, span = cls_case
    pm, _ = solve_span(lws, span, SolverOptions(integrator="cumulative"))
    assert np.max(np.abs(pm.db - cls_unidir[0].db)) < 1e-6


def test_step_refinement_order():
    def run(dz):
        span = flat_span(length=40.0, dz=dz, raman=RAMAN)
        lws = [Lightwave(0, 193.0, "channel", 50.0), Lightwave(1, 206.0, "brp", 400.0)]
        return solve_span(lws, span, SolverOptions(tol_db=1e-11, max_iter=2000))[0]
    p1, p2, p4 = run(0.4), run(0.2), run(0.1)
    e1 = np.max(np.abs(p1.db - p4.db[:, ::4]))
    e2 = np.max(np.abs(p2.db - p4.db[:, ::2]))
    # errors against the finest grid: e(4dz)/e(2dz) = (16-1)/(4-1) = 5 for second order
    assert math.log2(e1 / e2) > 1.8


def test_divergence_is_flagged():
    span = flat_span(length=100.0, dz=0.1, raman=RAMAN)
    lws = [Lightwave(0, 193.0, "channel", 1.0), Lightwave(1, 206.0, "brp", 1e5)]
    with pytest.raises((Diverged, NotConverged)):
        solve_span(lws, span, SolverOptions(use_schedule=False, adaptive_damping=False))


def test_iteration_cap_gives_best_effort():
    span = flat_span(length=100.0, dz=0.1, raman=RAMAN)
    lws = [Lightwave(0, 193.0, "channel", 1.0), Lightwave(1, 206.0, "brp", 500.0)]
    with pytest.raises(NotConverged) as info:
        solve_span(lws, span, SolverOptions(max_iter=3, min_iter=10))
    assert isinstance(info.value.profiles, PowerMatrix) and not info.value.report.converged


def test_power_matrix_helpers():
    pm = PowerMatrix(np.array([[1.0, 10.0], [2.0, 0.0]]), 0.5, (7, 9))
    assert np.array_equal(pm.z, [0.0, 0.5])
    assert np.array_equal(pm.row(9), [2.0, 0.0])
    assert not pm.is_valid()
