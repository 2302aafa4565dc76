import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from unispp.link import (DATA_DIR, Band, BandPlan, ConfigurationError, FiberSpan, FrequencyRangeError,
                         LaunchSpectrum, Lightwave, RamanGainProfile, build_channel_grid,
                         coupling_matrix, default_span, evaluate_spectrum_dBm, load_loss_csv,
                         load_raman_csv, raman_gain, resolve_alpha, sigma)

from conftest import cls_plan, flat_span


def test_alpha_field_convention():
    span = flat_span(loss_db_km=0.2)
    a = resolve_alpha(span, 193.0)
    assert a == pytest.approx(0.2 * math.log(10) / 20, rel=1e-15)
    assert a == pytest.approx(0.023026, abs=1e-6)
    assert 10 * math.log10(math.exp(-2 * a * 100)) == pytest.approx(-20.0, abs=1e-12)


def test_alpha_interpolates_linearly():
    span = FiberSpan(1.0, 0.1, [190.0, 200.0], [0.2, 0.3], RamanGainProfile.zero())
    assert resolve_alpha(span, 195.0) == pytest.approx(0.25 * math.log(10) / 20, rel=1e-14)
    assert resolve_alpha(span, 200.0) == pytest.approx(0.3 * math.log(10) / 20, rel=1e-15)


def test_alpha_out_of_range():
    span = FiberSpan(1.0, 0.1, [190.0, 200.0], [0.2, 0.3], RamanGainProfile.zero())
    with pytest.raises(FrequencyRangeError):
        resolve_alpha(span, 201.0)


def test_bundled_loss_matches_span_average():
    # 22 dB total with 4 dB lumped leaves 0.18 dB/km distributed at 193 THz
    span = default_span()
    alpha = resolve_alpha(span, 193.0)
    assert 2 * alpha * 100 * 10 / math.log(10) + span.lumped_loss == pytest.approx(22.0, abs=1e-9)


@given(st.floats(181.0, 234.0), st.floats(0.01, 40.0))
def test_alpha_monotone_in_table(f0, df):
    f, loss = load_loss_csv(DATA_DIR / "loss_smf.csv")
    span = FiberSpan(1.0, 0.1, f, np.sort(loss), RamanGainProfile.zero())
    f1 = min(f0 + df, 234.0)
    assert resolve_alpha(span, f1) >= resolve_alpha(span, f0) - 1e-15


def test_alpha_exact_at_nodes():
    span = default_span()
    idx = [0, 17, 100, len(span.loss_f) - 1]
    got = resolve_alpha(span, span.loss_f[idx])
    assert np.allclose(got, span.loss_db_km[idx] * math.log(10) / 20, rtol=1e-15, atol=0)


def test_sigma_cases():
    assert sigma(200.0, 200.0) == 0.0
    assert sigma(190.0, 200.0) == 1.0
    assert sigma(200.0, 190.0) == pytest.approx(200 / 190, rel=1e-15)


@given(st.floats(100.0, 300.0), st.floats(0.001, 50.0))
def test_sigma_product(b, d):
    a = b + d
    assert sigma(a, b) * sigma(b, a) == pytest.approx(a / b, rel=1e-13)


def test_raman_gain_scaling():
    prof = load_raman_csv(DATA_DIR / "raman_smf.csv")
    assert prof.f_ref == 206.5
    assert raman_gain(prof, 193.3, 193.3) == 0.0
    base = float(prof.lookup(13.2))
    assert raman_gain(prof, 193.3, 206.5) == pytest.approx(base, rel=1e-12)
    # same offset, pump at 220.6 THz: independent restatement of the frequency-ratio law
    assert raman_gain(prof, 220.6 - 13.2, 220.6) == pytest.approx(base * 220.6 / 206.5, rel=1e-12)
    # symmetric lookup: reverse roles use the higher frequency for scaling
    assert raman_gain(prof, 206.5, 193.3) == pytest.approx(base, rel=1e-12)


@given(st.floats(150.0, 250.0))
def test_raman_gain_zero_offset(f):
    assert raman_gain(load_raman_csv(DATA_DIR / "raman_smf.csv"), f, f) == 0.0


def test_raman_gain_beyond_table_is_zero():
    prof = RamanGainProfile(206.5, [0.0, 10.0], [0.0, 0.5])
    assert raman_gain(prof, 190.0, 215.0) == 0.0


def test_raman_profile_validation():
    with pytest.raises(ConfigurationError):
        RamanGainProfile(206.5, [0.0, 1.0], [0.1, 0.2])
    with pytest.raises(ConfigurationError):
        RamanGainProfile(206.5, [0.0, 1.0], [0.0, -0.2])


def test_coupling_matrix_signs_and_energy():
    prof = load_raman_csv(DATA_DIR / "raman_smf.csv")
    f = np.array([193.0, 200.0, 206.0])
    K = coupling_matrix(f, prof)
    assert np.all(np.diag(K) == 0)
    # lower frequency gains from higher ones, and the photon-number budget balances
    assert K[0, 2] > 0 and K[2, 0] < 0
    assert K[2, 0] / K[0, 2] == pytest.approx(-206.0 / 193.0, rel=1e-12)


def test_lightwave_invariants():
    with pytest.raises(ConfigurationError):
        Lightwave(0, 193.0, "brp", 1.0, direction="forward")
    with pytest.raises(ConfigurationError):
        Lightwave(0, -1.0, "channel", 1.0)
    with pytest.raises(ConfigurationError):
        Lightwave(0, 193.0, "channel", 0.0)
    assert Lightwave(0, 210.0, "brp", 1.0).is_backward
    assert Lightwave(0, 210.0, "frp", 1.0).direction == "forward"


def test_span_step_must_divide_length():
    with pytest.raises(ConfigurationError):
        flat_span(length=1.0, dz=0.3)
    assert flat_span(length=100.0, dz=0.1).n_steps == 1000


def _spec(coeffs):
    plan = BandPlan((Band("C", 190.0, 196.0, 10, 100.0, 5.0),))
    return plan, LaunchSpectrum.from_plan(plan, {"C": coeffs})


def test_spectrum_polynomial():
    _, flat = _spec((1.5, 0, 0, 0))
    assert evaluate_spectrum_dBm(flat, 191.3) == 1.5
    _, lin = _spec((0, 2, 0, 0))
    assert evaluate_spectrum_dBm(lin, 193.5) == pytest.approx(1.0, abs=1e-12)
    _, cub = _spec((0, 0, 0, 1))
    assert evaluate_spectrum_dBm(cub, 191.0) == pytest.approx(-8.0, abs=1e-12)


def test_spectrum_guard_band():
    spec = LaunchSpectrum.from_plan(cls_plan(), [0.0] * 12)
    with pytest.raises(FrequencyRangeError):
        evaluate_spectrum_dBm(spec, 190.5)


@given(st.floats(-5, 5), st.floats(190.0, 196.0))
def test_flat_spectrum_constant(a0, f):
    _, spec = _spec((a0, 0, 0, 0))
    assert evaluate_spectrum_dBm(spec, f) == a0


def test_cls_and_clse_grids():
    plan = cls_plan()
    ch = build_channel_grid(plan, LaunchSpectrum.from_plan(plan, [0.0] * 12))
    assert len(ch) == 150
    assert [c.band for c in ch[::50]] == ["L", "C", "S"]
    clse = BandPlan(plan.bands + (Band("E", 203.25, 209.07, 50, 118.75, 7.0),))
    assert len(build_channel_grid(clse, LaunchSpectrum.from_plan(clse, [0.0] * 16))) == 200
    c = ch[0]
    assert c.symbol_rate == 100.0 and c.roll_off == 0.1
    spacing = np.diff([x.f for x in ch[:50]])
    assert np.allclose(spacing, 0.11875)


def test_single_channel_at_center():
    plan = BandPlan((Band("X", 192.0, 194.0, 1, 50.0, 5.0),))
    ch = build_channel_grid(plan, LaunchSpectrum.from_plan(plan, [0.0] * 4))
    assert len(ch) == 1 and ch[0].f == pytest.approx(193.0)


def test_band_plan_validation():
    with pytest.raises(ConfigurationError):
        BandPlan((Band("C", 190.0, 191.0, 20, 100.0, 5.0),))
    with pytest.raises(ConfigurationError):
        BandPlan((Band("C", 190.0, 196.0, 10, 100.0, 5.0), Band("L", 185.0, 189.0, 10, 100.0, 5.0)))


def test_table_errors_are_line_anchored(tmp_path):
    p = tmp_path / "loss.csv"
    p.write_text("f_thz,loss_db_km\n190,0.2\n191,abc\n")
    with pytest.raises(ConfigurationError, match=r"loss.csv:3"):
        load_loss_csv(p)
    q = tmp_path / "raman.csv"
    q.write_text("df_thz,cr_per_w_km\n0,0\n1,0.1\n")
    with pytest.raises(ConfigurationError, match="f_ref_thz"):
        load_raman_csv(q)
