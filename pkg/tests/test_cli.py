import csv

import numpy as np
import pytest

from unispp.cli import emit_spp_csv, load_spp_csv, main
from unispp.link import resolve_alpha
from unispp.scenario import load
from unispp.unidir import PowerMatrix

from test_scenario import SMALL

ONE_CHANNEL = """\
bands:
- {name: C, low_thz: 193.0, high_thz: 193.2, channels: 1, spacing_ghz: 200, nf_db: 5}
spectrum:
  C: [3.0, 0, 0, 0]
fiber: {length_km: 20, dz_km: 1.0}
"""


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_spp_csv_shape_and_round_trip(tmp_path):
    pm = PowerMatrix(np.array([[1.0, 0.5, 0.25, 0.125], [3.0, 2.0, 1.0 / 3.0, 7e-5]]), 1.0 / 3.0, (0, 7))
    f = emit_spp_csv(pm, tmp_path / "a.csv")
    data = rows(f)
    assert data[0] == ["z_km", "lw_0_mW", "lw_7_mW"]
    assert len(data) - 1 == 4 and all(len(r) == 3 for r in data)
    back = load_spp_csv(f)
    np.testing.assert_array_equal(back.values, pm.values)
    assert back.ids == pm.ids
    fdb = emit_spp_csv(pm, tmp_path / "b.csv", db=True)
    assert rows(fdb)[0][1] == "lw_0_dBm"
    np.testing.assert_allclose(load_spp_csv(fdb).values, pm.values, rtol=1e-14)


def test_spp_csv_unwritable(tmp_path):
    pm = PowerMatrix(np.ones((1, 2)), 1.0, (0,))
    with pytest.raises(OSError, match="cannot write"):
        emit_spp_csv(pm, tmp_path / "missing" / "a.csv")


def test_solve_spp_one_channel_is_exponential(tmp_path):
    scen = tmp_path / "one.yaml"
    scen.write_text(ONE_CHANNEL)
    out = tmp_path / "out"
    assert main(["--scenario", str(scen), "--out", str(out), "--command", "solve-spp"]) == 0
    for sub in ("spp", "noise", "results", "history"):
        assert (out / sub).is_dir()
    assert (out / "report.txt").read_text().startswith("solve-spp")
    pm = load_spp_csv(out / "spp" / "span00_mW.csv")
    s = load(scen)
    a = float(resolve_alpha(s.spans[0], s.lightwaves()[0].f))
    z = np.arange(21) * 1.0
    np.testing.assert_allclose(pm.values[0], 10 ** 0.3 * np.exp(-2 * a * z), rtol=1e-12)


def test_assess_writes_results(tmp_path, capsys):
    scen = tmp_path / "s.yaml"
    scen.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["--scenario", str(scen), "--out", str(out), "--command", "assess", "--nli", "zero"]) == 0
    res = rows(out / "results" / "results.csv")
    assert len(res) == 1 + 5
    assert res[0][:4] == ["channel_id", "f_thz", "p_ch_dbm", "gsnr_db"]
    assert len(rows(out / "noise" / "noise.csv")) == 6
    # NLI off: GSNR is bounded only by ASE and DRB
    assert all(float(r[6]) == float("inf") for r in res[1:])
    report = capsys.readouterr().out
    assert "timing breakdown" in report and "drb" in report.lower()


def test_assess_is_deterministic(tmp_path):
    scen = tmp_path / "s.yaml"
    scen.write_text(SMALL)
    for k in (1, 2):
        assert main(["--scenario", str(scen), "--out", str(tmp_path / f"o{k}"), "--command", "assess"]) == 0
    assert (tmp_path / "o1/results/results.csv").read_text() == (tmp_path / "o2/results/results.csv").read_text()


def test_optimize_round_trip(tmp_path):
    scen = tmp_path / "s.yaml"
    scen.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["--scenario", str(scen), "--out", str(out), "--command", "optimize",
                 "--budget", "12", "--seed", "4", "--w", "0.5"]) == 0
    hist = rows(out / "history" / "history.csv")
    assert hist[0][:3] == ["eval_idx", "f_obj", "C_a0"] and len(hist) == 13
    best = load(out / "results" / "best_scenario.yaml")
    assert best.optimizer.w == 0.5 and best.optimizer.seed == 4
    assert (out / "results" / "results.csv").exists()


def test_benchmark_loss_only(tmp_path):
    scen = tmp_path / "one.yaml"
    scen.write_text(ONE_CHANNEL)
    out = tmp_path / "out"
    assert main(["--scenario", str(scen), "--out", str(out), "--command", "benchmark", "--reps", "5"]) == 0
    bench = rows(out / "results" / "benchmark.csv")
    assert [r[0] for r in bench[1:]] == ["spp-unidir", "spp-reference", "assess (DRB)", "assess (no DRB)"]
    assert bench[1][1] == "5"
    assert "speedup" in (out / "report.txt").read_text()


def test_compare_oracle_small(tmp_path):
    scen = tmp_path / "s.yaml"
    scen.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["--scenario", str(scen), "--out", str(out), "--command", "compare-oracle"]) == 0
    cmp_rows = rows(out / "results" / "compare.csv")
    assert len(cmp_rows) == 1 + 6
    assert max(float(r[2]) for r in cmp_rows[1:]) < 0.02


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(SMALL.replace("nf_db: 5}", "nf_db: -5}"))
    assert main(["--scenario", str(bad), "--out", str(tmp_path / "o"), "--command", "assess"]) == 1
    assert "bad.yaml:3:" in capsys.readouterr().err
    assert main(["--scenario", "no-such.yaml", "--out", str(tmp_path / "o"), "--command", "assess"]) == 1
    assert main(["--scenario", str(bad), "--out", str(tmp_path / "o"), "--command", "fly"]) == 2
    assert main(["--out", str(tmp_path / "o"), "--command", "assess"]) == 2
    good = tmp_path / "g.yaml"
    good.write_text(SMALL)
    assert main(["--scenario", str(good), "--out", str(tmp_path / "o"), "--command", "assess",
                 "--nli", "table:/nope.csv"]) == 1


def test_cls_spp_csv_dimensions(tmp_path, cls_unidir):
    pm, _ = cls_unidir
    data = rows(emit_spp_csv(pm, tmp_path / "cls.csv"))
    assert len(data[0]) - 1 == 153
    assert len(data) - 1 == 1001
