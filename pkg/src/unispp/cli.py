"""Command-line front end: ``unispp --scenario S --out DIR --command NAME``.

Exit status 0 on success, 1 on domain errors (bad scenario, solver failure),
2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import math
import platform
import statistics
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .assess import Assessment, assess_link
from .gsnr import make_estimator
from .link import ConfigurationError
from .optimizer import ParamVector, evaluate_candidate, optimize
from .reference import compare_profiles, solve_bvp_span, solve_with_fallback
from .scenario import Scenario, resolve_scenario
from .unidir import Diverged, NotConverged, PowerMatrix, solve_span

COMMANDS = ("solve-spp", "assess", "optimize", "benchmark", "compare-oracle")


# -- CSV artifacts -----------------------------------------------------------

def emit_spp_csv(pm: PowerMatrix, path, db: bool = False) -> Path:
    """Write ``z_km,lw_<id>_mW...`` (or ``_dBm``), one row per grid point."""
    path = Path(path)
    unit = "dBm" if db else "mW"
    vals = pm.db if db else pm.values
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["z_km"] + [f"lw_{i}_{unit}" for i in pm.ids])
            for m, z in enumerate(pm.z):
                w.writerow([repr(float(z))] + [repr(float(x)) for x in vals[:, m]])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None
    return path


def load_spp_csv(path) -> PowerMatrix:
    """Read a file written by :func:`emit_spp_csv` (either unit) back into mW."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    if header[0] != "z_km" or len(header) < 2:
        raise ConfigurationError(f"{path}:1: not an SPP file")
    ids = tuple(int(h.split("_")[1]) for h in header[1:])
    vals = data[:, 1:].T
    if header[1].endswith("_dBm"):
        vals = 10.0 ** (vals / 10.0)
    dz = float(data[1, 0] - data[0, 0]) if data.shape[0] > 1 else 0.0
    return PowerMatrix(vals, dz, ids)


def write_noise_csv(assessment: Assessment, path) -> None:
    b = assessment.budget
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["channel_id", "f_thz", "p_ase_dfa_mw", "p_ase_raman_mw", "p_drb_mw", "p_nli_mw"])
        for k in range(len(b.ids)):
            w.writerow([int(b.ids[k]), f"{b.f[k]:.6f}", f"{b.p_ase_dfa[k]:.6e}", f"{b.p_ase_raman[k]:.6e}",
                        f"{b.p_drb[k]:.6e}", f"{b.p_nli[k]:.6e}"])


def write_results_csv(assessment: Assessment, path) -> None:
    r = assessment.results
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["channel_id", "f_thz", "p_ch_dbm", "gsnr_db", "osnr_db", "osnr_dfa_db",
                    "gsnr_nli_db", "gsnr_drb_db", "tput_gbps", "nonlinear"])
        cols = [r.gsnr_db, r.osnr_db, r.osnr_dfa_db, r.gsnr_nli_db, r.gsnr_drb_db]
        for k in range(len(r.ids)):
            w.writerow([int(r.ids[k]), f"{r.f[k]:.6f}", f"{10 * math.log10(r.p_ch[k]):.4f}"]
                       + [f"{c[k]:.2f}" for c in cols] + [f"{r.tput[k]:.3f}", int(r.nonlinear[k])])


def write_history_csv(history, labels: Sequence[str], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eval_idx", "f_obj"] + list(labels))
        for i, (x, f) in enumerate(history):
            w.writerow([i, repr(float(f))] + [repr(float(v)) for v in x])


# -- commands ----------------------------------------------------------------

def _dirs(out: Path) -> dict:
    d = {k: out / k for k in ("spp", "noise", "results", "history")}
    for p in d.values():
        p.mkdir(parents=True, exist_ok=True)
    return d


def _unique_spans(scen: Scenario):
    seen = {}
    for k, s in enumerate(scen.spans):
        seen.setdefault(id(s), (k, s))
    return list(seen.values())


def _assess(scen: Scenario, include_drb: bool) -> Assessment:
    return assess_link(scen.lightwaves(), scen.spans, scen.plan, scen.nli_estimator(), scen.curve,
                       scen.solver, scen.reference, include_drb, scen.drb_method)


def _summary(a: Assessment, title: str) -> list[str]:
    r = a.results
    lines = [title,
             f"  channels               : {len(r.ids)}",
             f"  total throughput       : {a.total_throughput_tbps:.2f} Tb/s",
             f"  mean throughput        : {a.mean_throughput:.2f} Gb/s per channel",
             f"  GSNR min / max         : {np.min(r.gsnr_db):.2f} / {np.max(r.gsnr_db):.2f} dB",
             f"  GSNR peak-to-peak      : {r.spread_db:.2f} dB",
             f"  nonlinear-regime chans : {int(np.sum(r.nonlinear))}",
             "  timing breakdown (unique spans solved once):"]
    for k, (sec, pct) in a.timing_breakdown().items():
        lines.append(f"    {k:<5}: {sec * 1e3:9.1f} ms  {pct:5.1f} %")
    for rep in a.reports[:1]:
        lines.append("  first-span solver report:")
        lines += ["    " + ln for ln in rep.as_text().splitlines()]
    return lines


def cmd_solve_spp(scen: Scenario, out: Path, args) -> list[str]:
    d = _dirs(out)
    lws = scen.lightwaves()
    lines = [f"solve-spp: {scen.name}"]
    for k, span in _unique_spans(scen):
        prof, rep = solve_with_fallback(lws, span, scen.solver, scen.reference)
        emit_spp_csv(prof, d["spp"] / f"span{k:02d}_mW.csv")
        emit_spp_csv(prof, d["spp"] / f"span{k:02d}_dBm.csv", db=True)
        lines.append(f"span {k}:")
        lines += ["  " + ln for ln in rep.as_text().splitlines()]
    return lines


def cmd_assess(scen: Scenario, out: Path, args) -> list[str]:
    d = _dirs(out)
    a = _assess(scen, not args.no_drb)
    for k, _ in _unique_spans(scen):
        emit_spp_csv(a.profiles[k], d["spp"] / f"span{k:02d}_mW.csv")
        emit_spp_csv(a.profiles[k], d["spp"] / f"span{k:02d}_dBm.csv", db=True)
    write_noise_csv(a, d["noise"] / "noise.csv")
    write_results_csv(a, d["results"] / "results.csv")
    return _summary(a, f"assess: {scen.name} ({len(scen.spans)} spans)")


def cmd_optimize(scen: Scenario, out: Path, args) -> list[str]:
    d = _dirs(out)
    w = scen.optimizer.w if args.w is None else args.w
    seed = scen.optimizer.seed if args.seed is None else args.seed
    scen = replace(scen, optimizer=replace(scen.optimizer, w=w, seed=seed))
    res = optimize(scen, w=w, budget=args.budget)
    best = scen.with_params(res.best.spectrum(), res.best.pumps())
    labels = res.best.layout.labels()
    write_history_csv(res.history, labels, d["history"] / "history.csv")
    best.dump(d["results"] / "best_scenario.yaml")
    final = evaluate_candidate(ParamVector(res.best.values, res.best.layout), best, w)
    lines = [f"optimize: {scen.name}, w = {w}, budget = {args.budget or scen.optimizer.budget}, "
             f"seed = {scen.optimizer.seed}",
             f"  evaluations            : {res.evaluations}",
             f"  stop reason            : {res.stop_reason}",
             f"  best objective (search): {res.best_f:.3f} Gb/s"
             + (f" at dz = {scen.optimizer.dz_km} km" if scen.optimizer.dz_km else ""),
             f"  wall time              : {res.wall_time_s:.1f} s",
             "  best pumps             : " + "; ".join(f"{f:.2f} THz, {p:.2f} dBm" for f, p in best.pumps)]
    if final.assessment is not None:
        write_results_csv(final.assessment, d["results"] / "results.csv")
        write_noise_csv(final.assessment, d["noise"] / "noise.csv")
        lines.append(f"  objective at scenario grid: {final.f_obj:.3f} Gb/s")
        lines += _summary(final.assessment, "  re-assessment of the best point:")
    return lines


def _median_time(fn, reps: int):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cmd_benchmark(scen: Scenario, out: Path, args) -> list[str]:
    d = _dirs(out)
    reps = max(args.reps, 1)
    lws = scen.lightwaves()
    span = scen.spans[0]
    rows = []
    flags = []

    def run(label, fn, n):
        try:
            t = _median_time(fn, n)
        except (Diverged, NotConverged) as exc:
            flags.append(f"{label}: {type(exc).__name__}: {exc}")
            t = float("nan")
        rows.append((label, n, t))
        return t

    t_uni = run("spp-unidir", lambda: solve_span(lws, span, scen.solver), reps)
    ref_reps = args.ref_reps if args.ref_reps else min(reps, 3)
    t_ref = run("spp-reference", lambda: solve_bvp_span(lws, span, scen.reference), ref_reps)
    t_drb = run("assess (DRB)", lambda: _assess(scen, True), reps)
    t_nodrb = run("assess (no DRB)", lambda: _assess(scen, False), reps)
    with open(d["results"] / "benchmark.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "repetitions", "median_s"])
        for label, n, t in rows:
            w.writerow([label, n, f"{t:.6f}"])
    lines = [f"benchmark: {scen.name}, first span, medians",
             f"  host: {platform.processor() or platform.machine()}, Python {platform.python_version()}"]
    for label, n, t in rows:
        lines.append(f"  {label:<17}: {t * 1e3:10.1f} ms  (n = {n})")
    lines.append(f"  speedup unidir vs reference : {t_ref / t_uni:.1f}x")
    lines.append(f"  assess DRB overhead         : {t_drb / t_nodrb:.2f}x")
    lines += ["  FLAG " + f for f in flags]
    return lines


def cmd_compare_oracle(scen: Scenario, out: Path, args) -> list[str]:
    d = _dirs(out)
    lws = scen.lightwaves()
    span = scen.spans[0]
    uni, rep_u = solve_span(lws, span, scen.solver)
    ref, rep_r = solve_bvp_span(lws, span, scen.reference)
    sample = args.sample_km if args.sample_km else span.dz
    worst, (row, col) = compare_profiles(uni, ref, sample)
    emit_spp_csv(uni, d["spp"] / "unidir_mW.csv")
    emit_spp_csv(ref, d["spp"] / "reference_mW.csv")
    stride = max(round(sample / span.dz), 1)
    diff = np.abs(uni.db[:, ::stride] - ref.db[:, ::stride])
    with open(d["results"] / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lw_id", "f_thz", "max_abs_diff_db"])
        for i, lw in enumerate(lws):
            w.writerow([lw.id, f"{lw.f:.6f}", f"{np.max(diff[i]):.3e}"])
    return [f"compare-oracle: {scen.name}, first span, sampled every {sample} km",
            f"  max |dB| difference    : {worst:.3e} dB at lightwave {uni.ids[row]}, z = {col * span.dz:.2f} km",
            f"  unidir time            : {rep_u.wall_time_ms:.1f} ms ({rep_u.iterations} iterations)",
            f"  reference time         : {rep_r.wall_time_ms:.1f} ms ({rep_r.sweeps} sweeps, {rep_r.method})",
            f"  speedup                : {rep_r.wall_time_ms / rep_u.wall_time_ms:.1f}x"]


HANDLERS = {"solve-spp": cmd_solve_spp, "assess": cmd_assess, "optimize": cmd_optimize,
            "benchmark": cmd_benchmark, "compare-oracle": cmd_compare_oracle}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="unispp", description="Raman SPP solver, link assessment and optimizer")
    p.add_argument("--scenario", required=True, help="scenario YAML path or bundled name (e.g. CLS-max)")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--seed", type=int, default=None, help="optimizer seed (overrides the scenario)")
    p.add_argument("--reps", type=int, default=3, help="benchmark repetitions")
    p.add_argument("--ref-reps", type=int, default=None, help="reference-solver benchmark repetitions")
    p.add_argument("--no-drb", action="store_true", help="skip double Rayleigh backscattering")
    p.add_argument("--nli", default=None, help="zero | table:<path> | cubic:<eta_per_W2>")
    p.add_argument("--w", type=float, default=None, help="flatness weight (overrides the scenario)")
    p.add_argument("--budget", type=int, default=None, help="optimizer evaluation budget")
    p.add_argument("--sample-km", type=float, default=None, help="compare-oracle sample interval")
    return p


def run_scenario(path: str, command: str, out: Path, args) -> int:
    scen = resolve_scenario(path)
    if args.nli:
        make_estimator(args.nli)  # validate early
        kind, _, arg = args.nli.partition(":")
        cfg = {"model": kind}
        if kind == "table":
            cfg["path"] = str(Path(arg).resolve())
        elif kind == "cubic" and arg:
            cfg["eta_per_w2"] = float(arg)
        scen = replace(scen, nli_config=cfg)
    if args.no_drb:
        scen = replace(scen, include_drb=False)
    if args.budget is not None and args.budget < 1:
        raise ConfigurationError("--budget must be >= 1")
    out.mkdir(parents=True, exist_ok=True)
    lines = HANDLERS[command](scen, out, args)
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    sys.stdout.write(text)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    try:
        return run_scenario(args.scenario, args.command, args.out, args)
    except (ConfigurationError, KeyError, NotConverged, Diverged, RuntimeError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
