"""Scenario files: YAML description of a multiband link and its optimization setup.

Units in files: THz, dBm, dB, km, GBaud.  Relative paths resolve against the
scenario file's directory; ``builtin:<name>`` refers to the package data
directory.  See README.md for the key reference.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .gsnr import NLIEstimator, ThroughputCurve, make_estimator
from .link import (DATA_DIR, Band, BandPlan, ConfigurationError, FiberSpan, LaunchSpectrum,
                   Lightwave, build_channel_grid, load_loss_csv, load_raman_csv, make_pumps)
from .reference import RelaxationSettings
from .unidir import SolverOptions

SCENARIO_DIR = DATA_DIR / "scenarios"
BUNDLED = ("CLS-max", "CLS-flat-w05", "CLS-flat-w1", "CLSE-max", "CLSE-flat-w05", "CLSE-flat-w1")

_FIBER_DEFAULTS = {
    "loss_table": "builtin:loss_smf.csv",
    "raman_table": "builtin:raman_smf.csv",
    "length_km": 100.0,
    "dz_km": 0.1,
    "lumped_loss_db": 4.0,
    "rayleigh_kappa_db_km": -40.0,
}
_BAND_KEYS = {"name", "low_thz", "high_thz", "channels", "spacing_ghz", "nf_db",
              "symbol_rate_gbaud", "roll_off"}
_TOP_KEYS = {"name", "description", "bands", "spectrum", "pumps", "fiber", "spans",
             "throughput_curve", "nli", "solver", "reference", "noise", "optimizer"}


class ScenarioError(ConfigurationError):
    """Scenario validation error carrying ``file:line:`` context."""


@dataclass
class OptimizerSettings:
    w: float = 0.0
    budget: int = 2000
    seed: int = 1
    restarts: int = 3
    plateau_window: int = 100
    plateau_rtol: float = 1e-4
    dz_km: float | None = None  # coarser step used during the search only
    a0_dbm: tuple = (-6.0, 6.0)
    a1_db_per_thz: tuple = (-1.0, 1.0)
    a2_db_per_thz2: tuple = (-0.3, 0.3)
    a3_db_per_thz3: tuple = (-0.1, 0.1)
    pump_f_thz: tuple | None = None  # default: top signal + 2 .. + 18 THz
    pump_p_dbm: tuple = (15.0, 30.0)


class _Lines:
    """Maps key paths of a YAML document to 1-based line numbers."""

    def __init__(self, text: str, source: str):
        self.source = source
        self.lines: dict[tuple, int] = {}
        try:
            root = yaml.compose(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = mark.line + 1 if mark else 0
            raise ScenarioError(f"{source}:{line}: YAML syntax error: {getattr(exc, 'problem', exc)}") from None
        if root is not None:
            self._walk(root, ())

    def _walk(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                self.lines[path + (k.value,)] = k.start_mark.line + 1
                self._walk(v, path + (k.value,))
                self.lines[path + (k.value,)] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def error(self, path: tuple, msg: str) -> ScenarioError:
        p = tuple(path)
        while p and p not in self.lines:
            p = p[:-1]
        line = self.lines.get(p, 1)
        where = ".".join(str(x) for x in path)
        return ScenarioError(f"{self.source}:{line}: {where + ': ' if where else ''}{msg}")


def _resolve(ref: str, base: Path) -> Path:
    if ref.startswith("builtin:"):
        return DATA_DIR / ref[len("builtin:"):]
    p = Path(ref)
    return p if p.is_absolute() else base / p


@dataclass
class Scenario:
    name: str
    plan: BandPlan
    spectrum: dict  # band name -> [a0, a1, a2, a3]
    pumps: list  # [(f_thz, p_dbm), ...]
    spans: list[FiberSpan]
    span_entries: list[dict]
    fiber: dict
    curve: ThroughputCurve
    curve_source: str = "builtin"
    nli_config: dict = field(default_factory=lambda: {"model": "zero"})
    solver: SolverOptions = field(default_factory=SolverOptions)
    reference: RelaxationSettings = field(default_factory=RelaxationSettings)
    include_drb: bool = True
    drb_method: str = "direct"
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    description: str = ""
    base_dir: Path = field(default_factory=Path.cwd)

    # -- construction --------------------------------------------------------

    def launch_spectrum(self, spectrum: dict | None = None) -> LaunchSpectrum:
        return LaunchSpectrum.from_plan(self.plan, spectrum if spectrum is not None else self.spectrum)

    def lightwaves(self, spectrum: dict | None = None, pumps: list | None = None) -> list[Lightwave]:
        channels = build_channel_grid(self.plan, self.launch_spectrum(spectrum))
        pumps = self.pumps if pumps is None else pumps
        return channels + make_pumps([f for f, _ in pumps], [p for _, p in pumps], len(channels))

    def nli_estimator(self) -> NLIEstimator:
        cfg = dict(self.nli_config)
        if cfg.get("model") == "table" and cfg.get("path"):
            cfg["path"] = str(_resolve(cfg["path"], self.base_dir))
        return make_estimator(cfg)

    def with_params(self, spectrum: dict, pumps: list) -> "Scenario":
        return replace(self, spectrum={k: list(v) for k, v in spectrum.items()},
                       pumps=[tuple(p) for p in pumps])

    def with_step(self, dz: float) -> "Scenario":
        """Same link on a different spatial grid; span sharing is preserved."""
        mapping = {}
        spans = []
        for s in self.spans:
            if id(s) not in mapping:
                mapping[id(s)] = replace(s, dz=dz)
            spans.append(mapping[id(s)])
        return replace(self, spans=spans)

    @property
    def signal_max(self) -> float:
        return self.plan.max_signal_frequency

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name}
        if self.description:
            d["description"] = self.description
        d["bands"] = [{"name": b.name, "low_thz": b.low, "high_thz": b.high,
                       "channels": b.n_channels, "spacing_ghz": b.spacing_ghz, "nf_db": b.nf_db,
                       "symbol_rate_gbaud": b.symbol_rate, "roll_off": b.roll_off}
                      for b in self.plan.bands]
        d["spectrum"] = {k: [float(x) for x in v] for k, v in self.spectrum.items()}
        d["pumps"] = [{"f_thz": float(f), "p_dbm": float(p)} for f, p in self.pumps]
        d["fiber"] = dict(self.fiber)
        d["spans"] = copy.deepcopy(self.span_entries)
        d["throughput_curve"] = self.curve_source
        d["nli"] = dict(self.nli_config)
        s = self.solver
        d["solver"] = {"tol_db": s.tol_db, "max_iter": s.max_iter, "min_iter": s.min_iter,
                       "use_schedule": s.use_schedule, "integrator": s.integrator,
                       "adaptive_damping": s.adaptive_damping}
        r = self.reference
        d["reference"] = {"method": r.method, "damping": r.damping, "max_sweeps": r.max_sweeps,
                          "tol_db": r.tol_db, "inner_steps": r.inner_steps}
        d["noise"] = {"drb": self.include_drb, "drb_method": self.drb_method}
        o = self.optimizer
        od = {"w": o.w, "budget": o.budget, "seed": o.seed, "restarts": o.restarts,
              "plateau_window": o.plateau_window, "plateau_rtol": o.plateau_rtol}
        if o.dz_km is not None:
            od["dz_km"] = o.dz_km
        od["bounds"] = {"a0_dbm": list(o.a0_dbm), "a1_db_per_thz": list(o.a1_db_per_thz),
                        "a2_db_per_thz2": list(o.a2_db_per_thz2),
                        "a3_db_per_thz3": list(o.a3_db_per_thz3),
                        "pump_p_dbm": list(o.pump_p_dbm)}
        if o.pump_f_thz is not None:
            od["bounds"]["pump_f_thz"] = list(o.pump_f_thz)
        d["optimizer"] = od
        return d

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def dump(self, path) -> None:
        Path(path).write_text(self.dumps())


# -- loading ----------------------------------------------------------------

def _num(lines, path, value, *, positive=False, integer=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise lines.error(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise lines.error(path, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise lines.error(path, f"must be > 0, got {value!r}")
    if nonneg and value < 0:
        raise lines.error(path, f"must be >= 0, got {value!r}")
    return int(value) if integer else float(value)


def _mapping(lines, path, value):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise lines.error(path, "expected a mapping")
    return value


def _pair(lines, path, value):
    if not (isinstance(value, list) and len(value) == 2):
        raise lines.error(path, "expected [low, high]")
    lo, hi = (_num(lines, path + (i,), v) for i, v in enumerate(value))
    if not hi >= lo:
        raise lines.error(path, "upper bound below lower bound")
    return (lo, hi)


def _check_keys(lines, path, d, allowed):
    for k in d:
        if k not in allowed:
            raise lines.error(path + (k,), f"unknown key {k!r}")


def loads(text: str, source: str = "<scenario>", base_dir: Path | None = None) -> Scenario:
    lines = _Lines(text, source)
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:  # pragma: no cover - compose already caught it
        raise ScenarioError(f"{source}: {exc}") from None
    raw = _mapping(lines, (), raw)
    base = base_dir or Path.cwd()
    _check_keys(lines, (), raw, _TOP_KEYS)
    for key in ("bands", "spectrum"):
        if key not in raw:
            raise lines.error((), f"missing required section {key!r}")

    bands = []
    if not isinstance(raw["bands"], list) or not raw["bands"]:
        raise lines.error(("bands",), "expected a non-empty list of bands")
    for i, b in enumerate(raw["bands"]):
        p = ("bands", i)
        b = _mapping(lines, p, b)
        _check_keys(lines, p, b, _BAND_KEYS)
        for k in ("name", "low_thz", "high_thz", "channels", "spacing_ghz", "nf_db"):
            if k not in b:
                raise lines.error(p, f"band is missing {k!r}")
        bands.append(Band(str(b["name"]), _num(lines, p + ("low_thz",), b["low_thz"], positive=True),
                          _num(lines, p + ("high_thz",), b["high_thz"], positive=True),
                          _num(lines, p + ("channels",), b["channels"], positive=True, integer=True),
                          _num(lines, p + ("spacing_ghz",), b["spacing_ghz"], positive=True),
                          _num(lines, p + ("nf_db",), b["nf_db"], nonneg=True),
                          _num(lines, p + ("symbol_rate_gbaud",), b.get("symbol_rate_gbaud", 100.0),
                               positive=True),
                          _num(lines, p + ("roll_off",), b.get("roll_off", 0.1), nonneg=True)))
    try:
        plan = BandPlan(tuple(bands))
    except ConfigurationError as exc:
        raise lines.error(("bands",), str(exc)) from None

    spectrum = {}
    spec_raw = _mapping(lines, ("spectrum",), raw["spectrum"])
    for b in plan.bands:
        if b.name not in spec_raw:
            raise lines.error(("spectrum",), f"no coefficients for band {b.name!r}")
    for name, coeffs in spec_raw.items():
        p = ("spectrum", name)
        if name not in {b.name for b in plan.bands}:
            raise lines.error(p, f"band {name!r} is not in the band plan")
        if not isinstance(coeffs, list) or len(coeffs) != 4:
            raise lines.error(p, "expected [a0, a1, a2, a3]")
        spectrum[name] = [_num(lines, p + (i,), c) for i, c in enumerate(coeffs)]

    pumps = []
    pumps_raw = raw.get("pumps") or []
    if not isinstance(pumps_raw, list):
        raise lines.error(("pumps",), "expected a list")
    for i, pr in enumerate(pumps_raw):
        p = ("pumps", i)
        pr = _mapping(lines, p, pr)
        _check_keys(lines, p, pr, {"f_thz", "p_dbm"})
        if "f_thz" not in pr or "p_dbm" not in pr:
            raise lines.error(p, "pump needs f_thz and p_dbm")
        pumps.append((_num(lines, p + ("f_thz",), pr["f_thz"], positive=True),
                      _num(lines, p + ("p_dbm",), pr["p_dbm"])))

    fiber = dict(_FIBER_DEFAULTS)
    fraw = _mapping(lines, ("fiber",), raw.get("fiber"))
    _check_keys(lines, ("fiber",), fraw, set(_FIBER_DEFAULTS))
    fiber.update(fraw)

    table_cache: dict = {}

    def build_span(entry: dict, path: tuple) -> FiberSpan:
        cfg = dict(fiber)
        cfg.update({k: v for k, v in entry.items() if k != "repeat"})
        tables = []
        for key, loader in (("loss_table", load_loss_csv), ("raman_table", load_raman_csv)):
            ref = str(cfg[key])
            fpath = _resolve(ref, base)
            if not fpath.exists():
                raise lines.error(path + (key,) if key in entry else ("fiber", key),
                                  f"file not found: {fpath}")
            if fpath not in table_cache:
                table_cache[fpath] = loader(fpath)
            tables.append(table_cache[fpath])
        (lf, ldb), raman = tables
        vals = {}
        for key in ("length_km", "dz_km", "lumped_loss_db", "rayleigh_kappa_db_km"):
            where = path + (key,) if key in entry else ("fiber", key)
            vals[key] = _num(lines, where, cfg[key], positive=key in ("length_km", "dz_km"),
                             nonneg=key == "lumped_loss_db")
        try:
            return FiberSpan(vals["length_km"], vals["dz_km"], lf, ldb, raman, vals["lumped_loss_db"],
                             vals["rayleigh_kappa_db_km"], Path(str(cfg["loss_table"])).stem)
        except ConfigurationError as exc:
            raise lines.error(path, str(exc)) from None

    span_entries = raw.get("spans")
    if span_entries is None:
        span_entries = [{"repeat": 1}]
    if not isinstance(span_entries, list) or not span_entries:
        raise lines.error(("spans",), "expected a non-empty list of span entries")
    spans = []
    allowed = set(_FIBER_DEFAULTS) | {"repeat"}
    for i, entry in enumerate(span_entries):
        p = ("spans", i)
        entry = _mapping(lines, p, entry)
        _check_keys(lines, p, entry, allowed)
        n = _num(lines, p + ("repeat",), entry.get("repeat", 1), positive=True, integer=True)
        span = build_span(entry, p)
        spans.extend([span] * n)

    curve_ref = raw.get("throughput_curve", "builtin") or "builtin"
    if curve_ref == "builtin":
        curve = ThroughputCurve.default()
    else:
        cpath = _resolve(str(curve_ref), base)
        if not cpath.exists():
            raise lines.error(("throughput_curve",), f"file not found: {cpath}")
        curve = ThroughputCurve.from_csv(cpath)

    nli_cfg = _mapping(lines, ("nli",), raw.get("nli")) or {"model": "zero"}
    nli_cfg = dict(nli_cfg)
    if nli_cfg.get("model", "zero") not in ("zero", "table", "cubic"):
        raise lines.error(("nli", "model"), f"unknown NLI model {nli_cfg.get('model')!r}")
    if nli_cfg.get("model") == "table":
        if "path" not in nli_cfg:
            raise lines.error(("nli",), "table NLI model needs a path")
        if not _resolve(str(nli_cfg["path"]), base).exists():
            raise lines.error(("nli", "path"), f"file not found: {nli_cfg['path']}")

    sraw = _mapping(lines, ("solver",), raw.get("solver"))
    _check_keys(lines, ("solver",), sraw, set(SolverOptions.__dataclass_fields__))
    try:
        solver = SolverOptions(**sraw)
    except TypeError as exc:
        raise lines.error(("solver",), str(exc)) from None
    if solver.integrator not in ("matrix", "cumulative"):
        raise lines.error(("solver", "integrator"), "integrator must be 'matrix' or 'cumulative'")

    rraw = _mapping(lines, ("reference",), raw.get("reference"))
    _check_keys(lines, ("reference",), rraw, set(RelaxationSettings.__dataclass_fields__))
    reference = RelaxationSettings(**rraw)
    if reference.method not in ("relaxation", "shooting", "auto"):
        raise lines.error(("reference", "method"), "method must be relaxation, shooting or auto")

    nraw = _mapping(lines, ("noise",), raw.get("noise"))
    _check_keys(lines, ("noise",), nraw, {"drb", "drb_method"})
    drb_method = nraw.get("drb_method", "direct")
    if drb_method not in ("direct", "prefix"):
        raise lines.error(("noise", "drb_method"), "drb_method must be 'direct' or 'prefix'")

    oraw = _mapping(lines, ("optimizer",), raw.get("optimizer"))
    _check_keys(lines, ("optimizer",), oraw, {"w", "budget", "seed", "restarts", "plateau_window",
                                             "plateau_rtol", "dz_km", "bounds"})
    opt = OptimizerSettings()
    for key in ("w", "plateau_rtol"):
        if key in oraw:
            setattr(opt, key, _num(lines, ("optimizer", key), oraw[key], nonneg=True))
    for key in ("budget", "seed", "restarts", "plateau_window"):
        if key in oraw:
            setattr(opt, key, _num(lines, ("optimizer", key), oraw[key], integer=True,
                                   positive=key == "budget", nonneg=True))
    if "dz_km" in oraw:
        opt.dz_km = _num(lines, ("optimizer", "dz_km"), oraw["dz_km"], positive=True)
    braw = _mapping(lines, ("optimizer", "bounds"), oraw.get("bounds"))
    bkeys = {"a0_dbm", "a1_db_per_thz", "a2_db_per_thz2", "a3_db_per_thz3", "pump_f_thz", "pump_p_dbm"}
    _check_keys(lines, ("optimizer", "bounds"), braw, bkeys)
    for key, val in braw.items():
        setattr(opt, key, _pair(lines, ("optimizer", "bounds", key), val))

    scen = Scenario(name=str(raw.get("name", Path(source).stem)), plan=plan, spectrum=spectrum,
                    pumps=pumps, spans=spans, span_entries=copy.deepcopy(span_entries), fiber=fiber,
                    curve=curve, curve_source=str(curve_ref), nli_config=nli_cfg, solver=solver,
                    reference=reference, include_drb=bool(nraw.get("drb", True)), drb_method=drb_method,
                    optimizer=opt, description=str(raw.get("description", "")), base_dir=base)
    # check that every lightwave lies inside the tabulated fiber data
    for i, (f, _) in enumerate(pumps):
        if f <= scen.signal_max:
            raise lines.error(("pumps", i, "f_thz"), "backward pump must lie above the signal bands")
        for s in spans:
            if not s.loss_f[0] <= f <= s.loss_f[-1]:
                raise lines.error(("pumps", i, "f_thz"), f"{f} THz outside the fiber loss table")
    for s in spans:
        for b in plan.bands:
            if b.low < s.loss_f[0] or b.high > s.loss_f[-1]:
                raise lines.error(("bands",), f"band {b.name} outside the fiber loss table")
    return scen


def load(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario: {exc.strerror}") from None
    return loads(text, str(path), path.parent)


def bundled(name: str) -> Scenario:
    if name not in BUNDLED:
        raise KeyError(f"no bundled scenario {name!r}; choose from {', '.join(BUNDLED)}")
    return load(SCENARIO_DIR / f"{name}.yaml")


def resolve_scenario(ref: str) -> Scenario:
    """Load a scenario by path, or by bundled name."""
    if ref in BUNDLED and not Path(ref).exists():
        return bundled(ref)
    return load(ref)


def flat_a0_for_gap(pumps, n_channels: int, gap_db: float) -> float:
    """Per-channel dBm whose total sits ``gap_db`` below the total pump power."""
    total = sum(10.0 ** (p / 10.0) for _, p in pumps)
    return float(10.0 * np.log10(total) - gap_db - 10.0 * np.log10(n_channels))
