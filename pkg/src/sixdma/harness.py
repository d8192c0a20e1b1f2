"""Experiment runner: config files, power sweeps, CSV/SVG output and layout files."""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .channel import wavelength
from .estimation import CrbReport, crb_report
from .geometry import ArrayLayout, MovementConstraints, SiteSpace, canonical_angles, check_constraints
from .pattern import make_pattern
from .pso import PsoParams
from .scenario import SensingRegion, SensingScenario, dbm_to_watts
from .schemes import SchemeKind, build_fpa, optimize_6dma, optimize_fa_ma

WORKERS_ENV = "SIXDMA_WORKERS"
CONFIG_DIR = Path(__file__).with_name("configs")
PATTERNS = ("directive", "isotropic")

CSV_COLUMNS = ("scheme", "pattern", "seed", "power_dbm", "crb_total_rad2", "crb_per_target",
               "power_gain", "geometric_gain", "iterations", "wallclock_s", "feasible",
               "config_hash")


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


class LayoutFormatError(ValueError):
    """Malformed or inconsistent layout file."""


@dataclass(frozen=True)
class RegionSpec:
    distance: float
    bearing_deg: float
    radius: float
    subregions: int

    def region(self) -> SensingRegion:
        return SensingRegion.at_bearing(self.distance, np.deg2rad(self.bearing_deg),
                                        self.radius, self.subregions)


@dataclass(frozen=True)
class ExperimentConfig:
    regions: tuple
    carrier_hz: float = 2.4e9
    snapshots: int = 256
    noise_dbm: float = -90.0
    rcs: float = 1.0
    probe_mode: str = "ideal"
    probe_seed: int = 0
    n_surfaces: int = 8
    n_per_surface: int = 2
    site_side: float = 0.6
    d_min: Optional[float] = None  # None: (sqrt(2)/2 + 1/2) * wavelength
    patterns: tuple = PATTERNS
    schemes: tuple = ("6dma", "fa-ma", "fpa")
    powers_dbm: tuple = (20.0, 25.0, 30.0, 35.0, 40.0)
    seeds: tuple = (0, 1, 2, 3, 4)
    pso: PsoParams = field(default_factory=PsoParams)
    convex_fraction: float = 0.5
    fa_ma_width: Optional[float] = None
    reoptimize_per_power: bool = False
    record_wallclock: bool = True
    output: str = "results"

    def __post_init__(self):
        if not self.regions:
            raise ConfigError("at least one [region.*] section is required")
        positive = {"carrier_hz": self.carrier_hz, "snapshots": self.snapshots, "rcs": self.rcs,
                    "surfaces": self.n_surfaces, "antennas_per_surface": self.n_per_surface,
                    "site_side": self.site_side}
        for name, value in positive.items():
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.d_min is not None and not self.d_min > 0:
            raise ConfigError("d_min must be positive")
        for r in self.regions:
            if not (r.distance > 0 and r.radius > 0 and r.subregions >= 1):
                raise ConfigError(f"invalid region {r}")
            if r.radius >= r.distance:
                raise ConfigError(f"region at {r.distance} m contains the BS")
        for p in self.patterns:
            if p not in PATTERNS:
                raise ConfigError(f"unknown pattern {p!r}")
        for s in self.schemes:
            try:
                SchemeKind.parse(s)
            except ValueError:
                raise ConfigError(f"unknown scheme {s!r}") from None
        if self.probe_mode not in ("ideal", "gaussian"):
            raise ConfigError(f"unknown probe mode {self.probe_mode!r}")
        if not 0.0 <= self.convex_fraction <= 1.0:
            raise ConfigError("convex_fraction must lie in [0, 1]")
        if not self.powers_dbm:
            raise ConfigError("power sweep is empty")
        if self.snapshots <= self.n_antennas:
            raise ConfigError("snapshots must exceed the number of antennas")

    @property
    def wavelength(self) -> float:
        return wavelength(self.carrier_hz)

    @property
    def min_distance(self) -> float:
        if self.d_min is not None:
            return self.d_min
        return (np.sqrt(2) / 2 + 0.5) * self.wavelength

    @property
    def n_antennas(self) -> int:
        return self.n_surfaces * self.n_per_surface

    @property
    def n_targets(self) -> int:
        return sum(r.subregions for r in self.regions)

    @property
    def noise_var(self) -> float:
        return float(dbm_to_watts(self.noise_dbm))

    def site(self) -> SiteSpace:
        return SiteSpace(self.site_side)

    def constraints(self) -> MovementConstraints:
        return MovementConstraints(self.min_distance)

    def scenario(self, power_dbm: Optional[float] = None) -> SensingScenario:
        power = self.powers_dbm[0] if power_dbm is None else power_dbm
        return SensingScenario.from_regions(
            [r.region() for r in self.regions], self.noise_var, float(dbm_to_watts(power)),
            self.snapshots, self.wavelength, self.rcs, self.probe_mode, self.probe_seed)

    def canonical(self) -> str:
        """Stable JSON of everything that affects results (not the output path)."""
        data = asdict(self)
        data.pop("output")
        data.pop("record_wallclock")
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return config_hash(self)


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(config.canonical().encode()).hexdigest()


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _words(text: str) -> tuple:
    return tuple(x.strip().lower() for x in text.replace(",", " ").split() if x.strip())


def _parse(parser: configparser.ConfigParser) -> ExperimentConfig:
    def get(section, key, conv, default=None):
        if not parser.has_option(section, key):
            if default is None:
                raise ConfigError(f"missing [{section}] {key}")
            return default
        raw = parser.get(section, key)
        try:
            return conv(raw)
        except ValueError as err:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {err}") from None

    def boolean(raw):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected a boolean")

    def optional_float(raw):
        return None if raw.strip().lower() in ("auto", "none") else float(raw)

    def flag(key, default):
        if not parser.has_option("experiment", key):
            return default
        return get("experiment", key, boolean)

    def _schemes(text):
        return tuple(SchemeKind.parse(s).value for s in _words(text))

    for section in ("scenario", "array", "experiment"):
        if not parser.has_section(section):
            raise ConfigError(f"missing [{section}] section")
    regions = []
    for name in parser.sections():
        if name.startswith("region"):
            regions.append(RegionSpec(get(name, "distance", float), get(name, "bearing_deg", float),
                                      get(name, "radius", float), get(name, "subregions", int)))
    defaults = PsoParams()
    pso_kwargs = {}
    if parser.has_section("pso"):
        for key, conv in (("particles", int), ("iterations", int), ("inertia", float),
                          ("cognitive", float), ("social", float), ("penalty", float),
                          ("penalty_scale", float), ("velocity_fraction", float)):
            if parser.has_option("pso", key):
                pso_kwargs[key] = get("pso", key, conv)
    try:
        pso = PsoParams(**{**asdict(defaults), **pso_kwargs})
    except ValueError as err:
        raise ConfigError(f"[pso] {err}") from None
    return ExperimentConfig(
        regions=tuple(regions),
        carrier_hz=get("scenario", "carrier_hz", float, 2.4e9),
        snapshots=get("scenario", "snapshots", int, 256),
        noise_dbm=get("scenario", "noise_dbm", float, -90.0),
        rcs=get("scenario", "rcs", float, 1.0),
        probe_mode=get("scenario", "probe", str, "ideal").strip().lower(),
        probe_seed=get("scenario", "probe_seed", int, 0),
        n_surfaces=get("array", "surfaces", int),
        n_per_surface=get("array", "antennas_per_surface", int),
        site_side=get("array", "site_side", float, 0.6),
        d_min=get("array", "d_min", optional_float) if parser.has_option("array", "d_min") else None,
        patterns=get("experiment", "patterns", _words, PATTERNS),
        schemes=get("experiment", "schemes", _schemes)
        if parser.has_option("experiment", "schemes") else ("6dma", "fa-ma", "fpa"),
        powers_dbm=get("experiment", "powers_dbm", _floats),
        seeds=get("experiment", "seeds", lambda t: tuple(int(x) for x in _words(t)), (0,)),
        pso=pso,
        convex_fraction=get("experiment", "convex_fraction", float, 0.5),
        fa_ma_width=get("experiment", "fa_ma_width", optional_float)
        if parser.has_option("experiment", "fa_ma_width") else None,
        reoptimize_per_power=flag("reoptimize_per_power", False),
        record_wallclock=flag("record_wallclock", True),
        output=get("experiment", "output", str, "results"),
    )


def loads_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(str(err)) from None
    return _parse(parser)


def load_config(path) -> ExperimentConfig:
    """Read an INI-style experiment file; bare names resolve to the shipped configs."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        p = CONFIG_DIR / f"{p.name}.cfg"
    elif not p.exists() and (CONFIG_DIR / p.name).exists():
        p = CONFIG_DIR / p.name
    try:
        text = p.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return loads_config(text)


@dataclass
class RunRecord:
    config_hash: str
    seed: int
    scheme: str
    pattern: str
    power_dbm: float
    report: CrbReport
    layout: ArrayLayout
    history: np.ndarray
    wallclock: float
    feasible: bool

    @property
    def iterations(self) -> int:
        return max(len(self.history) - 1, 0)


def _layout_for(config: ExperimentConfig, scheme: str, pattern: str, seed: int,
                power_dbm: float):
    """Build or optimize the layout of one scheme; returns (layout, history, feasible)."""
    kind = make_pattern(pattern)
    site, cons = config.site(), config.constraints()
    fpa = build_fpa(config.n_antennas, config.wavelength, site)
    scheme = SchemeKind.parse(scheme)
    if scheme is SchemeKind.FPA:
        return fpa, np.zeros(0), check_constraints(fpa, site, cons).feasible
    sc = config.scenario(power_dbm)
    if scheme is SchemeKind.FA_MA:
        res = optimize_fa_ma(sc, kind, config.pso, seed, base=fpa, site=site,
                             width=config.fa_ma_width)
        return res.layout, res.history, res.feasible
    res = optimize_6dma(sc, kind, config.pso, seed, n_surfaces=config.n_surfaces,
                        n_per_surface=config.n_per_surface, site=site, cons=cons,
                        convex_fraction=config.convex_fraction)
    return res.layout, res.history, res.feasible


def run_job(config: ExperimentConfig, scheme: str, pattern: str, seed: int) -> list:
    """All power points of one (scheme, pattern, seed) triple."""
    kind = make_pattern(pattern)
    digest = config.hash
    records = []
    cached = None
    for power in config.powers_dbm:
        start = time.perf_counter()
        if cached is None or config.reoptimize_per_power:
            cached = _layout_for(config, scheme, pattern, seed, power)
        layout, history, feasible = cached
        sc = config.scenario(power)
        report = crb_report(layout, kind, sc.targets, sc.probe(layout.n_antennas),
                            sc.noise_var, sc.wavelength)
        elapsed = time.perf_counter() - start if config.record_wallclock else 0.0
        records.append(RunRecord(digest, seed, SchemeKind.parse(scheme).value, pattern,
                                 float(power), report, layout, history, elapsed,
                                 bool(feasible and report.identifiable)))
    return records


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be at least 1")
    return n


def _order(record: RunRecord):
    return (record.pattern, record.scheme, record.seed, record.power_dbm)


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None,
                   schemes: Optional[Sequence[str]] = None,
                   patterns: Optional[Sequence[str]] = None,
                   seeds: Optional[Sequence[int]] = None) -> list:
    """Run every (pattern, scheme, seed) job and return records in canonical order.

    Layouts are optimized once per job at the first swept power and then
    re-evaluated at every power, unless ``reoptimize_per_power`` is set.
    Jobs fan out to ``workers`` processes (default from ``SIXDMA_WORKERS``).
    """
    workers = worker_count() if workers is None else workers
    jobs = [(s, p, seed)
            for p in (config.patterns if patterns is None else patterns)
            for s in (config.schemes if schemes is None else schemes)
            for seed in (config.seeds if seeds is None else seeds)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_job, *zip(*[(config, *j) for j in jobs])))
    else:
        chunks = [run_job(config, *j) for j in jobs]
    return sorted((r for chunk in chunks for r in chunk), key=_order)


def _join(values) -> str:
    return ";".join(repr(float(v)) for v in np.asarray(values).ravel())


def emit_csv(records: Sequence[RunRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([r.scheme, r.pattern, r.seed, repr(float(r.power_dbm)),
                             repr(float(r.report.total)), _join(r.report.per_target),
                             _join(r.report.power_gain), _join(r.report.geometric_gain),
                             r.iterations, repr(float(r.wallclock)), int(r.feasible),
                             r.config_hash])
    return path


def read_csv(path) -> list:
    """Rows of an emitted CSV with numbers parsed back; per-target fields become arrays."""
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            vec = lambda s: np.array([float(x) for x in s.split(";")]) if s else np.zeros(0)
            rows.append({
                "scheme": row["scheme"], "pattern": row["pattern"], "seed": int(row["seed"]),
                "power_dbm": float(row["power_dbm"]),
                "crb_total_rad2": float(row["crb_total_rad2"]),
                "crb_per_target": vec(row["crb_per_target"]),
                "power_gain": vec(row["power_gain"]), "geometric_gain": vec(row["geometric_gain"]),
                "iterations": int(row["iterations"]), "wallclock_s": float(row["wallclock_s"]),
                "feasible": bool(int(row["feasible"])), "config_hash": row["config_hash"],
            })
    return rows


def summarize(rows) -> dict:
    """``{pattern: {scheme: (powers, median, low, high)}}`` over seeds."""
    out: dict = {}
    keys = sorted({(r["pattern"], r["scheme"]) for r in rows})
    for pattern, scheme in keys:
        sel = [r for r in rows if r["pattern"] == pattern and r["scheme"] == scheme]
        powers = np.array(sorted({r["power_dbm"] for r in sel}))
        vals = [np.array([r["crb_total_rad2"] for r in sel if r["power_dbm"] == p]) for p in powers]
        out.setdefault(pattern, {})[scheme] = (
            powers, np.array([np.median(v) for v in vals]),
            np.array([v.min() for v in vals]), np.array([v.max() for v in vals]))
    return out


def _as_rows(records) -> list:
    rows = []
    for r in records:
        if isinstance(r, dict):
            rows.append(r)
        else:
            rows.append({"scheme": r.scheme, "pattern": r.pattern, "seed": r.seed,
                         "power_dbm": r.power_dbm, "crb_total_rad2": r.report.total})
    return rows


SCHEME_STYLE = {"6dma": ("6DMA", "o"), "fa-ma": ("FA/MA", "s"), "fpa": ("FPA", "^")}


def emit_plot(records, path) -> Path:
    """CRB versus transmit power: one panel per pattern, median over seeds with a min-max band."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "sixdma"  # stable element ids
    summary = summarize(_as_rows(records))
    if not summary:
        raise ValueError("no records to plot")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    patterns = sorted(summary)
    fig, axes = plt.subplots(1, len(patterns), figsize=(5.2 * len(patterns), 4.0), squeeze=False)
    for ax, pattern in zip(axes[0], patterns):
        for scheme, (p, med, lo, hi) in sorted(summary[pattern].items()):
            label, marker = SCHEME_STYLE.get(scheme, (scheme, "x"))
            line, = ax.semilogy(p, med, marker=marker, label=label)
            if len(p) > 1:
                ax.fill_between(p, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
        ax.set_title(f"{pattern} pattern")
        ax.set_xlabel("transmit power (dBm)")
        ax.set_ylabel("CRB (rad$^2$)")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fmt = path.suffix.lstrip(".") or "svg"
    fig.savefig(path, format=fmt, metadata={"Date": None} if fmt == "svg" else None)
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# layout files

LAYOUT_MAGIC = "sixdma-layout 1"


def save_layout(layout: ArrayLayout, path, config_hash: str = "-") -> Path:
    """Line-oriented text file; floats use ``repr`` so a reload is bit-exact."""
    f = lambda v: " ".join(repr(float(x)) for x in np.ravel(v))
    lines = [LAYOUT_MAGIC, f"config_hash {config_hash}", f"normal {f(layout.normal)}",
             f"surfaces {layout.n_surfaces}"]
    for b in range(layout.n_surfaces):
        off = layout.offsets[b]
        lines.append(f"surface {b} position {f(layout.positions[b])} rotation "
                     f"{f(layout.rotations[b])} antennas {off.shape[0]}")
        lines.extend(f"offset {f(o)}" for o in off)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def _numbers(tokens, count, lineno):
    if len(tokens) != count:
        raise LayoutFormatError(f"line {lineno}: expected {count} numbers, got {len(tokens)}")
    try:
        values = np.array([float(t) for t in tokens])
    except ValueError:
        raise LayoutFormatError(f"line {lineno}: not a number in {' '.join(tokens)!r}") from None
    if not np.all(np.isfinite(values)):
        raise LayoutFormatError(f"line {lineno}: non-finite value")
    return values


def read_layout(path):
    """Parse a layout file; returns ``(layout, config_hash)``."""
    lines = Path(path).read_text().splitlines()
    pos = 0

    def take(keyword):
        nonlocal pos
        if pos >= len(lines):
            raise LayoutFormatError(f"line {pos + 1}: expected '{keyword}' record, found end of file")
        tokens = lines[pos].split()
        pos += 1
        if not tokens or tokens[0] != keyword:
            raise LayoutFormatError(f"line {pos}: expected '{keyword}' record, found {lines[pos - 1]!r}")
        return tokens[1:], pos

    if not lines or lines[0].strip() != LAYOUT_MAGIC:
        raise LayoutFormatError("line 1: not a layout file")
    pos = 1
    tokens, _ = take("config_hash")
    digest = tokens[0] if tokens else "-"
    tokens, n = take("normal")
    normal = _numbers(tokens, 3, n)
    tokens, n = take("surfaces")
    count = int(_numbers(tokens, 1, n)[0])
    positions, rotations, offsets = [], [], []
    for b in range(count):
        tokens, n = take("surface")
        if (len(tokens) != 11 or tokens[0] != str(b) or tokens[1] != "position"
                or tokens[5] != "rotation" or tokens[9] != "antennas"):
            raise LayoutFormatError(f"line {n}: malformed record for surface {b}")
        positions.append(_numbers(tokens[2:5], 3, n))
        rotations.append(_numbers(tokens[6:9], 3, n))
        m = int(_numbers(tokens[10:], 1, n)[0])
        offsets.append(np.array([_numbers(take("offset")[0], 3, pos) for _ in range(m)]).reshape(-1, 3))
    if pos < len(lines) and any(l.strip() for l in lines[pos:]):
        raise LayoutFormatError(f"line {pos + 1}: unexpected content after {count} surfaces")
    rotations = np.array(rotations).reshape(-1, 3)
    canon = canonical_angles(rotations)
    if not np.array_equal(canon, rotations):
        warnings.warn(f"{path}: rotation angles outside [0, 2pi) were wrapped", stacklevel=3)
    try:
        layout = ArrayLayout(np.array(positions).reshape(-1, 3), canon, tuple(offsets), normal)
    except ValueError as err:
        raise LayoutFormatError(f"{path}: {err}") from None
    return layout, digest


def load_layout(path, expected_hash: Optional[str] = None) -> ArrayLayout:
    """Load a layout, rejecting files written under a different config when ``expected_hash`` is set."""
    layout, digest = read_layout(path)
    if expected_hash is not None and digest != expected_hash:
        raise LayoutFormatError(f"{path}: config hash {digest[:12]} does not match {expected_hash[:12]}")
    return layout


def layout_filename(scheme: str, pattern: str, seed: int) -> str:
    return f"layout_{scheme}_{pattern}_seed{seed}.txt"
