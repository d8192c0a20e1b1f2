import re
import warnings

import numpy as np
import pytest

from sixdma.harness import (CSV_COLUMNS, ConfigError, LayoutFormatError, emit_csv, emit_plot,
                            load_config, load_layout, loads_config, read_csv, read_layout,
                            run_experiment, save_layout, summarize, worker_count)
from sixdma.schemes import build_fpa
from sixdma.geometry import SiteSpace

TINY = """
[scenario]
carrier_hz = 2.4e9
snapshots = 64
noise_dbm = -90

[region.a]
distance = 20
bearing_deg = 0
radius = 2
subregions = 1

[region.b]
distance = 40
bearing_deg = 120
radius = 2.8
subregions = 2

[array]
surfaces = 3
antennas_per_surface = 2
site_side = 0.6

[pso]
particles = 6
iterations = 3

[experiment]
patterns = directive
schemes = 6dma, fpa
powers_dbm = 20, 30
seeds = 0, 1
record_wallclock = false
"""


@pytest.fixture
def tiny():
    return loads_config(TINY)


def test_shipped_configs():
    desk = load_config("desk")
    assert desk.wavelength == 0.125
    assert desk.min_distance == pytest.approx(0.150888347648, abs=1e-12)
    assert (desk.n_surfaces, desk.n_per_surface, desk.n_targets) == (8, 2, 12)
    assert (desk.pso.particles, desk.pso.iterations) == (40, 60)
    assert desk.powers_dbm == (20, 25, 30, 35, 40) and desk.noise_var == pytest.approx(1e-12)
    full = load_config("full.cfg")
    assert (full.n_surfaces, full.pso.particles, full.pso.iterations) == (32, 200, 300)
    assert [r.subregions for r in full.regions] == [5, 10, 15]


@pytest.mark.parametrize("edit,needle", [
    (lambda t: t.replace("[array]", "[arr]"), "array"),
    (lambda t: t.replace("radius = 2\n", "radius = -2\n"), "region"),
    (lambda t: t.replace("schemes = 6dma, fpa", "schemes = 6dma, uca"), "uca"),
    (lambda t: t.replace("surfaces = 3", "surfaces = three"), "surfaces"),
    (lambda t: t.replace("particles = 6", "particles = 0"), "pso"),
    (lambda t: t.replace("patterns = directive", "patterns = omni"), "omni"),
    (lambda t: t.replace("snapshots = 64", "snapshots = 4"), "snapshots"),
    (lambda t: "not an ini file", "section"),
])
def test_config_errors(edit, needle):
    with pytest.raises(ConfigError, match=needle):
        loads_config(edit(TINY))


def test_missing_config_file():
    with pytest.raises(ConfigError):
        load_config("/no/such/file.cfg")


def test_config_hash(tiny):
    assert tiny.hash == loads_config(TINY).hash
    assert loads_config(TINY.replace("record_wallclock = false", "output = elsewhere")).hash == tiny.hash
    assert loads_config(TINY.replace("particles = 6", "particles = 7")).hash != tiny.hash


def test_empty_scheme_list():
    cfg = loads_config(TINY.replace("schemes = 6dma, fpa", "schemes ="))
    assert run_experiment(cfg, workers=1) == []


def test_run_is_deterministic(tiny, tmp_path):
    a = emit_csv(run_experiment(tiny, workers=1), tmp_path / "a.csv").read_bytes()
    b = emit_csv(run_experiment(tiny, workers=1), tmp_path / "b.csv").read_bytes()
    assert a == b
    c = emit_csv(run_experiment(tiny, workers=2), tmp_path / "c.csv").read_bytes()
    assert a == c


def test_records_and_csv(tiny, tmp_path):
    records = run_experiment(tiny, workers=1)
    assert len(records) == 2 * 2 * 2  # schemes x seeds x powers
    assert all(r.config_hash == tiny.hash for r in records)
    path = emit_csv(records[:1], tmp_path / "one.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 2 and lines[0] == ",".join(CSV_COLUMNS)
    rows = read_csv(emit_csv(records, tmp_path / "all.csv"))
    for rec, row in zip(records, rows):
        assert row["crb_per_target"].size == tiny.n_targets
        for got, want in [(row["crb_total_rad2"], rec.report.total),
                          (row["crb_per_target"], rec.report.per_target),
                          (row["power_gain"], rec.report.power_gain)]:
            assert np.allclose(got, want, rtol=1e-12, atol=0)
        assert row["iterations"] == rec.iterations
        assert row["feasible"] == rec.feasible


def test_optimize_once_versus_per_power(tiny):
    once = run_experiment(tiny, workers=1, schemes=["6dma"], seeds=[0])
    assert once[0].layout is once[1].layout
    per = run_experiment(loads_config(TINY + "reoptimize_per_power = true\n"), workers=1,
                         schemes=["6dma"], seeds=[0])
    assert len(per) == 2
    # under the ideal probe the optimum does not depend on power
    assert np.array_equal(per[0].layout.positions, once[0].layout.positions)


def test_slope_and_plot(tiny, tmp_path):
    rows = read_csv(emit_csv(run_experiment(tiny, workers=1), tmp_path / "r.csv"))
    for pattern, curves in summarize(rows).items():
        for scheme, (p, med, lo, hi) in curves.items():
            slope = np.polyfit(p / 10.0, np.log10(med), 1)[0]
            assert slope == pytest.approx(-1.0, abs=0.05)
            assert np.all(lo <= med) and np.all(med <= hi)
    out = emit_plot(rows, tmp_path / "crb.svg")
    assert out.read_text().lstrip().startswith("<?xml")


def test_single_point_plot_has_one_marker(tiny, tmp_path):
    records = run_experiment(tiny, workers=1, schemes=["fpa"], seeds=[0])[:1]
    svg = emit_plot(records, tmp_path / "p.svg").read_text()
    colored = [u for u in re.findall(r"<use [^>]*>", svg) if "fill: #1f77b4" in u]
    assert len(colored) == 2  # the data point and its legend sample


def test_worker_env(monkeypatch):
    monkeypatch.delenv("SIXDMA_WORKERS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("SIXDMA_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("SIXDMA_WORKERS", "many")
    with pytest.raises(ConfigError):
        worker_count()


@pytest.fixture
def layout(lam):
    return build_fpa(7, lam, SiteSpace(0.6))


def test_layout_roundtrip_bytes(layout, tmp_path):
    p1 = save_layout(layout, tmp_path / "a.txt", "abc")
    loaded = load_layout(p1, expected_hash="abc")
    p2 = save_layout(loaded, tmp_path / "b.txt", "abc")
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(loaded.positions, layout.positions)
    assert all(np.array_equal(a, b) for a, b in zip(loaded.offsets, layout.offsets))


def test_layout_hash_mismatch(layout, tmp_path):
    p = save_layout(layout, tmp_path / "a.txt", "abc")
    with pytest.raises(LayoutFormatError, match="hash"):
        load_layout(p, expected_hash="def")


def test_tampered_angle_is_wrapped(layout, tmp_path):
    p = save_layout(layout, tmp_path / "a.txt")
    lines = p.read_text().splitlines()
    i = next(k for k, l in enumerate(lines) if l.startswith("surface 1 "))
    tok = lines[i].split()
    tok[7] = "7.0"
    lines[i] = " ".join(tok)
    p.write_text("\n".join(lines) + "\n")
    with pytest.warns(UserWarning, match="wrapped"):
        loaded = load_layout(p)
    assert loaded.rotations[1, 0] == pytest.approx(7.0 - 2 * np.pi)


def test_missing_surface_names_line(layout, tmp_path):
    p = save_layout(layout, tmp_path / "a.txt")
    lines = p.read_text().splitlines()
    start = next(k for k, l in enumerate(lines) if l.startswith("surface 2 "))
    p.write_text("\n".join(lines[:start]) + "\n")
    with pytest.raises(LayoutFormatError, match=rf"line {start + 1}"):
        read_layout(p)


@pytest.mark.parametrize("bad", ["garbage\n", "sixdma-layout 1\nconfig_hash x\nnormal 1 0\n"])
def test_malformed_layout(bad, tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text(bad)
    with pytest.raises(LayoutFormatError, match="line"):
        read_layout(p)
