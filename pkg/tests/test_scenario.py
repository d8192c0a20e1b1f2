import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad

from sixdma.scenario import (Cell, SensingRegion, SensingScenario, Target, build_targets,
                             dbm_to_watts, make_probe, partition_cells, partition_region,
                             radar_coefficient, region_cells)


def test_single_cell_is_center():
    region = SensingRegion([3.0, -1.0], 2.0, 1)
    assert np.allclose(partition_region(region), [[3.0, -1.0]])


def test_five_cells_equal_area_by_quadrature():
    cells = partition_cells(2.0, 5)
    assert len(cells) == 5
    for c in cells:
        area, _ = dblquad(lambda r, t: r, c.t0, c.t1, c.r_in, c.r_out)
        assert area == pytest.approx(4 * np.pi / 5, rel=1e-9)


@pytest.mark.parametrize("k", [1, 2, 3, 5, 6, 10, 15, 30])
def test_cells_tile_disk(k):
    cells = partition_cells(1.5, k, rotation=0.37)
    areas = np.array([c.area for c in cells])
    assert np.allclose(areas, np.pi * 1.5 ** 2 / k, rtol=1e-9)
    assert areas.sum() == pytest.approx(np.pi * 1.5 ** 2, rel=1e-9)
    for c in cells:
        assert c.contains(c.centroid())[0]


@pytest.mark.parametrize("k", [4, 10])
def test_monte_carlo_membership(k):
    rng = np.random.default_rng(k)
    pts = rng.uniform(-1, 1, (40_000, 2))
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) <= 1]
    cells = partition_cells(1.0, k, rotation=1.1)
    member = np.stack([c.contains(pts) for c in cells])
    # each point in exactly one cell (boundaries have measure zero)
    assert np.mean(member.sum(axis=0) == 1) > 0.999
    frac = member.mean(axis=1)
    assert np.allclose(frac, 1 / k, atol=0.01)


def test_centroid_matches_sample_mean():
    rng = np.random.default_rng(0)
    c = partition_cells(2.0, 10)[-1]
    pts = rng.uniform(-2, 2, (200_000, 2))
    inside = pts[c.contains(pts)]
    assert np.allclose(inside.mean(axis=0), c.centroid(), atol=0.02)


def test_full_region_counts_follow_area():
    radii = np.array([2.0, 2 * np.sqrt(2), 2 * np.sqrt(3)])
    areas = np.pi * radii ** 2
    assert np.allclose(areas / areas[0], [1, 2, 3])
    assert np.allclose(np.array([5, 10, 15]) / 5, areas / areas[0])


def test_targets_bearing_and_range():
    region = SensingRegion([20.0, 0.0], 1e-6, 1)
    (t,) = build_targets([region])
    assert t.phi == pytest.approx(0.0) and t.range == pytest.approx(20.0)


def test_radar_coefficient_distance_law():
    assert radar_coefficient(40.0, 1.0, 0.125) == pytest.approx(radar_coefficient(20.0, 1.0, 0.125) / 4)
    assert radar_coefficient(20.0, 0.0, 0.125) == 0.0
    with pytest.raises(ValueError):
        Target(0.0, 20.0, 0.0)
    with pytest.raises(ValueError):
        Target(4.0, 20.0, 1.0)


def test_grid_rotation_separates_bearings():
    region = SensingRegion.at_bearing(60.0, np.deg2rad(240), 2 * np.sqrt(3), 6)
    pts = partition_region(region, bs_origin=(0.0, 0.0))
    b = np.sort(np.arctan2(pts[:, 1], pts[:, 0]))
    assert np.min(np.diff(b)) > np.deg2rad(0.3)
    assert len(region_cells(region, (0.0, 0.0))) == 6


def test_build_targets_count_and_range():
    regions = [SensingRegion.at_bearing(d, b, r, k) for d, b, r, k in
               [(20, 0.0, 2.0, 5), (40, 2.0, 2 * np.sqrt(2), 10), (60, 4.0, 2 * np.sqrt(3), 15)]]
    targets = build_targets(regions)
    assert len(targets) == 30
    assert all(-np.pi <= t.phi <= np.pi for t in targets)
    with pytest.raises(ValueError):
        build_targets([])
    with pytest.raises(ValueError):
        build_targets([SensingRegion([0.0, 0.0], 1.0, 1)])


def test_probe_modes():
    ideal = make_probe(2.0, 32, 8)
    assert np.trace(ideal.covariance).real == pytest.approx(2.0, rel=1e-15)
    g = make_probe(2.0, 80, 8, mode="gaussian", seed=3)
    assert np.trace(g.covariance).real == pytest.approx(2.0, rel=0.2)
    big = make_probe(2.0, 8000, 8, mode="gaussian", seed=3)
    assert np.trace(big.covariance).real == pytest.approx(2.0, rel=0.02)
    assert np.array_equal(g.matrix, make_probe(2.0, 80, 8, mode="gaussian", seed=3).matrix)
    with pytest.raises(ValueError):
        make_probe(1.0, 8, 8)
    with pytest.raises(ValueError):
        make_probe(1.0, 16, 8, mode="chirp")


def test_dbm():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(-90.0) == pytest.approx(1e-12)


def test_scenario_probe_cache_and_scaling():
    sc = SensingScenario.from_regions([SensingRegion([20.0, 0.0], 2.0, 3)], 1e-12, 1.0, 64, 0.125)
    assert sc.n_targets == 3 and sc.phis.shape == (3,)
    p = sc.probe(4)
    assert sc.probe(4) is p
    assert np.allclose(sc.probe(4, power=3.0).covariance, 3 * p.covariance)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.floats(0.1, 10.0), st.floats(0.0, 6.28))
def test_partition_property(k, radius, rot):
    cells = partition_cells(radius, k, rot)
    assert len(cells) == k
    areas = np.array([c.area for c in cells])
    assert np.allclose(areas, np.pi * radius ** 2 / k, rtol=1e-9)
