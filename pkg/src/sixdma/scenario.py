"""Sensing regions, typical targets and probe configuration."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .estimation import ProbeSignal


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class SensingRegion:
    """Disk in the horizontal plane, split into ``subregions`` equal-area cells."""

    center: np.ndarray
    radius: float
    subregions: int

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if not self.radius > 0:
            raise ValueError("region radius must be positive")
        if int(self.subregions) < 1:
            raise ValueError("a region needs at least one subregion")

    @property
    def area(self) -> float:
        return np.pi * self.radius ** 2

    @classmethod
    def at_bearing(cls, distance: float, bearing: float, radius: float, subregions: int):
        center = distance * np.array([np.cos(bearing), np.sin(bearing)])
        return cls(center, radius, subregions)


@dataclass(frozen=True)
class Cell:
    """Annular sector ``r_in <= r <= r_out``, ``t0 <= angle < t1`` (disk-centered polar)."""

    r_in: float
    r_out: float
    t0: float
    t1: float

    @property
    def area(self) -> float:
        return 0.5 * (self.t1 - self.t0) * (self.r_out ** 2 - self.r_in ** 2)

    @property
    def full_disk(self) -> bool:
        return self.r_in == 0.0 and np.isclose(self.t1 - self.t0, 2 * np.pi)

    def centroid(self) -> np.ndarray:
        if self.full_disk or np.isclose(self.t1 - self.t0, 2 * np.pi):
            return np.zeros(2)
        half = 0.5 * (self.t1 - self.t0)
        radial = (2.0 / 3.0) * (self.r_out ** 3 - self.r_in ** 3) / (self.r_out ** 2 - self.r_in ** 2)
        radial *= np.sin(half) / half
        mid = 0.5 * (self.t0 + self.t1)
        return radial * np.array([np.cos(mid), np.sin(mid)])

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        r = np.hypot(p[:, 0], p[:, 1])
        inside = (r >= self.r_in) & (r <= self.r_out)
        if np.isclose(self.t1 - self.t0, 2 * np.pi):
            return inside
        ang = np.mod(np.arctan2(p[:, 1], p[:, 0]) - self.t0, 2 * np.pi)
        return inside & (ang <= self.t1 - self.t0)


def _ring_counts(k: int, rings: int) -> list[int]:
    """Split ``k`` cells over rings in proportion to 1, 3, 5, ... (largest remainder)."""
    weights = 2 * np.arange(1, rings + 1) - 1
    raw = k * weights / weights.sum()
    counts = np.floor(raw).astype(int)
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[: k - counts.sum()]] += 1
    return counts.tolist()


def _cells_for(radius: float, counts: Sequence[int], rotation: float = 0.0) -> list[Cell]:
    total = sum(counts)
    cells = []
    inner = 0.0
    cum = 0
    for n in counts:
        cum += n
        outer = radius * np.sqrt(cum / total)
        width = 2 * np.pi / n
        cells.extend(Cell(inner, outer, rotation + i * width, rotation + (i + 1) * width)
                     for i in range(n))
        inner = outer
    cells[-1] = Cell(cells[-1].r_in, radius, cells[-1].t0, cells[-1].t1)
    return cells


def _aspect_penalty(cells: Sequence[Cell]) -> float:
    worst = 0.0
    for c in cells:
        if c.full_disk:
            continue
        width = c.r_out - c.r_in
        arc = 0.5 * (c.r_in + c.r_out) * (c.t1 - c.t0)
        worst = max(worst, abs(np.log(arc / width)))
    return worst


def _ring_layout(k: int) -> list[int]:
    best, best_score = [k], np.inf
    for rings in range(1, k + 1):
        counts = _ring_counts(k, rings)
        if min(counts) < 1 or any(n < 2 for n in counts[1:]):
            continue
        cells = _cells_for(1.0, counts)
        if not all(c.contains(c.centroid())[0] for c in cells):
            continue
        score = _aspect_penalty(cells)
        if score < best_score - 1e-12:
            best, best_score = counts, score
    return best


def partition_cells(radius: float, k: int, rotation: float = 0.0) -> list[Cell]:
    """Equal-area polar grid with ``k`` cells over a disk of ``radius``.

    Rings carry cell counts proportional to 1, 3, 5, ...; ring radii follow
    from the cumulative count so every cell has area ``pi r^2 / k``. The ring
    count is the one giving cells closest to square whose centroids stay
    inside their own cell. ``rotation`` turns the whole grid.
    """
    k = int(k)
    if k < 1:
        raise ValueError("need at least one cell")
    if k == 1:
        return [Cell(0.0, radius, 0.0, 2 * np.pi)]
    return _cells_for(radius, _ring_layout(k), rotation)


def _min_bearing_gap(points, origin) -> float:
    rel = points - origin
    b = np.sort(np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2 * np.pi))
    if len(b) < 2:
        return np.inf
    return float(min(np.min(np.diff(b)), b[0] + 2 * np.pi - b[-1]))


def grid_rotation(region: SensingRegion, bs_origin, steps: int = 720) -> float:
    """Grid rotation maximizing the smallest bearing gap between typical points.

    Two typical points on one ray from the BS would share a DoA, which the
    DoA-only model cannot separate. Ties keep the smallest rotation.
    """
    if region.subregions == 1:
        return 0.0
    origin = np.asarray(bs_origin, dtype=float).reshape(2)
    counts = _ring_layout(region.subregions)
    best, best_gap = 0.0, -np.inf
    for rot in np.arange(steps) * (2 * np.pi / steps):
        cells = _cells_for(region.radius, counts, rot)
        pts = np.array([c.centroid() for c in cells]) + region.center
        gap = _min_bearing_gap(pts, origin)
        if gap > best_gap + 1e-12:
            best, best_gap = rot, gap
    return float(best)


def region_cells(region: SensingRegion, bs_origin=None) -> list[Cell]:
    """Equal-area cells of ``region`` (disk-centered), oriented for ``bs_origin`` if given."""
    rot = 0.0 if bs_origin is None else grid_rotation(region, bs_origin)
    return partition_cells(region.radius, region.subregions, rot)


def partition_region(region: SensingRegion, bs_origin=None) -> np.ndarray:
    """Typical target points (area centroids of the equal-area cells), ``(K_m, 2)``.

    Without ``bs_origin`` the grid starts at angle zero; with it the grid is
    turned so the points have well separated bearings from the BS.
    """
    cells = region_cells(region, bs_origin)
    return np.array([c.centroid() for c in cells]) + region.center


@dataclass(frozen=True)
class Target:
    phi: float
    range: float
    rho: complex

    def __post_init__(self):
        if not abs(self.rho) > 0:
            raise ValueError("reflection coefficient must be non-zero")
        if not -np.pi <= self.phi <= np.pi:
            raise ValueError("DoA must lie in [-pi, pi]")


def radar_coefficient(distance, rcs: float, lam: float):
    """Two-way free-space amplitude ``sqrt(rcs lam^2 / ((4 pi)^3 d^4))``."""
    d = np.asarray(distance, dtype=float)
    return np.sqrt(rcs * lam ** 2 / ((4 * np.pi) ** 3 * d ** 4))


def build_targets(regions: Sequence[SensingRegion], bs_origin=(0.0, 0.0), rcs: float = 1.0,
                  lam: float = 0.125) -> list[Target]:
    if not regions:
        raise ValueError("need at least one sensing region")
    origin = np.asarray(bs_origin, dtype=float).reshape(2)
    out = []
    for region in regions:
        for point in partition_region(region, origin):
            rel = point - origin
            d = float(np.hypot(*rel))
            if d == 0.0:
                raise ValueError("typical target coincides with the BS reference point")
            phi = float(np.arctan2(rel[1], rel[0]))
            out.append(Target(phi, d, complex(radar_coefficient(d, rcs, lam))))
    return out


def make_probe(power: float, snapshots: int, dims: int, mode: str = "ideal",
               seed=None) -> ProbeSignal:
    """Probe with i.i.d. ``CN(0, P/NB I)`` columns, or its ideal covariance only."""
    if snapshots <= dims:
        raise ValueError(f"need more snapshots than antennas ({snapshots} <= {dims})")
    if mode == "ideal":
        return ProbeSignal(None, snapshots, power, (power / dims) * np.eye(dims))
    if mode != "gaussian":
        raise ValueError(f"unknown probe mode {mode!r}")
    rng = np.random.default_rng(seed)
    shape = (dims, snapshots)
    X = np.sqrt(power / (2 * dims)) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    S = X @ X.conj().T / snapshots
    return ProbeSignal(X, snapshots, power, 0.5 * (S + S.conj().T))


@dataclass(frozen=True)
class SensingScenario:
    regions: tuple
    targets: tuple
    noise_var: float
    power: float
    snapshots: int
    wavelength: float
    probe_mode: str = "ideal"
    probe_seed: int = 0
    _probes: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    @cached_property
    def phis(self) -> np.ndarray:
        return np.array([t.phi for t in self.targets])

    @cached_property
    def rhos(self) -> np.ndarray:
        return np.array([t.rho for t in self.targets], dtype=complex)

    def probe(self, dims: int, power: float | None = None) -> ProbeSignal:
        """Probe for ``dims`` antennas; realized once per size and rescaled per power."""
        base = self._probes.get(dims)
        if base is None:
            base = make_probe(self.power, self.snapshots, dims, self.probe_mode, self.probe_seed)
            self._probes[dims] = base
        return base if power is None else base.scaled(power)

    @classmethod
    def from_regions(cls, regions, noise_var: float, power: float, snapshots: int,
                     lam: float, rcs: float = 1.0, probe_mode: str = "ideal", probe_seed: int = 0):
        targets = build_targets(regions, rcs=rcs, lam=lam)
        return cls(tuple(regions), tuple(targets), noise_var, power, snapshots, lam,
                   probe_mode, probe_seed)
