"""The three compared antenna schemes: 6DMA, fixed sectors (FPA) and FA/MA."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import (ArrayLayout, LocalArray, MovementConstraints, SiteSpace, canonical_angles,
                       check_constraints, rotation_facing)
from .pattern import PatternKind
from .pso import (CrbObjective, PsoParams, PsoResult, SearchSpace, encode, optimize,
                  run_swarm)

SECTOR_AZIMUTHS = np.deg2rad([90.0, 210.0, 330.0])


class SchemeKind(str, enum.Enum):
    SIX_DMA = "6dma"
    FPA = "fpa"
    FA_MA = "fa-ma"

    @classmethod
    def parse(cls, name: str) -> "SchemeKind":
        key = name.strip().lower().replace("_", "-")
        aliases = {"six-dma": "6dma", "fama": "fa-ma", "fa/ma": "fa-ma"}
        return cls(aliases.get(key, key))


def sector_sizes(total: int) -> list[int]:
    """Antennas per sector: ``ceil(NB/3)`` on the first two, the remainder on the last."""
    if total < 3:
        raise ValueError("a three-sector array needs at least 3 antennas")
    per = -(-total // 3)
    sizes = [per, per, total - 2 * per]
    if sizes[-1] < 1:
        raise ValueError(f"{total} antennas leave the last sector empty")
    return sizes


def build_fpa(total_antennas: int, lam: float, site: SiteSpace) -> ArrayLayout:
    """Three vertical sector panels on a circle of radius ``A/4``, facing outward."""
    radius = site.side / 4
    positions, rotations, offsets = [], [], []
    for az, n in zip(SECTOR_AZIMUTHS, sector_sizes(total_antennas)):
        direction = np.array([np.cos(az), np.sin(az), 0.0])
        positions.append(radius * direction)
        rotations.append(rotation_facing(direction))
        offsets.append(LocalArray.ula(n, lam / 2).offsets)
    return ArrayLayout(positions, rotations, tuple(offsets))


def ring_layout(n_surfaces: int, local: LocalArray, site: SiteSpace,
                cons: MovementConstraints) -> Optional[ArrayLayout]:
    """Feasible reference layout: stacked horizontal rings on the site's inscribed cylinder.

    Every surface faces radially outward, so the reflection and blockage
    constraints hold; returns ``None`` if no ring stack meets ``d_min``.
    """
    R = site.half
    for levels in range(1, n_surfaces + 1):
        per = -(-n_surfaces // levels)
        chord = 2 * R * np.sin(np.pi / per) if per > 1 else np.inf
        gap = site.side / (levels - 1) if levels > 1 else np.inf
        if chord < cons.d_min * (1 + 1e-9) or gap < cons.d_min * (1 + 1e-9):
            continue
        zs = np.linspace(-R, R, levels) if levels > 1 else np.zeros(1)
        positions, rotations = [], []
        for b in range(n_surfaces):
            level, slot = divmod(b, per)
            az = 2 * np.pi * slot / per + (np.pi / per) * (level % 2)
            direction = np.array([np.cos(az), np.sin(az), 0.0])
            positions.append(np.array([R * direction[0], R * direction[1], zs[level]]))
            rotations.append(rotation_facing(direction))
        return ArrayLayout.uniform(positions, rotations, local)
    return None


def sector_layout(n_surfaces: int, local: LocalArray, site: SiteSpace,
                  cons: MovementConstraints, bulge: float = 4.0) -> Optional[ArrayLayout]:
    """Feasible reference layout spreading the surfaces over the three FPA sector faces.

    Each face is bent into an arc of a vertical cylinder of radius
    ``bulge * A`` so that neighbors are strictly behind each other's plane
    (a flat face would sit on the reflection boundary). The three faces sit
    at staggered heights to keep end surfaces apart near the corners. The
    spacing shrinks from the even split of the face width until every
    placement constraint holds; returns ``None`` if it never does.
    """
    counts = [len(c) for c in np.array_split(np.arange(n_surfaces), 3)]
    width = np.sqrt(3) / 2 * site.side
    radius = site.side / 4
    arc = bulge * site.side
    heights = np.array([0.0, 1.0, -1.0]) * min(cons.d_min, site.half / 2)
    for spacing in np.linspace(width / max(counts), cons.d_min, 25):
        positions, rotations = [], []
        for az, m, z in zip(SECTOR_AZIMUTHS, counts, heights):
            center = (radius - arc) * np.array([np.cos(az), np.sin(az)])
            for i in range(m):
                t = az + (i - (m - 1) / 2) * spacing / arc
                direction = np.array([np.cos(t), np.sin(t), 0.0])
                positions.append(np.append(center + arc * direction[:2], z))
                rotations.append(rotation_facing(direction))
        layout = ArrayLayout.uniform(positions, rotations, local)
        if check_constraints(layout, site, cons).feasible:
            return layout
    return None


def convex_layout(rng: np.random.Generator, n_surfaces: int, local: LocalArray,
                  site: SiteSpace, cons: MovementConstraints,
                  tries: int = 50) -> Optional[ArrayLayout]:
    """Random feasible layout with the surfaces tangent to an origin-centered ellipsoid.

    Each surface faces along the ellipsoid normal at its center. The ellipsoid
    is strictly convex and contains the origin, so no surface lies in front of
    another and none faces the CPU; only ``d_min`` needs rejection sampling.
    Elevations stay within 45 degrees of the horizon.
    """
    h = site.half
    for _ in range(tries):
        axes = rng.uniform(0.3, 1.0, 3) * h
        az = rng.uniform(0.0, 2 * np.pi, n_surfaces)
        el = rng.uniform(-np.pi / 4, np.pi / 4, n_surfaces)
        u = np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1)
        normals = u / axes
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        order = np.argsort(az)
        layout = ArrayLayout.uniform((u * axes)[order], [rotation_facing(n) for n in normals[order]],
                                     local)
        if check_constraints(layout, site, cons).feasible:
            return layout
    return None


def seed_layouts(n_surfaces: int, local: LocalArray, site: SiteSpace,
                 cons: MovementConstraints) -> list[ArrayLayout]:
    found = (sector_layout(n_surfaces, local, site, cons), ring_layout(n_surfaces, local, site, cons))
    return [lay for lay in found if lay is not None]


def optimize_6dma(scenario, kind: PatternKind, params: PsoParams, seed=None, *,
                  n_surfaces: int, n_per_surface: int, site: SiteSpace,
                  cons: MovementConstraints, seed_layout: bool = True,
                  convex_fraction: float = 0.5, workers: int = 1) -> PsoResult:
    """Full position and rotation search over ``n_surfaces`` ULAs of ``n_per_surface``.

    The swarm starts from the deterministic seed layouts (if ``seed_layout``),
    then ``convex_fraction`` of the particles on random :func:`convex_layout`
    draws, and uniform random particles for the rest.
    """
    local = LocalArray.ula(n_per_surface, scenario.wavelength / 2)
    rows = []
    if seed_layout:
        rows += [encode(lay) for lay in seed_layouts(n_surfaces, local, site, cons)]
    n_convex = int(round(convex_fraction * params.particles))
    if n_convex > 0:
        rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0]
                                    if seed is not None else None)
        for _ in range(n_convex):
            lay = convex_layout(rng, n_surfaces, local, site, cons)
            if lay is not None:
                rows.append(encode(lay))
    initial = np.array(rows[: params.particles]) if rows else None
    return optimize(scenario, site, cons, kind, params, seed, local=local,
                    n_surfaces=n_surfaces, initial=initial, workers=workers)


@dataclass
class FaMaProblem:
    """Per-antenna in-plane displacements on the fixed FPA sector panels.

    The search vector holds the horizontal coordinate of every antenna
    followed by the vertical one, each within ``[-width/2, width/2]`` of the
    panel center. Rotations and panel centers stay those of the base layout.
    """

    base: ArrayLayout
    width: float
    min_spacing: float

    @property
    def sizes(self) -> np.ndarray:
        return self.base.antenna_counts

    @property
    def dims(self) -> int:
        return 2 * self.base.n_antennas

    def space(self) -> SearchSpace:
        h = np.full(self.dims, self.width / 2)
        return SearchSpace(-h, h, np.zeros(self.dims, dtype=bool))

    def encode(self, layout: ArrayLayout) -> np.ndarray:
        off = np.concatenate(layout.offsets)
        return np.concatenate([off[:, 1], off[:, 2]])

    def decode(self, s) -> ArrayLayout:
        s = np.asarray(s, dtype=float)
        M = self.base.n_antennas
        off = np.zeros((M, 3))
        off[:, 1], off[:, 2] = s[:M], s[M:]
        blocks = np.split(off, np.cumsum(self.sizes)[:-1])
        return ArrayLayout(self.base.positions, self.base.rotations, tuple(blocks),
                           self.base.normal)

    def violations(self, s) -> int:
        r = self.decode(s).antenna_positions()
        d = np.linalg.norm(r[:, None, :] - r[None, :, :], axis=-1)
        iu = np.triu_indices(len(r), k=1)
        return int(np.sum(d[iu] < self.min_spacing * (1 - 1e-9)))


def fa_ma_problem(base: ArrayLayout, lam: float, site: SiteSpace,
                  width: Optional[float] = None) -> FaMaProblem:
    """Default panel width is the side of the triangle formed by the three sector
    planes, ``sqrt(3)/2 * A``."""
    if width is None:
        width = np.sqrt(3) / 2 * site.side
    return FaMaProblem(base, float(width), lam / 2)


@dataclass
class FaMaResult:
    layout: ArrayLayout
    crb: float
    history: np.ndarray
    violations: int

    @property
    def feasible(self) -> bool:
        return self.violations == 0

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


def optimize_fa_ma(scenario, kind: PatternKind, params: PsoParams, seed=None, *,
                   base: ArrayLayout, site: SiteSpace, width: Optional[float] = None,
                   workers: int = 1) -> FaMaResult:
    """Move antennas within their sector panels; the FPA placement is particle 0."""
    problem = fa_ma_problem(base, scenario.wavelength, site, width)
    objective = CrbObjective(scenario, kind, problem.decode, problem.violations)
    if params.iterations == 0:
        crb, count = objective(problem.encode(base))
        return FaMaResult(base, crb, np.array([crb]), count)
    res = run_swarm(objective, problem.space(), params, seed,
                    initial=problem.encode(base)[None, :], workers=workers)
    layout = problem.decode(res.best)
    return FaMaResult(layout, objective.crb(layout), res.history, problem.violations(res.best))


def rotations_equal(a: ArrayLayout, b: ArrayLayout) -> bool:
    return np.array_equal(canonical_angles(a.rotations), canonical_angles(b.rotations))
