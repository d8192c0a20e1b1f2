"""Surface poses, rotations and placement constraints.

Every antenna surface has a center position ``q`` (meters, global frame) and
three rotation angles ``u = (alpha, beta, gamma)`` about the x, y and z axes.
The local frame of a surface uses the x axis as its outward normal (and the
boresight of the element pattern); the default ULA lies along the local y axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi
DEFAULT_NORMAL = np.array([1.0, 0.0, 0.0])


def canonical_angles(angles):
    """Wrap angles into [0, 2*pi)."""
    wrapped = np.mod(np.asarray(angles, dtype=float), TWO_PI)
    # np.mod returns exactly 2*pi for tiny negative inputs
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


def rotation_matrices(rotations) -> np.ndarray:
    """Batched rotation matrices for an array of ``(..., 3)`` Euler angles."""
    u = np.asarray(rotations, dtype=float)
    ca, sa = np.cos(u[..., 0]), np.sin(u[..., 0])
    cb, sb = np.cos(u[..., 1]), np.sin(u[..., 1])
    cg, sg = np.cos(u[..., 2]), np.sin(u[..., 2])
    R = np.empty(u.shape[:-1] + (3, 3))
    R[..., 0, 0] = ca * cg
    R[..., 0, 1] = ca * sg
    R[..., 0, 2] = -sa
    R[..., 1, 0] = sb * sa * cg - cb * sg
    R[..., 1, 1] = sb * sa * sg + cb * cg
    R[..., 1, 2] = ca * sb
    R[..., 2, 0] = cb * sa * cg + sb * sg
    R[..., 2, 1] = cb * sa * sg - sb * cg
    R[..., 2, 2] = ca * cb
    return R


def rotation_matrix(rotation) -> np.ndarray:
    """Rotation matrix of a single surface with angles ``(alpha, beta, gamma)``.

    The matrix maps local surface coordinates to the global frame, so the
    inverse mapping is its transpose.
    """
    return rotation_matrices(np.asarray(rotation, dtype=float).reshape(3))


def rotation_facing(direction) -> np.ndarray:
    """Angles (with ``beta = 0``) whose rotated local x axis points along ``direction``.

    With ``beta = 0`` the first column of the rotation matrix is
    ``(cos a cos g, -sin g, sin a cos g)``, which is solved for ``a`` and ``g``.
    """
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    gamma = -np.arcsin(np.clip(d[1], -1.0, 1.0))
    alpha = np.arctan2(d[2], d[0])
    return canonical_angles([alpha, 0.0, gamma])


@dataclass(frozen=True)
class SurfacePose:
    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3))

    def canonical(self) -> "SurfacePose":
        return SurfacePose(self.position, canonical_angles(self.rotation))


@dataclass(frozen=True)
class LocalArray:
    """Antenna offsets of one surface in its own frame, plus the local normal."""

    offsets: np.ndarray
    normal: np.ndarray = field(default_factory=lambda: DEFAULT_NORMAL.copy())

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1, 3)
        normal = np.asarray(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(normal) - 1.0) > 1e-12:
            raise ValueError("local normal must have unit length")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "normal", normal)

    @classmethod
    def ula(cls, n: int, spacing: float, axis=(0.0, 1.0, 0.0), normal=DEFAULT_NORMAL):
        """Uniform linear array of ``n`` elements centered on the origin."""
        idx = np.arange(n) - (n - 1) / 2.0
        offsets = idx[:, None] * spacing * np.asarray(axis, dtype=float)[None, :]
        return cls(offsets, normal)

    @property
    def size(self) -> int:
        return self.offsets.shape[0]


@dataclass(frozen=True)
class SiteSpace:
    """Cube ``[-side/2, side/2]^3`` centered on the BS reference point."""

    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError("site side must be positive")

    @property
    def half(self) -> float:
        return 0.5 * self.side

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.all(np.abs(p) <= self.half, axis=-1)


@dataclass(frozen=True)
class MovementConstraints:
    d_min: float

    def __post_init__(self):
        if not self.d_min > 0:
            raise ValueError("d_min must be positive")


@dataclass(frozen=True)
class ArrayLayout:
    """All surface poses with their (possibly ragged) local antenna offsets."""

    positions: np.ndarray
    rotations: np.ndarray
    offsets: tuple
    normal: np.ndarray = field(default_factory=lambda: DEFAULT_NORMAL.copy())

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        rotations = np.asarray(self.rotations, dtype=float).reshape(-1, 3)
        if positions.shape != rotations.shape:
            raise ValueError("positions and rotations must describe the same surfaces")
        offsets = tuple(np.asarray(o, dtype=float).reshape(-1, 3) for o in self.offsets)
        if len(offsets) != positions.shape[0]:
            raise ValueError("need one offset block per surface")
        normal = np.asarray(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(normal) - 1.0) > 1e-12:
            raise ValueError("local normal must have unit length")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "rotations", rotations)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "normal", normal)

    @classmethod
    def uniform(cls, positions, rotations, local: LocalArray) -> "ArrayLayout":
        """Layout where every surface carries the same local array."""
        positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        return cls(positions, rotations, (local.offsets,) * positions.shape[0], local.normal)

    @classmethod
    def from_poses(cls, poses: Sequence[SurfacePose], local: LocalArray) -> "ArrayLayout":
        return cls.uniform([p.position for p in poses], [p.rotation for p in poses], local)

    @property
    def n_surfaces(self) -> int:
        return self.positions.shape[0]

    @property
    def antenna_counts(self) -> np.ndarray:
        return np.array([o.shape[0] for o in self.offsets], dtype=int)

    @property
    def n_antennas(self) -> int:
        return int(self.antenna_counts.sum())

    @property
    def owner(self) -> np.ndarray:
        """Surface index owning each stacked antenna."""
        return np.repeat(np.arange(self.n_surfaces), self.antenna_counts)

    def poses(self) -> list[SurfacePose]:
        return [SurfacePose(q, u) for q, u in zip(self.positions, self.rotations)]

    def rotation_matrices(self) -> np.ndarray:
        return rotation_matrices(self.rotations)

    def normals(self) -> np.ndarray:
        return self.rotation_matrices() @ self.normal

    def antenna_positions(self) -> np.ndarray:
        """Stacked global antenna coordinates, shape ``(n_antennas, 3)``."""
        if self.n_antennas == 0:
            return np.zeros((0, 3))
        R = self.rotation_matrices()
        blocks = [q + o @ Rb.T for q, o, Rb in zip(self.positions, self.offsets, R)]
        return np.concatenate(blocks, axis=0)

    def translated(self, shift) -> "ArrayLayout":
        return ArrayLayout(self.positions + np.asarray(shift, dtype=float), self.rotations,
                           self.offsets, self.normal)

    def with_poses(self, positions, rotations) -> "ArrayLayout":
        return ArrayLayout(positions, rotations, self.offsets, self.normal)


def global_antenna_positions(pose: SurfacePose, local: LocalArray) -> np.ndarray:
    """Global coordinates ``q + R(u) r_n`` of every antenna on one surface."""
    R = rotation_matrix(pose.rotation)
    return pose.position[None, :] + local.offsets @ R.T


def surface_normal(pose: SurfacePose, local: LocalArray) -> np.ndarray:
    return rotation_matrix(pose.rotation) @ local.normal


class Violation(NamedTuple):
    constraint: str  # "reflection", "blockage", "distance" or "box"
    index: tuple


@dataclass
class ViolationReport:
    violations: list

    @property
    def feasible(self) -> bool:
        return not self.violations

    def by_constraint(self, name: str) -> list:
        return [v.index for v in self.violations if v.constraint == name]

    def __len__(self):
        return len(self.violations)


PLANE_TOL = 1e-9  # m; coplanar surfaces count as side by side, not in front


def constraint_masks(positions, normals, d_min: float):
    """Boolean violation masks of the three movement constraints.

    Returns ``(reflection, blockage, distance)`` where ``reflection[i, j]`` is
    set when surface ``j`` lies in front of surface ``i``, ``blockage[i]``
    when surface ``i`` faces the CPU, and ``distance[i, j]`` (upper triangle
    only) when two centers are closer than ``d_min``.
    """
    q = np.asarray(positions, dtype=float)
    n = np.asarray(normals, dtype=float)
    B = q.shape[0]
    diff = q[None, :, :] - q[:, None, :]  # diff[i, j] = q_j - q_i
    reflection = np.einsum("ic,ijc->ij", n, diff) > PLANE_TOL
    np.fill_diagonal(reflection, False)
    blockage = np.einsum("ic,ic->i", n, q) < -PLANE_TOL
    dist = np.linalg.norm(diff, axis=-1)
    distance = np.triu(dist < d_min, k=1) if B > 1 else np.zeros((B, B), dtype=bool)
    return reflection, blockage, distance


def check_constraints(layout: ArrayLayout, site: SiteSpace,
                      cons: MovementConstraints) -> ViolationReport:
    """List every violated placement constraint of ``layout``."""
    reflection, blockage, distance = constraint_masks(layout.positions, layout.normals(),
                                                      cons.d_min)
    out = []
    for i, j in zip(*np.nonzero(reflection)):
        out.append(Violation("reflection", (int(i), int(j))))
    for i in np.flatnonzero(blockage):
        out.append(Violation("blockage", (int(i),)))
    for i, j in zip(*np.nonzero(distance)):
        out.append(Violation("distance", (int(i), int(j))))
    for i in np.flatnonzero(~site.contains(layout.positions)):
        out.append(Violation("box", (int(i),)))
    return ViolationReport(out)
