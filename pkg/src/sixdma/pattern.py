"""Element radiation patterns evaluated in each surface's local frame."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .geometry import rotation_matrices

_DEGENERATE = 1e-12


@dataclass(frozen=True)
class DirectivePattern:
    """3GPP-style sector pattern with separate horizontal/vertical cuts.

    All gains are in dB; beamwidths in radians.
    """

    g_max: float = 8.0
    g_s: float = 25.0
    g_v: float = 25.0
    phi_3db: float = np.deg2rad(65.0)
    theta_3db: float = np.deg2rad(65.0)

    def __post_init__(self):
        if self.g_s <= 0 or self.g_v <= 0:
            raise ValueError("pattern clamps must be positive")
        for bw in (self.phi_3db, self.theta_3db):
            if not 0 < bw < np.pi:
                raise ValueError("3 dB beamwidths must lie in (0, pi)")

    name = "directive"

    def horizontal_db(self, phi):
        return -np.minimum(12.0 * (np.asarray(phi) / self.phi_3db) ** 2, self.g_s)

    def vertical_db(self, theta):
        return -np.minimum(12.0 * (np.asarray(theta) / self.theta_3db) ** 2, self.g_v)

    def gain_dbi(self, theta, phi):
        total = -(self.horizontal_db(phi) + self.vertical_db(theta))
        return self.g_max - np.minimum(total, self.g_s)

    def gain_linear(self, theta, phi):
        return 10.0 ** (self.gain_dbi(theta, phi) / 10.0)


@dataclass(frozen=True)
class IsotropicPattern:
    """Half-space isotropic element: 3 dBi in front, nothing behind."""

    name = "isotropic"

    @staticmethod
    def _front(phi):
        return np.abs(np.asarray(phi)) <= np.pi / 2

    def gain_dbi(self, theta, phi):
        return np.where(self._front(phi), 10.0 * np.log10(2.0), -np.inf)

    def gain_linear(self, theta, phi):
        # kept in linear units so the back half-space is an exact zero
        return np.where(self._front(phi), 2.0, 0.0)


PatternKind = Union[DirectivePattern, IsotropicPattern]


def make_pattern(name: str, **overrides) -> PatternKind:
    """Build a pattern from its configuration name (``directive``/``isotropic``)."""
    key = name.strip().lower()
    if key == "directive":
        return DirectivePattern(**overrides)
    if key == "isotropic":
        if overrides:
            raise ValueError("isotropic pattern takes no parameters")
        return IsotropicPattern()
    raise ValueError(f"unknown pattern {name!r}")


def angles_from_local(local):
    """Elevation/azimuth ``(theta, phi)`` of local-frame unit vectors ``(..., 3)``."""
    x, y, z = local[..., 0], local[..., 1], local[..., 2]
    theta = np.pi / 2 - np.arccos(np.clip(z, -1.0, 1.0))
    rho = np.hypot(x, y)
    safe = np.where(rho < _DEGENERATE, 1.0, rho)
    phi = np.arccos(np.clip(x / safe, -1.0, 1.0)) * np.where(y >= 0, 1.0, -1.0)
    phi = np.where(rho < _DEGENERATE, 0.0, phi)
    return theta, phi


def local_direction_angles(rotation, pointing):
    """Angles of a global direction seen from a surface rotated by ``rotation``.

    Returns ``(theta_tilde, phi_tilde)``. A direction along the local z axis
    has no defined azimuth and maps to ``phi_tilde = 0``.
    """
    R = rotation_matrices(np.asarray(rotation, dtype=float))
    local = np.asarray(pointing, dtype=float) @ R
    theta, phi = angles_from_local(local)
    return float(theta), float(phi)


def gain_dbi(kind: PatternKind, theta_tilde, phi_tilde):
    return kind.gain_dbi(theta_tilde, phi_tilde)


def gain_linear(kind: PatternKind, rotation, pointing) -> float:
    theta, phi = local_direction_angles(rotation, pointing)
    return float(kind.gain_linear(theta, phi))


def surface_gains(kind: PatternKind, rot_mats, pointings) -> np.ndarray:
    """Linear gain of every surface towards every direction.

    ``rot_mats`` is ``(B, 3, 3)`` and ``pointings`` is ``(..., 3)``; the result
    has shape ``(..., B)``.
    """
    local = np.einsum("...c,bcd->...bd", pointings, rot_mats)
    theta, phi = angles_from_local(local)
    return kind.gain_linear(theta, phi)
