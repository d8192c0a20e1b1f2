"""Far-field LoS channel vectors of a multi-surface array and their DoA derivatives."""

from __future__ import annotations

import numpy as np

from .geometry import ArrayLayout, LocalArray, SurfacePose, global_antenna_positions
from .pattern import PatternKind, surface_gains

GAIN_STEP = 1e-5  # rad, central difference for the amplitude term


def wavelength(carrier_hz: float, c: float = 3e8) -> float:
    """Carrier wavelength in meters.

    The default ``c = 3e8`` keeps the usual round value (0.125 m at 2.4 GHz).
    """
    if carrier_hz <= 0:
        raise ValueError("carrier frequency must be positive")
    return c / carrier_hz


def pointing_vector(phi):
    """Unit horizontal direction ``[cos phi, sin phi, 0]``; vectorized over ``phi``."""
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(phi), np.sin(phi), np.zeros_like(phi)], axis=-1)


def pointing_derivative(phi):
    phi = np.asarray(phi, dtype=float)
    return np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], axis=-1)


def steering_vector(pose: SurfacePose, local: LocalArray, phi: float, lam: float) -> np.ndarray:
    r = global_antenna_positions(pose, local)
    return np.exp(-1j * (2 * np.pi / lam) * (r @ pointing_vector(phi)))


def _amplitudes(layout: ArrayLayout, kind: PatternKind, phis) -> np.ndarray:
    """``sqrt(g)`` per (target, surface)."""
    return np.sqrt(surface_gains(kind, layout.rotation_matrices(), pointing_vector(phis)))


def _amplitude_slope(layout: ArrayLayout, kind: PatternKind, phis, base) -> np.ndarray:
    """d sqrt(g) / d phi by central differences, one-sided where the gain vanishes."""
    plus = _amplitudes(layout, kind, phis + GAIN_STEP)
    minus = _amplitudes(layout, kind, phis - GAIN_STEP)
    central = (plus - minus) / (2 * GAIN_STEP)
    forward = (plus - base) / GAIN_STEP
    backward = (base - minus) / GAIN_STEP
    slope = np.where(minus == 0.0, forward, central)
    slope = np.where(plus == 0.0, backward, slope)
    return np.where((base == 0.0) | ((plus == 0.0) & (minus == 0.0)), 0.0, slope)


def channel_terms(layout: ArrayLayout, kind: PatternKind, phis, lam: float,
                  derivative: bool = True, gain_derivative: bool = True):
    """Channel matrix ``H`` and its DoA derivative ``D``, both ``(n_antennas, K)``.

    Column ``k`` of ``H`` stacks ``sqrt(g_b) a_b(phi_k)`` over the surfaces; column
    ``k`` of ``D`` is its derivative with respect to ``phi_k``. The phase part is
    differentiated analytically, the pattern amplitude numerically.
    ``gain_derivative=False`` drops the amplitude term.
    """
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    r = layout.antenna_positions()
    owner = layout.owner
    k = 2 * np.pi / lam
    f = pointing_vector(phis)
    amp = _amplitudes(layout, kind, phis)  # (K, B)
    phase = np.exp(-1j * k * (r @ f.T))  # (M, K)
    H = amp.T[owner] * phase
    if not derivative:
        return H, None
    dphase = -1j * k * (r @ pointing_derivative(phis).T)
    D = H * dphase
    if gain_derivative:
        slope = _amplitude_slope(layout, kind, phis, amp)
        D = D + slope.T[owner] * phase
    return H, D


def channel_vector(layout: ArrayLayout, kind: PatternKind, phi: float, lam: float) -> np.ndarray:
    H, _ = channel_terms(layout, kind, [phi], lam, derivative=False)
    return H[:, 0]


def channel_matrix(layout: ArrayLayout, kind: PatternKind, phis, lam: float) -> np.ndarray:
    H, _ = channel_terms(layout, kind, phis, lam, derivative=False)
    return H


def channel_derivative(layout: ArrayLayout, kind: PatternKind, phi: float, lam: float,
                       gain_derivative: bool = True) -> np.ndarray:
    _, D = channel_terms(layout, kind, [phi], lam, gain_derivative=gain_derivative)
    return D[:, 0]


def simulate_echo(layout: ArrayLayout, kind: PatternKind, targets, probe, noise_var: float,
                  lam: float, rng_seed=None) -> np.ndarray:
    """Received monostatic echo ``H Z H^H X + N`` for a realized probe matrix ``X``."""
    X = np.asarray(probe)
    M = layout.n_antennas
    if X.ndim != 2 or X.shape[0] != M:
        raise ValueError(f"probe has shape {X.shape}, expected ({M}, L)")
    Y = np.zeros(X.shape, dtype=complex)
    if len(targets):
        phis = np.array([t.phi for t in targets])
        rho = np.array([t.rho for t in targets], dtype=complex)
        H = channel_matrix(layout, kind, phis, lam)
        Y = (H * rho) @ (H.conj().T @ X)
    if noise_var > 0:
        rng = np.random.default_rng(rng_seed)
        noise = rng.standard_normal(X.shape) + 1j * rng.standard_normal(X.shape)
        Y = Y + np.sqrt(noise_var / 2) * noise
    return Y
