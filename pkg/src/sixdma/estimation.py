"""Fisher information and Cramer-Rao bounds for multi-target DoA estimation.

The echo model is ``Y = G(phi) X + N`` with the two-way channel
``G = H diag(rho) H^H``. With the reflection coefficients known, the FIM of the
DoA vector is the deterministic-mean Gaussian FIM

    F_ij = (2 L / sigma^2) Re tr( dG/dphi_i  S_X  (dG/dphi_j)^H ),

where ``dG/dphi_k = rho_k (hdot_k h_k^H + h_k hdot_k^H)`` and
``S_X = X X^H / L``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import channel_terms
from .geometry import ArrayLayout
from .pattern import PatternKind

CONDITION_LIMIT = 1e12
SENTINEL_CRB = 1e12  # rad^2, reported for unidentifiable geometries


class SingularFisherError(np.linalg.LinAlgError):
    """The FIM is singular or too ill-conditioned to invert."""

    def __init__(self, condition: float):
        super().__init__(f"Fisher information is singular (condition number {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True)
class ProbeSignal:
    """Sensing waveform summary.

    ``matrix`` is the realized ``NB x L`` probe, or ``None`` when only the ideal
    covariance ``(P / NB) I`` is used.
    """

    matrix: Optional[np.ndarray]
    snapshots: int
    power: float
    covariance: np.ndarray

    @property
    def dims(self) -> int:
        return self.covariance.shape[0]

    def scaled(self, power: float) -> "ProbeSignal":
        """Same waveform shape at a different total transmit power."""
        ratio = power / self.power
        matrix = None if self.matrix is None else self.matrix * np.sqrt(ratio)
        return ProbeSignal(matrix, self.snapshots, power, self.covariance * ratio)


@dataclass(frozen=True)
class CrbReport:
    total: float
    per_target: np.ndarray
    power_gain: np.ndarray
    geometric_gain: np.ndarray
    identifiable: bool = True
    condition: float = 1.0


def fim_from_channels(H, D, rho, S, snapshots: int, noise_var: float) -> np.ndarray:
    """FIM from stacked channels ``H``, derivatives ``D`` (both ``M x K``) and ``S_X``.

    Expands ``tr(Gdot_i S Gdot_j^H)`` into Gram matrices so the cost is
    ``O(M^2 K)`` instead of forming every ``M x M`` derivative.
    """
    H = np.asarray(H, dtype=complex)
    D = np.asarray(D, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    SH, SD = S @ H, S @ D
    Hc, Dc = H.conj().T, D.conj().T
    T = ((Hc @ SH) * (Dc @ D).T + (Hc @ SD) * (Hc @ D).T
         + (Dc @ SH) * (Dc @ H).T + (Dc @ SD) * (Hc @ H).T)
    F = (2.0 * snapshots / noise_var) * np.real(np.outer(rho, rho.conj()) * T)
    return 0.5 * (F + F.T)


def fisher_information(layout: ArrayLayout, kind: PatternKind, targets, probe: ProbeSignal,
                       noise_var: float, lam: float, gain_derivative: bool = True) -> np.ndarray:
    phis = np.array([t.phi for t in targets], dtype=float)
    rho = np.array([t.rho for t in targets], dtype=complex)
    H, D = channel_terms(layout, kind, phis, lam, gain_derivative=gain_derivative)
    return fim_from_channels(H, D, rho, probe.covariance, probe.snapshots, noise_var)


def _equilibrate(F: np.ndarray):
    """Split ``F = D C D`` with ``D = diag(sqrt(F_kk))`` and unit-diagonal ``C``."""
    d = np.sqrt(np.clip(np.diag(F), 0.0, None))
    if np.any(d == 0.0):
        return d, None
    return d, F / np.outer(d, d)


def condition_number(F) -> float:
    """Condition number of the equilibrated FIM (``inf`` if not positive definite).

    Equilibration removes pure per-target scale differences (e.g. path loss),
    which do not affect identifiability.
    """
    F = np.asarray(F, dtype=float)
    _, C = _equilibrate(F)
    if C is None:
        return np.inf
    eig = np.linalg.eigvalsh(C)
    if eig[0] <= 0:
        return np.inf
    return float(eig[-1] / eig[0])


def _inverse_diagonal(F) -> np.ndarray:
    """Diagonal of ``F^-1`` via a Cholesky factor of the equilibrated FIM."""
    F = np.asarray(F, dtype=float)
    cond = condition_number(F)
    if not cond < CONDITION_LIMIT:
        raise SingularFisherError(cond)
    d, C = _equilibrate(F)
    try:
        chol = np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        raise SingularFisherError(cond) from None
    Linv = np.linalg.solve(chol, np.eye(F.shape[0]))
    return np.sum(Linv * Linv, axis=0) / d ** 2


def crb_total(F) -> float:
    """``tr(F^-1)``. Raises :class:`SingularFisherError` when ``F`` is not invertible."""
    return float(np.sum(_inverse_diagonal(F)))


def crb_per_target(F) -> np.ndarray:
    """Diagonal of ``F^-1``."""
    return _inverse_diagonal(F)


def crb_trace_form(h, hdot, S, rho, snapshots: int, noise_var: float) -> float:
    """Single-target CRB written with ``A = h h^H`` and trace products.

    Coincides with the FIM route whenever the cross term ``tr(Adot^H A S)``
    vanishes (centered single surface with constant gain and white ``S``).
    """
    h = np.asarray(h, dtype=complex).reshape(-1, 1)
    hdot = np.asarray(hdot, dtype=complex).reshape(-1, 1)
    A = h @ h.conj().T
    Ad = hdot @ h.conj().T + h @ hdot.conj().T
    t_aa = np.real(np.trace(A.conj().T @ A @ S))
    t_dd = np.real(np.trace(Ad.conj().T @ Ad @ S))
    t_da = np.trace(Ad.conj().T @ A @ S)
    den = 2 * abs(rho) ** 2 * snapshots * (t_dd * t_aa - abs(t_da) ** 2)
    return float(noise_var * t_aa / den)


def _crb_diagonal(H, D, rho, probe: ProbeSignal, noise_var: float):
    """Per-target CRB and FIM condition number, with the probe power factored out.

    The FIM is linear in ``S_X``, so it is built for ``S_X / p`` (``p`` the mean
    per-antenna power) and the inverse is divided by ``p`` afterwards. This keeps
    the bound exactly proportional to ``1/P`` even for ill-conditioned FIMs.
    """
    p = float(np.real(np.trace(probe.covariance))) / probe.dims
    F = fim_from_channels(H, D, rho, probe.covariance / p, probe.snapshots, noise_var)
    return _inverse_diagonal(F) / p, F


def crb_from_channels(H, D, rho, probe: ProbeSignal, noise_var: float) -> float:
    """Total CRB from channel terms, or the sentinel if unidentifiable."""
    try:
        return float(np.sum(_crb_diagonal(H, D, rho, probe, noise_var)[0]))
    except SingularFisherError:
        return SENTINEL_CRB


def gain_decomposition(layout: ArrayLayout, kind: PatternKind, targets, probe: ProbeSignal,
                       lam: float, gain_derivative: bool = True):
    """Per-target power gain ``||h^H X||^2`` and geometric gain ``||hdot||``.

    The power gain is computed as ``L h^H S_X h``, which equals ``||h^H X||^2``
    for a realized probe and stays defined for the ideal covariance.
    """
    phis = np.array([t.phi for t in targets], dtype=float)
    if phis.size == 0:
        return np.zeros(0), np.zeros(0)
    H, D = channel_terms(layout, kind, phis, lam, gain_derivative=gain_derivative)
    power = probe.snapshots * np.real(np.einsum("mk,mn,nk->k", H.conj(), probe.covariance, H))
    geometric = np.linalg.norm(D, axis=0)
    return power, geometric


def crb_closed_form_single(layout: ArrayLayout, kind: PatternKind, target, probe: ProbeSignal,
                           noise_var: float, lam: float, printed: bool = False,
                           gain_derivative: bool = True) -> float:
    """Closed-form CRB of one target seen by one surface centered at the origin.

    With ``h^H hdot = 0`` the bound reduces to

        sigma^2 / (2 |rho|^2) / (||hdot||^2 ||h^H X||^2 + ||h||^2 ||hdot^H X||^2),

    which for a white probe covariance is ``sigma^2 / (4 |rho|^2 P_g G_g^2)``
    with power gain ``P_g`` and geometric gain ``G_g``. ``printed=True``
    instead evaluates ``sigma^2 / (2 |rho|^2 L) / (P_g G_g)`` (first power of
    the geometric gain, no factor 2), kept for comparison.
    """
    if layout.n_surfaces != 1:
        raise ValueError("closed form needs exactly one surface")
    if np.linalg.norm(layout.positions[0]) > 1e-12:
        raise ValueError("closed form needs the surface centered at the reference point")
    if np.linalg.norm(layout.offsets[0].mean(axis=0)) > 1e-12:
        raise ValueError("closed form needs antenna offsets centered on the surface")
    H, D = channel_terms(layout, kind, [target.phi], lam, gain_derivative=gain_derivative)
    h, hd = H[:, 0], D[:, 0]
    cross = abs(np.vdot(h, hd))
    if cross > 1e-9 * max(np.linalg.norm(h) * np.linalg.norm(hd), 1e-300):
        warnings.warn("h^H hdot is not zero here; the closed form is approximate", stacklevel=2)
    L = probe.snapshots
    S = probe.covariance
    power = L * np.real(np.vdot(h, S @ h))
    geometric = np.linalg.norm(hd)
    scale = noise_var / (2 * abs(target.rho) ** 2)
    if printed:
        return float(scale / (L * power * geometric))
    dpower = L * np.real(np.vdot(hd, S @ hd))
    return float(scale / (geometric ** 2 * power + np.vdot(h, h).real * dpower))


def crb_report(layout: ArrayLayout, kind: PatternKind, targets, probe: ProbeSignal,
               noise_var: float, lam: float, gain_derivative: bool = True) -> CrbReport:
    """Total and per-target CRB plus the gain decomposition.

    Unidentifiable geometries do not raise: the report carries
    ``identifiable=False`` and the sentinel value for every bound.
    """
    phis = np.array([t.phi for t in targets], dtype=float)
    rho = np.array([t.rho for t in targets], dtype=complex)
    H, D = channel_terms(layout, kind, phis, lam, gain_derivative=gain_derivative)
    power = probe.snapshots * np.real(np.einsum("mk,mn,nk->k", H.conj(), probe.covariance, H))
    geometric = np.linalg.norm(D, axis=0)
    try:
        per, F = _crb_diagonal(H, D, rho, probe, noise_var)
    except SingularFisherError as err:
        K = len(phis)
        return CrbReport(SENTINEL_CRB, np.full(K, SENTINEL_CRB), power, geometric,
                         identifiable=False, condition=err.condition)
    return CrbReport(float(per.sum()), per, power, geometric, True, condition_number(F))


def crb_or_sentinel(F) -> float:
    try:
        return crb_total(F)
    except SingularFisherError:
        return SENTINEL_CRB
