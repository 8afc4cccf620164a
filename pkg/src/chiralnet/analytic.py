"""Closed-form amplitudes and concurrences in the single-excitation sector.

Amplitudes obey (jump terms dropped, ``kd`` the propagation phase)::

    dc_eg/dt = -gbar c_eg - gamma_L e^{ikd} c_ge - i(Omega/2) c_gg
    dc_ge/dt = -gbar c_ge - gamma_R e^{ikd} c_eg
    dc_gg/dt = -i(Omega/2) c_eg

The sign of the drive coupling drops out of every concurrence below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRootsError


def _sinhc(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-5
    safe = np.where(small, 1.0, z)
    return np.where(small, 1 + z * z / 6, np.sinh(safe) / safe)


def analytic_undriven_amplitudes(gamma_L: float, gamma_R: float, kd: float, t):
    """(c_eg, c_ge) starting from |eg>.

    Written as ``c_ge = -gamma_R e^{ikd} t e^{-gbar t} sinh(z)/z`` with
    ``z = sqrt(gamma_L gamma_R) e^{ikd} t``, which stays finite as
    ``gamma_L -> 0``; that limit is also handled explicitly.
    """
    t = np.asarray(t, dtype=float)
    gbar = 0.5 * (gamma_L + gamma_R)
    envelope = np.exp(-gbar * t)
    phase = np.exp(1j * kd)
    if gamma_L == 0:
        c_eg = envelope.astype(complex)
        c_ge = -gamma_R * phase * t * envelope
        return c_eg, c_ge
    z = np.sqrt(gamma_L * gamma_R) * phase * t
    return envelope * np.cosh(z), -gamma_R * phase * t * envelope * _sinhc(z)


def analytic_concurrence_undriven(gamma_L: float, gamma_R: float, kd: float, t):
    c_eg, c_ge = analytic_undriven_amplitudes(gamma_L, gamma_R, kd, t)
    return 2 * np.abs(c_eg * np.conj(c_ge))


def printed_concurrence_undriven(gamma_L, gamma_R, kd, t, prefactor: float = 1.0):
    """Literature closed form ``prefactor e^{-2 gbar t} sqrt(gR/gL) sqrt(sinh^2 a1 t + sin^2 a2 t)``.

    Kept only as a cross-check; ``prefactor=1`` agrees with the amplitude
    product, ``prefactor=2`` does not.
    """
    t = np.asarray(t, dtype=float)
    gbar = 0.5 * (gamma_L + gamma_R)
    root = 2 * np.sqrt(gamma_L * gamma_R)
    a1, a2 = root * np.cos(kd), root * np.sin(kd)
    body = np.sqrt(np.sinh(a1 * t) ** 2 + np.sin(a2 * t) ** 2)
    return prefactor * np.exp(-2 * gbar * t) * np.sqrt(gamma_R / gamma_L) * body


def analytic_me_coherences_undriven(gamma_L: float, gamma_R: float, kd: float, t):
    """Real and imaginary parts of ``Z = e^{-ikd} rho_{eg,ge}`` from the full master equation.

    Uses the signed rates ``a1 = 2 sqrt(gL gR) cos kd``, ``a2 = 2 sqrt(gL gR) sin kd``.
    The concurrence is ``2|Z| = 2 sqrt(Z1^2 + Z2^2)``.
    """
    t = np.asarray(t, dtype=float)
    gbar = 0.5 * (gamma_L + gamma_R)
    root = 2 * np.sqrt(gamma_L * gamma_R)
    a1, a2 = root * np.cos(kd), root * np.sin(kd)
    pref = np.sqrt(gamma_R / (4 * gamma_L)) * np.exp(-2 * gbar * t)
    sh, sn = np.sinh(a1 * t), np.sin(a2 * t)
    z1 = -pref * (np.cos(kd) * sh - np.sin(kd) * sn)
    z2 = pref * (np.sin(kd) * sh + np.cos(kd) * sn)
    return z1, z2


def analytic_single_driven_chiral(omega: float, gamma_R: float, t, kd: float = 0.0):
    """Perfectly chiral pair, emitter 1 driven at ``omega``, start |eg>.

    Returns ``(c_eg, c_ge, concurrence)``. ``b`` takes its complex branch
    when the drive exceeds ``gbar``.
    """
    t = np.asarray(t, dtype=float)
    gbar = 0.5 * gamma_R
    a = 0.5 * gbar
    if omega == 0:
        c_eg, c_ge = analytic_undriven_amplitudes(0.0, gamma_R, kd, t)
        return c_eg, c_ge, 2 * np.abs(c_eg * np.conj(c_ge))
    b = np.sqrt(complex(a * a - 0.25 * omega * omega))
    bt = b * t
    c_eg = np.exp(-a * t) * (np.cosh(bt) - a * t * _sinhc(bt))
    # shape = t sinhc(bt) + (8a/W^2) F with F = cosh bt - e^{-at} - a sinh(bt)/b = O(W^2)
    h = -0.25 * omega * omega / (a + b)  # b - a without cancellation
    if abs(h) < 0.5 * a:
        half_sum, half_gap = 0.5 * (a + b) * t, 0.5 * h * t
        f = 2 * np.sinh(half_sum) * np.sinh(half_gap)
        f = f - (2 * a * np.cosh(half_sum) * np.sinh(half_gap) - h * np.sinh(a * t)) / b
    else:
        f = np.cosh(bt) - np.exp(-a * t) - a * t * _sinhc(bt)
    shape = t * _sinhc(bt) + 8 * a / omega**2 * f
    c_ge = -gamma_R * np.exp(1j * kd - a * t) * shape
    return c_eg, c_ge, 2 * np.abs(c_eg * np.conj(c_ge))


@dataclass(frozen=True)
class TorreyRoots:
    """Perturbed roots ``s_i + A(s_i) Omega^2`` of the weak-drive determinant."""

    s0: complex
    s1: complex
    s2: complex
    a_coeffs: tuple[complex, complex, complex]
    omega: float = 0.0

    @property
    def roots(self) -> tuple[complex, complex, complex]:
        return self.s0, self.s1, self.s2


def weak_drive_determinant(s, gamma_L, gamma_R, omega, kd: float = 0.0):
    """``s((s+gbar)^2 - e^{2ikd} gL gR) + (Omega^2/4)(s+gbar)`` for one driven emitter."""
    gbar = 0.5 * (gamma_L + gamma_R)
    r2 = np.exp(2j * kd) * gamma_L * gamma_R
    return s * ((s + gbar) ** 2 - r2) + 0.25 * omega**2 * (s + gbar)


def torrey_roots_weak_driving(gamma_L: float, gamma_R: float, omega: float, kd: float = 0.0) -> TorreyRoots:
    """First-order (in Omega^2) roots; the Omega^4 correction is dropped.

    With ``r = sqrt(gL gR) e^{ikd}`` the bare roots are ``0, -gbar +- r`` and
    ``A(s) = -(s + gbar) / (4 P'(s))`` with ``P(s) = s((s+gbar)^2 - r^2)``.
    At ``kd = 0`` this reproduces ``-gbar/(gL-gR)^2``, ``1/(4(sqrt gL - sqrt gR)^2)``
    and ``1/(4(sqrt gL + sqrt gR)^2)``.
    """
    if gamma_L <= 0 or gamma_R <= 0:
        raise DegenerateRootsError(
            "A(s1), A(s2) are singular when gamma_L * gamma_R = 0", coefficient="A(s1)/A(s2)"
        )
    if np.isclose(gamma_L, gamma_R, rtol=1e-12, atol=0):
        raise DegenerateRootsError("A(s0) is singular when gamma_L == gamma_R", coefficient="A(s0)")
    gbar = 0.5 * (gamma_L + gamma_R)
    r = np.sqrt(gamma_L * gamma_R) * np.exp(1j * kd)
    bare = (0j, -gbar + r, -gbar - r)
    names = ("A(s0)", "A(s1)", "A(s2)")
    coeffs = []
    for s, name in zip(bare, names):
        slope = (s + gbar) ** 2 + 2 * s * (s + gbar) - r * r
        if abs(slope) < 1e-14:
            raise DegenerateRootsError(f"{name} has a vanishing denominator", coefficient=name)
        coeffs.append(-(s + gbar) / (4 * slope))
    shifted = tuple(s + a * omega**2 for s, a in zip(bare, coeffs))
    return TorreyRoots(*shifted, a_coeffs=tuple(coeffs), omega=omega)


def _residue_sum(numerator, roots, t):
    """Inverse Laplace transform of ``numerator(s) / prod(s - roots)``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for i, s in enumerate(roots):
        denom = np.prod([s - o for j, o in enumerate(roots) if j != i])
        out = out + numerator(s) / denom * np.exp(s * t)
    return out


def analytic_weak_driving_amplitudes(roots: TorreyRoots, gamma_L: float, gamma_R: float, kd: float, t):
    """(c_eg, c_ge) from the three-exponential inverse Laplace transform.

    ``c_eg(s) = s(s+gbar)/D(s)`` and ``c_ge(s) = -gamma_R e^{ikd} s/D(s)``.
    """
    rs = roots.roots
    gaps = [abs(rs[i] - rs[j]) for i in range(3) for j in range(i + 1, 3)]
    if min(gaps) < 1e-12:
        raise DegenerateRootsError("coincident roots", roots=[complex(r) for r in rs])
    gbar = 0.5 * (gamma_L + gamma_R)
    c_eg = _residue_sum(lambda s: s * (s + gbar), rs, t)
    c_ge = -gamma_R * np.exp(1j * kd) * _residue_sum(lambda s: s, rs, t)
    return c_eg, c_ge
