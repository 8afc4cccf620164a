"""Spin-chain reservoir: magnon propagator, lattice integrals and TCL kernels.

Each emitter couples to two chain sites (the feet of a flux-threaded
plaquette) with amplitudes ``g e^{-i phi}`` (left foot) and ``g e^{+i phi}``
(right foot). Geometry of a pair at separation ``d``::

    emitter 1        emitter 2
     L    R           L    R
     x----x---- ... --x----x        d = x_2L - x_1R + 1
     0    1           d   d+1       (d = 1: the two plaquettes share site 1)

The vacuum correlator of the coupling operators is built from
``G_n(t) = e^{-i Delta t} (-i)^|n| J_|n|(2 J t)`` and every kernel reduces to
the lattice integral ``I_n(t; w) = (-i)^m int_0^t e^{-i w s} J_m(2 J s) ds``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import jv

from .errors import BandEdgeError, ParameterError, QuadratureError

_NODES, _WEIGHTS = leggauss(16)
_EDGE_TOL = 1e-12
SIDES = ("L", "R")
_SIDE_SIGN = {"L": -1, "R": +1}


@dataclass(frozen=True)
class SpinChainBathParams:
    """Chain hopping, bath detuning and the two plaquette couplings."""

    hopping: float = 1.0
    detuning: float = 0.0
    g_1: float = 0.14
    g_2: float = 0.30
    phi_1: float = math.pi / 4
    phi_2: float = math.pi / 4
    coupling_points: tuple[tuple[int, int], tuple[int, int]] = ((0, 1), (1, 2))

    def __post_init__(self):
        pts = tuple(tuple(int(x) for x in p) for p in self.coupling_points)
        object.__setattr__(self, "coupling_points", pts)
        if not self.hopping > 0:
            raise ParameterError("hopping must be positive", hopping=self.hopping)
        if self.g_1 < 0 or self.g_2 < 0:
            raise ParameterError("couplings must be non-negative", g_1=self.g_1, g_2=self.g_2)
        (a, b), (c, e) = pts
        if not a < b <= c < e:
            raise ParameterError("coupling points must satisfy x1L < x1R <= x2L < x2R", coupling_points=pts)

    @classmethod
    def from_separation(cls, d: int, **kwargs) -> "SpinChainBathParams":
        if d < 1:
            raise ParameterError("separation must be at least 1", d=d)
        return cls(coupling_points=((0, 1), (d, d + 1)), **kwargs)

    @property
    def separation(self) -> int:
        return self.coupling_points[1][0] - self.coupling_points[0][1] + 1

    def coupling(self, emitter: int, side: str) -> complex:
        g = (self.g_1, self.g_2)[emitter]
        phi = (self.phi_1, self.phi_2)[emitter]
        return g * np.exp(1j * _SIDE_SIGN[side] * phi)

    def site(self, emitter: int, side: str) -> int:
        return self.coupling_points[emitter][SIDES.index(side)]

    def replace(self, **changes) -> "SpinChainBathParams":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return SpinChainBathParams(**fields)


def magnon_propagator(d: int, t, params: SpinChainBathParams):
    """Single-magnon amplitude to hop ``d`` sites in time ``t``."""
    t = np.asarray(t, dtype=float)
    m = abs(int(d))
    value = np.exp(-1j * params.detuning * t) * (-1j) ** m * jv(m, 2 * params.hopping * t)
    return complex(value) if value.ndim == 0 else value


def _panel_width(omega: float, hopping: float) -> float:
    return math.pi / (4 * max(abs(omega), 2 * hopping))


def _panels(a: float, b: float, width: float) -> tuple[np.ndarray, np.ndarray]:
    count = max(1, math.ceil((b - a) / width - 1e-12))
    edges = np.linspace(a, b, count + 1)
    return edges[:-1], edges[1:]


def _gauss_sum(m: int, omega: float, hopping: float, lo, hi) -> np.ndarray:
    """Per-panel 16-point Gauss-Legendre integrals of ``e^{-i w s} J_m(2Js)``."""
    half = 0.5 * (hi - lo)
    s = (0.5 * (hi + lo))[:, None] + half[:, None] * _NODES
    vals = np.exp(-1j * omega * s) * jv(m, 2 * hopping * s)
    return half * (vals @ _WEIGHTS)


def lattice_integral(n: int, omega: float, t: float, hopping: float = 1.0, rtol: float = 1e-8) -> complex:
    """``I_n(t; w)`` by panel Gauss-Legendre quadrature with a halving check.

    The panel width resolves the faster of the drive phase and the Bessel
    oscillation; the result is accepted once halving every panel changes it
    by less than ``rtol`` (relative), refining up to six times otherwise.
    """
    if t < 0:
        raise ParameterError("t must be non-negative", t=t)
    m = abs(int(n))
    if t == 0:
        return 0j
    width = _panel_width(omega, hopping)
    coarse = _gauss_sum(m, omega, hopping, *_panels(0.0, t, width)).sum()
    for _ in range(6):
        width /= 2
        fine = _gauss_sum(m, omega, hopping, *_panels(0.0, t, width)).sum()
        err = abs(fine - coarse)
        if err <= rtol * abs(fine) + 1e-15 * t:
            return complex((-1j) ** m * fine)
        coarse = fine
    raise QuadratureError("lattice integral did not converge", n=n, omega=omega, t=t, achieved=err / abs(fine))


def lattice_integral_grid(n: int, omega: float, times, hopping: float = 1.0) -> np.ndarray:
    """Cumulative ``I_n`` on a sorted grid starting at ``t = 0``.

    Each grid interval is split into panels no wider than the single-point
    panel width, so values agree with :func:`lattice_integral`.
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0 or np.any(np.diff(times) <= 0):
        raise ParameterError("grid must start at 0 and increase strictly")
    m = abs(int(n))
    width = _panel_width(omega, hopping)
    gaps = np.diff(times)
    per = np.maximum(1, np.ceil(gaps / width - 1e-12).astype(int))
    owner = np.repeat(np.arange(len(gaps)), per)
    offset = np.arange(owner.size) - np.repeat(np.cumsum(per) - per, per)
    step = gaps[owner] / per[owner]
    lo = times[owner] + offset * step
    pieces = _gauss_sum(m, omega, hopping, lo, lo + step)
    per_gap = np.bincount(owner, pieces.real, len(gaps)) + 1j * np.bincount(owner, pieces.imag, len(gaps))
    return (-1j) ** m * np.concatenate([[0j], np.cumsum(per_gap)])


@dataclass(frozen=True)
class AsymptoticRegime:
    """Long-time behaviour of ``I_n(t; w)``.

    ``value`` is the finite limit (None at the band edge, where the integral
    grows like ``edge_coefficient * sqrt(t)``).
    """

    regime: str
    value: complex | None
    q: float | None = None
    kappa: float | None = None
    edge_coefficient: complex | None = None


def lattice_integral_asymptotic(n: int, omega: float, hopping: float = 1.0) -> AsymptoticRegime:
    m = abs(int(n))
    band = 2 * hopping
    if omega == 0:
        return AsymptoticRegime("band_center", (-1j) ** m / band, q=math.pi / 2)
    if abs(abs(omega) - band) <= _EDGE_TOL * band:
        phase = (-1) ** m * np.exp(-0.25j * math.pi) if omega > 0 else np.exp(0.25j * math.pi)
        return AsymptoticRegime("band_edge", None, edge_coefficient=complex(phase / math.sqrt(math.pi * hopping)))
    if abs(omega) < band:
        q = math.acos(-omega / band)
        return AsymptoticRegime("inside_band", complex(np.exp(-1j * m * q) / math.sqrt(band**2 - omega**2)), q=q)
    kappa = math.acosh(abs(omega) / band)
    lam = math.sqrt(omega**2 - band**2)
    value = (-1j * (-1) ** m if omega > 0 else 1j) * math.exp(-m * kappa) / lam
    return AsymptoticRegime("outside_band", complex(value), kappa=kappa)


def _pairs(i: int, j: int, params: SpinChainBathParams):
    """(weight, distance) for the four foot-to-foot contributions of ``Gamma_ij``."""
    for a in SIDES:
        for b in SIDES:
            weight = params.coupling(i, a) * np.conj(params.coupling(j, b))
            yield weight, params.site(i, a) - params.site(j, b)


@dataclass(frozen=True)
class KernelValue:
    value: complex
    t: float
    omega: float
    pair: tuple[int, int]


def tcl_kernel(i: int, j: int, t: float, omega: float, params: SpinChainBathParams) -> KernelValue:
    """Time-dependent kernel ``Gamma_ij(t; w)`` (emitters indexed from 0)."""
    total = 0j
    for weight, n in _pairs(i, j, params):
        if weight != 0:
            total += weight * lattice_integral(n, omega + params.detuning, t, params.hopping)
    return KernelValue(complex(total), float(t), float(omega), (i, j))


def tcl_kernel_series(i: int, j: int, omega: float, times, params: SpinChainBathParams) -> np.ndarray:
    """``Gamma_ij`` on a whole grid starting at 0; one cumulative sweep per distance."""
    by_distance: dict[int, complex] = {}
    for weight, n in _pairs(i, j, params):
        by_distance[abs(n)] = by_distance.get(abs(n), 0) + weight
    out = np.zeros(len(times), dtype=complex)
    for m, weight in by_distance.items():
        if weight != 0:
            out += weight * lattice_integral_grid(m, omega + params.detuning, times, params.hopping)
    return out


def _check_off_edge(omega: float, hopping: float) -> None:
    if abs(abs(omega) - 2 * hopping) <= 1e-9 * hopping:
        raise BandEdgeError("Redfield limit diverges at the band edge", omega=omega, hopping=hopping)


def principal_value(func, pole: float, a: float, b: float, panels: int = 64) -> float:
    """``PV int_a^b func(x)/(x - pole) dx`` for smooth real ``func``.

    Uses the subtraction ``int (f(x) - f(p))/(x - p) + f(p) log((b-p)/(p-a))``
    with the quadrature split at the pole.
    """
    if not a < pole < b:
        lo, hi = _panels(a, b, (b - a) / panels)
        x = (0.5 * (hi + lo))[:, None] + (0.5 * (hi - lo))[:, None] * _NODES
        return float(np.sum(0.5 * (hi - lo) * ((func(x) / (x - pole)) @ _WEIGHTS)))
    fp = func(np.array(pole))
    total = fp * math.log((b - pole) / (pole - a))
    for lo_end, hi_end in ((a, pole), (pole, b)):
        lo, hi = _panels(lo_end, hi_end, (b - a) / panels)
        x = (0.5 * (hi + lo))[:, None] + (0.5 * (hi - lo))[:, None] * _NODES
        total += np.sum(0.5 * (hi - lo) * (((func(x) - fp) / (x - pole)) @ _WEIGHTS))
    return float(total)


def _shift_integral(m: int, omega: float, hopping: float) -> float:
    """``PV int dk/2pi cos(mk) / (w + 2J cos k)`` over the Brillouin zone."""
    if abs(omega) > 2 * hopping:
        lo, hi = _panels(0.0, math.pi, math.pi / 64)
        k = (0.5 * (hi + lo))[:, None] + (0.5 * (hi - lo))[:, None] * _NODES
        vals = np.cos(m * k) / (omega + 2 * hopping * np.cos(k))
        return float(np.sum(0.5 * (hi - lo) * (vals @ _WEIGHTS))) / math.pi
    q = math.acos(-omega / (2 * hopping))

    def regular(k):
        # (k - q) / (w + 2J cos k) with the removable zero at k = q cancelled
        half = 0.5 * (k - q)
        ratio = np.where(np.abs(half) < 1e-12, 1.0, half / np.sin(np.where(half == 0, 1.0, half)))
        return -np.cos(m * k) * ratio / (2 * hopping * np.sin(0.5 * (k + q)))

    # even integrand: the zone integral is twice the [0, pi] half
    return principal_value(regular, q, 0.0, math.pi) / math.pi


def _on_shell(m: int, omega: float, hopping: float) -> float:
    """Resonant (delta-function) half-rate of one lattice distance."""
    if abs(omega) >= 2 * hopping:
        return 0.0
    q = math.acos(-omega / (2 * hopping))
    # two roots k = +-q, each weighted by 1/|d eps/dk|
    return 0.5 * sum(math.cos(m * k) / abs(2 * hopping * math.sin(k)) for k in (q, -q))


@dataclass(frozen=True)
class RedfieldKernel:
    """``Gamma^R = on_shell + 1j * dispersive``; ``on_shell`` is half the decay matrix."""

    on_shell: complex
    dispersive: complex

    @property
    def value(self) -> complex:
        return self.on_shell + 1j * self.dispersive


def redfield_kernel(i: int, j: int, omega: float, params: SpinChainBathParams) -> RedfieldKernel:
    w = omega + params.detuning
    _check_off_edge(w, params.hopping)
    on_shell = 0j
    for weight, n in _pairs(i, j, params):
        on_shell += weight * _on_shell(abs(n), w, params.hopping)
    return RedfieldKernel(complex(on_shell), dispersive_shift(i, j, omega, params))


def dispersive_shift(i: int, j: int, omega: float, params: SpinChainBathParams) -> complex:
    """Coherent exchange ``J_ij(w)`` from the principal-value part of the kernel."""
    w = omega + params.detuning
    _check_off_edge(w, params.hopping)
    total = 0j
    for weight, n in _pairs(i, j, params):
        total -= weight * _shift_integral(abs(n), w, params.hopping)
    return complex(total)


def redfield_kernel_closed_form(i: int, j: int, omega: float, params: SpinChainBathParams) -> complex:
    """Same limit assembled from the regime formulas of :func:`lattice_integral_asymptotic`."""
    w = omega + params.detuning
    _check_off_edge(w, params.hopping)
    return complex(
        sum(weight * lattice_integral_asymptotic(n, w, params.hopping).value for weight, n in _pairs(i, j, params))
    )


def delay_phase(omega_1: float, d: int, hopping: float = 1.0) -> float:
    """Mid-band estimate of the drive phase accumulated over the propagation delay."""
    return omega_1 * d / hopping


def decay_rate(g: float, hopping: float = 1.0) -> float:
    """Total mid-band emission rate of a fully chiral plaquette."""
    return 2 * g * g / hopping


@dataclass
class KernelCache:
    """Kernels tabulated on a uniform grid and linearly interpolated.

    Built once per set of frequencies; read-only afterwards.
    """

    params: SpinChainBathParams
    times: np.ndarray
    tables: dict[tuple[int, int, float], np.ndarray] = field(default_factory=dict)

    @classmethod
    def build(cls, params: SpinChainBathParams, keys, t_max: float, spacing: float) -> "KernelCache":
        n = int(round(t_max / spacing))
        times = spacing * np.arange(n + 1)
        cache = cls(params, times)
        for key in keys:
            cache.add(*key)
        return cache

    def add(self, i: int, j: int, omega: float) -> np.ndarray:
        key = (i, j, float(omega))
        if key not in self.tables:
            self.tables[key] = tcl_kernel_series(i, j, omega, self.times, self.params)
        return self.tables[key]

    @property
    def spacing(self) -> float:
        return float(self.times[1] - self.times[0])

    def at_index(self, i: int, j: int, omega: float, k: int) -> complex:
        return self.tables[(i, j, float(omega))][k]

    def value(self, i: int, j: int, omega: float, t: float) -> complex:
        if not 0 <= t <= self.times[-1] + 1e-12:
            raise ParameterError("time outside the kernel grid", t=t, t_max=float(self.times[-1]))
        table = self.tables[(i, j, float(omega))]
        return complex(np.interp(t, self.times, table.real) + 1j * np.interp(t, self.times, table.imag))

    def halving_error(self, i: int, j: int, omega: float, t_max: float | None = None) -> float:
        """Max gap between linear interpolation and exact values at grid midpoints."""
        stop = self.times[-1] if t_max is None else t_max
        coarse = self.times[self.times <= stop + 1e-12]
        fine = np.linspace(0.0, coarse[-1], 2 * (len(coarse) - 1) + 1)
        exact = tcl_kernel_series(i, j, omega, fine, self.params)
        table = self.tables[(i, j, float(omega))][: len(coarse)]
        mid = fine[1::2]
        interp = np.interp(mid, coarse, table.real) + 1j * np.interp(mid, coarse, table.imag)
        return float(np.max(np.abs(interp - exact[1::2]), initial=0.0))
