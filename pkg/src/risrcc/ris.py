"""RIS aperture model: codebook synthesis, quantization, RCS and re-radiated field.

All positions handed to the functions in this module are expressed in the RIS
local frame (aperture in the xy-plane, centred on the origin, boresight +z).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import GeometryError, InvalidArgumentError
from .geometry import SPEED_OF_LIGHT, Pose, Spherical, cartesian_to_spherical, direction_from_angles

TWO_PI = 2.0 * np.pi
DEFAULT_CARRIER_HZ = 3.5e9
DEFAULT_WAVELENGTH = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ


@dataclass(frozen=True)
class RisSpec:
    """Aperture description.

    ``rows`` elements are stacked along local y and ``cols`` along local x. The
    element grid uses ``spacing``; ``aperture_x``/``aperture_y`` are the physical
    board dimensions used by the RCS model and the Fraunhofer distance. The
    defaults describe the 37 x 50 element, 570 mm x 420 mm, 4-bit board.
    """

    rows: int = 37
    cols: int = 50
    spacing: float = DEFAULT_WAVELENGTH / 8.0
    aperture_x: float = 0.57
    aperture_y: float = 0.42
    chi: float = 1.0
    bit_depth: int = 4
    pose: Pose = field(default_factory=Pose)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidArgumentError("RIS needs at least one row and one column")
        if self.spacing <= 0 or self.aperture_x <= 0 or self.aperture_y <= 0:
            raise InvalidArgumentError("spacing and aperture dimensions must be positive")
        if self.chi < 1.0:
            raise InvalidArgumentError("chi (reflection loss per area) must be >= 1")
        if self.bit_depth < 1:
            raise InvalidArgumentError("bit_depth must be >= 1")

    @property
    def area(self) -> float:
        return self.aperture_x * self.aperture_y

    @property
    def largest_dimension(self) -> float:
        return max(self.aperture_x, self.aperture_y)

    @property
    def x_coords(self) -> np.ndarray:
        return (np.arange(self.cols) - (self.cols - 1) / 2.0) * self.spacing

    @property
    def y_coords(self) -> np.ndarray:
        return (np.arange(self.rows) - (self.rows - 1) / 2.0) * self.spacing

    @property
    def element_positions(self) -> np.ndarray:
        """Local element coordinates, shape ``(rows, cols, 3)``; row index runs along y."""
        xx, yy = np.meshgrid(self.x_coords, self.y_coords)
        return np.stack([xx, yy, np.zeros_like(xx)], axis=-1)

    @classmethod
    def single_element(cls, **kw):
        return cls(rows=1, cols=1, **kw)


@dataclass(frozen=True)
class ReflectionGeometry:
    theta_i: float
    phi_i: float
    theta_r: float
    phi_r: float

    @classmethod
    def from_degrees(cls, theta_i, phi_i, theta_r, phi_r):
        return cls(*np.radians([theta_i, phi_i, theta_r, phi_r]))


@dataclass(frozen=True)
class Codebook:
    """Per-element programmed phase (radians, ``[0, 2pi)``) plus how it was made."""

    phases: np.ndarray
    regime: str = "custom"
    focal: Optional[np.ndarray] = None
    source: Optional[np.ndarray] = None
    theta_r: Optional[float] = None
    phi_r: Optional[float] = None
    bits: Optional[int] = None

    def __post_init__(self):
        p = np.mod(np.asarray(self.phases, dtype=float), TWO_PI)
        # mod can return exactly 2pi for tiny negative inputs
        p[p >= TWO_PI] = 0.0
        if p.ndim != 2:
            raise InvalidArgumentError("codebook phases must be a 2-D (rows x cols) matrix")
        if self.regime not in ("near_field", "far_field", "custom"):
            raise InvalidArgumentError(f"unknown regime {self.regime!r}")
        object.__setattr__(self, "phases", p)

    @property
    def quantized(self) -> bool:
        return self.bits is not None

    @property
    def shape(self):
        return self.phases.shape

    def reflection_coefficients(self, chi=1.0) -> np.ndarray:
        return np.exp(1j * self.phases) / np.sqrt(chi)


def _wavenumber(wavelength):
    if wavelength <= 0:
        raise InvalidArgumentError("wavelength must be positive")
    return TWO_PI / wavelength


def _front(p, what):
    p = np.asarray(p, dtype=float).reshape(3)
    if p[2] <= 0.0:
        raise GeometryError(f"{what} at {p} is not in front of the RIS (local z must be > 0)")
    return p


def nf_codebook(spec: RisSpec, bs, focal, wavelength=DEFAULT_WAVELENGTH, fresnel_term=False) -> Codebook:
    """Focusing codebook that co-phases every BS -> element -> focal-point path.

    Each element's phase cancels the exact two-hop spherical propagation phase,
    ``psi = k (|r_bs,mn| + |r_mn,focal|) mod 2pi``; with ``Gamma = exp(j psi)`` all
    terms of :func:`aperture_field` then add in phase at ``focal``.

    ``fresnel_term=True`` additionally applies the explicit quadratic (Fresnel)
    curvature term ``(k/2)(x^2 + y^2)(cos^2 th_i / d1 + cos^2 th_r / d2)``.
    The exact distances already contain that curvature, so this option
    over-compensates and is only kept for comparison studies.
    """
    k = _wavenumber(wavelength)
    bs = _front(bs, "source")
    focal = _front(focal, "focal point")
    pos = spec.element_positions
    d1 = np.linalg.norm(pos - bs, axis=-1)
    d2 = np.linalg.norm(pos - focal, axis=-1)
    psi = k * (d1 + d2)
    if fresnel_term:
        th_i = cartesian_to_spherical(bs).theta
        th_r = cartesian_to_spherical(focal).theta
        rho2 = pos[..., 0] ** 2 + pos[..., 1] ** 2
        psi = psi + 0.5 * k * rho2 * (np.cos(th_i) ** 2 / d1 + np.cos(th_r) ** 2 / d2)
    return Codebook(psi, regime="near_field", focal=focal.copy(), source=bs.copy())


def ff_codebook(spec: RisSpec, theta_r, phi_r, wavelength=DEFAULT_WAVELENGTH,
                theta_i=0.0, phi_i=0.0, oblique=False) -> Codebook:
    """Linear phase-gradient steering codebook.

    By default the incident wave is taken as a plane wave at normal incidence.
    With ``oblique=True`` the incidence direction ``(theta_i, phi_i)`` adds its own
    gradient so the phase-matched (sinc-peak) condition of :func:`rcs` is met.
    """
    if not (0.0 <= theta_r < np.pi / 2):
        raise InvalidArgumentError("theta_r must lie in [0, pi/2)")
    k = _wavenumber(wavelength)
    pos = spec.element_positions
    ux = np.sin(theta_r) * np.cos(phi_r)
    uy = np.sin(theta_r) * np.sin(phi_r)
    if oblique:
        ux += np.sin(theta_i) * np.cos(phi_i)
        uy += np.sin(theta_i) * np.sin(phi_i)
    psi = -k * (pos[..., 0] * ux + pos[..., 1] * uy)
    return Codebook(psi, regime="far_field", theta_r=float(theta_r), phi_r=float(phi_r))


def quantize_codebook(cb: Codebook, bits: int) -> Codebook:
    """Round every phase to the nearest of ``2**bits`` uniform levels; ties go to the lower level."""
    if bits < 1:
        raise InvalidArgumentError("bits must be >= 1")
    n = 2**bits
    step = TWO_PI / n
    idx = np.ceil(cb.phases / step - 0.5)
    idx = np.mod(idx, n)
    return replace(cb, phases=idx * step, bits=int(bits))


def _sinc(u):
    return np.sinc(np.asarray(u) / np.pi)


def rcs(spec: RisSpec, geom: ReflectionGeometry, wavelength) -> float:
    """Bistatic RCS of the unconfigured aperture (m^2)."""
    if wavelength <= 0:
        raise InvalidArgumentError("wavelength must be positive")
    ti, pi_, tr, pr = geom.theta_i, geom.phi_i, geom.theta_r, geom.phi_r
    peak = 4.0 * np.pi * spec.area**2 / (spec.chi * wavelength**2)
    ax = np.pi * spec.aperture_x / wavelength * (np.sin(tr) * np.cos(pr) + np.sin(ti) * np.cos(pi_))
    ay = np.pi * spec.aperture_y / wavelength * (np.sin(tr) * np.sin(pr) + np.sin(ti) * np.sin(pi_))
    return float(peak * np.cos(ti) ** 2 * np.cos(tr) ** 2 * _sinc(ax) ** 2 * _sinc(ay) ** 2)


def _hop_distances(spec, bs, obs):
    pos = spec.element_positions.reshape(-1, 3)
    bs = np.asarray(bs, dtype=float).reshape(3)
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    d1 = np.linalg.norm(pos - bs, axis=-1)
    d2 = np.linalg.norm(pos[None, :, :] - obs[:, None, :], axis=-1)
    if np.any(d1 < 1e-9) or np.any(d2 < 1e-9):
        raise GeometryError("source or observation point coincides with an RIS element")
    return d1, d2


def aperture_field(spec: RisSpec, cb: Codebook, bs, obs, wavelength=DEFAULT_WAVELENGTH):
    """Scalar Green's-function sum over all elements.

    ``obs`` may be a single point (returns a complex scalar) or an ``(n, 3)``
    array (returns ``(n,)`` complex).
    """
    k = _wavenumber(wavelength)
    single = np.ndim(obs) == 1
    d1, d2 = _hop_distances(spec, bs, obs)
    gamma = cb.reflection_coefficients(spec.chi).reshape(-1)
    terms = gamma[None, :] * np.exp(-1j * k * (d1[None, :] + d2)) / (d1[None, :] * d2)
    e = terms.sum(axis=1)
    return complex(e[0]) if single else e


def coherent_bound(spec: RisSpec, bs, obs):
    """Upper bound of ``|aperture_field|`` at ``obs``: the sum of element amplitudes."""
    single = np.ndim(obs) == 1
    d1, d2 = _hop_distances(spec, bs, obs)
    b = (1.0 / (np.sqrt(spec.chi) * d1[None, :] * d2)).sum(axis=1)
    return float(b[0]) if single else b


def pattern_factor(spec: RisSpec, cb: Codebook, bs, obs, wavelength=DEFAULT_WAVELENGTH):
    """Normalized complex re-radiation factor toward ``obs``.

    ``|F| <= 1`` with equality for a codebook perfectly focused on ``obs``. The
    carrier phase of the centre-to-centre two-hop path is removed, since channel
    taps carry it separately.
    """
    k = _wavenumber(wavelength)
    single = np.ndim(obs) == 1
    obs2 = np.atleast_2d(np.asarray(obs, dtype=float))
    e = np.atleast_1d(aperture_field(spec, cb, bs, obs2, wavelength))
    b = np.atleast_1d(coherent_bound(spec, bs, obs2))
    ref = np.linalg.norm(np.asarray(bs, dtype=float)) + np.linalg.norm(obs2, axis=-1)
    f = e / b * np.exp(1j * k * ref) * np.sqrt(spec.chi)
    return complex(f[0]) if single else f


def steered_rcs(spec: RisSpec, cb: Codebook, bs, obs, wavelength=DEFAULT_WAVELENGTH) -> float:
    """Effective RCS of a configured aperture toward ``obs``.

    Peak plate RCS and obliquity factors as in :func:`rcs`, with the sinc^2
    phase-mismatch factors replaced by the codebook's realized coherence
    ``|pattern_factor|^2`` (which reduces to the sinc^2 terms for an all-zero
    codebook in the far field).
    """
    th_i = cartesian_to_spherical(bs).theta
    th_r = cartesian_to_spherical(obs).theta
    peak = 4.0 * np.pi * spec.area**2 / (spec.chi * wavelength**2)
    f = pattern_factor(spec, cb, bs, obs, wavelength)
    return float(peak * np.cos(th_i) ** 2 * np.cos(th_r) ** 2 * abs(f) ** 2)


@dataclass(frozen=True)
class PatternResult:
    theta: np.ndarray
    phi: np.ndarray
    power_db: np.ndarray
    peak_theta: float
    peak_phi: float
    peak_gain: float

    def rows(self):
        return list(zip(self.theta, self.phi, self.power_db))


def reradiation_pattern(spec: RisSpec, cb: Codebook, bs, grid, wavelength=DEFAULT_WAVELENGTH) -> PatternResult:
    """Evaluate ``|E|^2`` over a constant-radius grid and normalize to its peak.

    ``grid`` is a sequence of :class:`Spherical` points (same radius), or a tuple
    ``(theta, phi, r)`` of arrays. ``peak_gain`` is the un-normalized peak ``|E|``.
    """
    if isinstance(grid, tuple) and len(grid) == 3 and np.ndim(grid[0]) > 0:
        theta, phi = np.asarray(grid[0], float), np.asarray(grid[1], float)
        r = np.broadcast_to(np.asarray(grid[2], float), theta.shape)
    else:
        grid = list(grid)
        if not grid:
            raise InvalidArgumentError("empty pattern grid")
        theta = np.array([g.theta for g in grid])
        phi = np.array([g.phi for g in grid])
        r = np.array([g.r for g in grid])
    if theta.size == 0:
        raise InvalidArgumentError("empty pattern grid")
    if np.min(r) < 3.0 * spec.largest_dimension:
        raise InvalidArgumentError("pattern radius must be at least 3x the largest aperture dimension")
    obs = r[:, None] * direction_from_angles(theta, phi)
    mag = np.abs(aperture_field(spec, cb, bs, obs, wavelength))
    p = mag**2
    i = int(np.argmax(p))
    with np.errstate(divide="ignore"):
        pdb = 10.0 * np.log10(p / p[i])
    return PatternResult(theta, phi, pdb, float(theta[i]), float(phi[i]), float(mag[i]))


@dataclass(frozen=True)
class MeasuredPattern:
    """Re-radiation pattern sampled on a (theta, phi) grid, e.g. loaded from CSV.

    Lookup is nearest-neighbour on the unit sphere; gains are dB relative to any
    reference, the returned factor is the linear amplitude ``10**(g/20)``.
    """

    theta: np.ndarray
    phi: np.ndarray
    gain_db: np.ndarray

    def __post_init__(self):
        from scipy.spatial import cKDTree

        object.__setattr__(self, "_tree", cKDTree(direction_from_angles(self.theta, self.phi)))

    def amplitude(self, theta, phi):
        _, idx = self._tree.query(direction_from_angles(theta, phi))
        return 10.0 ** (np.asarray(self.gain_db)[idx] / 20.0)
