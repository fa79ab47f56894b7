"""Geometry-based stochastic channel model.

Three legs are synthesized: the static BS-RIS line-of-sight link, the
double-bounce RIS-UE link (Rician: one LoS component plus clustered NLoS rays),
and the blocked BS-UE link (NLoS clusters only). :func:`cascade_cir` combines
them into the end-to-end channel.

A :class:`Cir` stores individual propagation paths. Paths that share a delay
form one tap and add coherently, so rays of a cluster (zero intra-cluster delay
by default) fade against each other over time.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError, InvalidArgumentError
from .geometry import (
    SPEED_OF_LIGHT,
    Pose,
    cartesian_to_spherical,
    direction_from_angles,
    unit_direction,
)
from .ris import DEFAULT_WAVELENGTH, Codebook, MeasuredPattern, RisSpec, pattern_factor

TWO_PI = 2.0 * np.pi
_LOS_FLIP = np.diag([1.0, -1.0]).astype(complex)
_DELAY_DECIMALS = 15  # delays equal to 1 fs are the same tap


@dataclass(frozen=True)
class GbsmConfig:
    """Small-scale parameters.

    ``k_r_db``, ``ds``, ``omega_tau``, ``zeta_db``, ``n_clusters`` and
    ``rays_per_cluster`` describe the RIS-UE leg; the ``*_bs_ue`` fields describe
    the blocked BS-UE leg (``None`` reuses the RIS-UE value).
    Angular spreads are in degrees.
    """

    k_r_db: float = 12.6
    ds: float = 11.5e-9
    omega_tau: float = 3.0
    zeta_db: float = 3.0
    n_clusters: int = 15
    rays_per_cluster: int = 10
    n_clusters_bs_ue: int = 19
    rays_per_cluster_bs_ue: int = 10
    ds_bs_ue: Optional[float] = 25.9e-9
    omega_tau_bs_ue: Optional[float] = None
    zeta_db_bs_ue: Optional[float] = None
    xpr_mu: float = 11.0
    xpr_sigma: float = 4.0
    ray_spread_deg: float = 5.0
    cluster_zenith_spread_deg: float = 15.0
    departure_spread_deg: float = 20.0
    intra_cluster_spread: float = 0.0
    los_delay_scaling: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("n_clusters", "rays_per_cluster", "n_clusters_bs_ue", "rays_per_cluster_bs_ue"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")
        for name in ("ds", "ds_bs_ue"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        for name in ("omega_tau", "omega_tau_bs_ue"):
            v = getattr(self, name)
            if v is not None and not v > 1:
                raise InvalidArgumentError(f"{name} must exceed 1")
        if self.xpr_sigma < 0 or self.intra_cluster_spread < 0:
            raise InvalidArgumentError("spreads must be non-negative")

    def leg(self, which: str) -> "LegParams":
        if which == "ris_ue":
            return LegParams(self.n_clusters, self.rays_per_cluster, self.ds, self.omega_tau, self.zeta_db,
                             self.k_r_db if self.los_delay_scaling else None)
        if which == "bs_ue":
            return LegParams(
                self.n_clusters_bs_ue,
                self.rays_per_cluster_bs_ue,
                self.ds if self.ds_bs_ue is None else self.ds_bs_ue,
                self.omega_tau if self.omega_tau_bs_ue is None else self.omega_tau_bs_ue,
                self.zeta_db if self.zeta_db_bs_ue is None else self.zeta_db_bs_ue,
                None,
            )
        raise InvalidArgumentError(f"unknown leg {which!r}")


@dataclass(frozen=True)
class LegParams:
    n_clusters: int
    rays: int
    ds: float
    omega_tau: float
    zeta_db: float
    los_k_db: Optional[float]  # set when the delays get the LoS scaling


def los_delay_scaling(k_db: float) -> float:
    """Delay-scaling constant for LoS links (3GPP C_tau, K in dB)."""
    return 0.7705 - 0.0433 * k_db + 0.0002 * k_db**2 + 0.000017 * k_db**3


@dataclass(frozen=True)
class ClusterSet:
    """Cluster/ray ensemble of one leg.

    Per cluster: ``delays`` (s), ``powers`` (sum 1), ``shadowing_db``. Per ray,
    shape ``(Q, I)``: arrival angles ``aoa``/``zoa`` (absolute, receiver frame),
    departure offsets ``aod``/``zod`` relative to the transmitter's LoS
    direction, intra-cluster ``ray_delays``, ``xpr`` (linear) and
    ``phases`` of shape ``(Q, I, 4)`` ordered (theta-theta, theta-phi,
    phi-theta, phi-phi).
    """

    delays: np.ndarray
    powers: np.ndarray
    shadowing_db: np.ndarray
    aoa: np.ndarray
    zoa: np.ndarray
    aod: np.ndarray
    zod: np.ndarray
    ray_delays: np.ndarray
    xpr: np.ndarray
    phases: np.ndarray

    @property
    def n_clusters(self) -> int:
        return len(self.delays)

    @property
    def rays_per_cluster(self) -> int:
        return self.aoa.shape[1]

    def doppler_dirs(self) -> np.ndarray:
        """Unit arrival vectors of every ray, shape ``(Q, I, 3)``."""
        return direction_from_angles(self.zoa, self.aoa)


def _laplace_offsets(rng, spread_rad, shape):
    if spread_rad == 0:
        return np.zeros(shape)
    return rng.laplace(0.0, spread_rad / np.sqrt(2.0), size=shape)


def generate_clusters(cfg: GbsmConfig, rng: np.random.Generator, leg: str = "ris_ue") -> ClusterSet:
    p = cfg.leg(leg)
    q, n_rays = p.n_clusters, p.rays
    u = rng.uniform(size=q)
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    tau = np.sort(-p.omega_tau * p.ds * np.log(u))
    tau -= tau[0]
    z = rng.normal(0.0, p.zeta_db, size=q)
    raw = np.exp(-tau * (p.omega_tau - 1.0) / (p.omega_tau * p.ds)) * 10.0 ** (-z / 10.0)
    powers = raw / raw.sum()
    if p.los_k_db is not None:
        tau = tau / los_delay_scaling(p.los_k_db)

    cluster_aoa = rng.uniform(0.0, TWO_PI, size=q)
    cluster_zoa = np.clip(np.pi / 2 + rng.normal(0.0, np.radians(cfg.cluster_zenith_spread_deg), size=q), 0.0, np.pi)
    dep_spread = np.radians(cfg.departure_spread_deg)
    cluster_aod = rng.normal(0.0, dep_spread, size=q)
    cluster_zod = rng.normal(0.0, dep_spread, size=q)
    shape = (q, n_rays)
    ray = np.radians(cfg.ray_spread_deg)
    aoa = np.mod(cluster_aoa[:, None] + _laplace_offsets(rng, ray, shape), TWO_PI)
    zoa = np.clip(cluster_zoa[:, None] + _laplace_offsets(rng, ray, shape), 0.0, np.pi)
    aod = cluster_aod[:, None] + _laplace_offsets(rng, ray, shape)
    zod = cluster_zod[:, None] + _laplace_offsets(rng, ray, shape)
    if cfg.intra_cluster_spread > 0:
        ray_delays = rng.uniform(0.0, cfg.intra_cluster_spread, size=shape)
    else:
        ray_delays = np.zeros(shape)
    xpr = 10.0 ** (rng.normal(cfg.xpr_mu, cfg.xpr_sigma, size=shape) / 10.0)
    phases = rng.uniform(0.0, TWO_PI, size=shape + (4,))
    return ClusterSet(tau, powers, z, aoa, zoa, aod, zod, ray_delays, xpr, phases)


@dataclass(frozen=True)
class Cir:
    """Time-variant multipath channel.

    Path ``p`` contributes ``gains[p] * exp(1j * doppler[p] * t)`` at delay
    ``delays[p]``; ``kind`` labels each path (``los``, ``nlos``, ``vlos``,
    ``nlos_ris``, ``nlos_bs_ue``).
    """

    delays: np.ndarray
    gains: np.ndarray
    doppler: np.ndarray
    time_grid: np.ndarray = field(default_factory=lambda: np.zeros(1))
    wavelength: float = DEFAULT_WAVELENGTH
    kind: Optional[np.ndarray] = None

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.delays, dtype=float))
        g = np.asarray(self.gains, dtype=complex).reshape(len(d), 2, 2)
        w = np.atleast_1d(np.asarray(self.doppler, dtype=float))
        if w.shape != d.shape:
            raise InvalidArgumentError("doppler and delays must have the same length")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(d)) and np.all(np.isfinite(w))):
            raise InvalidArgumentError("CIR contains non-finite values")
        if np.any(d < 0):
            raise InvalidArgumentError("negative path delay")
        kind = np.full(len(d), "nlos", dtype=object) if self.kind is None else np.asarray(self.kind, dtype=object)
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "doppler", w)
        object.__setattr__(self, "time_grid", np.atleast_1d(np.asarray(self.time_grid, dtype=float)))
        object.__setattr__(self, "kind", kind)

    @classmethod
    def empty(cls, time_grid=(0.0,), wavelength=DEFAULT_WAVELENGTH):
        return cls(np.zeros(0), np.zeros((0, 2, 2)), np.zeros(0), np.asarray(time_grid), wavelength)

    @classmethod
    def scalar(cls, delays, gains, doppler=None, **kw):
        """Single-polarization CIR from scalar gains (placed in the theta-theta entry)."""
        gains = np.atleast_1d(np.asarray(gains, dtype=complex))
        g = np.zeros((len(gains), 2, 2), dtype=complex)
        g[:, 0, 0] = gains
        doppler = np.zeros(len(gains)) if doppler is None else doppler
        return cls(delays, g, doppler, **kw)

    @property
    def num_paths(self) -> int:
        return len(self.delays)

    @property
    def tap_delays(self) -> np.ndarray:
        return np.unique(np.round(self.delays, _DELAY_DECIMALS))

    @property
    def num_taps(self) -> int:
        return len(self.tap_delays)

    def select(self, mask) -> "Cir":
        mask = np.asarray(mask, dtype=bool)
        return Cir(self.delays[mask], self.gains[mask], self.doppler[mask], self.time_grid, self.wavelength,
                   self.kind[mask])

    def gains_at(self, t) -> np.ndarray:
        """Path gains at time(s) ``t``; shape ``(P, 2, 2)`` or ``(T, P, 2, 2)``."""
        t = np.asarray(t, dtype=float)
        rot = np.exp(1j * np.multiply.outer(t, self.doppler))
        return rot[..., None, None] * self.gains

    def taps_at(self, t):
        """Coherently combined taps: ``(tap_delays, (..., L, 2, 2))``."""
        keys = np.round(self.delays, _DELAY_DECIMALS)
        uniq, inv = np.unique(keys, return_inverse=True)
        g = np.moveaxis(self.gains_at(t), -3, 0)
        out = np.zeros((len(uniq),) + g.shape[1:], dtype=complex)
        np.add.at(out, inv, g)
        return uniq, np.moveaxis(out, 0, -3)

    def tap_power(self, t) -> np.ndarray:
        """Frobenius tap powers ``|h_l(t)|^2``, shape ``(L,)`` or ``(T, L)``."""
        _, taps = self.taps_at(t)
        return np.sum(np.abs(taps) ** 2, axis=(-2, -1))

    def total_power(self, t) -> np.ndarray:
        return self.tap_power(t).sum(axis=-1)

    def path_power(self) -> np.ndarray:
        return np.sum(np.abs(self.gains) ** 2, axis=(-2, -1))

    def frequency_response(self, freqs, t=0.0) -> np.ndarray:
        """``H(f) = sum_p G_p(t) exp(-j 2 pi f tau_p)``, shape ``(F, 2, 2)`` (baseband offsets)."""
        freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
        g = self.gains_at(t)
        ph = np.exp(-1j * TWO_PI * np.multiply.outer(freqs, self.delays))
        return np.einsum("fp,pij->fij", ph, g)

    def scaled(self, factor) -> "Cir":
        return replace(self, gains=self.gains * factor)


@dataclass(frozen=True)
class AntennaPattern:
    """Port field pattern ``(theta, phi) -> (F_theta, F_phi)`` in the device frame.

    ``kind``: ``isotropic`` (unit amplitude), ``horn`` (``cos^q`` main lobe along
    +z whose directivity equals ``gain_dbi``), or ``file`` (a
    :class:`MeasuredPattern`). ``dual_pol`` enables the phi port; otherwise
    ``F_phi = 0``.
    """

    kind: str = "isotropic"
    gain_dbi: float = 0.0
    dual_pol: bool = False
    measured: Optional[MeasuredPattern] = None

    def __post_init__(self):
        if self.kind not in ("isotropic", "horn", "file"):
            raise InvalidArgumentError(f"unknown pattern kind {self.kind!r}")
        if self.kind == "file" and self.measured is None:
            raise ConfigurationError("file pattern requires measured data")
        if self.kind == "horn" and 10.0 ** (self.gain_dbi / 10.0) <= 2.0:
            raise InvalidArgumentError("horn gain must exceed 3 dBi")

    @property
    def horn_exponent(self) -> float:
        # amplitude cos^q over the front hemisphere has directivity 2(2q + 1)
        return (10.0 ** (self.gain_dbi / 10.0) / 2.0 - 1.0) / 2.0

    def amplitude(self, theta, phi) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.kind == "isotropic":
            return np.ones_like(theta)
        if self.kind == "horn":
            c = np.clip(np.cos(theta), 0.0, None)
            return np.sqrt(10.0 ** (self.gain_dbi / 10.0)) * c**self.horn_exponent
        return np.asarray(self.measured.amplitude(theta, phi), dtype=float)

    def field(self, theta, phi):
        a = self.amplitude(theta, phi)
        return a.astype(complex), (a if self.dual_pol else np.zeros_like(a)).astype(complex)

    def port_matrix(self, theta, phi) -> np.ndarray:
        """``diag(F_theta, F_phi)`` with shape ``(..., 2, 2)``."""
        ft, fp = self.field(theta, phi)
        m = np.zeros(np.shape(ft) + (2, 2), dtype=complex)
        m[..., 0, 0] = ft
        m[..., 1, 1] = fp
        return m


ISOTROPIC = AntennaPattern()


def _local_angles(pose: Pose, direction_world):
    d = np.asarray(direction_world, dtype=float) @ pose.orientation
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    theta = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(d[..., 1], d[..., 0]), TWO_PI)
    return theta, phi


@dataclass(frozen=True)
class IsotropicReradiation:
    """RIS treated as an isotropic, unit-amplitude re-radiator."""

    def factor(self, obs_local) -> np.ndarray:
        return np.ones(np.atleast_2d(obs_local).shape[0], dtype=complex)


@dataclass(frozen=True)
class CodebookReradiation:
    """RIS factor computed from the aperture sum for the configured codebook.

    ``source_local`` is the BS position in the RIS frame.
    """

    spec: RisSpec
    codebook: Optional[Codebook]
    source_local: np.ndarray
    wavelength: float = DEFAULT_WAVELENGTH

    def factor(self, obs_local) -> np.ndarray:
        if self.codebook is None:
            raise ConfigurationError("RIS-UE channel needs a codebook")
        obs = np.atleast_2d(np.asarray(obs_local, dtype=float)).copy()
        # rays leaving toward the back half-space are evaluated at the grazing edge
        obs[:, 2] = np.maximum(obs[:, 2], 1e-3 * np.linalg.norm(obs, axis=-1))
        return np.atleast_1d(pattern_factor(self.spec, self.codebook, self.source_local, obs, self.wavelength))


@dataclass(frozen=True)
class MeasuredReradiation:
    pattern: MeasuredPattern

    def factor(self, obs_local) -> np.ndarray:
        obs = np.atleast_2d(np.asarray(obs_local, dtype=float))
        s = [cartesian_to_spherical(o) for o in obs]
        return self.pattern.amplitude([x.theta for x in s], [x.phi for x in s]).astype(complex)


def _as_time_grid(time_grid):
    return np.atleast_1d(np.asarray(time_grid if time_grid is not None else (0.0,), dtype=float))


def bs_ris_cir(bs_pose: Pose, ris_pose: Pose, bs_pattern: AntennaPattern = ISOTROPIC,
               bs_element=(0.0, 0.0, 0.0), wavelength=DEFAULT_WAVELENGTH, time_grid=None) -> Cir:
    """Static LoS link from one BS antenna element to the RIS centre.

    ``bs_element`` is the element offset in world coordinates relative to the BS
    origin. The RIS arrival pattern is isotropic on both polarizations; the
    re-radiation toward the UE is applied in the RIS-UE leg.
    """
    r_s = np.asarray(bs_element, dtype=float)
    d = float(np.linalg.norm(ris_pose.origin - bs_pose.origin))
    r_hat = unit_direction(bs_pose.origin, ris_pose.origin)
    th, ph = _local_angles(bs_pose, r_hat)
    f_bs = bs_pattern.port_matrix(th, ph)
    carrier = np.exp(-1j * TWO_PI * d / wavelength)
    array = np.exp(1j * TWO_PI * (r_hat @ r_s) / wavelength)
    g = np.eye(2, dtype=complex) @ _LOS_FLIP @ f_bs * carrier * array
    return Cir(np.array([d / SPEED_OF_LIGHT]), g[None], np.zeros(1), _as_time_grid(time_grid), wavelength,
               np.array(["los"], dtype=object))


def _ray_matrices(clusters: ClusterSet) -> np.ndarray:
    """Per-ray 2x2 polarization coupling, shape ``(Q, I, 2, 2)``."""
    ph = np.exp(1j * clusters.phases)
    cross = np.sqrt(1.0 / clusters.xpr)
    m = np.empty(clusters.aoa.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = ph[..., 0]
    m[..., 0, 1] = cross * ph[..., 1]
    m[..., 1, 0] = cross * ph[..., 2]
    m[..., 1, 1] = ph[..., 3]
    return m


def _departure_dirs(los_dir, clusters: ClusterSet) -> np.ndarray:
    s = cartesian_to_spherical(los_dir)
    zod = s.theta + clusters.zod
    aod = s.phi + clusters.aod
    # fold zenith back into [0, pi]
    aod = np.where(zod < 0, aod + np.pi, aod)
    zod = np.abs(zod)
    aod = np.where(zod > np.pi, aod + np.pi, aod)
    zod = np.where(zod > np.pi, TWO_PI - zod, zod)
    return direction_from_angles(zod, aod)


def _nlos_paths(clusters, ref_delay, weight, rx_pattern, rx_pose, tx_port, rx_element, velocity, wavelength,
                displacement=(0.0, 0.0, 0.0)):
    """Shared NLoS ray synthesis. ``tx_port`` has shape ``(Q, I, 2, 2)``."""
    q, n = clusters.aoa.shape
    arr = clusters.doppler_dirs()
    th, ph = _local_angles(rx_pose, arr)
    f_rx = rx_pattern.port_matrix(th, ph)
    amp = np.sqrt(clusters.powers / n)[:, None] * weight
    shift = np.asarray(rx_element, dtype=float) + np.asarray(displacement, dtype=float)
    array = np.exp(1j * TWO_PI * (arr @ shift) / wavelength)
    g = f_rx @ _ray_matrices(clusters) @ tx_port
    g = g * (amp * array)[..., None, None]
    delays = ref_delay + clusters.delays[:, None] + clusters.ray_delays
    doppler = TWO_PI * (arr @ np.asarray(velocity, dtype=float)) / wavelength
    return delays.reshape(-1), g.reshape(q * n, 2, 2), doppler.reshape(-1)


def ris_ue_cir(ris_pose: Pose, ue_pose: Pose, clusters: ClusterSet, k_r_db: float, reradiation,
               ue_pattern: AntennaPattern = ISOTROPIC, ue_velocity=(0.0, 0.0, 0.0), ue_element=(0.0, 0.0, 0.0),
               wavelength=DEFAULT_WAVELENGTH, time_grid=None, displacement=(0.0, 0.0, 0.0)) -> Cir:
    """Rician RIS-UE leg: LoS component plus clustered NLoS rays.

    ``reradiation`` supplies the RIS factor toward an observation point in the
    RIS frame (:class:`CodebookReradiation`, :class:`IsotropicReradiation` or
    :class:`MeasuredReradiation`). NLoS rays leave the RIS around the LoS
    direction and are evaluated at the UE distance. ``displacement`` is the UE
    offset from where the cluster set was drawn: NLoS ray phases advance by
    ``r_hat . displacement`` while the LoS term follows the actual geometry.
    """
    if reradiation is None:
        raise ConfigurationError("RIS-UE channel needs a codebook or a re-radiation model")
    k = 10.0 ** (k_r_db / 10.0)
    w_los, w_nlos = np.sqrt(k / (k + 1.0)), np.sqrt(1.0 / (k + 1.0))
    v = np.asarray(ue_velocity, dtype=float)
    d = float(np.linalg.norm(ue_pose.origin - ris_pose.origin))
    tau_los = d / SPEED_OF_LIGHT

    # LoS
    dep_world = unit_direction(ris_pose.origin, ue_pose.origin)
    arr_world = -dep_world
    f_ris_los = complex(reradiation.factor(ris_pose.to_local(ue_pose.origin))[0])
    th, ph = _local_angles(ue_pose, arr_world)
    f_ue = ue_pattern.port_matrix(th, ph)
    carrier = np.exp(-1j * TWO_PI * d / wavelength)
    array = np.exp(1j * TWO_PI * (arr_world @ np.asarray(ue_element, dtype=float)) / wavelength)
    g_los = w_los * (f_ue @ _LOS_FLIP) * f_ris_los * carrier * array
    dop_los = TWO_PI * (arr_world @ v) / wavelength

    # NLoS: departure directions in the RIS frame around the local LoS direction
    dep_local = dep_world @ ris_pose.orientation
    dirs = _departure_dirs(dep_local, clusters)
    f_ris = reradiation.factor(d * dirs.reshape(-1, 3)).reshape(dirs.shape[:-1])
    tx_port = f_ris[..., None, None] * np.eye(2)
    nd, ng, nw = _nlos_paths(clusters, tau_los, w_nlos, ue_pattern, ue_pose, tx_port, ue_element, v, wavelength,
                             displacement)

    delays = np.concatenate([[tau_los], nd])
    gains = np.concatenate([g_los[None], ng])
    doppler = np.concatenate([[dop_los], nw])
    kind = np.array(["los"] + ["nlos"] * len(nd), dtype=object)
    return Cir(delays, gains, doppler, _as_time_grid(time_grid), wavelength, kind)


def bs_ue_cir(bs_pose: Pose, ue_pose: Pose, clusters: ClusterSet, bs_pattern: AntennaPattern = ISOTROPIC,
              ue_pattern: AntennaPattern = ISOTROPIC, ue_velocity=(0.0, 0.0, 0.0), bs_element=(0.0, 0.0, 0.0),
              ue_element=(0.0, 0.0, 0.0), wavelength=DEFAULT_WAVELENGTH, time_grid=None, weight=1.0,
              displacement=(0.0, 0.0, 0.0)) -> Cir:
    """Blocked BS-UE leg: NLoS clusters only, delays referenced to the direct distance."""
    d = float(np.linalg.norm(ue_pose.origin - bs_pose.origin))
    dirs = _departure_dirs(unit_direction(bs_pose.origin, ue_pose.origin), clusters)
    th, ph = _local_angles(bs_pose, dirs)
    array_bs = np.exp(1j * TWO_PI * (dirs @ np.asarray(bs_element, dtype=float)) / wavelength)
    tx_port = bs_pattern.port_matrix(th, ph) * array_bs[..., None, None]
    delays, gains, doppler = _nlos_paths(clusters, d / SPEED_OF_LIGHT, weight, ue_pattern, ue_pose, tx_port,
                                         ue_element, ue_velocity, wavelength, displacement)
    kind = np.full(len(delays), "nlos_bs_ue", dtype=object)
    return Cir(delays, gains, doppler, _as_time_grid(time_grid), wavelength, kind)


def cascade_cir(bs_ris: Cir, ris_ue: Cir, bs_ue: Optional[Cir] = None, bs_ue_weight: float = 1.0) -> Cir:
    """Delay-domain convolution of the two RIS legs plus the direct NLoS leg.

    Path gains multiply as ``G_ris_ue @ G_bs_ris`` so the LoS polarization flip
    of both legs cancels on the virtual LoS path.
    """
    legs = [bs_ris, ris_ue] + ([bs_ue] if bs_ue is not None else [])
    lam = legs[0].wavelength
    if any(not np.isclose(c.wavelength, lam, rtol=1e-12, atol=0.0) for c in legs):
        raise ConfigurationError("CIR legs use different carrier wavelengths")
    grid = legs[0].time_grid
    if any(c.time_grid.shape != grid.shape or not np.allclose(c.time_grid, grid) for c in legs):
        raise ConfigurationError("CIR legs use different time grids")
    delays = np.add.outer(bs_ris.delays, ris_ue.delays).T.reshape(-1)
    gains = np.einsum("bij,ajk->baik", ris_ue.gains, bs_ris.gains).reshape(-1, 2, 2)
    doppler = np.add.outer(bs_ris.doppler, ris_ue.doppler).T.reshape(-1)
    both_los = np.logical_and.outer(ris_ue.kind == "los", bs_ris.kind == "los").reshape(-1)
    kind = np.where(both_los, "vlos", "nlos_ris").astype(object)
    if bs_ue is not None and bs_ue.num_paths:
        delays = np.concatenate([delays, bs_ue.delays])
        gains = np.concatenate([gains, bs_ue.gains * bs_ue_weight])
        doppler = np.concatenate([doppler, bs_ue.doppler])
        kind = np.concatenate([kind, np.full(bs_ue.num_paths, "nlos_bs_ue", dtype=object)])
    return Cir(delays, gains, doppler, grid, lam, kind)


def rician_envelope(k_db: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-power Rician envelope samples (reference generator for estimator tests)."""
    k = 10.0 ** (k_db / 10.0)
    los = np.sqrt(k / (k + 1.0))
    s = np.sqrt(1.0 / (2.0 * (k + 1.0)))
    return np.abs(los + s * (rng.standard_normal(n) + 1j * rng.standard_normal(n)))
