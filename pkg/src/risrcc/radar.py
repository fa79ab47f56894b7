"""Point-target MIMO radar model, Fisher information and CRLB for 2D localization.

Elements and the target live in the radar's xy-plane (z = 0). The target
position vector is ``(x, y)``; the boresight of the default layout is +y.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GeometryError, InvalidArgumentError, SingularFIMError

RADAR_WAVELENGTH = 0.005  # 60 GHz
_COND_LIMIT = 1e12


def _planar(p):
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if p.shape[1] == 3:
        p = p[:, :2]
    if p.shape[1] != 2:
        raise InvalidArgumentError("element positions must be 2D or 3D points")
    return p


@dataclass(frozen=True)
class RadarConfig:
    tx_positions: np.ndarray
    rx_positions: np.ndarray
    wavelength: float = RADAR_WAVELENGTH
    precoder: np.ndarray = None
    s: np.ndarray = None
    noise_sigma2: float = 1.0

    def __post_init__(self):
        tx, rx = _planar(self.tx_positions), _planar(self.rx_positions)
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "rx_positions", rx)
        phi = np.eye(len(tx)) if self.precoder is None else np.asarray(self.precoder, dtype=float)
        if phi.ndim != 2 or phi.shape[0] != len(tx):
            raise InvalidArgumentError("precoder must be M_A x p")
        s = np.ones(phi.shape[1]) if self.s is None else np.asarray(self.s, dtype=float).reshape(-1)
        if len(s) != phi.shape[1]:
            raise InvalidArgumentError("s length must match the precoder columns")
        object.__setattr__(self, "precoder", phi)
        object.__setattr__(self, "s", s)
        if not self.noise_sigma2 > 0:
            raise InvalidArgumentError("noise variance must be positive")
        if not self.wavelength > 0:
            raise InvalidArgumentError("wavelength must be positive")
        if not np.all(np.isfinite(self.x)):
            raise InvalidArgumentError("transmit vector is not finite")

    @property
    def x(self) -> np.ndarray:
        return self.precoder @ self.s

    @property
    def n_rx(self) -> int:
        return len(self.rx_positions)

    def with_noise(self, sigma2) -> "RadarConfig":
        return replace(self, noise_sigma2=sigma2)

    @classmethod
    def default_layout(cls, n_tx=3, n_rx=4, wavelength=RADAR_WAVELENGTH, **kw):
        """Linear layout along x: RX at lambda/2, TX at n_rx * lambda/2 (filled virtual array)."""
        rx = (np.arange(n_rx) - (n_rx - 1) / 2) * wavelength / 2
        tx = (np.arange(n_tx) - (n_tx - 1) / 2) * n_rx * wavelength / 2
        z = np.zeros
        return cls(np.stack([tx, z(n_tx)], 1), np.stack([rx, z(n_rx)], 1), wavelength, **kw)


@dataclass(frozen=True)
class RadarTarget:
    position: np.ndarray
    rho: complex = 1.0 + 0.0j

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(-1)[:2]
        if p.shape != (2,) or not np.all(np.isfinite(p)):
            raise InvalidArgumentError("target position must be a finite (x, y) pair")
        object.__setattr__(self, "position", p)


def _dist(elems, pos):
    d = np.linalg.norm(elems - pos, axis=-1)
    if np.any(d < 1e-12):
        raise GeometryError("target coincides with an array element")
    return d


def _amplitude_at(cfg: RadarConfig, pos, rho):
    c_tx = cfg.tx_positions.mean(axis=0)
    c_rx = cfg.rx_positions.mean(axis=0)
    d_tx, d_rx = np.linalg.norm(pos - c_tx), np.linalg.norm(pos - c_rx)
    if d_tx < 1e-12 or d_rx < 1e-12:
        raise GeometryError("target coincides with an array phase centre")
    lam = cfg.wavelength
    e = np.sqrt(lam**2 / (d_tx**2 * (4 * np.pi) ** 2) * lam**2 / (d_rx**2 * (4 * np.pi) ** 2))
    return e * rho, d_tx, d_rx, c_tx, c_rx


def channel_amplitude(cfg: RadarConfig, target: RadarTarget) -> complex:
    """Path amplitude ``kappa = e * rho`` from the phase-centre distances."""
    return complex(_amplitude_at(cfg, target.position, target.rho)[0])


def mean_vector(cfg: RadarConfig, position, rho=1.0, kappa=None) -> np.ndarray:
    """Noise-free snapshot ``mu_n`` for all receivers.

    ``kappa`` freezes the amplitude; by default it follows the position.
    """
    pos = np.asarray(position, dtype=float)
    if kappa is None:
        kappa = _amplitude_at(cfg, pos, rho)[0]
    k = 2.0 * np.pi / cfg.wavelength
    d_tx = _dist(cfg.tx_positions, pos)
    d_rx = _dist(cfg.rx_positions, pos)
    tx_sum = np.sum(cfg.x * np.exp(-1j * k * d_tx))
    return kappa * tx_sum * np.exp(-1j * k * d_rx)


def received_mean(cfg: RadarConfig, target: RadarTarget, n: int) -> complex:
    if not 0 <= n < cfg.n_rx:
        raise InvalidArgumentError(f"receiver index {n} out of range 0..{cfg.n_rx - 1}")
    return complex(mean_vector(cfg, target.position, target.rho)[n])


def synth_snapshot(cfg: RadarConfig, target: RadarTarget, rng: np.random.Generator) -> np.ndarray:
    mu = mean_vector(cfg, target.position, target.rho)
    w = rng.standard_normal(cfg.n_rx) + 1j * rng.standard_normal(cfg.n_rx)
    return mu + np.sqrt(cfg.noise_sigma2 / 2.0) * w


def noise_for_snr(cfg: RadarConfig, target: RadarTarget, snr_db: float) -> float:
    """Noise variance giving the requested mean per-antenna SNR."""
    mu = mean_vector(cfg, target.position, target.rho)
    return float(np.mean(np.abs(mu) ** 2) / 10.0 ** (snr_db / 10.0))


def mean_jacobian(cfg: RadarConfig, target: RadarTarget, full_derivative=False) -> np.ndarray:
    """``d mu_n / d(x, y)``, shape ``(N_A, 2)``."""
    pos = target.position
    k = 2.0 * np.pi / cfg.wavelength
    kappa, d_tx_c, d_rx_c, c_tx, c_rx = _amplitude_at(cfg, pos, target.rho)
    d_tx = _dist(cfg.tx_positions, pos)
    d_rx = _dist(cfg.rx_positions, pos)
    u_tx = (pos - cfg.tx_positions) / d_tx[:, None]
    u_rx = (pos - cfg.rx_positions) / d_rx[:, None]
    a_tx = cfg.x * np.exp(-1j * k * d_tx)
    tx_sum = a_tx.sum()
    tx_grad = (-1j * k * a_tx[:, None] * u_tx).sum(axis=0)
    rx_ph = np.exp(-1j * k * d_rx)
    jac = kappa * (tx_grad[None, :] * rx_ph[:, None] + tx_sum * rx_ph[:, None] * (-1j * k) * u_rx)
    if full_derivative:
        dlog = -((pos - c_tx) / d_tx_c**2 + (pos - c_rx) / d_rx_c**2)
        mu = kappa * tx_sum * rx_ph
        jac = jac + mu[:, None] * dlog[None, :]
    return jac


def fim(cfg: RadarConfig, target: RadarTarget, full_derivative=False) -> np.ndarray:
    """``J_ij = (2/sigma^2) Re sum_n conj(dmu_n/dtheta_i) dmu_n/dtheta_j``."""
    jac = mean_jacobian(cfg, target, full_derivative)
    return (2.0 / cfg.noise_sigma2) * np.real(np.conj(jac).T @ jac)


def _inverse(j):
    if not np.all(np.isfinite(j)) or np.linalg.cond(j) > _COND_LIMIT:
        raise SingularFIMError("Fisher information is singular: position is not observable")
    return np.linalg.inv(j)


def crlb(cfg: RadarConfig, target: RadarTarget, full_derivative=False) -> float:
    """``tr(J^-1)`` in m^2."""
    return float(np.trace(_inverse(fim(cfg, target, full_derivative))))


def crlb_aoa(cfg: RadarConfig, target: RadarTarget, full_derivative=False) -> float:
    """Bound on the angle from the +y boresight (rad^2), by Jacobian reparameterization."""
    x, y = target.position
    g = np.array([y, -x]) / (x * x + y * y)
    return float(g @ _inverse(fim(cfg, target, full_derivative)) @ g)


def _objective(cfg, z, pts, rho, metric):
    k = 2.0 * np.pi / cfg.wavelength
    d_tx = np.linalg.norm(pts[:, None, :] - cfg.tx_positions[None], axis=-1)
    d_rx = np.linalg.norm(pts[:, None, :] - cfg.rx_positions[None], axis=-1)
    if metric == "matched":
        mu = np.sum(cfg.x * np.exp(-1j * k * d_tx), axis=1)[:, None] * np.exp(-1j * k * d_rx)
        return np.abs(mu @ np.conj(z)) ** 2 / np.maximum(np.sum(np.abs(mu) ** 2, axis=1), 1e-300)
    lam = cfg.wavelength
    d_tc = np.linalg.norm(pts - cfg.tx_positions.mean(axis=0), axis=1)
    d_rc = np.linalg.norm(pts - cfg.rx_positions.mean(axis=0), axis=1)
    kappa = rho * lam**2 / ((4 * np.pi) ** 2 * d_tc * d_rc)
    mu = kappa[:, None] * np.sum(cfg.x * np.exp(-1j * k * d_tx), axis=1)[:, None] * np.exp(-1j * k * d_rx)
    return np.real(mu @ np.conj(z)) - 0.5 * np.sum(np.abs(mu) ** 2, axis=1)


def ml_estimate_grid(cfg: RadarConfig, snapshot, search_box, resolution, rho=1.0, metric="coherent",
                     points_per_axis=41):
    """Grid maximum-likelihood position estimate with coarse-to-fine refinement.

    ``search_box = ((x_min, x_max), (y_min, y_max))``. ``metric="coherent"``
    maximizes the known-amplitude log-likelihood ``Re(z^H mu) - |mu|^2/2``;
    ``metric="matched"`` maximizes the normalized phase-blind matched filter
    ``|z^H mu|^2 / |mu|^2``.
    """
    (x0, x1), (y0, y1) = search_box
    if not (x1 >= x0 and y1 >= y0):
        raise InvalidArgumentError("empty search box")
    if resolution <= 0:
        raise InvalidArgumentError("resolution must be positive")
    if metric not in ("coherent", "matched"):
        raise InvalidArgumentError(f"unknown metric {metric!r}")
    z = np.asarray(snapshot, dtype=complex)
    n = max(int(points_per_axis), 3)
    lo, hi = np.array([x0, y0], float), np.array([x1, y1], float)
    best = (lo + hi) / 2
    while True:
        xs = np.linspace(lo[0], hi[0], n)
        ys = np.linspace(lo[1], hi[1], n)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        val = _objective(cfg, z, pts, rho, metric)
        best = pts[int(np.argmax(val))]
        step = (hi - lo) / (n - 1)
        if np.all(step <= resolution):
            return float(best[0]), float(best[1])
        # zoom on two cells around the best point, staying inside the original box
        lo = np.maximum(best - 2 * step, [x0, y0])
        hi = np.minimum(best + 2 * step, [x1, y1])
