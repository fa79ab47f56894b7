"""Large-scale link budget: close-in path loss with the RIS gain term, shadowing, receive power."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from .errors import ConfigurationError, InvalidArgumentError


@dataclass(frozen=True)
class PathLossParams:
    """Close-in (CI) model parameters for the two-hop BS-RIS-UE path.

    ``cif`` is an optional ``(f0_hz, beta)`` pair enabling the frequency-dependent
    (CIF) variant.
    """

    gamma1: float = 2.0
    gamma2: float = 2.0
    d0: float = 1.0
    sigma_sf: float = 0.0
    cif: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.d0 <= 0:
            raise InvalidArgumentError("reference distance d0 must be positive")
        if self.sigma_sf < 0:
            raise InvalidArgumentError("shadow-fading std must be non-negative")


@dataclass(frozen=True)
class LinkBudget:
    g_tx: float = 0.0  # dBi
    g_rx: float = 0.0  # dBi
    p_tx: float = 0.0  # dBm
    noise_var: float = 1.0  # linear, mW

    def __post_init__(self):
        if not self.noise_var > 0:
            raise InvalidArgumentError("noise variance must be positive")

    @property
    def p_tx_mw(self) -> float:
        return 10.0 ** (self.p_tx / 10.0)

    @classmethod
    def thermal(cls, bandwidth_hz, noise_figure_db=0.0, **kw):
        """Budget whose noise variance is kTB * NF at 290 K."""
        noise_dbm = -174.0 + 10.0 * np.log10(bandwidth_hz) + noise_figure_db
        return cls(noise_var=10.0 ** (noise_dbm / 10.0), **kw)


def db(x):
    return 10.0 * np.log10(x)


def undb(x):
    return 10.0 ** (np.asarray(x) / 10.0)


def fspl_ris_gain(link: LinkBudget, wavelength, sigma_ris, d1, d2) -> float:
    """Linear RIS 'free-space' gain term G_tx G_rx lambda^2 sigma / ((4pi)^3 (d1 d2)^2)."""
    if d1 <= 0 or d2 <= 0:
        raise InvalidArgumentError("distances must be positive")
    if sigma_ris < 0:
        raise InvalidArgumentError("RCS must be non-negative")
    g = undb(link.g_tx) * undb(link.g_rx)
    return float(g * wavelength**2 * sigma_ris / ((4.0 * np.pi) ** 3 * (d1 * d2) ** 2))


def fspl_at_reference(wavelength, d0=1.0) -> float:
    return float(20.0 * np.log10(4.0 * np.pi * d0 / wavelength))


def _slope(gamma, d, d0, scale=1.0):
    if d < d0:
        raise InvalidArgumentError(f"distance {d} m is below the reference distance {d0} m")
    return 10.0 * gamma * scale * np.log10(d / d0)


def ci_path_loss(p: PathLossParams, wavelength, d1, d2, fspl_ris_db=0.0, shadow_db=0.0) -> float:
    """CI path loss (dB) of the BS-RIS-UE path.

    ``fspl_ris_db`` is ``10 log10`` of the RIS gain term and is subtracted; a large
    gain can make the result smaller than the free-space reference, which is
    intentional (no clamping).
    """
    return float(
        fspl_at_reference(wavelength, p.d0)
        + _slope(p.gamma1, d1, p.d0)
        + _slope(p.gamma2, d2, p.d0)
        - fspl_ris_db
        + shadow_db
    )


def cif_path_loss(p: PathLossParams, f, wavelength, d1, d2, fspl_ris_db=0.0, shadow_db=0.0) -> float:
    """CI path loss with each distance slope scaled by ``1 + beta (f - f0)/f0``."""
    if p.cif is None:
        raise ConfigurationError("CIF parameters (f0, beta) are not configured")
    if f <= 0:
        raise InvalidArgumentError("frequency must be positive")
    f0, beta = p.cif
    scale = 1.0 + beta * (f - f0) / f0
    return float(
        fspl_at_reference(wavelength, p.d0)
        + _slope(p.gamma1, d1, p.d0, scale)
        + _slope(p.gamma2, d2, p.d0, scale)
        - fspl_ris_db
        + shadow_db
    )


def single_hop_path_loss(wavelength, d, gamma, d0=1.0, excess_db=0.0, shadow_db=0.0) -> float:
    """CI path loss of a single (BS-UE) link plus a fixed excess (blockage) loss."""
    return float(fspl_at_reference(wavelength, d0) + _slope(gamma, d, d0) + excess_db + shadow_db)


def sample_shadow_fading(p: PathLossParams, rng: np.random.Generator, size=None):
    if p.sigma_sf == 0.0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, p.sigma_sf, size=size)


def receive_power(cir, p_tx_dbm, pl_db, t0, t1_duration) -> float:
    """Time-averaged receive power (dBm) over ``[t0, t0 + T1]``.

    The tap-power sum is integrated with the trapezoidal rule on the CIR's own
    time grid restricted to the window (window end points are included).
    """
    if cir.num_taps == 0:
        raise InvalidArgumentError("empty CIR")
    if t1_duration <= 0:
        raise InvalidArgumentError("averaging window must be positive")
    grid = np.asarray(cir.time_grid, dtype=float)
    inside = grid[(grid > t0) & (grid < t0 + t1_duration)]
    t = np.concatenate([[t0], inside, [t0 + t1_duration]])
    power = cir.total_power(t)
    avg = trapezoid(power, t) / t1_duration if len(t) > 1 else power[0]
    return float(p_tx_dbm + 10.0 * np.log10(avg) - pl_db)
