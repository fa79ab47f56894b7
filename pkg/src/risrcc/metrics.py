"""Channel statistics and estimators."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import curve_fit

from .errors import EstimationError, GeometryError, InvalidArgumentError
from .propagation import fspl_at_reference

PDP_RESOLUTION = 1.25e-9
K_MIN_DB, K_MAX_DB = -20.0, 60.0
DEFAULT_THROUGHPUT_CAP_MBPS = 571.1


@dataclass(frozen=True)
class Pdp:
    delay_bins: np.ndarray
    power: np.ndarray
    resolution: float = PDP_RESOLUTION
    normalized: bool = False

    def __post_init__(self):
        p = np.asarray(self.power, dtype=float)
        if np.any(p < 0):
            raise InvalidArgumentError("PDP powers must be non-negative")
        object.__setattr__(self, "power", p)
        object.__setattr__(self, "delay_bins", np.asarray(self.delay_bins, dtype=float))

    @property
    def total(self) -> float:
        return float(self.power.sum())

    def shifted(self, delay) -> "Pdp":
        return Pdp(self.delay_bins + delay, self.power, self.resolution, self.normalized)


@dataclass(frozen=True)
class ChannelStats:
    tau_rms: float
    b_c: float
    k_hat: float
    pl_fit: Optional[tuple] = None


def pdp_from_cir(cir, resolution=PDP_RESOLUTION, t=0.0, normalize=False) -> Pdp:
    """Bin the (coherently combined) tap powers of ``cir`` at time ``t``."""
    if resolution <= 0:
        raise InvalidArgumentError("resolution must be positive")
    if cir.num_paths == 0:
        raise InvalidArgumentError("empty CIR")
    delays, _ = cir.taps_at(t)
    power = cir.tap_power(t)
    idx = np.rint(delays / resolution).astype(int)
    p = np.bincount(idx, weights=power, minlength=idx.max() + 1)
    if normalize:
        s = p.sum()
        p = p / s if s > 0 else p
    return Pdp(np.arange(len(p)) * resolution, p, resolution, normalize)


def rms_delay_spread(pdp: Pdp, floor_db: Optional[float] = 30.0) -> float:
    """Second central moment of the PDP; bins more than ``floor_db`` below the peak are ignored."""
    p = pdp.power
    if p.sum() <= 0:
        raise GeometryError("PDP has zero total power")
    if floor_db is not None:
        p = np.where(p >= p.max() * 10.0 ** (-floor_db / 10.0), p, 0.0)
    w = p / p.sum()
    tau = pdp.delay_bins
    mean = np.sum(w * tau)
    var = np.sum(w * (tau - mean) ** 2)
    return float(np.sqrt(max(var, 0.0)))


def coherence_bandwidth(tau_rms) -> float:
    """``1 / (5 tau_rms)``; ``inf`` for a zero spread."""
    if tau_rms < 0:
        raise InvalidArgumentError("delay spread must be non-negative")
    if tau_rms == 0:
        return float("inf")
    return 1.0 / (5.0 * tau_rms)


def estimate_k_factor_detail(envelope) -> tuple:
    """Moment-method Rician K (dB) and whether the upper cap was hit."""
    r = np.asarray(envelope, dtype=float)
    if r.size < 100:
        raise InvalidArgumentError("K-factor estimation needs at least 100 samples")
    if np.any(r <= 0) or not np.all(np.isfinite(r)):
        raise InvalidArgumentError("envelope samples must be positive and finite")
    p = r**2
    v = p.var() / p.mean() ** 2
    if v <= 1e-12:
        return K_MAX_DB, True
    if v >= 1.0:
        return K_MIN_DB, False
    s = np.sqrt(1.0 - v)
    k_db = 10.0 * np.log10(s / (1.0 - s))
    return float(np.clip(k_db, K_MIN_DB, K_MAX_DB)), bool(k_db >= K_MAX_DB)


def estimate_k_factor(envelope) -> float:
    return estimate_k_factor_detail(envelope)[0]


def snr(cir, link, t=0.0, coherent=True, pl_db=0.0) -> float:
    """Instantaneous SNR: ``(P_tx / eta^2) (sum_l |h_l|)^2``.

    ``|h_l|`` is the Frobenius norm of the combined 2x2 tap. ``coherent=False``
    sums tap powers instead.
    """
    if cir.num_paths == 0:
        return 0.0
    amp = np.sqrt(cir.tap_power(t))
    agg = amp.sum() ** 2 if coherent else np.sum(amp**2)
    return float(link.p_tx_mw / link.noise_var * agg * 10.0 ** (-pl_db / 10.0))


def mimo_capacity(h, snr_per_stream) -> float:
    """``log2 det(I + (snr/2) H H^H)`` in bit/s/Hz."""
    h = np.asarray(h, dtype=complex)
    if not np.all(np.isfinite(h)):
        raise InvalidArgumentError("channel matrix has non-finite entries")
    n = h.shape[-2]
    m = np.eye(n) + (snr_per_stream / 2.0) * (h @ np.conj(np.swapaxes(h, -1, -2)))
    _, logdet = np.linalg.slogdet(m)
    return logdet / np.log(2.0)


def throughput_mbps(capacity_bps_hz, bandwidth_hz, cap_mbps=DEFAULT_THROUGHPUT_CAP_MBPS):
    return np.minimum(np.asarray(capacity_bps_hz) * bandwidth_hz / 1e6, cap_mbps)


_FAMILIES = ("rayleigh", "weibull", "lognormal")


@dataclass(frozen=True)
class DistributionFit:
    family: str
    params: Dict[str, float]
    log_likelihood: float
    ks_stat: float

    def frozen(self):
        return _frozen(self.family, self.params)


def _frozen(family, params):
    if family == "rayleigh":
        return stats.rayleigh(scale=params["sigma"])
    if family == "weibull":
        return stats.weibull_min(params["shape"], scale=params["scale"])
    return stats.lognorm(params["sigma"], scale=np.exp(params["mu"]))


def fit_fading_distribution(samples, family: str) -> DistributionFit:
    """Maximum-likelihood fit (location fixed at 0) with the KS statistic."""
    if family not in _FAMILIES:
        raise InvalidArgumentError(f"unknown family {family!r}; expected one of {_FAMILIES}")
    x = np.asarray(samples, dtype=float)
    if x.size < 1000:
        raise InvalidArgumentError("distribution fitting needs at least 1000 samples")
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise InvalidArgumentError("samples must be positive and finite")
    if np.ptp(x) <= 1e-12 * np.max(x):
        raise EstimationError("samples have no spread", {"value": float(x[0])})
    if family == "rayleigh":
        params = {"sigma": float(np.sqrt(np.mean(x**2) / 2.0))}
    elif family == "weibull":
        c, _, scale = stats.weibull_min.fit(x, floc=0.0)
        params = {"shape": float(c), "scale": float(scale)}
    else:
        lx = np.log(x)
        params = {"mu": float(lx.mean()), "sigma": float(lx.std())}
    dist = _frozen(family, params)
    ll = float(np.sum(dist.logpdf(x)))
    ks = float(stats.kstest(x, dist.cdf).statistic)
    return DistributionFit(family, params, ll, ks)


def rank_families(samples, families: Sequence[str] = _FAMILIES):
    """Fits for every family, best log-likelihood first."""
    fits = [fit_fading_distribution(samples, f) for f in families]
    return sorted(fits, key=lambda f: -f.log_likelihood)


@dataclass(frozen=True)
class PleFit:
    gamma1: float
    gamma2: float
    sigma_sf: float
    offset: float = 0.0
    intercept: float = 0.0


def fit_ci_ple(points, wavelength, d0=1.0, fit_offset=False) -> PleFit:
    """Least-squares PLEs of the two-hop CI model.

    ``points`` are ``(d1, d2, pl_db)`` rows. The free-space intercept at ``d0`` is
    fixed; ``fit_offset`` adds a free constant (e.g. an unknown RIS gain term).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise InvalidArgumentError("PLE fit needs at least 3 points")
    d1, d2, pl = pts.T
    if np.any(d1 < d0) or np.any(d2 < d0):
        raise InvalidArgumentError("distances must be at least d0")
    intercept = fspl_at_reference(wavelength, d0)
    cols = [10.0 * np.log10(d1 / d0), 10.0 * np.log10(d2 / d0)]
    if fit_offset:
        cols.append(np.ones_like(d1))
    a = np.stack(cols, axis=1)
    y = pl - intercept
    if np.linalg.matrix_rank(a) < a.shape[1]:
        raise EstimationError("rank-deficient PLE design (no distance diversity)", {"rank": int(np.linalg.matrix_rank(a))})
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    dof = max(len(y) - a.shape[1], 1)
    sigma = float(np.sqrt(resid @ resid / dof))
    return PleFit(float(coef[0]), float(coef[1]), sigma, float(coef[2]) if fit_offset else 0.0, intercept)


def _decay(tau, a, b, c):
    return a * np.exp(-b * tau) + c


def fit_cluster_decay(pdp: Pdp, floor=None, max_iter=2000):
    """Fit ``a exp(-b tau) + c`` (tau in ns) to a PDP; returns ``(a, b, c)``."""
    tau = pdp.delay_bins * 1e9
    p = pdp.power
    floor = p.min() if floor is None else floor
    above = p > floor * (1 + 1e-9) + 1e-300
    if above.sum() < 5:
        raise EstimationError("fewer than 5 bins above the floor", {"bins_above": int(above.sum())})
    excess = p - p.min()
    keep = excess > 0
    slope, icpt = np.polyfit(tau[keep], np.log(excess[keep]), 1)
    scale = p.max()
    y = p / scale
    # log-linear start, plus a start anchored at the peak for spike-dominated profiles
    mean_tau = max(np.sum(tau * excess) / excess.sum() - tau[0], 1e-3)
    starts = [[np.exp(icpt) / scale, max(-slope, 1e-3), p.min() / scale],
              [excess.max() / scale, 1.0 / mean_tau, p.min() / scale]]
    best, err = None, None
    for p0 in starts:
        try:
            with np.errstate(over="ignore"):
                popt, _ = curve_fit(_decay, tau, y, p0=p0, maxfev=max_iter)
        except (RuntimeError, ValueError) as exc:
            err = exc
            continue
        sse = float(np.sum((_decay(tau, *popt) - y) ** 2))
        if np.all(np.isfinite(popt)) and (best is None or sse < best[1]):
            best = (popt, sse)
    if best is None:
        raise EstimationError(f"decay fit failed: {err}", {"starts": starts})
    popt = best[0]
    a, b, c = popt[0] * scale, popt[1], popt[2] * scale
    if not np.all(np.isfinite([a, b, c])):
        raise EstimationError("decay fit produced non-finite parameters", {"params": [a, b, c]})
    return float(a), float(b), float(c)


def select_codebook_min_ds(bank, channel: Callable, t=0.0, resolution=PDP_RESOLUTION, floor_db=30.0):
    """Index and codebook minimizing the RMS delay spread of ``channel(codebook)``.

    ``channel`` maps a codebook to its cascaded :class:`Cir`. Ties go to the
    lowest bank index.
    """
    bank = list(bank)
    if not bank:
        raise InvalidArgumentError("empty codebook bank")
    spreads = np.array([rms_delay_spread(pdp_from_cir(channel(cb), resolution, t), floor_db) for cb in bank])
    i = int(np.argmin(spreads))
    return i, bank[i], spreads
