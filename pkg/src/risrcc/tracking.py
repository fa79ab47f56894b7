"""Radar-driven user tracking: point-cloud filtering, DBSCAN, Kalman tracking and codebook-index selection.

The radar is co-located with the RIS and reports points in the RIS frame, so
the tracked zenith angle of the cluster centroid is directly the reflection
angle used to index the codebook bank.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidArgumentError, NumericalError
from .geometry import Trajectory

NOISE = -1
JITTER_UNIFORM = (0.027, 0.297)
JITTER_DEFAULT = (0.027, 0.227)
GRID_START_DEG, GRID_STEP_DEG, GRID_SIZE = 5.0, 5.0, 12


@dataclass(frozen=True)
class RadarPoint:
    x: float
    y: float
    z: float
    azimuth: float
    snr: float
    velocity: float


@dataclass(frozen=True)
class Frame:
    """One radar frame; per-point arrays ``xyz (n, 3)``, ``azimuth``, ``snr`` (dB), ``velocity`` (m/s)."""

    timestamp: float
    xyz: np.ndarray
    azimuth: np.ndarray
    snr: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=float).reshape(-1, 3)
        n = len(xyz)
        object.__setattr__(self, "xyz", xyz)
        for name in ("azimuth", "snr", "velocity"):
            a = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if len(a) != n:
                raise InvalidArgumentError(f"{name} has {len(a)} entries for {n} points")
            object.__setattr__(self, name, a)
        if not (np.all(np.isfinite(xyz)) and np.all(np.isfinite(self.snr)) and np.all(np.isfinite(self.velocity))):
            raise InvalidArgumentError("frame contains non-finite values")

    @classmethod
    def from_points(cls, timestamp, points: Sequence[RadarPoint]):
        pts = list(points)
        return cls(timestamp, [(p.x, p.y, p.z) for p in pts], [p.azimuth for p in pts], [p.snr for p in pts],
                   [p.velocity for p in pts])

    @property
    def points(self) -> List[RadarPoint]:
        return [RadarPoint(*map(float, (*self.xyz[i], self.azimuth[i], self.snr[i], self.velocity[i])))
                for i in range(len(self))]

    def __len__(self):
        return len(self.xyz)

    def subset(self, mask) -> "Frame":
        m = np.asarray(mask, dtype=bool)
        return Frame(self.timestamp, self.xyz[m], self.azimuth[m], self.snr[m], self.velocity[m])

    @classmethod
    def concat(cls, frames: Sequence["Frame"]) -> "Frame":
        frames = list(frames)
        return cls(frames[-1].timestamp, np.concatenate([f.xyz for f in frames]),
                   np.concatenate([f.azimuth for f in frames]), np.concatenate([f.snr for f in frames]),
                   np.concatenate([f.velocity for f in frames]))


@dataclass(frozen=True)
class TrackerConfig:
    """Tracking-loop parameters.

    ``q`` and ``r`` are the per-coordinate (theta, phi, r) process-noise
    intensities and measurement variances; angles in radians.
    """

    snr_min: float = 10.0
    eps: float = 0.3
    min_pts: int = 5
    agg_frames: int = 3
    confirm_frames: int = 3
    q: Tuple[float, float, float] = (1e-3, 1e-3, 1e-2)
    r: Tuple[float, float, float] = (1e-4, 1e-3, 4e-4)
    init_rate_var: Tuple[float, float, float] = (0.01, 0.01, 0.04)
    dt_nominal: float = 0.127
    static_velocity: float = 0.05
    background_suppression: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidArgumentError("eps must be positive")
        if self.min_pts < 1 or self.confirm_frames < 1 or self.agg_frames < 1:
            raise InvalidArgumentError("min_pts, agg_frames and confirm_frames must be >= 1")
        if any(v < 0 for v in self.q) or any(v < 0 for v in self.r):
            raise InvalidArgumentError("noise parameters must be non-negative")
        if not self.dt_nominal > 0:
            raise InvalidArgumentError("dt_nominal must be positive")


def synth_point_cloud(truth: Trajectory, cfg: TrackerConfig, clutter_rate=2.0, noise_std=0.05,
                      rng: Optional[np.random.Generator] = None, points_mean=12.0, jitter=JITTER_DEFAULT,
                      micro_doppler_std=0.3, target_snr_db=(15.0, 25.0), clutter_snr_db=(0.0, 8.0),
                      clutter_extent=4.0, duration=None) -> List[Frame]:
    """Synthetic radar stream following ``truth``.

    Each frame holds ``Poisson(points_mean)`` target points with Gaussian
    position noise and a radial velocity plus micro-Doppler spread, and
    ``Poisson(clutter_rate)`` static low-SNR clutter points uniform in a cube of
    side ``clutter_extent`` in front of the radar. Frame periods are uniform in
    ``jitter`` (seconds).
    """
    rng = np.random.default_rng() if rng is None else rng
    lo, hi = jitter
    if not 0 < lo <= hi:
        raise InvalidArgumentError("invalid jitter range")
    t_end = truth.times[-1] if duration is None else truth.times[0] + duration
    frames = []
    t = float(truth.times[0])
    while t <= t_end:
        p = truth.position(t)
        v = truth.velocity(t)
        n = rng.poisson(points_mean)
        pts = p + noise_std * rng.standard_normal((n, 3))
        rn = np.linalg.norm(p)
        radial = float(v @ p / rn) if rn > 0 else 0.0
        vel = radial + micro_doppler_std * rng.standard_normal(n)
        snr = rng.uniform(*target_snr_db, size=n)
        m = rng.poisson(clutter_rate) if clutter_rate > 0 else 0
        c = rng.uniform(-clutter_extent / 2, clutter_extent / 2, size=(m, 3))
        c[:, 2] = np.abs(c[:, 2])
        xyz = np.concatenate([pts, c])
        frames.append(Frame(t, xyz, np.arctan2(xyz[:, 1], xyz[:, 0]),
                            np.concatenate([snr, rng.uniform(*clutter_snr_db, size=m)]),
                            np.concatenate([vel, np.zeros(m)])))
        t += float(rng.uniform(lo, hi))
    return frames


def filter_points(frame: Frame, cfg: TrackerConfig) -> Frame:
    keep = frame.snr >= cfg.snr_min
    if cfg.background_suppression:
        keep &= np.abs(frame.velocity) >= cfg.static_velocity
    return frame.subset(keep)


def dbscan(points, eps, min_pts) -> np.ndarray:
    """Density-based clustering; ``min_pts`` counts the point itself.

    Points are visited in index order and clusters grow breadth-first, so a
    border point reachable from two clusters joins the first. Labels are
    ``0, 1, ...`` in order of first appearance, ``-1`` for noise.
    """
    if not eps > 0:
        raise InvalidArgumentError("eps must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 3) if np.size(points) else np.zeros((0, 3))
    n = len(pts)
    labels = np.full(n, NOISE, dtype=int)
    if n == 0:
        return labels
    tree = cKDTree(pts)
    neigh = [np.sort(np.asarray(nb, dtype=int)) for nb in tree.query_ball_point(pts, eps)]
    core = np.array([len(nb) >= min_pts for nb in neigh])
    cluster = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            j = queue.popleft()
            if not core[j]:
                continue
            for k in neigh[j]:
                if labels[k] == NOISE:
                    labels[k] = cluster
                    queue.append(k)
        cluster += 1
    return labels


def select_cluster(labels, frame: Frame, static_velocity=0.05) -> Optional[np.ndarray]:
    """Mask of the largest moving cluster (ties: higher mean SNR), or ``None``."""
    labels = np.asarray(labels)
    best, best_key = None, None
    for c in np.unique(labels[labels >= 0]):
        m = labels == c
        if np.mean(np.abs(frame.velocity[m])) <= static_velocity:
            continue
        key = (int(m.sum()), float(np.mean(frame.snr[m])))
        if best_key is None or key > best_key:
            best, best_key = m, key
    return best


def centroid_measurement(xyz) -> np.ndarray:
    """``(theta, phi, r)`` of the centroid of ``xyz``."""
    c = np.mean(np.asarray(xyz, dtype=float), axis=0)
    r = float(np.linalg.norm(c))
    if r == 0.0:
        raise InvalidArgumentError("cluster centroid at the radar origin")
    return np.array([np.arccos(np.clip(c[2] / r, -1.0, 1.0)), np.mod(np.arctan2(c[1], c[0]), 2 * np.pi), r])


# Per-coordinate constant-velocity filter

def cv_predict(x, p, dt, q):
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    f = np.array([[1.0, dt], [0.0, 1.0]])
    qm = q * np.array([[dt**3 / 3.0, dt**2 / 2.0], [dt**2 / 2.0, dt]])
    return f @ x, f @ p @ f.T + qm


def cv_update(x, p, z, r, innovation=None):
    """Joseph-form measurement update with ``H = [1, 0]``."""
    h = np.array([1.0, 0.0])
    s = float(h @ p @ h + r)
    if not s > 0:
        raise NumericalError("innovation variance is not positive")
    k = p @ h / s
    y = z - x[0] if innovation is None else innovation
    x_new = x + k * y
    a = np.eye(2) - np.outer(k, h)
    p_new = a @ p @ a.T + r * np.outer(k, k)
    p_new = 0.5 * (p_new + p_new.T)
    if np.min(np.linalg.eigvalsh(p_new)) < -1e-12 * max(1.0, np.abs(p_new).max()):
        raise NumericalError("covariance lost positive semi-definiteness")
    return x_new, p_new


@dataclass(frozen=True)
class TrackState:
    """Tracker state; ``x[c] = (value, rate)`` and ``p[c]`` for c in (theta, phi, r)."""

    x: np.ndarray = field(default_factory=lambda: np.zeros((3, 2)))
    p: np.ndarray = field(default_factory=lambda: np.tile(np.eye(2), (3, 1, 1)))
    last_update: Optional[float] = None
    initialized: bool = False
    confirmed_index: Optional[int] = None
    candidate_index: Optional[int] = None
    confirm_count: int = 0

    @property
    def position(self) -> np.ndarray:
        return self.x[:, 0].copy()

    @property
    def rates(self) -> np.ndarray:
        return self.x[:, 1].copy()


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def kalman_init(z, cfg: TrackerConfig, t=None) -> TrackState:
    z = np.asarray(z, dtype=float)
    x = np.stack([z, np.zeros(3)], axis=1)
    p = np.array([np.diag([cfg.r[c], cfg.init_rate_var[c]]) for c in range(3)])
    return TrackState(x, p, t, True)


def kalman_step(state: TrackState, measurement, dt, cfg: TrackerConfig, t=None) -> TrackState:
    """Predict every coordinate over ``dt``; update those with a measurement (coast otherwise)."""
    x = np.empty((3, 2))
    p = np.empty((3, 2, 2))
    for c in range(3):
        x[c], p[c] = cv_predict(state.x[c], state.p[c], dt, cfg.q[c])
        if measurement is not None:
            innov = measurement[c] - x[c, 0]
            if c == 1:
                innov = _wrap(innov)
            x[c], p[c] = cv_update(x[c], p[c], measurement[c], cfg.r[c], innovation=innov)
    x[1, 0] = np.mod(x[1, 0], 2 * np.pi)
    last = t if measurement is not None else state.last_update
    return replace(state, x=x, p=p, last_update=last, initialized=True)


def aoa_to_index(theta) -> int:
    """Nearest 5-degree grid index (0..11) after clamping to [5, 60] degrees."""
    deg = np.clip(np.degrees(theta), GRID_START_DEG, GRID_START_DEG + GRID_STEP_DEG * (GRID_SIZE - 1))
    return int(np.floor((deg - GRID_START_DEG) / GRID_STEP_DEG + 0.5))


def index_to_angle(index) -> float:
    return float(np.radians(GRID_START_DEG + GRID_STEP_DEG * index))


@dataclass(frozen=True)
class TrackStep:
    timestamp: float
    state: TrackState
    index: Optional[int]
    updated: bool
    measured: bool


def run_tracking_loop(frames: Iterable[Frame], cfg: TrackerConfig, bank: Optional[Sequence] = None) -> Iterator[TrackStep]:
    """Process frames in order and yield one :class:`TrackStep` per frame.

    ``updated`` is set when the mapped index has been the same for
    ``confirm_frames`` consecutive frames and differs from the stored one.
    """
    if bank is not None and len(bank) != GRID_SIZE:
        raise InvalidArgumentError(f"codebook bank must have {GRID_SIZE} entries")
    buf = deque(maxlen=cfg.agg_frames)
    state = TrackState()
    t_prev = None
    for frame in frames:
        t = float(frame.timestamp)
        if t_prev is not None and t <= t_prev:
            raise InvalidArgumentError("frame timestamps must be strictly increasing")
        dt = cfg.dt_nominal if t_prev is None else t - t_prev
        t_prev = t
        buf.append(filter_points(frame, cfg))
        agg = Frame.concat(buf)
        z = None
        if len(agg):
            labels = dbscan(agg.xyz, cfg.eps, cfg.min_pts)
            sel = select_cluster(labels, agg, cfg.static_velocity)
            if sel is not None:
                z = centroid_measurement(agg.xyz[sel])
        if not state.initialized:
            if z is None:
                yield TrackStep(t, state, None, False, False)
                continue
            state = replace(kalman_init(z, cfg, t), confirmed_index=state.confirmed_index)
        else:
            state = kalman_step(state, z, dt, cfg, t)
        idx = aoa_to_index(state.x[0, 0])
        count = state.confirm_count + 1 if idx == state.candidate_index else 1
        updated = count >= cfg.confirm_frames and idx != state.confirmed_index
        if updated:
            state = replace(state, confirmed_index=idx, candidate_index=idx, confirm_count=0)
        else:
            state = replace(state, candidate_index=idx, confirm_count=count)
        yield TrackStep(t, state, state.confirmed_index, updated, z is not None)
