"""Scenario description, JSON configuration and channel assembly.

The RIS frame is the world frame: the aperture lies in the xy-plane at the
origin and faces +z. Config files are JSON with explicit units in the field
names; environment variables prefixed ``RIS_SIM_`` override fields, with a
double underscore separating the section, e.g. ``RIS_SIM_GBSM__K_R_DB=10``.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError, InvalidArgumentError
from .gbsm import (
    AntennaPattern,
    Cir,
    CodebookReradiation,
    GbsmConfig,
    bs_ris_cir,
    bs_ue_cir,
    cascade_cir,
    generate_clusters,
    ris_ue_cir,
)
from .geometry import SPEED_OF_LIGHT, ArrayLayout, Pose, Spherical, cartesian_to_spherical, rotation_matrix
from .propagation import LinkBudget, PathLossParams, ci_path_loss, fspl_ris_gain, single_hop_path_loss
from .ris import Codebook, RisSpec, nf_codebook, pattern_factor, quantize_codebook, steered_rcs
from .tracking import GRID_SIZE, TrackerConfig, index_to_angle

SCHEMA_VERSION = 1
ENV_PREFIX = "RIS_SIM_"


@dataclass(frozen=True)
class HardenConfig:
    """Throughput experiment settings."""

    bandwidth_hz: float = 100e6
    n_subcarriers: int = 32
    cap_mbps: float = 571.1
    bank_focus_m: float = 2.0
    speed_2m_mps: float = 0.1
    speed_4m_mps: float = 0.2
    sweeps: int = 1
    point_noise_m: float = 0.05
    clutter_rate: float = 2.0
    p_tx_dbm: float = 5.0


@dataclass(frozen=True)
class Scenario:
    carrier_hz: float = 3.5e9
    bandwidth_hz: float = 800e6
    ris: RisSpec = field(default_factory=RisSpec)
    bs_position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 10.0]))
    bs_pattern: AntennaPattern = field(default_factory=AntennaPattern)
    bs_layout: ArrayLayout = field(default_factory=ArrayLayout)
    ue_position: np.ndarray = field(default_factory=lambda: Spherical.from_degrees(40, 90, 2).to_cartesian())
    ue_pattern: AntennaPattern = field(default_factory=AntennaPattern)
    ue_layout: ArrayLayout = field(default_factory=ArrayLayout)
    gbsm: GbsmConfig = field(default_factory=GbsmConfig)
    pathloss: PathLossParams = field(default_factory=lambda: PathLossParams(gamma1=3.35, gamma2=1.97))
    pl_mode: str = "pattern"
    ris_off_gamma: float = 3.0
    ris_off_excess_db: float = 31.5
    direct_weight: str = "pathloss"
    link: LinkBudget = field(default_factory=lambda: LinkBudget.thermal(100e6, 7.0, p_tx=0.0))
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    harden: HardenConfig = field(default_factory=HardenConfig)
    seed: int = 0

    def __post_init__(self):
        if not self.carrier_hz > 0 or not self.bandwidth_hz > 0:
            raise InvalidArgumentError("carrier and bandwidth must be positive")
        if self.bandwidth_hz > self.carrier_hz:
            raise InvalidArgumentError("bandwidth cannot exceed the carrier frequency")
        if self.pl_mode not in ("pattern", "rcs"):
            raise ConfigurationError(f"unknown path-loss mode {self.pl_mode!r}")
        if self.direct_weight not in ("pathloss", "eq17"):
            raise ConfigurationError(f"unknown direct-path weighting {self.direct_weight!r}")
        object.__setattr__(self, "bs_position", np.asarray(self.bs_position, dtype=float).reshape(3))
        object.__setattr__(self, "ue_position", np.asarray(self.ue_position, dtype=float).reshape(3))
        if self.bs_position[2] <= 0 or self.ue_position[2] <= 0:
            raise InvalidArgumentError("BS and UE must be in front of the RIS (z > 0)")

    # geometry

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def ris_pose(self) -> Pose:
        return Pose()

    @property
    def bs_pose(self) -> Pose:
        """BS frame whose +z axis points at the RIS centre."""
        d = -self.bs_position / np.linalg.norm(self.bs_position)
        z = np.array([0.0, 0.0, 1.0])
        axis = np.cross(z, d)
        s = np.linalg.norm(axis)
        if s < 1e-12:
            rot = np.eye(3) if d[2] > 0 else rotation_matrix([1.0, 0.0, 0.0], np.pi)
        else:
            rot = rotation_matrix(axis, np.arctan2(s, z @ d))
        return Pose(self.bs_position, rot)

    def ue_pose(self, position=None) -> Pose:
        return Pose(self.ue_position if position is None else position)

    def with_ue(self, theta_deg, phi_deg, distance_m) -> "Scenario":
        return replace(self, ue_position=Spherical.from_degrees(theta_deg, phi_deg, distance_m).to_cartesian())

    @property
    def d1(self) -> float:
        return float(np.linalg.norm(self.bs_position))

    def d2(self, position=None) -> float:
        return float(np.linalg.norm(self.ue_position if position is None else position))

    # codebooks

    def codebook_for(self, theta, phi, distance, quantize=True) -> Codebook:
        focal = Spherical(theta, phi, distance).to_cartesian()
        cb = nf_codebook(self.ris, self.bs_position, focal, self.wavelength)
        return quantize_codebook(cb, self.ris.bit_depth) if quantize else cb

    def bank(self, focus_m=None, phi=np.pi / 2, quantize=True):
        """One codebook per 5-degree grid angle (5..60 deg), focused at ``focus_m``."""
        focus = self.harden.bank_focus_m if focus_m is None else focus_m
        return [self.codebook_for(index_to_angle(i), phi, focus, quantize) for i in range(GRID_SIZE)]

    # channels

    def clusters(self, leg: str, seed=None):
        seed = self.seed if seed is None else seed
        offset = {"ris_ue": 0, "bs_ue": 1}[leg]
        return generate_clusters(self.gbsm, np.random.default_rng([seed, offset]), leg)

    def ris_factor(self, codebook: Codebook, position=None) -> complex:
        pos = self.ue_position if position is None else position
        return complex(pattern_factor(self.ris, codebook, self.bs_position, pos, self.wavelength))

    def path_loss_on(self, codebook: Optional[Codebook] = None, position=None, include_ris_term=True,
                     shadow_db=0.0) -> float:
        """RIS-path loss (dB). ``include_ris_term=False`` leaves out the codebook-dependent gain."""
        d2 = self.d2(position)
        term = 0.0
        if include_ris_term and codebook is not None:
            if self.pl_mode == "pattern":
                term = 20.0 * np.log10(max(abs(self.ris_factor(codebook, position)), 1e-300))
            else:
                pos = self.ue_position if position is None else position
                sigma = steered_rcs(self.ris, codebook, self.bs_position, pos, self.wavelength)
                g = fspl_ris_gain(self.link, self.wavelength, sigma, self.d1, d2)
                term = 10.0 * np.log10(max(g, 1e-300))
        return ci_path_loss(self.pathloss, self.wavelength, self.d1, d2, term, shadow_db)

    def path_loss_off(self, position=None, shadow_db=0.0) -> float:
        pos = self.ue_position if position is None else position
        d = float(np.linalg.norm(pos - self.bs_position))
        return single_hop_path_loss(self.wavelength, max(d, self.pathloss.d0), self.ris_off_gamma,
                                    self.pathloss.d0, self.ris_off_excess_db, shadow_db)

    def direct_leg_weight(self, position=None) -> float:
        if self.direct_weight == "eq17":
            k = 10.0 ** (self.gbsm.k_r_db / 10.0)
            return float(np.sqrt(1.0 / (k + 1.0)))
        delta = self.path_loss_off(position) - self.path_loss_on(None, position, include_ris_term=False)
        return float(10.0 ** (-delta / 20.0))

    def ris_on_cir(self, codebook: Optional[Codebook], position=None, displacement=(0.0, 0.0, 0.0),
                   clusters_ris=None, clusters_direct=None, time_grid=None, include_direct=True,
                   velocity=(0.0, 0.0, 0.0)) -> Cir:
        """Cascaded channel normalized to the RIS-path loss without the RIS gain term."""
        ue = self.ue_pose(position)
        cl_r = self.clusters("ris_ue") if clusters_ris is None else clusters_ris
        lam = self.wavelength
        rerad = CodebookReradiation(self.ris, codebook, self.bs_position, lam)
        a = bs_ris_cir(self.bs_pose, self.ris_pose, self.bs_pattern, wavelength=lam, time_grid=time_grid)
        b = ris_ue_cir(self.ris_pose, ue, cl_r, self.gbsm.k_r_db, rerad, self.ue_pattern, velocity,
                       wavelength=lam, time_grid=time_grid, displacement=displacement)
        c = None
        if include_direct:
            cl_d = self.clusters("bs_ue") if clusters_direct is None else clusters_direct
            c = bs_ue_cir(self.bs_pose, ue, cl_d, self.bs_pattern, self.ue_pattern, velocity,
                          wavelength=lam, time_grid=time_grid, displacement=displacement)
        return cascade_cir(a, b, c, self.direct_leg_weight(position) if include_direct else 1.0)

    def ris_off_cir(self, position=None, displacement=(0.0, 0.0, 0.0), clusters_direct=None, time_grid=None,
                    velocity=(0.0, 0.0, 0.0)) -> Cir:
        """Blocked BS-UE channel normalized to the RIS-off path loss."""
        cl_d = self.clusters("bs_ue") if clusters_direct is None else clusters_direct
        return bs_ue_cir(self.bs_pose, self.ue_pose(position), cl_d, self.bs_pattern, self.ue_pattern, velocity,
                         wavelength=self.wavelength, time_grid=time_grid, displacement=displacement)

    # config

    def to_dict(self) -> dict:
        return scenario_to_dict(self)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# (dataclass field, json key, scale from json to internal)
_GBSM_KEYS = [
    ("k_r_db", "k_r_db", 1.0), ("ds", "ds_ns", 1e-9), ("omega_tau", "omega_tau", 1.0),
    ("zeta_db", "zeta_db", 1.0), ("n_clusters", "n_clusters", None), ("rays_per_cluster", "rays_per_cluster", None),
    ("n_clusters_bs_ue", "n_clusters_bs_ue", None), ("rays_per_cluster_bs_ue", "rays_per_cluster_bs_ue", None),
    ("ds_bs_ue", "ds_bs_ue_ns", 1e-9), ("omega_tau_bs_ue", "omega_tau_bs_ue", 1.0),
    ("zeta_db_bs_ue", "zeta_db_bs_ue", 1.0), ("xpr_mu", "xpr_mu_db", 1.0), ("xpr_sigma", "xpr_sigma_db", 1.0),
    ("ray_spread_deg", "ray_spread_deg", 1.0), ("cluster_zenith_spread_deg", "cluster_zenith_spread_deg", 1.0),
    ("departure_spread_deg", "departure_spread_deg", 1.0), ("intra_cluster_spread", "intra_cluster_spread_ns", 1e-9),
    ("los_delay_scaling", "los_delay_scaling", None),
]
_TRACKER_KEYS = [
    ("snr_min", "snr_min_db", 1.0), ("eps", "eps_m", 1.0), ("min_pts", "min_pts", None),
    ("agg_frames", "agg_frames", None), ("confirm_frames", "confirm_frames", None), ("q", "q", None),
    ("r", "r", None), ("init_rate_var", "init_rate_var", None), ("dt_nominal", "dt_nominal_s", 1.0),
    ("static_velocity", "static_velocity_mps", 1.0), ("background_suppression", "background_suppression", None),
]
_HARDEN_KEYS = [
    ("bandwidth_hz", "bandwidth_hz", 1.0), ("n_subcarriers", "n_subcarriers", None), ("cap_mbps", "cap_mbps", 1.0),
    ("bank_focus_m", "bank_focus_m", 1.0), ("speed_2m_mps", "speed_2m_mps", 1.0),
    ("speed_4m_mps", "speed_4m_mps", 1.0), ("sweeps", "sweeps", None), ("point_noise_m", "point_noise_m", 1.0),
    ("clutter_rate", "clutter_rate", 1.0), ("p_tx_dbm", "p_tx_dbm", 1.0),
]


def _dump(obj, keys):
    out = {}
    for attr, key, scale in keys:
        v = getattr(obj, attr)
        if v is not None and scale not in (None, 1.0):
            v = v / scale
        out[key] = list(v) if isinstance(v, tuple) else v
    return out


def _load(cls, data, keys, section):
    known = {k for _, k, _ in keys}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown {section} field(s): {sorted(unknown)}")
    kw = {}
    for attr, key, scale in keys:
        if key in data:
            v = data[key]
            if v is not None and scale not in (None, 1.0):
                v = float(v) * scale
            kw[attr] = tuple(v) if isinstance(v, list) else v
    return cls(**kw)


def _pattern_to_dict(p: AntennaPattern):
    if p.kind == "file":
        raise ConfigurationError("measured patterns cannot be serialized inline; reference the file instead")
    return {"kind": p.kind, "gain_dbi": p.gain_dbi, "dual_pol": p.dual_pol}


def _pattern_from_dict(d, base_dir="."):
    d = dict(d)
    if d.get("kind") == "file":
        from .io import read_pattern_csv

        path = os.path.join(base_dir, d.pop("path"))
        return AntennaPattern("file", d.get("gain_dbi", 0.0), d.get("dual_pol", False), read_pattern_csv(path))
    return AntennaPattern(d.get("kind", "isotropic"), float(d.get("gain_dbi", 0.0)), bool(d.get("dual_pol", False)))


def _spherical_deg(v):
    s = cartesian_to_spherical(v)
    return {"theta_deg": float(np.degrees(s.theta)), "phi_deg": float(np.degrees(s.phi)), "distance_m": s.r}


def scenario_to_dict(sc: Scenario) -> dict:
    pl = sc.pathloss
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": sc.seed,
        "carrier_hz": sc.carrier_hz,
        "bandwidth_hz": sc.bandwidth_hz,
        "ris": {
            "rows": sc.ris.rows, "cols": sc.ris.cols, "spacing_m": sc.ris.spacing,
            "aperture_x_m": sc.ris.aperture_x, "aperture_y_m": sc.ris.aperture_y,
            "chi": sc.ris.chi, "bit_depth": sc.ris.bit_depth,
        },
        "bs": {"position_m": sc.bs_position.tolist(), "pattern": _pattern_to_dict(sc.bs_pattern),
               "element_positions_m": sc.bs_layout.element_positions.tolist()},
        "ue": dict(_spherical_deg(sc.ue_position), pattern=_pattern_to_dict(sc.ue_pattern),
                   element_positions_m=sc.ue_layout.element_positions.tolist()),
        "gbsm": _dump(sc.gbsm, _GBSM_KEYS),
        "pathloss": {
            "gamma1": pl.gamma1, "gamma2": pl.gamma2, "d0_m": pl.d0, "sigma_sf_db": pl.sigma_sf,
            "cif_f0_hz": None if pl.cif is None else pl.cif[0], "cif_beta": None if pl.cif is None else pl.cif[1],
            "mode": sc.pl_mode, "ris_off_gamma": sc.ris_off_gamma, "ris_off_excess_db": sc.ris_off_excess_db,
            "direct_weight": sc.direct_weight,
        },
        "link": {"p_tx_dbm": sc.link.p_tx, "g_tx_dbi": sc.link.g_tx, "g_rx_dbi": sc.link.g_rx,
                 "noise_var_mw": sc.link.noise_var},
        "tracker": _dump(sc.tracker, _TRACKER_KEYS),
        "harden": _dump(sc.harden, _HARDEN_KEYS),
    }


def _section(data, name):
    v = data.get(name, {})
    if not isinstance(v, dict):
        raise ConfigurationError(f"section {name!r} must be an object")
    return v


def scenario_from_dict(data: dict, base_dir=".") -> Scenario:
    data = dict(data)
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported schema_version {version}; expected {SCHEMA_VERSION}")
    top = {"seed", "carrier_hz", "bandwidth_hz", "ris", "bs", "ue", "gbsm", "pathloss", "link", "tracker", "harden"}
    unknown = set(data) - top
    if unknown:
        raise ConfigurationError(f"unknown config field(s): {sorted(unknown)}")
    try:
        kw = {}
        carrier = float(data.get("carrier_hz", 3.5e9))
        kw["carrier_hz"] = carrier
        kw["bandwidth_hz"] = float(data.get("bandwidth_hz", 800e6))
        kw["seed"] = int(data.get("seed", 0))
        r = _section(data, "ris")
        lam = SPEED_OF_LIGHT / carrier
        kw["ris"] = RisSpec(
            rows=int(r.get("rows", 37)), cols=int(r.get("cols", 50)), spacing=float(r.get("spacing_m", lam / 8)),
            aperture_x=float(r.get("aperture_x_m", 0.57)), aperture_y=float(r.get("aperture_y_m", 0.42)),
            chi=float(r.get("chi", 1.0)), bit_depth=int(r.get("bit_depth", 4)),
        )
        b = _section(data, "bs")
        if "position_m" in b:
            kw["bs_position"] = np.asarray(b["position_m"], dtype=float)
        if "pattern" in b:
            kw["bs_pattern"] = _pattern_from_dict(b["pattern"], base_dir)
        if "element_positions_m" in b:
            kw["bs_layout"] = ArrayLayout(np.asarray(b["element_positions_m"], dtype=float))
        u = _section(data, "ue")
        if any(k in u for k in ("theta_deg", "phi_deg", "distance_m")):
            kw["ue_position"] = Spherical.from_degrees(
                float(u.get("theta_deg", 40.0)), float(u.get("phi_deg", 90.0)), float(u.get("distance_m", 2.0))
            ).to_cartesian()
        if "pattern" in u:
            kw["ue_pattern"] = _pattern_from_dict(u["pattern"], base_dir)
        if "element_positions_m" in u:
            kw["ue_layout"] = ArrayLayout(np.asarray(u["element_positions_m"], dtype=float))
        kw["gbsm"] = _load(GbsmConfig, _section(data, "gbsm"), _GBSM_KEYS, "gbsm")
        p = dict(_section(data, "pathloss"))
        f0, beta = p.pop("cif_f0_hz", None), p.pop("cif_beta", None)
        kw["pl_mode"] = p.pop("mode", "pattern")
        kw["ris_off_gamma"] = float(p.pop("ris_off_gamma", 3.0))
        kw["ris_off_excess_db"] = float(p.pop("ris_off_excess_db", 31.5))
        kw["direct_weight"] = p.pop("direct_weight", "pathloss")
        pl_keys = {"gamma1", "gamma2", "d0_m", "sigma_sf_db"}
        if set(p) - pl_keys:
            raise ConfigurationError(f"unknown pathloss field(s): {sorted(set(p) - pl_keys)}")
        kw["pathloss"] = PathLossParams(
            float(p.get("gamma1", 3.35)), float(p.get("gamma2", 1.97)), float(p.get("d0_m", 1.0)),
            float(p.get("sigma_sf_db", 0.0)), None if f0 is None else (float(f0), float(beta or 0.0)),
        )
        lk = _section(data, "link")
        default_link = Scenario.__dataclass_fields__["link"].default_factory()
        kw["link"] = LinkBudget(
            g_tx=float(lk.get("g_tx_dbi", 0.0)), g_rx=float(lk.get("g_rx_dbi", 0.0)),
            p_tx=float(lk.get("p_tx_dbm", default_link.p_tx)),
            noise_var=float(lk.get("noise_var_mw", default_link.noise_var)),
        )
        kw["tracker"] = _load(TrackerConfig, _section(data, "tracker"), _TRACKER_KEYS, "tracker")
        kw["harden"] = _load(HardenConfig, _section(data, "harden"), _HARDEN_KEYS, "harden")
    except (TypeError, KeyError) as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc
    return Scenario(**kw)


def _parse_env_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_env_overrides(data: dict, environ=None) -> dict:
    """Apply ``RIS_SIM_[SECTION__]FIELD=value`` overrides (values parsed as JSON when possible)."""
    environ = os.environ if environ is None else environ
    out = json.loads(json.dumps(data))
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower().split("__")
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"environment override {name} does not address a config section")
        node[path[-1]] = _parse_env_value(raw)
    return out


def load_scenario(path=None, environ=None) -> Scenario:
    """Scenario from a JSON file (or defaults) with environment overrides applied."""
    from .io import read_json

    data = {} if path is None else read_json(path)
    base = "." if path is None else os.path.dirname(os.path.abspath(path))
    return scenario_from_dict(apply_env_overrides(data, environ), base)
