"""Experiment drivers behind the command-line interface."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from .errors import EstimationError, SingularFIMError
from .gbsm import GbsmConfig, IsotropicReradiation, generate_clusters, ris_ue_cir
from .geometry import Pose, Spherical, arc_trajectory
from .metrics import (
    PDP_RESOLUTION,
    Pdp,
    coherence_bandwidth,
    estimate_k_factor,
    fit_cluster_decay,
    mimo_capacity,
    pdp_from_cir,
    rms_delay_spread,
    throughput_mbps,
)
from .radar import RadarConfig, RadarTarget, crlb
from .scenario import Scenario
from .tracking import aoa_to_index, run_tracking_loop, synth_point_cloud

GRID_ANGLES_DEG = tuple(range(5, 61, 5))
HARDEN_PRESETS = ("circle_2m", "circle_4m")


@dataclass
class RunReport:
    command: str
    seed: int
    config_hash: str
    rows: List[dict] = field(default_factory=list)
    pdps: Dict[str, dict] = field(default_factory=dict)
    series: Dict[str, list] = field(default_factory=dict)
    summary: Dict[str, object] = field(default_factory=dict)

    def meta(self) -> dict:
        return {"command": self.command, "seed": self.seed, "config_hash": self.config_hash}


def _k_from_frequency(cir, bandwidth_hz, n=512, t=0.0):
    freqs = np.linspace(-bandwidth_hz / 2, bandwidth_hz / 2, n)
    h = cir.frequency_response(freqs, t)
    env = np.sqrt(np.sum(np.abs(h) ** 2, axis=(-2, -1)))
    return estimate_k_factor(np.maximum(env, 1e-300))


def _fit_window(pdp: Pdp) -> Pdp:
    """Unit-total PDP from the strongest bin onward, re-referenced to it."""
    i0 = int(np.argmax(pdp.power))
    return Pdp(pdp.delay_bins[i0:] - pdp.delay_bins[i0], pdp.power[i0:] / pdp.total, pdp.resolution, True)


def simulate_point(sc: Scenario, theta_deg, dist_m, ris_on=True, phi_deg=90.0):
    """Channel statistics at one grid point; returns ``(row, pdp)``."""
    point = sc.with_ue(theta_deg, phi_deg, dist_m)
    if ris_on:
        cb = point.codebook_for(np.radians(theta_deg), np.radians(phi_deg), dist_m)
        cir = point.ris_on_cir(cb)
        pl = point.path_loss_on(cb)
        pl_scale = point.path_loss_on(cb, include_ris_term=False)
    else:
        cir = point.ris_off_cir()
        pl = pl_scale = point.path_loss_off()
    pdp = pdp_from_cir(cir, PDP_RESOLUTION)
    tau = rms_delay_spread(pdp)
    try:
        a, b, c = fit_cluster_decay(_fit_window(pdp))
        fit = {"a": a, "b_per_ns": b, "c": c}
    except EstimationError:
        fit = None
    peak_db = float(10 * np.log10(pdp.power.max()) - pl_scale)
    row = {
        "angle_deg": float(theta_deg),
        "dist_m": float(dist_m),
        "ris": "on" if ris_on else "off",
        "pl_dB": float(pl),
        "k_dB": _k_from_frequency(cir, sc.bandwidth_hz),
        "tau_rms_ns": tau * 1e9,
        "b_c_MHz": coherence_bandwidth(tau) / 1e6,
        "pdp_peak_dB": peak_db,
        "has_vlos": bool(np.any(cir.kind == "vlos")),
        "fit": fit,
    }
    return row, pdp


def simulate(sc: Scenario, angles_deg=GRID_ANGLES_DEG, distances_m=(2.0,), ris_on=True, keep_pdps=False) -> RunReport:
    report = RunReport("simulate", sc.seed, sc.config_hash)
    for d in distances_m:
        for a in angles_deg:
            row, pdp = simulate_point(sc, a, d, ris_on)
            report.rows.append(row)
            if keep_pdps:
                report.pdps[f"{a:g}deg_{d:g}m"] = {"delay_s": pdp.delay_bins.tolist(), "power": pdp.power.tolist()}
    return report


def hardening_ratio(n_seeds=200, on=(12.6, 11.5e-9), off=(-2.1, 25.9e-9), base: Optional[GbsmConfig] = None,
                    position=None, seed=0):
    """Mean tau_rms of Rician channels drawn with the ``on`` vs ``off`` (K dB, DS s) inputs.

    Returns ``(ratio, mean_on, mean_off)``.
    """
    base = GbsmConfig() if base is None else base
    ue = Pose(Spherical.from_degrees(40, 90, 2).to_cartesian() if position is None else position)
    means = []
    for k_db, ds in (on, off):
        cfg = replace(base, k_r_db=k_db, ds=ds)
        taus = []
        for s in range(n_seeds):
            cl = generate_clusters(cfg, np.random.default_rng([seed, s]))
            cir = ris_ue_cir(Pose(), ue, cl, k_db, IsotropicReradiation())
            taus.append(rms_delay_spread(pdp_from_cir(cir)))
        means.append(float(np.mean(taus)))
    return means[0] / means[1], means[0], means[1]


def _dual_pol(sc: Scenario) -> Scenario:
    return replace(sc, bs_pattern=replace(sc.bs_pattern, dual_pol=True), ue_pattern=replace(sc.ue_pattern, dual_pol=True))


def _throughput(cir, snr_lin, freqs, hc):
    h = cir.frequency_response(freqs)
    cap = float(np.mean([mimo_capacity(hf, snr_lin) for hf in h]))
    return float(throughput_mbps(cap, hc.bandwidth_hz, hc.cap_mbps))


def _stats(x):
    x = np.asarray(x, dtype=float)
    return {"mean": float(x.mean()), "std": float(x.std())}


def harden(sc: Scenario, preset="circle_2m", tracking=True, seed=None) -> RunReport:
    """Throughput along a circular UE sweep with and without codebook tracking.

    The UE moves on an arc around the RIS while a synthetic radar stream drives
    the tracking loop. Three channels are evaluated at every frame: the RIS
    switching to ``bank[index]`` on phase updates (tracking on), the RIS keeping
    the codebook of the start angle (tracking off), and the blocked link with
    the RIS removed. ``tracking`` picks which RIS series is reported as ``on``.
    """
    if preset not in HARDEN_PRESETS:
        raise ValueError(f"unknown preset {preset!r}; expected one of {HARDEN_PRESETS}")
    seed = sc.seed if seed is None else seed
    hc = sc.harden
    radius, speed = (2.0, hc.speed_2m_mps) if preset == "circle_2m" else (4.0, hc.speed_4m_mps)
    sc = _dual_pol(replace(sc, seed=seed))
    traj = arc_trajectory(radius, speed, sweeps=hc.sweeps)
    rng = np.random.default_rng([seed, 2])
    frames = synth_point_cloud(traj, sc.tracker, hc.clutter_rate, hc.point_noise_m, rng)
    bank = sc.bank()
    steps = list(run_tracking_loop(frames, sc.tracker, bank))
    p0 = traj.position(traj.times[0])
    cl_r, cl_d = sc.clusters("ris_ue"), sc.clusters("bs_ue")
    freqs = np.linspace(-hc.bandwidth_hz / 2, hc.bandwidth_hz / 2, hc.n_subcarriers)
    p_tx = 10.0 ** (hc.p_tx_dbm / 10.0) / sc.link.noise_var
    start_idx = aoa_to_index(np.arccos(p0[2] / np.linalg.norm(p0)))
    series = {k: [] for k in ("t_s", "tracking_on", "tracking_off", "ris_off", "index", "updated")}
    for st in steps:
        p = traj.position(st.timestamp)
        disp = p - p0
        idx = start_idx if st.index is None else st.index
        snr_on = p_tx * 10 ** (-sc.path_loss_on(None, p, include_ris_term=False) / 10)
        snr_off = p_tx * 10 ** (-sc.path_loss_off(p) / 10)
        for key, i in (("tracking_on", idx), ("tracking_off", start_idx)):
            series[key].append(_throughput(sc.ris_on_cir(bank[i], p, disp, cl_r, cl_d), snr_on, freqs, hc))
        series["ris_off"].append(_throughput(sc.ris_off_cir(p, disp, cl_d), snr_off, freqs, hc))
        series["t_s"].append(st.timestamp)
        series["index"].append(idx)
        series["updated"].append(bool(st.updated))
    on_key = "tracking_on" if tracking else "tracking_off"
    stats = {k: _stats(series[k]) for k in ("tracking_on", "tracking_off", "ris_off")}

    def gain(a, b):
        return (a["mean"] - b["mean"]) / b["mean"] if b["mean"] > 0 else float("inf")

    def reduction(a, b):
        return 1.0 - a["std"] / b["std"] if b["std"] > 0 else 0.0

    report = RunReport("harden", seed, sc.config_hash)
    report.series = dict(series)
    report.summary = {
        "preset": preset,
        "tracking": bool(tracking),
        "stats": stats,
        "mean_improvement": gain(stats["tracking_on"], stats["tracking_off"]),
        "std_reduction": reduction(stats["tracking_on"], stats["tracking_off"]),
        "mean_improvement_vs_ris_off": gain(stats[on_key], stats["ris_off"]),
        "phase_updates": int(sum(series["updated"])),
        "frames": len(steps),
    }
    n = len(steps)
    report.series["cdf_p"] = ((np.arange(n) + 1) / n).tolist()
    for k in ("tracking_on", "tracking_off", "ris_off"):
        report.series[f"cdf_{k}_mbps"] = np.sort(series[k]).tolist()
    for i in range(n):
        report.rows.append({"t_s": series["t_s"][i], "throughput_mbps": series[on_key][i],
                            "tracking_on_mbps": series["tracking_on"][i], "tracking_off_mbps": series["tracking_off"][i],
                            "ris_off_mbps": series["ris_off"][i], "index": series["index"][i],
                            "updated": series["updated"][i]})
    return report


def crlb_sweep(cfg: RadarConfig, xs, ys, rho=1.0):
    """CRLB over a Cartesian grid; singular points get ``nan``. Returns ``(rows, n_singular)``."""
    rows, bad = [], 0
    for x in xs:
        for y in ys:
            try:
                v = crlb(cfg, RadarTarget([x, y], rho))
            except (SingularFIMError, ValueError):
                v, bad = float("nan"), bad + 1
            rows.append({"x_m": float(x), "y_m": float(y), "crlb_m2": v})
    return rows, bad
