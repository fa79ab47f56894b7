"""``ris-sim`` command-line interface.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure,
4 file I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import io
from .errors import InvalidArgumentError, RisSimError
from .experiments import GRID_ANGLES_DEG, HARDEN_PRESETS, crlb_sweep, harden, simulate
from .geometry import Spherical, arc_trajectory
from .metrics import (
    Pdp,
    estimate_k_factor_detail,
    fit_ci_ple,
    fit_cluster_decay,
    fit_fading_distribution,
    rank_families,
)
from .radar import RadarConfig, RadarTarget, noise_for_snr
from .ris import ff_codebook, nf_codebook, quantize_codebook, reradiation_pattern
from .scenario import load_scenario
from .tracking import run_tracking_loop, synth_point_cloud

log = logging.getLogger("risrcc")


def _emit_meta(args, sc, command, extra=None):
    meta = {"command": command, "seed": sc.seed, "config_hash": sc.config_hash}
    if extra:
        meta.update(extra)
    io.write_json(os.path.join(args.out, f"{command}.meta.json"), meta)
    return meta


def cmd_codebook(args, sc):
    lam = sc.wavelength
    th, ph = np.radians(args.theta_deg), np.radians(args.phi_deg)
    if args.regime == "nf":
        focal = Spherical(th, ph, args.dist_m).to_cartesian()
        cb = nf_codebook(sc.ris, sc.bs_position, focal, lam)
        radius = max(args.dist_m, 3.0 * sc.ris.largest_dimension)
    else:
        cb = ff_codebook(sc.ris, th, ph, lam)
        radius = 10.0
    if not args.no_quantize:
        cb = quantize_codebook(cb, args.bits or sc.ris.bit_depth)
    io.write_codebook_csv(os.path.join(args.out, "codebook.csv"), cb)
    tg, pg = np.meshgrid(np.radians(np.arange(0.0, 90.0, args.pattern_step_deg)),
                         np.radians(np.arange(0.0, 360.0, args.pattern_step_deg)), indexing="ij")
    pat = reradiation_pattern(sc.ris, cb, sc.bs_position, (tg.ravel(), pg.ravel(), radius), lam)
    io.write_pattern_csv(os.path.join(args.out, "pattern.csv"), pat.theta, pat.phi, pat.power_db)
    _emit_meta(args, sc, "codebook", {"regime": args.regime, "bits": cb.bits, "shape": list(cb.shape),
                                      "peak_theta_deg": float(np.degrees(pat.peak_theta)),
                                      "peak_phi_deg": float(np.degrees(pat.peak_phi))})


def cmd_simulate(args, sc):
    rep = simulate(sc, args.angles, args.distances, args.ris == "on", keep_pdps=True)
    if args.format == "json":
        io.write_json(os.path.join(args.out, "metrics.json"), {"meta": rep.meta(), "points": rep.rows})
    else:
        io.write_metrics_csv(os.path.join(args.out, "metrics.csv"), rep.rows)
    rows = []
    for key, p in rep.pdps.items():
        rows.extend([key, d, v] for d, v in zip(p["delay_s"], p["power"]))
    io.write_table(os.path.join(args.out, "pdp.csv"), ["point", "delay_s", "power"], rows)
    _emit_meta(args, sc, "simulate", {"ris": args.ris})


def cmd_harden(args, sc):
    rep = harden(sc, args.preset, args.tracking == "on")
    if args.format == "json":
        io.write_json(os.path.join(args.out, "harden.json"),
                      {"meta": rep.meta(), "summary": rep.summary, "series": rep.series})
    else:
        cols = list(rep.rows[0])
        io.write_table(os.path.join(args.out, "harden.csv"), cols, ([r[c] for c in cols] for r in rep.rows))
        n = len(rep.series["cdf_p"])
        keys = ["cdf_p", "cdf_tracking_on_mbps", "cdf_tracking_off_mbps", "cdf_ris_off_mbps"]
        io.write_table(os.path.join(args.out, "harden_cdf.csv"), keys,
                       ([rep.series[k][i] for k in keys] for i in range(n)))
    _emit_meta(args, sc, "harden", {"summary": rep.summary})
    s = rep.summary
    print(f"{args.preset}: mean improvement {100 * s['mean_improvement']:.1f}%, "
          f"std reduction {100 * s['std_reduction']:.1f}%, {s['phase_updates']} phase updates")


def cmd_crlb(args, sc):
    cfg = RadarConfig.default_layout(args.n_tx, args.n_rx)
    ref = RadarTarget([0.0, args.ref_range_m])
    cfg = cfg.with_noise(noise_for_snr(cfg, ref, args.snr_db))
    xs = np.linspace(*args.x_range[:2], int(args.x_range[2]))
    ys = np.linspace(*args.y_range[:2], int(args.y_range[2]))
    rows, bad = crlb_sweep(cfg, xs, ys)
    if bad:
        log.warning("%d grid point(s) have a singular Fisher information; written as nan", bad)
    io.write_crlb_csv(os.path.join(args.out, "crlb.csv"), rows)
    _emit_meta(args, sc, "crlb", {"singular_points": bad, "noise_sigma2": cfg.noise_sigma2})


def cmd_track(args, sc):
    if args.frames:
        frames = io.read_frames_jsonl(args.frames)
    else:
        radius = 2.0 if args.preset == "circle_2m" else 4.0
        speed = sc.harden.speed_2m_mps if radius == 2.0 else sc.harden.speed_4m_mps
        traj = arc_trajectory(radius, speed, sweeps=sc.harden.sweeps)
        frames = synth_point_cloud(traj, sc.tracker, sc.harden.clutter_rate, sc.harden.point_noise_m,
                                   np.random.default_rng([sc.seed, 2]))
        io.write_frames_jsonl(os.path.join(args.out, "frames.jsonl"), frames)
    steps = list(run_tracking_loop(frames, sc.tracker))
    io.write_track_csv(os.path.join(args.out, "track.csv"), steps)
    _emit_meta(args, sc, "track", {"frames": len(steps), "phase_updates": int(sum(s.updated for s in steps))})


def _column(path, name):
    header, rows = io.read_table(path)
    if name not in header:
        raise InvalidArgumentError(f"{path}: missing column {name!r}")
    j = header.index(name)
    return np.array([float(r[j]) for r in rows])


def cmd_fit(args, sc):
    path = args.input
    if args.what == "ple":
        pts = np.stack([_column(path, "d1_m"), _column(path, "d2_m"), _column(path, "pl_dB")], axis=1)
        f = fit_ci_ple(pts, sc.wavelength, sc.pathloss.d0, args.fit_offset)
        result = {"gamma1": f.gamma1, "gamma2": f.gamma2, "sigma_sf_db": f.sigma_sf, "offset_db": f.offset,
                  "intercept_db": f.intercept}
    elif args.what == "kfactor":
        k, capped = estimate_k_factor_detail(_column(path, "envelope"))
        result = {"k_dB": k, "capped": capped}
    elif args.what == "decay":
        a, b, c = fit_cluster_decay(Pdp(_column(path, "delay_s"), _column(path, "power")))
        result = {"a": a, "b_per_ns": b, "c": c}
    else:
        x = _column(path, "value")
        fits = [fit_fading_distribution(x, args.family)] if args.family else rank_families(x)
        result = {"fits": [{"family": f.family, "params": f.params, "log_likelihood": f.log_likelihood,
                            "ks_stat": f.ks_stat} for f in fits]}
    meta = {"command": "fit", "seed": sc.seed, "config_hash": sc.config_hash, "what": args.what, "input": path}
    io.write_json(os.path.join(args.out, f"fit_{args.what}.json"), {"meta": meta, "result": result})


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file (RIS_SIM_* environment variables override it)")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ris-sim", description="RIS channel, radar and tracking simulator")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("codebook", parents=[common], help="write a codebook and its re-radiation pattern")
    c.add_argument("--regime", choices=("nf", "ff"), default="nf")
    c.add_argument("--theta-deg", type=float, default=40.0)
    c.add_argument("--phi-deg", type=float, default=90.0)
    c.add_argument("--dist-m", type=float, default=2.0)
    c.add_argument("--bits", type=int, help="quantization bits (default: RIS bit depth)")
    c.add_argument("--no-quantize", action="store_true")
    c.add_argument("--pattern-step-deg", type=float, default=2.0)
    c.set_defaults(func=cmd_codebook)

    s = sub.add_parser("simulate", parents=[common], help="channel statistics over an angle x distance grid")
    s.add_argument("--angles", type=float, nargs="+", default=list(GRID_ANGLES_DEG), metavar="DEG")
    s.add_argument("--distances", type=float, nargs="+", default=[2.0], metavar="M")
    s.add_argument("--ris", choices=("on", "off"), default="on")
    s.set_defaults(func=cmd_simulate)

    h = sub.add_parser("harden", parents=[common], help="throughput along a circular UE sweep")
    h.add_argument("--preset", choices=HARDEN_PRESETS, default="circle_2m")
    h.add_argument("--tracking", choices=("on", "off"), default="on")
    h.set_defaults(func=cmd_harden)

    r = sub.add_parser("crlb", parents=[common], help="localization CRLB over a Cartesian grid")
    r.add_argument("--x-range", type=float, nargs=3, default=[-1.0, 1.0, 21], metavar=("MIN", "MAX", "N"))
    r.add_argument("--y-range", type=float, nargs=3, default=[0.5, 4.0, 15], metavar=("MIN", "MAX", "N"))
    r.add_argument("--n-tx", type=int, default=3)
    r.add_argument("--n-rx", type=int, default=4)
    r.add_argument("--snr-db", type=float, default=20.0, help="per-antenna SNR at the reference point")
    r.add_argument("--ref-range-m", type=float, default=2.0, help="boresight range of the SNR reference point")
    r.set_defaults(func=cmd_crlb)

    t = sub.add_parser("track", parents=[common], help="run the DBSCAN + Kalman tracking loop")
    t.add_argument("--frames", help="JSON-lines frame stream (default: synthesize from --preset)")
    t.add_argument("--preset", choices=HARDEN_PRESETS, default="circle_2m")
    t.set_defaults(func=cmd_track)

    f = sub.add_parser("fit", parents=[common], help="fit path-loss, K-factor, decay or fading models")
    f.add_argument("what", choices=("ple", "kfactor", "decay", "distribution"))
    f.add_argument("--input", required=True,
                   help="CSV with columns d1_m,d2_m,pl_dB | envelope | delay_s,power | value")
    f.add_argument("--family", choices=("rayleigh", "weibull", "lognormal"), help="fit one family instead of ranking")
    f.add_argument("--fit-offset", action="store_true", help="PLE fit with a free constant offset")
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        sc = load_scenario(args.config)
        if args.seed is not None:
            sc = replace(sc, seed=args.seed)
        args.func(args, sc)
    except RisSimError as exc:
        log.error("%s", exc)
        diag = getattr(exc, "diagnostics", None)
        if diag:
            log.error("diagnostics: %s", diag)
        return exc.exit_code
    except ValueError as exc:
        log.error("%s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
