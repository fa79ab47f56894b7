"""File formats: JSON configs and reports, CSV tables, JSON-lines radar frames.

Every writer has a matching reader and the pair round-trips losslessly
(floats are written with ``repr`` precision). Failures raise
:class:`DataIOError`.
"""
from __future__ import annotations

import csv
import json
import math
import os
from typing import Iterable, List, Sequence

import numpy as np

from .errors import DataIOError
from .gbsm import Cir
from .ris import Codebook, MeasuredPattern
from .tracking import Frame, TrackStep

PATTERN_HEADER = ["theta_deg", "phi_deg", "gain_dB"]
CIR_HEADER = ["t_s", "tap_index", "delay_s", "re_thth", "im_thth", "re_thph", "im_thph",
              "re_phth", "im_phth", "re_phph", "im_phph"]
CRLB_HEADER = ["x_m", "y_m", "crlb_m2"]
TRACK_HEADER = ["t_s", "theta_deg", "phi_deg", "r_m", "index", "updated"]
METRICS_COLUMNS = ["angle_deg", "dist_m", "pl_dB", "k_dB", "tau_rms_ns", "b_c_MHz", "fit"]


def _open(path, mode):
    try:
        d = os.path.dirname(os.path.abspath(path))
        if "w" in mode:
            os.makedirs(d, exist_ok=True)
        return open(path, mode, newline="" if "w" in mode or path.endswith(".csv") else None, encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot open {path}: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan; keep them as strings that float() parses back
        return v if math.isfinite(v) else repr(v)
    return obj


def _restore_nonfinite(obj):
    if isinstance(obj, dict):
        return {k: _restore_nonfinite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_restore_nonfinite(v) for v in obj]
    if obj in ("nan", "inf", "-inf"):
        return float(obj)
    return obj


def write_json(path, data) -> None:
    with _open(path, "w") as f:
        json.dump(_jsonable(data), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")


def read_json(path):
    with _open(path, "r") as f:
        try:
            return _restore_nonfinite(json.load(f))
        except json.JSONDecodeError as exc:
            raise DataIOError(f"{path}: invalid JSON ({exc})") from exc


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with _open(path, "w") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_table(path, header: Sequence[str] = None):
    """``(header, rows)`` with every cell as a string."""
    with _open(path, "r") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise DataIOError(f"{path}: empty file")
    got = [h.strip() for h in rows[0]]
    if header is not None and got != list(header):
        raise DataIOError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
    body = [r for r in rows[1:] if r]
    for i, r in enumerate(body, start=2):
        if len(r) != len(got):
            raise DataIOError(f"{path}:{i}: expected {len(got)} fields, got {len(r)}")
    return got, body


def _floats(path, rows):
    try:
        return np.array([[float(c) for c in r] for r in rows], dtype=float).reshape(len(rows), -1)
    except ValueError as exc:
        raise DataIOError(f"{path}: non-numeric cell ({exc})") from exc


# codebooks and patterns

def write_codebook_csv(path, cb: Codebook) -> None:
    """Phase matrix in radians, one line per row, no header."""
    with _open(path, "w") as f:
        w = csv.writer(f, lineterminator="\n")
        for row in cb.phases:
            w.writerow([repr(float(v)) for v in row])


def read_codebook_csv(path, bits=None) -> Codebook:
    with _open(path, "r") as f:
        rows = [r for r in csv.reader(f) if r]
    if not rows or len({len(r) for r in rows}) != 1:
        raise DataIOError(f"{path}: codebook must be a non-empty rectangular matrix")
    p = _floats(path, rows)
    if np.any(p < 0) or np.any(p >= 2 * np.pi) or not np.all(np.isfinite(p)):
        raise DataIOError(f"{path}: phases must lie in [0, 2pi)")
    return Codebook(p, bits=bits)


def write_pattern_csv(path, theta, phi, gain_db) -> None:
    """Re-radiation pattern; angles in radians are written as degrees."""
    rows = zip(np.degrees(np.ravel(theta)), np.degrees(np.ravel(phi)), np.ravel(gain_db))
    write_table(path, PATTERN_HEADER, rows)


def read_pattern_csv(path) -> MeasuredPattern:
    _, rows = read_table(path, PATTERN_HEADER)
    if not rows:
        raise DataIOError(f"{path}: pattern has no samples")
    a = _floats(path, rows)
    return MeasuredPattern(np.radians(a[:, 0]), np.radians(a[:, 1]), a[:, 2])


# channel impulse responses

def write_cir_csv(path, cir: Cir, times=None) -> None:
    """Combined taps at each time in ``times`` (default: the CIR time grid)."""
    times = cir.time_grid if times is None else np.atleast_1d(times)
    rows = []
    for t in times:
        delays, taps = cir.taps_at(t)
        for i, (d, g) in enumerate(zip(delays, taps)):
            flat = g.reshape(4)
            rows.append([t, i, d] + [v for c in flat for v in (c.real, c.imag)])
    write_table(path, CIR_HEADER, rows)


def read_cir_csv(path):
    """``(times, delays, taps)``; taps has shape ``(n_times, n_taps, 2, 2)``."""
    _, rows = read_table(path, CIR_HEADER)
    a = _floats(path, rows)
    if len(a) == 0:
        return np.zeros(0), np.zeros(0), np.zeros((0, 0, 2, 2), complex)
    times = np.unique(a[:, 0])
    n_taps = int(a[:, 1].max()) + 1
    if len(a) != len(times) * n_taps:
        raise DataIOError(f"{path}: every time must list the same taps")
    order = np.lexsort((a[:, 1], a[:, 0]))
    a = a[order]
    delays = a[:n_taps, 2]
    g = a[:, 3::2] + 1j * a[:, 4::2]
    return times, delays, g.reshape(len(times), n_taps, 2, 2)


# radar

def write_crlb_csv(path, rows: Sequence[dict]) -> None:
    write_table(path, CRLB_HEADER, ([r[k] for k in CRLB_HEADER] for r in rows))


def read_crlb_csv(path) -> List[dict]:
    _, rows = read_table(path, CRLB_HEADER)
    return [dict(zip(CRLB_HEADER, map(float, r))) for r in rows]


def frame_to_dict(frame: Frame) -> dict:
    pts = [{"x": p.x, "y": p.y, "z": p.z, "az": p.azimuth, "snr": p.snr, "v": p.velocity} for p in frame.points]
    return {"t": float(frame.timestamp), "points": pts}


def frame_from_dict(d: dict) -> Frame:
    pts = d.get("points", [])
    return Frame(float(d["t"]), [(p["x"], p["y"], p["z"]) for p in pts], [p["az"] for p in pts],
                 [p["snr"] for p in pts], [p["v"] for p in pts])


def write_frames_jsonl(path, frames: Iterable[Frame]) -> None:
    with _open(path, "w") as f:
        for fr in frames:
            f.write(json.dumps(frame_to_dict(fr), separators=(",", ":")) + "\n")


def read_frames_jsonl(path) -> List[Frame]:
    out = []
    with _open(path, "r") as f:
        for i, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                out.append(frame_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataIOError(f"{path}:{i}: bad frame ({exc})") from exc
    return out


def track_rows(steps: Iterable[TrackStep]) -> List[list]:
    rows = []
    for s in steps:
        if s.state.initialized:
            th, ph, r = s.state.x[:, 0]
            rows.append([s.timestamp, np.degrees(th), np.degrees(ph), r, -1 if s.index is None else s.index, s.updated])
        else:
            rows.append([s.timestamp, float("nan"), float("nan"), float("nan"), -1, False])
    return rows


def write_track_csv(path, steps: Iterable[TrackStep]) -> None:
    """Tracking trace; ``index`` is -1 before the first confirmation, angles are nan before the first fix."""
    write_table(path, TRACK_HEADER, track_rows(steps))


def read_track_csv(path) -> List[dict]:
    _, rows = read_table(path, TRACK_HEADER)
    out = []
    for r in rows:
        out.append({"t_s": float(r[0]), "theta_deg": float(r[1]), "phi_deg": float(r[2]), "r_m": float(r[3]),
                    "index": int(r[4]), "updated": r[5] == "1"})
    return out


# metrics reports

def write_metrics_csv(path, rows: Sequence[dict]) -> None:
    """Channel-statistics table; the ``fit`` column holds compact JSON (empty when no fit)."""
    extra = sorted({k for r in rows for k in r} - set(METRICS_COLUMNS))
    header = METRICS_COLUMNS + extra
    with _open(path, "w") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            cells = []
            for k in header:
                v = r.get(k)
                if k == "fit":
                    cells.append("" if v is None else json.dumps(_jsonable(v), sort_keys=True))
                elif isinstance(v, str):
                    cells.append(v)
                else:
                    cells.append(_fmt(v))
            w.writerow(cells)


def read_metrics_csv(path) -> List[dict]:
    header, rows = read_table(path)
    if header[: len(METRICS_COLUMNS)] != METRICS_COLUMNS:
        raise DataIOError(f"{path}: not a metrics report")
    out = []
    for r in rows:
        d = {}
        for k, v in zip(header, r):
            if k == "fit":
                d[k] = json.loads(v) if v else None
            elif k in ("ris",):
                d[k] = v
            elif k == "has_vlos":
                d[k] = v == "1"
            else:
                d[k] = float(v) if v != "" else None
        out.append(d)
    return out
