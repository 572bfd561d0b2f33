"""File formats: ``.fld`` snapshots, trajectory manifests, study configs, CSV/JSON/SVG reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidFieldError
from .spectral_grid import Field, SpectralGrid

FLD_FORMAT = "dmnls-fld"
FLD_VERSION = 1

CSV_COLUMNS = ["study", "eps", "T_eps", "dt", "error", "slope_floor", "mass_drift", "tail_frac", "runtime_s", "status"]


# ---------------------------------------------------------------- .fld files

def save_field(path, f: Field, t=0.0, eps=None, description=""):
    """One JSON header line, then little-endian interleaved re/im float64 samples (row-major)."""
    header = {
        "format": FLD_FORMAT,
        "version": FLD_VERSION,
        "d": f.grid.d,
        "N": f.grid.n,
        "L": f.grid.L,
        "t": float(t),
        "eps": None if eps is None else float(eps),
        "description": description,
    }
    data = np.ascontiguousarray(f.values, dtype="<c16").tobytes(order="C")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(data)
    return path


def load_field(path):
    """Return ``(Field, header)``."""
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvalidFieldError(f"{path}: unreadable header") from exc
        grid = SpectralGrid(int(header["d"]), int(header["N"]), float(header["L"]))
        raw = fh.read()
    if len(raw) != 16 * grid.size:
        raise InvalidFieldError(f"{path}: {len(raw)} payload bytes, expected {16 * grid.size}")
    values = np.frombuffer(raw, dtype="<c16").reshape(grid.shape)
    return Field(grid, values.astype(np.complex128)), header


def write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def save_ground_state(path, Q):
    """``.fld`` profile plus a ``.json`` sidecar with residuals and solve metadata."""
    path = Path(path)
    save_field(path, Q.profile, description="ground state Q")
    sidecar = path.with_suffix(".json")
    write_json(sidecar, Q.metadata())
    return path, sidecar


def load_ground_state(path):
    from .ground_state import profile_from_field

    f, _ = load_field(path)
    sidecar = Path(path).with_suffix(".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    return profile_from_field(f, tol=meta.get("tol", math.inf), iterations=meta.get("iterations", 0))


def save_trajectory(out_dir, traj):
    """Write one ``.fld`` per snapshot and ``manifest.json``; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for k in range(len(traj)):
        p = out_dir / f"snap_{k:05d}.fld"
        save_field(p, traj.field(k), t=traj.times[k], eps=traj.eps, description=f"snapshot {k}")
        files.append(p)
    manifest = traj.manifest()
    manifest["snapshots"] = [p.name for p in files]
    files.append(write_json(out_dir / "manifest.json", manifest))
    return files


# ---------------------------------------------------------------- config

def _parse_eps_entry(text):
    text = text.strip()
    if ".." in text:
        lo, hi = (_parse_eps_entry(t) for t in text.split(".."))
        k_lo, k_hi = -math.log2(lo[0]), -math.log2(hi[0])
        if abs(k_lo - round(k_lo)) > 1e-12 or abs(k_hi - round(k_hi)) > 1e-12:
            raise ValueError("ranges must have dyadic endpoints")
        step = 1 if k_hi >= k_lo else -1
        return [2.0 ** -k for k in range(round(k_lo), round(k_hi) + step, step)]
    if text.startswith("2^"):
        return [2.0 ** float(text[2:])]
    return [float(text)]


def parse_eps_list(text):
    out = []
    for part in text.split(","):
        if part.strip():
            out.extend(_parse_eps_entry(part))
    return out


def parse_config_text(text):
    """Flat ``key = value`` lines; ``#`` comments; ``segment = length,value`` may repeat."""
    raw = {}
    segments = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key == "segment":
            try:
                length, val = (float(v) for v in value.split(","))
            except ValueError:
                raise ConfigError("segment", f"expected 'length,value', got {value!r}") from None
            segments.append((length, val))
            continue
        if key in raw:
            raise ConfigError(key, "given more than once")
        raw[key] = value
    if segments:
        raw["segment"] = segments
    return raw


def config_hash(canonical: dict):
    """SHA-256 of the canonical JSON form; insensitive to key order in the source file."""
    blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------- reports

def fmt17(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def csv_text(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([fmt17(row.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(path, rows):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(rows))
    return path


def loglog_svg(eps, err, slope=None, intercept=None, title="", width=480, height=360):
    """Minimal log-log scatter of ``err`` against ``eps`` with an optional fitted line."""
    pts = [(e, v) for e, v in zip(eps, err) if e > 0 and v is not None and v > 0]
    pad = 50
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{_xml(title)}</text>',
    ]
    if pts:
        lx = [math.log10(e) for e, _ in pts]
        ly = [math.log10(v) for _, v in pts]
        x0, x1 = min(lx), max(lx)
        y0, y1 = min(ly), max(ly)
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5

        def sx(v):
            return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

        def sy(v):
            return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

        lines.append(f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>')
        lines.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>')
        lines.append(f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">log10 eps</text>')
        lines.append(f'<text x="14" y="{height / 2:.1f}" font-size="12" transform="rotate(-90 14 {height / 2:.1f})" '
                     'text-anchor="middle">log10 error</text>')
        for v, anchor, xpos in ((x0, "start", sx(x0)), (x1, "end", sx(x1))):
            lines.append(f'<text x="{xpos:.1f}" y="{height - pad + 16}" text-anchor="{anchor}" font-size="10">{v:.2f}</text>')
        for v in (y0, y1):
            lines.append(f'<text x="{pad - 4}" y="{sy(v):.1f}" text-anchor="end" font-size="10">{v:.2f}</text>')
        poly = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(lx, ly))
        lines.append(f'<polyline points="{poly}" fill="none" stroke="steelblue" stroke-width="1.5"/>')
        for a, b in zip(lx, ly):
            lines.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="steelblue"/>')
        if slope is not None and intercept is not None:
            # fit is in natural logs: ln err = slope ln eps + intercept
            fy = [(slope * v * math.log(10) + intercept) / math.log(10) for v in (x0, x1)]
            lines.append(f'<line x1="{sx(x0):.2f}" y1="{sy(fy[0]):.2f}" x2="{sx(x1):.2f}" y2="{sy(fy[1]):.2f}" '
                         'stroke="firebrick" stroke-dasharray="5,3"/>')
            lines.append(f'<text x="{width - pad}" y="{pad - 8}" text-anchor="end" font-size="12">'
                         f'slope {slope:.4f}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _xml(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
