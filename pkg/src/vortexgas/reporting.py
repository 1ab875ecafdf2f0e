"""CSV, JSON manifest, SVG plot and markdown summary writers."""

from __future__ import annotations

import csv
import json
import math
import os
import subprocess
import tempfile
from pathlib import Path
from xml.sax.saxutils import escape

from . import __version__
from .errors import ManifestMissing

TOOL = f"vortexgas {__version__}"

# Checks grouped under the mathematical statement each one exercises.
STATEMENTS = {
    "splitting-identity": "Green function = smooth part + Yukawa part",
    "l2-moment-slope": "Field moments: E||F_m||^2 grows like log(m)/2pi",
    "exp-moment-slope": "Field moments: E exp(-a||F_m||^2) decays like m^(-a/2pi)",
    "exp-moment-mc": "Field moments: closed-form exponential moment",
    "exp-moment-diff": "Field moments: exponential moment differences",
    "even-power-n1": "Exponential integrals: even-power inequality",
    "even-power-n2": "Exponential integrals: even-power inequality",
    "even-power-n3": "Exponential integrals: even-power inequality",
    "even-power-closed-form": "Exponential integrals: even-power inequality",
    "complex-taylor": "Exponential integrals: complex Taylor bound",
    "proof-step": "Remainder bound: |E_j - W| control",
    "sine-gordon": "Sine-Gordon transformation of the smooth partition function",
    "expansion-identity": "Remainder bound: telescoping expansion",
    "remainder-decay": "Remainder bound: decay of E|R_k| in N",
    "regular-partition": "Smooth-part partition function bounded in N",
    "yukawa-partition": "Yukawa partition function close to 1",
    "jensen": "Z >= 1 by Jensen",
    "pair-partition-oracle": "Two-vortex partition function by quadrature",
    "rate": "Decorrelation rate of correlation functions",
    "rate-control": "Rate experiment noise control at beta = 0",
}


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows) -> Path:
    """RFC 4180 CSV with CRLF line ends and round-trip float formatting."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c, "")) for c in columns])
    return path


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).resolve().parent)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if hasattr(x, "item"):
        return _json_safe(x.item())
    return x


def write_manifest(path, manifest: dict) -> Path:
    """Write pretty-printed JSON atomically (temp file + rename)."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".manifest-", suffix=".json")
    with os.fdopen(fd, "w") as fh:
        json.dump(_json_safe(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def svg_loglog(path, series, title: str = "", xlabel: str = "N", ylabel: str = "",
               fit=None, guide_slope: float | None = -0.5, width: int = 480,
               height: int = 360) -> Path:
    """Log-log scatter with error bars, an optional fitted line
    ``(slope, intercept)`` in natural logs, and a dashed reference slope."""
    pts = [(x, y, s) for x, y, s in series if x > 0 and y > 0]
    path = Path(path)
    ml, mr, mt, mb = 60, 20, 30, 45
    if not pts:
        xs, ys = [1.0, 10.0], [1.0, 10.0]
    else:
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts] + [max(p[1] - p[2], p[1] * 0.2) for p in pts] + \
             [p[1] + p[2] for p in pts]
    lx0, lx1 = math.log10(min(xs)) - 0.1, math.log10(max(xs)) + 0.1
    ly0, ly1 = math.log10(min(ys)) - 0.2, math.log10(max(ys)) + 0.2

    def X(x):
        return ml + (math.log10(x) - lx0) / (lx1 - lx0) * (width - ml - mr)

    def Y(y):
        return height - mb - (math.log10(y) - ly0) / (ly1 - ly0) * (height - mt - mb)

    out = [f'<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
           f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 14 {height / 2:.1f})">{escape(ylabel)}</text>']
    for e in range(math.floor(lx0), math.ceil(lx1) + 1):
        for mnt in (1, 2, 5):
            v = mnt * 10.0**e
            if lx0 <= math.log10(v) <= lx1:
                out.append(f'<line x1="{X(v):.1f}" y1="{height - mb}" x2="{X(v):.1f}" '
                           f'y2="{height - mb + 5}" stroke="black"/>')
                out.append(f'<text x="{X(v):.1f}" y="{height - mb + 17}" text-anchor="middle" '
                           f'font-size="10">{v:g}</text>')
    for e in range(math.floor(ly0), math.ceil(ly1) + 1):
        v = 10.0**e
        if ly0 <= e <= ly1:
            out.append(f'<line x1="{ml - 5}" y1="{Y(v):.1f}" x2="{ml}" y2="{Y(v):.1f}" stroke="black"/>')
            out.append(f'<text x="{ml - 7}" y="{Y(v) + 3:.1f}" text-anchor="end" '
                       f'font-size="10">1e{e}</text>')
    for x, y, s in pts:
        lo = max(y - s, 10 ** ly0)
        hi = min(y + s, 10 ** ly1)
        out.append(f'<line x1="{X(x):.1f}" y1="{Y(lo):.1f}" x2="{X(x):.1f}" y2="{Y(hi):.1f}" '
                   f'stroke="steelblue"/>')
        out.append(f'<circle cx="{X(x):.1f}" cy="{Y(y):.1f}" r="3.5" fill="steelblue"/>')
    x0, x1 = 10 ** (lx0 + 0.1), 10 ** (lx1 - 0.1)
    if fit is not None:
        slope, icpt = fit
        y0, y1 = math.exp(icpt) * x0**slope, math.exp(icpt) * x1**slope
        out.append(f'<line x1="{X(x0):.1f}" y1="{Y(y0):.1f}" x2="{X(x1):.1f}" y2="{Y(y1):.1f}" '
                   f'stroke="crimson"/>')
        out.append(f'<text x="{width - mr}" y="{mt + 12}" text-anchor="end" font-size="11" '
                   f'fill="crimson">fitted slope {slope:.3f}</text>')
    if guide_slope is not None and pts:
        xa, ya = pts[0][0], pts[0][1]
        yb = ya * (x1 / xa) ** guide_slope
        out.append(f'<line x1="{X(xa):.1f}" y1="{Y(ya):.1f}" x2="{X(x1):.1f}" y2="{Y(yb):.1f}" '
                   f'stroke="gray" stroke-dasharray="5,4"/>')
        out.append(f'<text x="{width - mr}" y="{mt + 26}" text-anchor="end" font-size="11" '
                   f'fill="gray">reference slope {guide_slope:g}</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")
    return path


def report(manifest_paths) -> str:
    """Markdown table merging the verdicts of several run manifests."""
    paths = [Path(p) for p in manifest_paths]
    if not paths:
        raise ManifestMissing("no manifests given")
    lines = ["| check | statement | status | worst margin | experiment |",
             "|---|---|---|---|---|"]
    n_fail = 0
    for p in paths:
        if not p.is_file():
            raise ManifestMissing(str(p))
        try:
            man = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ManifestMissing(f"{p}: not a manifest ({exc})") from exc
        for v in man.get("verdicts", []):
            ok = bool(v.get("passed"))
            n_fail += not ok
            name = v.get("check", "?")
            status = "pass" if ok else "**FAIL**"
            lines.append(f"| {name} | {STATEMENTS.get(name, 'plumbing')} | {status} | "
                         f"{v.get('worst_margin', '')} | {man.get('experiment', '?')} |")
    head = "all checks passed" if n_fail == 0 else f"{n_fail} check(s) failed"
    return f"# vortexgas run summary\n\n{head}\n\n" + "\n".join(lines) + "\n"
