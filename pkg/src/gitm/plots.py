"""Minimal SVG line charts for training curves and sweep tables."""

from __future__ import annotations

import csv
import math
import warnings
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

__all__ = ["line_chart_svg", "read_table", "emit_plots", "MissingColumnError", "PLOT_FILES"]

PLOT_FILES = ("training_losses.svg", "training_scores.svg", "security.svg", "network.svg")

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")
_W, _H = 640, 400
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 170, 40, 50


class MissingColumnError(ValueError):
    pass


def read_table(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        return list(reader.fieldnames or []), rows


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(step))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= step), default=step)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * max(1.0, abs(hi)):
        out.append(round(v, 12))
        v += step
    return out


def line_chart_svg(
    x: Sequence[float],
    series: dict[str, Sequence[float]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
) -> str:
    """One polyline per series over a shared x axis; empty input gives bare axes."""
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM
    values = [v for ys in series.values() for v in ys if math.isfinite(v)]
    xs = [float(v) for v in x]
    if xs and values:
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(values), max(values)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return _LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return _TOP + ph - (v - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<g class="axes" stroke="black" fill="none">'
        f'<line x1="{_LEFT}" y1="{_TOP + ph}" x2="{_LEFT + pw}" y2="{_TOP + ph}"/>'
        f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_TOP + ph}"/></g>',
    ]
    for t in _ticks(x0, x1):
        parts.append(
            f'<text x="{px(t):.1f}" y="{_TOP + ph + 18}" text-anchor="middle" font-size="11">{t:g}</text>'
        )
    for t in _ticks(y0, y1):
        parts.append(f'<text x="{_LEFT - 6}" y="{py(t) + 4:.1f}" text-anchor="end" font-size="11">{t:g}</text>')
    parts.append(
        f'<text x="{_LEFT + pw / 2:.1f}" y="{_H - 10}" text-anchor="middle" font-size="12">{escape(x_label)}</text>'
    )
    parts.append(
        f'<text x="16" y="{_TOP + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_TOP + ph / 2:.1f})">{escape(y_label)}</text>'
    )
    for i, (name, ys) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(
            f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys) if math.isfinite(b)
        )
        if not pts:
            continue
        parts.append(
            f'<polyline class="series" data-name="{escape(name)}" fill="none" stroke="{color}" '
            f'stroke-width="1.5" points="{pts}"/>'
        )
        ly = _TOP + 14 + 18 * i
        parts.append(
            f'<line x1="{_W - _RIGHT + 12}" y1="{ly - 4}" x2="{_W - _RIGHT + 32}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{_W - _RIGHT + 38}" y="{ly}" font-size="11">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _columns(header, rows, x_col, y_cols, source):
    missing = [c for c in (x_col, *y_cols) if c not in header]
    if missing:
        raise MissingColumnError(f"{source}: missing columns {', '.join(missing)}")
    x = [float(r[x_col]) for r in rows]
    return x, {c: [float(r[c]) for r in rows] for c in y_cols}


def _chart(path, header, rows, x_col, y_cols, title, x_label, y_label, source):
    if not rows:
        warnings.warn(f"{source} has no rows; writing empty axes", stacklevel=3)
    x, series = _columns(header, rows, x_col, y_cols, source)
    Path(path).write_text(line_chart_svg(x, series, title, x_label, y_label))


def emit_plots(out_dir, training_csv=None, sweep_csv=None) -> list[Path]:
    """Write the four standard charts for whichever tables are given."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if training_csv is not None:
        header, rows = read_table(training_csv)
        src = str(training_csv)
        losses = ["d_t_loss", "d_l_loss", "generator_loss", "encoder_loss", "recon_loss"]
        _chart(out / PLOT_FILES[0], header, rows, "epoch", losses, "Training losses", "epoch", "loss", src)
        _chart(out / PLOT_FILES[1], header, rows, "epoch", ["real_score", "fake_score"],
               "Discriminator scores", "epoch", "mean realness score", src)
        written += [out / PLOT_FILES[0], out / PLOT_FILES[1]]
    if sweep_csv is not None:
        header, rows = read_table(sweep_csv)
        src = str(sweep_csv)
        if "seed" in header:
            rows = [r for r in rows if r["seed"] == "mean"]
        _chart(out / PLOT_FILES[2], header, rows, "malicious_pct", ["security_rate", "total_attacks"],
               "Security", "malicious devices (%)", "value", src)
        _chart(out / PLOT_FILES[3], header, rows, "malicious_pct", ["hnd", "throughput"],
               "Network performance", "malicious devices (%)", "value", src)
        written += [out / PLOT_FILES[2], out / PLOT_FILES[3]]
    return written
