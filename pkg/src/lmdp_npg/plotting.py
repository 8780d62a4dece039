"""Static three-panel SVG plots of training logs.

Panels: mean reward (with shaded 95% CI band), ln kappa, decayed-average
fitting error, all against the cumulative trajectory count (episodes x
horizon x batch).  Solid lines are curriculum schemes, dashed lines are
final-phase-only schemes, following the figure convention of the experiment
logs.  Infinite ln-kappa values are drawn as clipped markers at the panel top
with an annotation.  The writer is plain string assembly: byte-identical
output for identical inputs.
"""

from __future__ import annotations

import math
import os

from .training import TRAINLOG_COLUMNS

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

CURRICULUM_PREFIXES = ("curl", "fix_samp_curl")


class CsvSchemaError(ValueError):
    pass


def read_trainlog_csv(path) -> dict[str, list]:
    """Columns of one training log; raises with the offending columns listed."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("schema_version,"):
        raise CsvSchemaError(f"{path}: missing schema_version row")
    header = lines[1].split(",")
    expected = list(TRAINLOG_COLUMNS)
    if header != expected:
        missing = [c for c in expected if c not in header]
        extra = [c for c in header if c not in expected]
        raise CsvSchemaError(
            f"{path}: column mismatch (missing: {missing or 'none'}, unexpected: {extra or 'none'})"
        )
    cols: dict[str, list] = {c: [] for c in header}
    for ln in lines[2:]:
        cells = ln.split(",")
        if len(cells) != len(header):
            raise CsvSchemaError(f"{path}: row with {len(cells)} cells, expected {len(header)}")
        for c, cell in zip(header, cells):
            cols[c].append(cell if c == "mode" else float(cell))
    return cols


def _scheme_of(cols: dict) -> str:
    if not cols["mode"]:
        return "empty"
    return str(cols["mode"][-1]).split("/")[0]


def _is_curriculum(scheme: str) -> bool:
    return scheme.startswith(CURRICULUM_PREFIXES)


class _Panel:
    def __init__(self, x0, y0, w, h, title):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.title = title
        self.xmin = math.inf
        self.xmax = -math.inf
        self.ymin = math.inf
        self.ymax = -math.inf
        self.series = []  # (scheme, color, dashed, xs, ys, band)
        self.clipped = []  # (scheme, color, xs) for +inf values

    def add(self, scheme, color, dashed, xs, ys, band=None):
        finite = [(x, y) for x, y in zip(xs, ys) if _finite(y)]
        inf_x = [x for x, y in zip(xs, ys) if y == math.inf]
        if inf_x:
            self.clipped.append((scheme, color, inf_x))
            self.xmin = min(self.xmin, *inf_x)
            self.xmax = max(self.xmax, *inf_x)
        if finite:
            fx, fy = zip(*finite)
            self.series.append((scheme, color, dashed, fx, fy, band))
            self.xmin = min(self.xmin, *fx)
            self.xmax = max(self.xmax, *fx)
            lo = [y - b for y, b in zip(fy, band)] if band else fy
            hi = [y + b for y, b in zip(fy, band)] if band else fy
            self.ymin = min(self.ymin, *lo)
            self.ymax = max(self.ymax, *hi)

    def _finish_ranges(self):
        if not _finite(self.xmin):
            self.xmin, self.xmax = 0.0, 1.0
        if not _finite(self.ymin):
            self.ymin, self.ymax = 0.0, 1.0
        if self.xmax <= self.xmin:
            self.xmax = self.xmin + 1.0
        if self.ymax <= self.ymin:
            self.ymax = self.ymin + 1.0
        pad = 0.05 * (self.ymax - self.ymin)
        self.ymin -= pad
        self.ymax += pad

    def sx(self, x):
        return self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * self.w

    def sy(self, y):
        return self.y0 + self.h - (y - self.ymin) / (self.ymax - self.ymin) * self.h

    def render(self) -> list[str]:
        self._finish_ranges()
        out = [
            f'<rect x="{self.x0}" y="{self.y0}" width="{self.w}" height="{self.h}" '
            f'fill="none" stroke="#333" stroke-width="1"/>',
            f'<text x="{self.x0 + self.w / 2:.1f}" y="{self.y0 - 8}" text-anchor="middle" '
            f'font-size="13" font-family="sans-serif">{self.title}</text>',
        ]
        for frac in (0.0, 0.5, 1.0):
            xv = self.xmin + frac * (self.xmax - self.xmin)
            yv = self.ymin + frac * (self.ymax - self.ymin)
            out.append(
                f'<text x="{self.sx(xv):.1f}" y="{self.y0 + self.h + 14}" text-anchor="middle" '
                f'font-size="9" font-family="sans-serif">{_tick(xv)}</text>')
            out.append(
                f'<text x="{self.x0 - 4}" y="{self.sy(yv) + 3:.1f}" text-anchor="end" '
                f'font-size="9" font-family="sans-serif">{_tick(yv)}</text>')
        for scheme, color, dashed, xs, ys, band in self.series:
            if band and any(b > 0 for b in band):
                upper = [(self.sx(x), self.sy(y + b)) for x, y, b in zip(xs, ys, band)]
                lower = [(self.sx(x), self.sy(y - b)) for x, y, b in zip(xs, ys, band)]
                pts = " ".join(f"{px:.2f},{py:.2f}" for px, py in upper + lower[::-1])
                out.append(f'<polygon points="{pts}" fill="{color}" opacity="0.15" stroke="none"/>')
            if len(xs) == 1:
                out.append(
                    f'<circle cx="{self.sx(xs[0]):.2f}" cy="{self.sy(ys[0]):.2f}" r="3" '
                    f'fill="{color}"/>')
            else:
                pts = " ".join(f"{self.sx(x):.2f},{self.sy(y):.2f}" for x, y in zip(xs, ys))
                dash = ' stroke-dasharray="6,4"' if dashed else ""
                out.append(
                    f'<polyline points="{pts}" fill="none" stroke="{color}" '
                    f'stroke-width="1.5"{dash}/>')
        for scheme, color, inf_x in self.clipped:
            for x in inf_x:
                out.append(
                    f'<path d="M {self.sx(x):.2f} {self.y0 + 8} l -4 8 l 8 0 z" fill="{color}"/>')
            out.append(
                f'<text x="{self.sx(inf_x[-1]):.2f}" y="{self.y0 + 28}" text-anchor="middle" '
                f'font-size="8" font-family="sans-serif" fill="{color}">inf (clipped)</text>')
        return out


def _finite(v) -> bool:
    return isinstance(v, float) and not math.isnan(v) and not math.isinf(v) or isinstance(v, int)


def _tick(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.1e}"
    return f"{v:.3g}"


def write_combined_svg(csv_paths: list, out_path) -> None:
    """Three panels (reward, ln kappa, avg err) for any number of log CSVs."""
    panel_w, panel_h = 300, 220
    margin, gap, legend_h = 50, 40, 26
    width = margin * 2 + panel_w * 3 + gap * 2
    height = margin + 30 + panel_h + 40 + legend_h

    panels = [
        _Panel(margin, 50, panel_w, panel_h, "reward"),
        _Panel(margin + panel_w + gap, 50, panel_w, panel_h, "ln kappa"),
        _Panel(margin + 2 * (panel_w + gap), 50, panel_w, panel_h, "avg err"),
    ]
    legend = []
    for k, path in enumerate(csv_paths):
        cols = read_trainlog_csv(path)
        if not cols["iteration"]:
            continue
        scheme = _scheme_of(cols)
        color = PALETTE[k % len(PALETTE)]
        dashed = not _is_curriculum(scheme)
        xs = cols["samples_cumulative"]
        panels[0].add(scheme, color, dashed, xs, cols["reward_mean"], cols["reward_ci95"])
        panels[1].add(scheme, color, dashed, xs, cols["ln_kappa"])
        panels[2].add(scheme, color, dashed, xs, cols["avg_err"])
        legend.append((scheme, color, dashed))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="{height - legend_h - 14}" text-anchor="middle" '
        f'font-size="11" font-family="sans-serif">trajectories (episodes x horizon x batch)</text>',
    ]
    for p in panels:
        parts.extend(p.render())
    lx = margin
    ly = height - 10
    for scheme, color, dashed in legend:
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 28}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"{dash}/>')
        parts.append(
            f'<text x="{lx + 32}" y="{ly}" font-size="11" font-family="sans-serif">{scheme}</text>')
        lx += 42 + 8 * len(scheme)
    parts.append("</svg>")
    data = "\n".join(parts) + "\n"
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(data)
