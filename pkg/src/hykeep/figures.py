"""Plain SVG figures in the (bearing, distance) plane."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

TWO_PI = 2 * math.pi

_FILL = {
    "R1": "#f6e8c3",
    "R2": "#d8e7f3",
    "R3": "#e6dcef",
    "R4": "#b58bc8",
    "interval": "#bdbdbd",
    "inner": "#6a3d9a",
}


class _Canvas:
    def __init__(self, width, height, d_max, margin=44):
        self.w, self.h, self.m = width, height, margin
        self.d_max = d_max
        self.items = []

    def px(self, phi, d):
        x = self.m + (self.w - 2 * self.m) * phi / TWO_PI
        y = self.h - self.m - (self.h - 2 * self.m) * d / self.d_max
        return x, y

    def polygon(self, pts, fill, opacity=1.0):
        s = " ".join(f"{x:.2f},{y:.2f}" for x, y in (self.px(p, d) for p, d in pts))
        self.items.append(f'<polygon points="{s}" fill="{fill}" fill-opacity="{opacity}" stroke="none"/>')

    def polyline(self, pts, stroke, width=1.2):
        if len(pts) < 2:
            return
        s = " ".join(f"{x:.2f},{y:.2f}" for x, y in (self.px(p, d) for p, d in pts))
        self.items.append(f'<polyline points="{s}" fill="none" stroke="{stroke}" stroke-width="{width}"/>')

    def text(self, phi, d, s, size=11, anchor="middle"):
        x, y = self.px(phi, d)
        self.items.append(f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" text-anchor="{anchor}" '
                          f'font-family="sans-serif">{escape(s)}</text>')

    def axes(self):
        x0, y0 = self.px(0, 0)
        x1, _ = self.px(TWO_PI, 0)
        _, y1 = self.px(0, self.d_max)
        self.items.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
        self.items.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
        for k, lab in enumerate(["0", "π/2", "π", "3π/2", "2π"]):
            x, _ = self.px(k * math.pi / 2, 0)
            self.items.append(f'<text x="{x:.1f}" y="{y0 + 16:.1f}" font-size="11" text-anchor="middle" '
                              f'font-family="sans-serif">{lab}</text>')
        step = 1 if self.d_max <= 10 else max(1, round(self.d_max / 8))
        d = 0
        while d <= self.d_max + 1e-9:
            _, y = self.px(0, d)
            self.items.append(f'<text x="{x0 - 6:.1f}" y="{y + 4:.1f}" font-size="11" text-anchor="end" '
                              f'font-family="sans-serif">{d:g}</text>')
            d += step
        self.text(math.pi, -self.d_max * 0.12, "φ")
        self.items.append(f'<text x="{x0 - 30:.1f}" y="{(y0 + y1) / 2:.1f}" font-size="12" '
                          f'font-family="sans-serif">d</text>')

    def render(self):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h}" '
                f'viewBox="0 0 {self.w} {self.h}">')
        return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *self.items, "</svg>"]) + "\n"


def _v_boundary(n=400):
    """Upper boundary d = -2 sin(phi) of V <= 0 over [pi, 2 pi]."""
    phis = np.linspace(math.pi, TWO_PI, n)
    return [(p, max(0.0, -2 * math.sin(p))) for p in phis]


def _sublevel(c, n=400):
    """Polygon of d^2 + 2 d sin(phi) <= c for c < 0 (an annular lens)."""
    upper, lower = [], []
    for p in np.linspace(math.pi, TWO_PI, n):
        s = math.sin(p)
        disc = s * s + c
        if disc < 0:
            continue
        r = math.sqrt(disc)
        upper.append((p, -s + r))
        lower.append((p, -s - r))
    return upper + lower[::-1]


def _shade_regions(cv: _Canvas):
    dm = cv.d_max
    cv.polygon([(0, 0), (math.pi / 4, 0), (math.pi / 4, dm), (0, dm)], _FILL["R1"])
    cv.polygon([(math.pi / 4, 0), (7 * math.pi / 4, 0), (7 * math.pi / 4, dm), (math.pi / 4, dm)], _FILL["R2"])
    cv.polygon([(7 * math.pi / 4, 0), (TWO_PI, 0), (TWO_PI, dm), (7 * math.pi / 4, dm)], _FILL["R3"])
    cv.polygon([(math.pi, 0)] + _v_boundary() + [(TWO_PI, 0)], _FILL["R4"], 0.85)
    for lab, (p, d) in {"①": (math.pi / 8, dm * 0.9), "②": (math.pi, dm * 0.9),
                        "③": (15 * math.pi / 8, dm * 0.9), "④": (3 * math.pi / 2, 0.5)}.items():
        cv.text(p, d, lab, size=14)


def _split_wraps(phi, d):
    """Polyline pieces of (phi mod 2 pi, d), broken where phi wraps."""
    pm = np.mod(phi, TWO_PI)
    pieces, cur = [], []
    for i in range(len(pm)):
        if cur and abs(pm[i] - cur[-1][0]) > math.pi:
            pieces.append(cur)
            cur = []
        cur.append((float(pm[i]), float(d[i])))
    if cur:
        pieces.append(cur)
    return pieces


def phase_portrait_svg(trajectories, width=720, height=400, d_max=None, stride=None) -> str:
    colors = ["#b2182b", "#2166ac", "#1b7837", "#e08214", "#542788"]
    if d_max is None:
        d_max = 8.0
        for tr in trajectories:
            d_max = max(d_max, float(np.max(tr.col("d"))) * 1.05)
    cv = _Canvas(width, height, d_max)
    _shade_regions(cv)
    for k, tr in enumerate(trajectories):
        n = len(tr.t)
        st = stride or max(1, n // 4000)
        phi, d = tr.col("phi")[::st], tr.col("d")[::st]
        for piece in _split_wraps(phi, d):
            cv.polyline([(p, min(x, d_max)) for p, x in piece], colors[k % len(colors)])
    cv.axes()
    return cv.render()


def interval_method_polygons(pi_val=math.pi):
    """Polygons of the three-clause interval-method region in the plane."""
    tw = TWO_PI
    polys = [
        [(0, 0), (tw, 0), (tw, 2), (0, 2)],
        [(0, 0), (pi_val / 6, 0), (pi_val / 6, 7.6), (0, 7.6)],
        [(7 * pi_val / 4, 0), (tw, 0), (tw, 7.6), (7 * pi_val / 4, 7.6)],
    ]
    # third clause: 2 <= d <= 7.6 and d <= (112/pi * phi - 6)/25 on [pi/2, 7pi/4]
    pts = []
    for p in np.linspace(pi_val / 2, 7 * pi_val / 4, 200):
        top = min(7.6, (112 / pi_val * p - 6) / 25)
        if top >= 2:
            pts.append((p, top))
    if pts:
        polys.append([(pts[0][0], 2.0)] + pts + [(pts[-1][0], 2.0)])
    return polys


def region_overlay_svg(width=720, height=400, d_max=8.0) -> str:
    """Interval-method region, V <= 0 and V <= -1/2 on one canvas."""
    cv = _Canvas(width, height, d_max)
    for poly in interval_method_polygons():
        cv.polygon(poly, _FILL["interval"])
    cv.polygon([(math.pi, 0)] + _v_boundary() + [(TWO_PI, 0)], _FILL["R4"], 0.9)
    cv.polygon(_sublevel(-0.5), _FILL["inner"], 0.9)
    cv.text(TWO_PI, d_max * 1.03, "gray: interval region; purple: V ≤ 0; dark: V ≤ -1/2", size=11, anchor="end")
    cv.axes()
    return cv.render()
