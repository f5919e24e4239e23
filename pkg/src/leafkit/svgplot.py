"""Dependency-free SVG figures.

Text output keeps reports deterministic and testable: coordinates are
formatted to fixed precision, colors come from an HSL ramp over the filter
index, and every figure is a single self-contained <svg> element.
"""

from __future__ import annotations

import numpy as np

from .filterbank import GaborFilterbank, analytic_freq_response

WIDTH, HEIGHT = 900, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 50
PLOT_W = WIDTH - MARGIN_L - MARGIN_R
PLOT_H = HEIGHT - MARGIN_T - MARGIN_B


def _fc(v) -> str:
    return f"{v:.2f}"


def _color(i: int, n: int, sat=70, light=40) -> str:
    hue = int(300 * i / max(1, n - 1))
    return f"hsl({hue},{sat}%,{light}%)"


class _Canvas:
    def __init__(self, title, xlabel, ylabel, x_range, y_range):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<title>{title}</title>',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16" '
            f'font-family="sans-serif">{title}</text>',
            f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12" '
            f'font-family="sans-serif">{xlabel}</text>',
            f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
            f'font-family="sans-serif" transform="rotate(-90 16 {HEIGHT / 2})">{ylabel}</text>',
            f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{PLOT_W}" height="{PLOT_H}" '
            f'fill="none" stroke="black"/>',
        ]
        self._ticks()

    def px(self, x):
        span = self.x1 - self.x0 or 1.0
        return MARGIN_L + PLOT_W * (x - self.x0) / span

    def py(self, y):
        span = self.y1 - self.y0 or 1.0
        return MARGIN_T + PLOT_H * (1.0 - (y - self.y0) / span)

    def _ticks(self, n=5):
        for i in range(n + 1):
            xv = self.x0 + (self.x1 - self.x0) * i / n
            yv = self.y0 + (self.y1 - self.y0) * i / n
            xp, yp = self.px(xv), self.py(yv)
            self.parts.append(
                f'<text x="{_fc(xp)}" y="{HEIGHT - MARGIN_B + 16}" text-anchor="middle" '
                f'font-size="10" font-family="sans-serif">{xv:.4g}</text>'
            )
            self.parts.append(
                f'<text x="{MARGIN_L - 6}" y="{_fc(yp + 3)}" text-anchor="end" '
                f'font-size="10" font-family="sans-serif">{yv:.4g}</text>'
            )

    def polyline(self, xs, ys, stroke, width=1.0, opacity=1.0):
        pts = " ".join(f"{_fc(self.px(x))},{_fc(self.py(y))}" for x, y in zip(xs, ys))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
            f'stroke-width="{width}" opacity="{opacity}"/>'
        )

    def band(self, x_lo, x_hi, fill, opacity=0.15):
        x_lo, x_hi = max(x_lo, self.x0), min(x_hi, self.x1)
        if x_hi <= x_lo:
            return
        self.parts.append(
            f'<rect x="{_fc(self.px(x_lo))}" y="{MARGIN_T}" '
            f'width="{_fc(self.px(x_hi) - self.px(x_lo))}" height="{PLOT_H}" '
            f'fill="{fill}" opacity="{opacity}"/>'
        )

    def vline(self, x, stroke, width=1.0):
        xp = _fc(self.px(x))
        self.parts.append(
            f'<line x1="{xp}" y1="{MARGIN_T}" x2="{xp}" y2="{MARGIN_T + PLOT_H}" '
            f'stroke="{stroke}" stroke-width="{width}"/>'
        )

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def filterbank_figure(fb: GaborFilterbank, fs_hz: int, title: str, grid_points=512) -> str:
    """Per-filter response curves with centre lines and FWHM shading."""
    canvas = _Canvas(title, "frequency (Hz)", "normalized response",
                     (0.0, fs_hz / 2.0), (0.0, 1.05))
    grid = np.linspace(0.0, 1.0, grid_points)
    hz = grid * fs_hz / 2.0
    centres = fb.centre_hz(fs_hz)
    fwhm = fb.fwhm_hz(fs_hz)
    for i in range(fb.n_filters):
        color = _color(i, fb.n_filters)
        canvas.band(centres[i] - fwhm[i] / 2.0, centres[i] + fwhm[i] / 2.0, color)
        canvas.vline(centres[i], color, width=0.8)
        canvas.polyline(hz, analytic_freq_response(fb.eta[i], fb.sigma_bw[i], grid), color)
    return canvas.render()


def response_overlay_figure(before: GaborFilterbank, after: GaborFilterbank,
                            fs_hz: int, title: str, grid_points=512) -> str:
    """Initial responses in gray under the learned responses in color."""
    canvas = _Canvas(title, "frequency (Hz)", "normalized response",
                     (0.0, fs_hz / 2.0), (0.0, 1.05))
    grid = np.linspace(0.0, 1.0, grid_points)
    hz = grid * fs_hz / 2.0
    for i in range(before.n_filters):
        canvas.polyline(hz, analytic_freq_response(before.eta[i], before.sigma_bw[i], grid),
                        "#999999", opacity=0.6)
    for i in range(after.n_filters):
        canvas.polyline(hz, analytic_freq_response(after.eta[i], after.sigma_bw[i], grid),
                        _color(i, after.n_filters))
    return canvas.render()


def jsd_trajectory_figure(distances: np.ndarray, title: str) -> str:
    """One line per filter: Jensen-Shannon distance from epoch 0 over epochs."""
    epochs, n_filters = distances.shape
    top = max(1.0, float(distances.max()) * 1.05)
    canvas = _Canvas(title, "epoch", "JSD from initialization",
                     (0.0, max(1, epochs - 1)), (0.0, top))
    xs = np.arange(epochs)
    for k in range(n_filters):
        canvas.polyline(xs, distances[:, k], _color(k, n_filters), opacity=0.8)
    return canvas.render()
