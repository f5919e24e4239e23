"""Parameterized complex Gabor band-pass filters.

Each filter is a complex exponential carrier under a Gaussian envelope,

    phi(t) = exp(j*pi*eta*t) * exp(-t^2 / (2 sigma^2)) / (sqrt(2*pi) * sigma)

sampled at integer t in [-(W-1)/2, (W-1)/2].  The normalized centre
frequency eta lives in [0, 1] with 1 == Nyquist (carrier advances eta*pi
radians per sample); sigma is the time-domain envelope width in samples.
The magnitude frequency response is then a Gaussian centred at eta with
width sigma_f = 1 / (pi * sigma) in the same normalized units.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ParamError, SpecError
from .utils import fmt_float

SIGMA_MIN = 2.0  # samples; keeps kernels from degenerating into aliasing deltas
_HALF_MAX = 2.0 * np.sqrt(2.0 * np.log(2.0))  # FWHM of a unit-sigma Gaussian


def sigma_max(fs_hz: int, kernel_width: int) -> float:
    """Upper clamp for the envelope width, F_s / (W + 1), read in samples."""
    return fs_hz / (kernel_width + 1.0)


@dataclass(frozen=True)
class GaborFilterbank:
    """Immutable snapshot of N filters: centre frequencies and widths."""

    eta: np.ndarray        # (N,) normalized centre frequencies, 1 == Nyquist
    sigma_bw: np.ndarray   # (N,) time-domain Gaussian widths, samples
    kernel_width: int = 401

    def __post_init__(self):
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=np.float64))
        object.__setattr__(self, "sigma_bw", np.asarray(self.sigma_bw, dtype=np.float64))
        if self.eta.ndim != 1 or self.eta.shape != self.sigma_bw.shape:
            raise SpecError("eta and sigma_bw must be equal-length vectors")
        if self.kernel_width < 3 or self.kernel_width % 2 == 0:
            raise SpecError("kernel_width must be odd and >= 3")

    @property
    def n_filters(self) -> int:
        return len(self.eta)

    def centre_hz(self, fs_hz: int) -> np.ndarray:
        return self.eta * fs_hz / 2.0

    def fwhm_hz(self, fs_hz: int) -> np.ndarray:
        """Full width at half maximum of the magnitude response, in Hz."""
        sigma_f = 1.0 / (np.pi * self.sigma_bw)
        return _HALF_MAX * sigma_f * fs_hz / 2.0


def kernel_times(kernel_width: int) -> np.ndarray:
    """Integer sample times centred on zero; kernel_width must be odd."""
    half = (kernel_width - 1) // 2
    return np.arange(-half, half + 1, dtype=np.float64)


def gabor_kernel(eta: float, sigma_bw: float, kernel_width: int) -> np.ndarray:
    """Complex Gabor kernel of length kernel_width."""
    if sigma_bw <= 0:
        raise ParamError(f"sigma_bw must be positive, got {sigma_bw}")
    t = kernel_times(kernel_width)
    envelope = np.exp(-(t**2) / (2.0 * sigma_bw**2)) / (np.sqrt(2.0 * np.pi) * sigma_bw)
    return np.exp(1j * np.pi * eta * t) * envelope


def kernel_matrix(fb: GaborFilterbank):
    """All kernels at once; returns (real, imag) arrays of shape (N, W)."""
    if np.any(fb.sigma_bw <= 0):
        raise ParamError("all sigma_bw must be positive")
    t = kernel_times(fb.kernel_width)[None, :]
    sigma = fb.sigma_bw[:, None]
    envelope = np.exp(-(t**2) / (2.0 * sigma**2)) / (np.sqrt(2.0 * np.pi) * sigma)
    carrier = np.pi * fb.eta[:, None] * t
    return np.cos(carrier) * envelope, np.sin(carrier) * envelope


def analytic_freq_response(eta, sigma_bw, grid) -> np.ndarray:
    """Closed-form magnitude envelope exp(-(f - eta)^2 / (2 sigma_f^2)).

    `grid` holds normalized frequencies in [0, 1]; the response peaks at 1
    when f == eta (no normalization beyond that).
    """
    if np.any(np.asarray(sigma_bw) <= 0):
        raise ParamError("sigma_bw must be positive")
    grid = np.asarray(grid, dtype=np.float64)
    sigma_f = 1.0 / (np.pi * np.asarray(sigma_bw, dtype=np.float64))
    return np.exp(-((grid - eta) ** 2) / (2.0 * sigma_f**2))


def numeric_freq_response(kernel: np.ndarray, n_fft: int) -> np.ndarray:
    """|DFT| of the zero-padded kernel over the nonnegative-frequency half.

    Output has n_fft // 2 + 1 bins covering [0, Nyquist]; bin k sits at
    normalized frequency 2k / n_fft.
    """
    kernel = np.asarray(kernel)
    if n_fft < len(kernel):
        raise SpecError("n_fft must be >= kernel length")
    if n_fft & (n_fft - 1):
        raise SpecError("n_fft must be a power of two")
    spectrum = np.fft.fft(kernel, n_fft)
    return np.abs(spectrum[: n_fft // 2 + 1])


def negative_frequency_energy_fraction(kernel: np.ndarray, n_fft: int) -> float:
    """Fraction of DFT energy in strictly negative-frequency bins."""
    spectrum = np.fft.fft(np.asarray(kernel), n_fft)
    energy = np.abs(spectrum) ** 2
    total = float(energy.sum())
    negative = float(energy[n_fft // 2 + 1 :].sum())
    return negative / total if total > 0 else 0.0


def project_params(fb: GaborFilterbank, fs_hz: int) -> GaborFilterbank:
    """Clamp eta to [0, 1] and sigma_bw to [SIGMA_MIN, F_s/(W+1)].

    Total function: accepts whatever an optimizer step produced.  Idempotent,
    identity on feasible points.
    """
    eta = np.clip(fb.eta, 0.0, 1.0)
    sigma = np.clip(fb.sigma_bw, SIGMA_MIN, sigma_max(fs_hz, fb.kernel_width))
    return GaborFilterbank(eta, sigma, fb.kernel_width)


def to_csv(fb: GaborFilterbank, fs_hz: int, header_comments=()) -> str:
    """Serialize to the snapshot CSV schema.

    Columns: filter_index, eta, sigma_bw, centre_hz, fwhm_hz.  Floats use
    shortest round-trip repr, so parse(to_csv(fb)) reproduces fb bitwise.
    """
    out = io.StringIO()
    for line in header_comments:
        out.write(f"# {line}\n")
    out.write(f"# kernel_width = {fb.kernel_width}\n")
    out.write(f"# sample_rate_hz = {fs_hz}\n")
    out.write("filter_index,eta,sigma_bw,centre_hz,fwhm_hz\n")
    centre = fb.centre_hz(fs_hz)
    fwhm = fb.fwhm_hz(fs_hz)
    for i in range(fb.n_filters):
        out.write(
            f"{i},{fmt_float(fb.eta[i])},{fmt_float(fb.sigma_bw[i])},"
            f"{fmt_float(centre[i])},{fmt_float(fwhm[i])}\n"
        )
    return out.getvalue()


def from_csv(text: str) -> GaborFilterbank:
    """Parse the snapshot CSV back into a filterbank."""
    kernel_width = None
    rows = []
    header_seen = False
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("kernel_width"):
                kernel_width = int(body.split("=")[1])
            continue
        if not header_seen:
            if line != "filter_index,eta,sigma_bw,centre_hz,fwhm_hz":
                raise FormatError(f"unexpected filterbank CSV header: {line!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise FormatError(f"bad filterbank CSV row: {line!r}")
        rows.append((int(parts[0]), float(parts[1]), float(parts[2])))
    if not header_seen or not rows:
        raise FormatError("filterbank CSV has no data rows")
    if kernel_width is None:
        raise FormatError("filterbank CSV missing kernel_width comment")
    rows.sort()
    eta = np.array([r[1] for r in rows])
    sigma = np.array([r[2] for r in rows])
    return GaborFilterbank(eta, sigma, kernel_width)
