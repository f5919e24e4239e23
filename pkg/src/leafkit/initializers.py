"""Filterbank initialization strategies: linear, mel, bark, random.

Centre frequencies are linearly spaced in the chosen scale (N + 2 boundary
points; the interior N are the centres, the edge points define triangle
neighbors).  Bandwidths match the full width at half maximum of the
equivalent triangular filter spanning each centre's neighbors.  The random
strategy draws centres uniformly in Hz, sorts them, and widens each filter
until its half-maximum interval reaches both neighboring centres.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SpecError
from .filterbank import GaborFilterbank, project_params
from .utils import fmt_float

MEL_SCALE_GAIN = 2595.0
MEL_BREAK_HZ = 700.0
BARK_A = 26.81       # Traunmuller bark: z = A*f/(B + f) - C
BARK_B = 1960.0
BARK_C = 0.53

KINDS = ("linear", "mel", "bark", "random")


@dataclass(frozen=True)
class InitStrategy:
    kind: str
    n_filters: int = 40
    f_min_hz: float = 60.0
    f_max_hz: float = 7800.0
    seed: int = 42  # only consumed by the random strategy; recorded always

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown init kind {self.kind!r}; expected one of {KINDS}")
        if self.n_filters < 2:
            raise SpecError("n_filters must be >= 2")
        if not (0.0 <= self.f_min_hz < self.f_max_hz):
            raise SpecError("need 0 <= f_min_hz < f_max_hz")

    def provenance(self) -> str:
        return (
            f"strategy kind={self.kind} seed={self.seed} "
            f"f_min_hz={fmt_float(self.f_min_hz)} f_max_hz={fmt_float(self.f_max_hz)} "
            f"n_filters={self.n_filters}"
        )


def hz_to_mel(f):
    return MEL_SCALE_GAIN * np.log10(1.0 + np.asarray(f, dtype=np.float64) / MEL_BREAK_HZ)


def mel_to_hz(m):
    return MEL_BREAK_HZ * (10.0 ** (np.asarray(m, dtype=np.float64) / MEL_SCALE_GAIN) - 1.0)


def hz_to_bark(f):
    f = np.asarray(f, dtype=np.float64)
    return BARK_A * f / (BARK_B + f) - BARK_C


def bark_to_hz(z):
    z = np.asarray(z, dtype=np.float64) + BARK_C
    return BARK_B * z / (BARK_A - z)


_TO_HZ = {"hz": lambda v: v, "mel": mel_to_hz, "bark": bark_to_hz}
_FROM_HZ = {"hz": lambda v: v, "mel": hz_to_mel, "bark": hz_to_bark}


def convert_frequency(value, from_scale: str, to_scale: str):
    """Convert between hz, mel (HTK) and bark (Traunmuller) scales.

    Closed-form in both directions; round trips are exact to float64
    rounding.  Scalars in, scalars out; arrays also work.
    """
    for scale in (from_scale, to_scale):
        if scale not in _TO_HZ:
            raise DomainError(f"unknown frequency scale {scale!r}")
    value = np.asarray(value, dtype=np.float64)
    lower = {"hz": 0.0, "mel": 0.0, "bark": -BARK_C}[from_scale]
    if np.any(value < lower):
        raise DomainError(f"{from_scale} value below scale minimum {lower}")
    if from_scale == "bark" and np.any(value >= BARK_A - BARK_C):
        raise DomainError("bark value at or beyond the scale asymptote")
    hz = _TO_HZ[from_scale](value)
    out = _FROM_HZ[to_scale](hz)
    return float(out) if out.ndim == 0 else out


def triangular_fwhm(f_prev_hz: float, f_center_hz: float, f_next_hz: float) -> float:
    """Half-maximum width of the triangle on [f_prev, f_next] peaked at f_center."""
    if not (f_prev_hz < f_center_hz < f_next_hz):
        raise DomainError(
            f"need f_prev < f_center < f_next, got ({f_prev_hz}, {f_center_hz}, {f_next_hz})"
        )
    return (f_next_hz - f_prev_hz) / 2.0


def fwhm_to_sigma_t(fwhm_hz, fs_hz: int):
    """Time-domain sigma (samples) whose Gaussian response has the given FWHM.

    With sigma_f = 1/(pi*sigma_t) in normalized units and
    FWHM_f = 2*sqrt(2 ln 2)*sigma_f, inverting for sigma_t gives
    sigma_t = 2*sqrt(2 ln 2) / (pi * fwhm_norm).
    """
    fwhm_hz = np.asarray(fwhm_hz, dtype=np.float64)
    if np.any(fwhm_hz <= 0):
        raise DomainError("fwhm_hz must be positive")
    fwhm_norm = fwhm_hz / (fs_hz / 2.0)
    out = 2.0 * np.sqrt(2.0 * np.log(2.0)) / (np.pi * fwhm_norm)
    return float(out) if out.ndim == 0 else out


def _scale_spaced(strategy: InitStrategy, scale: str):
    """Centres + triangle FWHMs from N+2 points equispaced in `scale`."""
    lo = convert_frequency(strategy.f_min_hz, "hz", scale)
    hi = convert_frequency(strategy.f_max_hz, "hz", scale)
    points_scale = np.linspace(lo, hi, strategy.n_filters + 2)
    points_hz = np.asarray(convert_frequency(points_scale, scale, "hz"))
    centres = points_hz[1:-1]
    fwhm = np.array(
        [
            triangular_fwhm(points_hz[i], points_hz[i + 1], points_hz[i + 2])
            for i in range(strategy.n_filters)
        ]
    )
    return centres, fwhm


def _random_centres(strategy: InitStrategy):
    """Sorted uniform centre draws; duplicate draws re-drawn with seed+1, +2, ..."""
    seed = strategy.seed
    while True:
        rng = np.random.Generator(np.random.PCG64(seed))
        centres = np.sort(rng.uniform(strategy.f_min_hz, strategy.f_max_hz, strategy.n_filters))
        if np.all(np.diff(centres) > 0):
            return centres
        seed += 1


def build_filterbank(strategy: InitStrategy, fs_hz: int, kernel_width: int) -> GaborFilterbank:
    """Materialize an initialization strategy as a feasible GaborFilterbank."""
    if strategy.f_max_hz > fs_hz / 2.0:
        raise SpecError("f_max_hz exceeds Nyquist for this sample rate")

    if strategy.kind in ("mel", "bark"):
        centres, fwhm = _scale_spaced(strategy, strategy.kind)
    elif strategy.kind == "linear":
        centres, fwhm = _scale_spaced(strategy, "hz")
    else:
        centres = _random_centres(strategy)
        gaps = np.diff(centres)
        left = np.concatenate([[gaps[0]], gaps])    # edge filters use their single gap
        right = np.concatenate([gaps, [gaps[-1]]])
        fwhm = 2.0 * np.maximum(left, right)

    eta = centres / (fs_hz / 2.0)
    sigma = np.asarray(fwhm_to_sigma_t(fwhm, fs_hz))
    fb = GaborFilterbank(eta, sigma, kernel_width)
    return project_params(fb, fs_hz)
