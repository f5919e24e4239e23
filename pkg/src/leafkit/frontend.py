"""The frontend forward pass.

Pipeline: complex Gabor band-pass convolution, squared modulus, per-channel
Gaussian lowpass with strided decimation, then per-channel energy
normalization (PCEN):

    PCEN(t, f) = (E(t, f) / (M(t, f) + eps)^alpha + delta)^r - delta^r
    M(t, f)    = (1 - s) M(t-1, f) + s E(t, f),   M(0, f) = E(0, f)

PCEN parameters are stored unconstrained (log alpha, log delta, logit r,
logit s) so optimization is free while the mapped values stay feasible;
the boundary cases alpha = 0 / r = 1 / s = 1 used by identity tests are
reachable through infinite raw values.

Array-level functions (suffix `_array`, channel-major (B, N, T) layout) do
the work and serve the gradient engine; the public single-clip operations
wrap them in AudioClip/TFRep terms with frames laid out time-major (T, N).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .audio_io import AudioClip
from .convops import BandConvPlan
from .errors import FormatError, InputTooShortError, SpecError
from .filterbank import GaborFilterbank, kernel_matrix, kernel_times
from .utils import fmt_float

DEFAULT_EPS = 1e-6


@dataclass
class PcenParams:
    """Per-channel PCEN parameters in their unconstrained representation."""

    alpha_log: np.ndarray   # alpha = exp(alpha_log) > 0
    delta_log: np.ndarray   # delta = exp(delta_log) > 0
    r_logit: np.ndarray     # r = sigmoid(r_logit) in (0, 1]
    s_logit: np.ndarray     # s = sigmoid(s_logit) in (0, 1]
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        for name in ("alpha_log", "delta_log", "r_logit", "s_logit"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        shapes = {getattr(self, n).shape for n in ("alpha_log", "delta_log", "r_logit", "s_logit")}
        if len(shapes) != 1:
            raise SpecError("PCEN parameter vectors must share one shape")
        if self.eps <= 0:
            raise SpecError("eps must be positive")

    @property
    def alpha(self):
        return np.exp(self.alpha_log)

    @property
    def delta(self):
        return np.exp(self.delta_log)

    @property
    def r(self):
        return expit(self.r_logit)

    @property
    def s(self):
        return expit(self.s_logit)

    @classmethod
    def from_mapped(cls, alpha, delta, r, s, n_channels=None, eps=DEFAULT_EPS):
        """Build from constrained values; scalars are broadcast to n_channels."""

        def vec(v):
            v = np.asarray(v, dtype=np.float64)
            if v.ndim == 0:
                if n_channels is None:
                    raise SpecError("n_channels required for scalar PCEN values")
                v = np.full(n_channels, float(v))
            return v

        with np.errstate(divide="ignore"):
            return cls(np.log(vec(alpha)), np.log(vec(delta)), logit(vec(r)), logit(vec(s)), eps)

    @classmethod
    def default(cls, n_channels, eps=DEFAULT_EPS):
        return cls.from_mapped(0.96, 2.0, 0.5, 0.04, n_channels=n_channels, eps=eps)


@dataclass
class FrontendParams:
    """Complete trainable frontend state."""

    filterbank: GaborFilterbank
    sigma_lp: np.ndarray           # (N,) lowpass Gaussian widths, samples
    pcen: PcenParams
    stride: int = 160
    lp_width: int = 401

    def __post_init__(self):
        self.sigma_lp = np.asarray(self.sigma_lp, dtype=np.float64)
        n = self.filterbank.n_filters
        if self.sigma_lp.shape != (n,):
            raise SpecError("sigma_lp must have one entry per filter")
        if np.any(self.sigma_lp <= 0):
            raise SpecError("sigma_lp entries must be positive")
        if self.pcen.alpha_log.shape != (n,):
            raise SpecError("PCEN parameters must have one entry per filter")
        if self.stride < 1:
            raise SpecError("stride must be >= 1")
        if self.lp_width < 3 or self.lp_width % 2 == 0:
            raise SpecError("lp_width must be odd and >= 3")

    @property
    def n_filters(self):
        return self.filterbank.n_filters


@dataclass
class TFRep:
    """Time-frequency representation: frames[t, n] >= 0."""

    frames: np.ndarray
    frame_rate_hz: float

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise SpecError("TFRep frames must be a T x N matrix")

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def n_channels(self):
        return self.frames.shape[1]


def lowpass_kernels(sigma_lp: np.ndarray, lp_width: int) -> np.ndarray:
    """Gaussian lowpass kernels, one per channel, shape (N, lp_width)."""
    u = kernel_times(lp_width)[None, :]
    sigma = np.asarray(sigma_lp, dtype=np.float64)[:, None]
    return np.exp(-(u**2) / (2.0 * sigma**2)) / (np.sqrt(2.0 * np.pi) * sigma)


# ---------------------------------------------------------------------------
# array-level pipeline, (B, N, L) layout


def band_conv_plan(x: np.ndarray, fb: GaborFilterbank) -> BandConvPlan:
    if x.shape[-1] < fb.kernel_width:
        raise InputTooShortError(
            f"clip length {x.shape[-1]} < kernel width {fb.kernel_width}"
        )
    return BandConvPlan(x, fb.kernel_width)


def band_energies_array(x: np.ndarray, fb: GaborFilterbank, plan: BandConvPlan = None):
    """Complex band-pass conv + squared modulus for a batch of signals.

    x: (B, L).  Returns (z_re, z_im, energies), each (B, N, L); the z parts
    are retained for the backward pass.
    """
    plan = plan or band_conv_plan(x, fb)
    k_re, k_im = kernel_matrix(fb)
    z_re = plan.conv_same(k_re)
    z_im = plan.conv_same(k_im)
    return z_re, z_im, z_re**2 + z_im**2


def _energy_windows(energies: np.ndarray, stride: int, lp_width: int):
    """Sliding windows of the zero-padded energies at the decimation points.

    Returns a (B, N, T, P) view where window (b, n, k, j) reads
    energies[b, n, k*stride + j - half]; no data is copied beyond the pad.
    """
    half = (lp_width - 1) // 2
    padded = np.pad(energies, ((0, 0), (0, 0), (half, half)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, lp_width, axis=-1)
    return windows[:, :, ::stride, :], padded


def lowpass_downsample_array(
    energies: np.ndarray, sigma_lp: np.ndarray, stride: int, lp_width: int
) -> np.ndarray:
    """Per-channel Gaussian smoothing evaluated only at the decimation points.

    The smoothed signal is needed at T = ceil(L/stride) positions, so the
    convolution is a windowed dot product instead of a full-rate filter.
    Returns (B, N, T).
    """
    kernels = lowpass_kernels(sigma_lp, lp_width)
    windows, _ = _energy_windows(energies, stride, lp_width)
    # window index j corresponds to kernel lag half - j
    return np.einsum("bntj,nj->bnt", windows, kernels[:, ::-1])


def lowpass_backward(
    d_frames: np.ndarray, energies: np.ndarray, kernels: np.ndarray,
    stride: int, lp_width: int,
):
    """Adjoint of lowpass_downsample_array.

    Returns (d_energies, d_kernels) for upstream gradients d_frames of
    shape (B, N, T).
    """
    B, N, L = energies.shape
    half = (lp_width - 1) // 2
    rev = kernels[:, ::-1]
    windows, _ = _energy_windows(energies, stride, lp_width)
    d_rev = np.einsum("bntj,bnt->nj", windows, d_frames)
    d_kernels = d_rev[:, ::-1]

    d_padded = np.zeros((B, N, L + 2 * half))
    T = d_frames.shape[-1]
    for k in range(T):
        start = k * stride
        d_padded[:, :, start : start + lp_width] += d_frames[:, :, k, None] * rev[None, :, :]
    return d_padded[:, :, half : half + L], d_kernels


def pcen_smoother_array(frames: np.ndarray, s: np.ndarray) -> np.ndarray:
    """First-order recurrence along the last axis, M[0] = E[0].

    frames: (..., N, T); s broadcasts over channels.
    """
    T = frames.shape[-1]
    M = np.empty_like(frames)
    M[..., 0] = frames[..., 0]
    for t in range(1, T):
        M[..., t] = (1.0 - s) * M[..., t - 1] + s * frames[..., t]
    return M


def pcen_forward_array(frames: np.ndarray, p: PcenParams):
    """PCEN over (B, N, T) frames; returns (output, smoothed M)."""
    alpha = p.alpha[:, None]
    delta = p.delta[:, None]
    r = p.r[:, None]
    M = pcen_smoother_array(frames, p.s)
    gain = (M + p.eps) ** alpha
    out = (frames / gain + delta) ** r - delta**r
    return out, M


def forward_array(x: np.ndarray, fp: FrontendParams):
    """Full pipeline on a batch: (B, L) -> (B, N, ceil(L/stride))."""
    _, _, energies = band_energies_array(x, fp.filterbank)
    decimated = lowpass_downsample_array(energies, fp.sigma_lp, fp.stride, fp.lp_width)
    out, _ = pcen_forward_array(decimated, fp.pcen)
    return out


# ---------------------------------------------------------------------------
# single-clip operations in AudioClip / TFRep terms


def band_energies(clip: AudioClip, fb: GaborFilterbank) -> TFRep:
    """Squared modulus of the complex band-pass outputs, full rate."""
    _, _, energies = band_energies_array(clip.samples[None, :], fb)
    return TFRep(energies[0].T, float(clip.sample_rate_hz))


def lowpass_downsample(tf: TFRep, sigma_lp, stride: int, lp_width: int) -> TFRep:
    """Gaussian lowpass per channel followed by subsampling."""
    if stride < 1 or lp_width % 2 == 0:
        raise SpecError("stride must be >= 1 and lp_width odd")
    sig = tf.frames.T[None, ...]
    decimated = lowpass_downsample_array(sig, np.asarray(sigma_lp), stride, lp_width)
    return TFRep(decimated[0].T, tf.frame_rate_hz / stride)


def pcen_smoother(tf: TFRep, s) -> TFRep:
    """Exponential smoother M along time, per channel."""
    M = pcen_smoother_array(tf.frames.T[None, ...], np.asarray(s, dtype=np.float64))
    return TFRep(M[0].T, tf.frame_rate_hz)


def pcen_forward(tf: TFRep, p: PcenParams) -> TFRep:
    """Apply PCEN elementwise using the smoothed reference energy."""
    out, _ = pcen_forward_array(tf.frames.T[None, ...], p)
    return TFRep(out[0].T, tf.frame_rate_hz)


def forward(clip: AudioClip, fp: FrontendParams) -> TFRep:
    """pcen_forward . lowpass_downsample . band_energies."""
    out = forward_array(clip.samples[None, :], fp)
    return TFRep(out[0].T, clip.sample_rate_hz / fp.stride)


# ---------------------------------------------------------------------------
# TFRep export


def tfrep_to_csv(tf: TFRep) -> str:
    out = io.StringIO()
    out.write(f"# frame_rate_hz = {fmt_float(tf.frame_rate_hz)}\n")
    out.write("frame,channel,value\n")
    T, N = tf.frames.shape
    for t in range(T):
        for n in range(N):
            out.write(f"{t},{n},{fmt_float(tf.frames[t, n])}\n")
    return out.getvalue()


def tfrep_from_csv(text: str) -> TFRep:
    frame_rate = None
    triples = []
    header_seen = False
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("frame_rate_hz"):
                frame_rate = float(body.split("=")[1])
            continue
        if not header_seen:
            if line != "frame,channel,value":
                raise FormatError(f"unexpected TFRep CSV header: {line!r}")
            header_seen = True
            continue
        t, n, v = line.split(",")
        triples.append((int(t), int(n), float(v)))
    if frame_rate is None or not triples:
        raise FormatError("TFRep CSV missing frame rate or data")
    T = max(t for t, _, _ in triples) + 1
    N = max(n for _, n, _ in triples) + 1
    frames = np.zeros((T, N))
    for t, n, v in triples:
        frames[t, n] = v
    return TFRep(frames, frame_rate)


def tfrep_to_bytes(tf: TFRep) -> bytes:
    """Raw layout: int64 LE T, N header then T*N float32 LE, frame-major."""
    T, N = tf.frames.shape
    return struct.pack("<qq", T, N) + tf.frames.astype("<f4").tobytes()


def tfrep_from_bytes(blob: bytes, frame_rate_hz: float) -> TFRep:
    if len(blob) < 16:
        raise FormatError("TFRep blob shorter than its header")
    T, N = struct.unpack_from("<qq", blob, 0)
    expected = 16 + 4 * T * N
    if T < 0 or N < 0 or len(blob) != expected:
        raise FormatError(f"TFRep blob size {len(blob)} != expected {expected}")
    frames = np.frombuffer(blob, dtype="<f4", offset=16).reshape(T, N)
    return TFRep(frames.astype(np.float64), frame_rate_hz)
