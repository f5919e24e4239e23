"""Audio ingest and synthesis.

WAV reading (RIFF/WAVE, PCM 16-bit and IEEE float32), peak normalization to
a dBFS target, SNR-controlled mixing of signal and noise, and a deterministic
scene synthesizer that produces the desk-scale band-detection datasets.

All operations are pure: randomness enters only through explicit seeds, so
the same (spec, seed) pair always yields bit-identical audio.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSignalError, FormatError, SpecError, UnsupportedError

PCM16_SCALE = 32768.0


@dataclass
class AudioClip:
    """Mono audio: float64 samples in [-1, 1] plus the sample rate."""

    samples: np.ndarray
    sample_rate_hz: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise SpecError("AudioClip samples must be one-dimensional")
        if self.sample_rate_hz <= 0:
            raise SpecError("sample_rate_hz must be positive")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def load_wav(path) -> AudioClip:
    """Read a RIFF/WAVE file as a mono clip scaled to [-1, 1].

    Supports PCM 16-bit and IEEE float 32-bit, little-endian, any channel
    count (channels are averaged).  Raises FormatError on a malformed header
    and UnsupportedError on any other encoding.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    frames = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if cid == b"fmt ":
            if size < 16:
                raise FormatError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            frames = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or frames is None:
        raise FormatError(f"{path}: missing fmt or data chunk")
    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if n_channels < 1 or sample_rate <= 0:
        raise FormatError(f"{path}: invalid fmt chunk")

    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(frames, dtype="<i2")
        samples = raw.astype(np.float64) / PCM16_SCALE
    elif audio_format == 3 and bits == 32:
        samples = np.frombuffer(frames, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedError(
            f"{path}: unsupported encoding (format={audio_format}, bits={bits}); "
            "expected PCM16 or IEEE float32"
        )

    n = (len(samples) // n_channels) * n_channels
    samples = samples[:n].reshape(-1, n_channels).mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise FormatError(f"{path}: non-finite samples")
    return AudioClip(np.clip(samples, -1.0, 1.0), int(sample_rate))


def write_wav(path, clip: AudioClip, encoding: str = "pcm16") -> None:
    """Write a mono WAV file; encoding is 'pcm16' or 'float32'."""
    x = np.clip(clip.samples, -1.0, 1.0)
    if encoding == "pcm16":
        payload = (
            np.clip(np.round(x * PCM16_SCALE), -32768, 32767).astype("<i2").tobytes()
        )
        audio_format, bits = 1, 16
    elif encoding == "float32":
        payload = x.astype("<f4").tobytes()
        audio_format, bits = 3, 32
    else:
        raise UnsupportedError(f"unknown encoding {encoding!r}")
    block = bits // 8
    fmt = struct.pack(
        "<HHIIHH", audio_format, 1, clip.sample_rate_hz,
        clip.sample_rate_hz * block, block, bits,
    )
    with open(path, "wb") as fh:
        fh.write(b"RIFF")
        fh.write(struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(payload)))
        fh.write(b"WAVE")
        fh.write(b"fmt ")
        fh.write(struct.pack("<I", len(fmt)))
        fh.write(fmt)
        fh.write(b"data")
        fh.write(struct.pack("<I", len(payload)))
        fh.write(payload)


def normalize_dbfs(clip: AudioClip, target_dbfs: float) -> AudioClip:
    """Scale so the peak absolute amplitude sits at 10^(target_dbfs/20).

    Peak (not RMS) normalization: dBFS references digital full scale.
    """
    peak = float(np.max(np.abs(clip.samples)))
    if peak == 0.0:
        raise DegenerateSignalError("cannot normalize an all-zero clip")
    gain = 10.0 ** (target_dbfs / 20.0) / peak
    return AudioClip(clip.samples * gain, clip.sample_rate_hz, dict(clip.meta))


def white_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-RMS Gaussian white noise."""
    return rng.standard_normal(n)


def pink_noise(n: int, rng: np.random.Generator, n_rows: int = 16) -> np.ndarray:
    """Pink (1/f) noise via the Voss-McCartney row-update scheme.

    Row r holds a Gaussian value for 2^r consecutive samples; the output is
    the row sum, normalized to unit RMS.
    """
    total = np.zeros(n)
    for r in range(n_rows):
        step = 1 << r
        vals = rng.standard_normal(n // step + 1)
        total += np.repeat(vals, step)[:n]
    rms = float(np.sqrt(np.mean(total**2)))
    return total / rms if rms > 0 else total


def make_noise(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "white":
        return white_noise(n, rng)
    if kind == "pink":
        return pink_noise(n, rng)
    raise SpecError(f"unknown noise kind {kind!r}")


def mix_at_snr(
    signal: AudioClip,
    noise: AudioClip,
    snr_db: float,
    active_mask: np.ndarray,
    offset: int = 0,
) -> AudioClip:
    """Add noise scaled so active-segment signal power / noise power hits snr_db.

    Powers are mean squares over the active mask (the noise is measured over
    the same samples, mirroring noise-power computation restricted to the
    segments that carry the target).  The noise is cropped at `offset`, which
    the caller derives from its own seed so the operation stays pure.  The
    mix is clipped to [-1, 1]; the clipped-sample count lands in metadata.
    """
    if signal.sample_rate_hz != noise.sample_rate_hz:
        raise SpecError("signal and noise sample rates differ")
    mask = np.asarray(active_mask, dtype=bool)
    if mask.shape != signal.samples.shape:
        raise SpecError("active_mask length must match the signal")
    if not mask.any():
        raise DegenerateSignalError("active_mask selects no samples")
    n = len(signal.samples)
    if offset < 0 or len(noise.samples) < offset + n:
        raise SpecError("noise too short for requested offset")
    chunk = noise.samples[offset : offset + n]

    p_sig = float(np.mean(signal.samples[mask] ** 2))
    p_noise = float(np.mean(chunk[mask] ** 2))
    if p_noise == 0.0:
        raise DegenerateSignalError("noise has zero power on the active segment")
    if p_sig == 0.0:
        raise DegenerateSignalError("signal has zero power on the active segment")
    gain = float(np.sqrt(p_sig / (p_noise * 10.0 ** (snr_db / 10.0))))

    mixed = signal.samples + gain * chunk
    clipped = int(np.count_nonzero((mixed > 1.0) | (mixed < -1.0)))
    meta = dict(signal.meta)
    meta.update(noise_gain=gain, clipped_samples=clipped, snr_db=float(snr_db))
    return AudioClip(np.clip(mixed, -1.0, 1.0), signal.sample_rate_hz, meta)


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for one synthetic scene family.

    class_bands holds one (f_lo, f_hi) pair per class; None marks a
    noise-only class.  Tones of a labeled scene are chirps drawn from the
    class band over a low-level white/pink background.
    """

    class_bands: tuple
    sample_rate_hz: int = 16000
    duration_s: float = 0.25
    tone_count: int = 3
    noise_kind: str = "pink"
    noise_level: float = 0.05

    def __post_init__(self):
        if len(self.class_bands) < 1:
            raise SpecError("SceneSpec needs at least one class")
        nyquist = self.sample_rate_hz / 2.0
        for band in self.class_bands:
            if band is None:
                continue
            lo, hi = band
            if not (0.0 <= lo < hi):
                raise SpecError(f"invalid band {band}")
            if hi > nyquist:
                raise SpecError(f"band {band} exceeds Nyquist {nyquist} Hz")
        if self.noise_kind not in ("white", "pink"):
            raise SpecError(f"unknown noise kind {self.noise_kind!r}")
        if self.duration_s <= 0 or self.tone_count < 0 or self.noise_level < 0:
            raise SpecError("invalid SceneSpec scalars")

    @property
    def n_classes(self) -> int:
        return len(self.class_bands)


def synthesize_scene(spec: SceneSpec, seed: int):
    """Render one labeled scene; returns (clip, label, active_mask).

    The label is ``seed % n_classes`` so dataset builders control class
    balance through seed selection; everything else is drawn from a PCG64
    stream keyed on the seed.  Pure function of (spec, seed).
    """
    label = int(seed) % spec.n_classes
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    n = int(round(spec.duration_s * spec.sample_rate_hz))
    fs = spec.sample_rate_hz

    samples = spec.noise_level * make_noise(spec.noise_kind, n, rng)
    mask = np.zeros(n, dtype=bool)
    band = spec.class_bands[label]

    if band is not None and spec.tone_count > 0:
        lo, hi = band
        for _ in range(spec.tone_count):
            f0, f1 = np.exp(rng.uniform(np.log(lo), np.log(hi), size=2))
            dur = rng.uniform(0.35, 0.65) * spec.duration_s
            start = rng.uniform(0.0, spec.duration_s - dur)
            amp = rng.uniform(0.3, 0.8)
            phase0 = rng.uniform(0.0, 2.0 * np.pi)

            i0 = int(round(start * fs))
            length = max(8, int(round(dur * fs)))
            i1 = min(n, i0 + length)
            tau = np.arange(i1 - i0) / fs
            # linear chirp f0 -> f1 with a Hann fade to avoid clicks
            phase = 2.0 * np.pi * (f0 * tau + 0.5 * (f1 - f0) * tau**2 / (dur))
            ramp = min(0.01, dur / 4.0)
            env = np.minimum(1.0, np.minimum(tau, tau[::-1]) / ramp)
            env = 0.5 - 0.5 * np.cos(np.pi * np.minimum(env, 1.0))
            samples[i0:i1] += amp * env * np.sin(phase0 + phase)
            mask[i0:i1] = True

    peak = float(np.max(np.abs(samples)))
    if peak > 1.0:
        samples = samples * (0.99 / peak)
    return AudioClip(samples, fs, {"label": label, "seed": int(seed)}), label, mask
