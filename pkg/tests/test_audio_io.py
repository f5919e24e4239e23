import struct

import numpy as np
import pytest

from leafkit.audio_io import (
    AudioClip,
    SceneSpec,
    load_wav,
    mix_at_snr,
    normalize_dbfs,
    pink_noise,
    synthesize_scene,
    write_wav,
)
from leafkit.errors import DegenerateSignalError, FormatError, SpecError, UnsupportedError


def test_load_wav_pcm16_scaling(tmp_path):
    path = tmp_path / "c.wav"
    clip = AudioClip(np.array([32767 / 32768.0, 0.0, -1.0]), 16000)
    write_wav(path, clip, "pcm16")
    loaded = load_wav(path)
    assert loaded.sample_rate_hz == 16000
    assert loaded.samples[0] == pytest.approx(32767 / 32768.0, abs=1e-9)
    assert loaded.samples[1] == 0.0
    assert loaded.samples[2] == -1.0


def test_load_wav_float32_roundtrip(tmp_path):
    path = tmp_path / "f.wav"
    x = np.linspace(-0.9, 0.9, 50)
    write_wav(path, AudioClip(x, 8000), "float32")
    loaded = load_wav(path)
    np.testing.assert_allclose(loaded.samples, x, atol=1e-7)


def test_load_wav_stereo_averages_to_mono(tmp_path):
    # hand-assembled stereo PCM16 file: channels [0.5] and [-0.5]
    path = tmp_path / "s.wav"
    fmt = struct.pack("<HHIIHH", 1, 2, 16000, 16000 * 4, 4, 16)
    frames = struct.pack("<hh", 16384, -16384)
    payload = (
        b"RIFF" + struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(frames)) + b"WAVE"
        + b"fmt " + struct.pack("<I", len(fmt)) + fmt
        + b"data" + struct.pack("<I", len(frames)) + frames
    )
    path.write_bytes(payload)
    loaded = load_wav(path)
    assert loaded.samples.shape == (1,)
    assert loaded.samples[0] == 0.0


def test_load_wav_malformed_header(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"RIFX" + b"\x00" * 40)
    with pytest.raises(FormatError):
        load_wav(path)


def test_load_wav_unsupported_encoding(tmp_path):
    path = tmp_path / "alaw.wav"
    fmt = struct.pack("<HHIIHH", 6, 1, 8000, 8000, 1, 8)  # A-law
    payload = (
        b"RIFF" + struct.pack("<I", 4 + 8 + len(fmt) + 8 + 2) + b"WAVE"
        + b"fmt " + struct.pack("<I", len(fmt)) + fmt
        + b"data" + struct.pack("<I", 2) + b"\x00\x00"
    )
    path.write_bytes(payload)
    with pytest.raises(UnsupportedError):
        load_wav(path)


def test_normalize_dbfs_minus6():
    clip = AudioClip(np.array([0.2, -1.0, 0.7]), 16000)
    out = normalize_dbfs(clip, -6.0)
    assert np.max(np.abs(out.samples)) == pytest.approx(10 ** (-6 / 20), abs=1e-9)
    # waveform shape unchanged: pure scaling
    np.testing.assert_allclose(out.samples / out.samples[1], clip.samples / clip.samples[1])


def test_normalize_dbfs_full_scale():
    clip = AudioClip(np.array([0.25, -0.1]), 16000)
    out = normalize_dbfs(clip, 0.0)
    assert np.max(np.abs(out.samples)) == pytest.approx(1.0, abs=1e-12)


def test_normalize_dbfs_idempotent():
    rng = np.random.default_rng(3)
    clip = AudioClip(rng.uniform(-1, 1, 500), 16000)
    once = normalize_dbfs(clip, -6.0)
    twice = normalize_dbfs(once, -6.0)
    np.testing.assert_allclose(twice.samples, once.samples, atol=1e-9)


def test_normalize_dbfs_zero_clip_rejected():
    with pytest.raises(DegenerateSignalError):
        normalize_dbfs(AudioClip(np.zeros(10), 16000), -6.0)


def test_mix_at_snr_equal_power_zero_db():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(1000) * 0.1
    signal = AudioClip(x, 16000)
    noise = AudioClip(x.copy(), 16000)  # identical power
    mask = np.ones(1000, dtype=bool)
    out = mix_at_snr(signal, noise, 0.0, mask)
    assert out.meta["noise_gain"] == pytest.approx(1.0, abs=1e-12)


def test_mix_at_snr_plus20_gain():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(800) * 0.05
    out = mix_at_snr(AudioClip(x, 16000), AudioClip(x.copy(), 16000), 20.0,
                     np.ones(800, dtype=bool))
    # sqrt(10^(-20/10)) = 0.1 in amplitude
    assert out.meta["noise_gain"] == pytest.approx(np.sqrt(10 ** (-2.0)), abs=1e-12)


def test_mix_at_snr_masked_gain_differs_by_sqrt2():
    # half the clip at amplitude a, half at 0: masked signal power is 2x global
    n = 1000
    signal = np.zeros(n)
    signal[: n // 2] = 0.2
    mask = np.zeros(n, dtype=bool)
    mask[: n // 2] = True
    noise = np.full(n, 0.05)  # constant power everywhere
    masked = mix_at_snr(AudioClip(signal, 16000), AudioClip(noise, 16000), 10.0, mask)
    unmasked = mix_at_snr(AudioClip(signal, 16000), AudioClip(noise, 16000), 10.0,
                          np.ones(n, dtype=bool))
    # brute-force oracle: gain ratio = sqrt(P_masked / P_global)
    expected = np.sqrt(np.mean(signal[mask] ** 2) / np.mean(signal**2))
    assert masked.meta["noise_gain"] / unmasked.meta["noise_gain"] == pytest.approx(
        expected, rel=1e-12
    )
    assert expected == pytest.approx(np.sqrt(2.0), rel=1e-12)


def test_mix_at_snr_measured_snr_matches_request():
    rng = np.random.default_rng(7)
    for snr in (-10.0, 0.0, 15.0):
        sig = rng.standard_normal(2000) * 0.2
        noi = rng.standard_normal(2000)
        mask = rng.random(2000) < 0.6
        out = mix_at_snr(AudioClip(sig, 16000), AudioClip(noi, 16000), snr, mask)
        gain = out.meta["noise_gain"]
        measured = 10 * np.log10(np.mean(sig[mask] ** 2) / np.mean((gain * noi[mask]) ** 2))
        assert measured == pytest.approx(snr, abs=0.01)


def test_mix_at_snr_degenerate_inputs():
    sig = AudioClip(np.ones(100) * 0.1, 16000)
    noise = AudioClip(np.ones(100) * 0.1, 16000)
    with pytest.raises(DegenerateSignalError):
        mix_at_snr(sig, noise, 0.0, np.zeros(100, dtype=bool))
    with pytest.raises(DegenerateSignalError):
        mix_at_snr(sig, AudioClip(np.zeros(100), 16000), 0.0, np.ones(100, dtype=bool))


def test_mix_at_snr_offset_and_clipping_metadata():
    sig = AudioClip(np.full(50, 0.9), 16000)
    noise = AudioClip(np.concatenate([np.zeros(10), np.full(60, 0.9)]), 16000)
    out = mix_at_snr(sig, noise, 0.0, np.ones(50, dtype=bool), offset=10)
    assert out.meta["clipped_samples"] == 50
    assert np.max(out.samples) <= 1.0
    with pytest.raises(SpecError):
        mix_at_snr(sig, noise, 0.0, np.ones(50, dtype=bool), offset=30)


def _spectral_centroid(samples, fs):
    spectrum = np.abs(np.fft.rfft(samples)) ** 2
    freqs = np.fft.rfftfreq(len(samples), 1 / fs)
    return float(np.sum(freqs * spectrum) / np.sum(spectrum))


def test_synthesize_scene_centroid_in_band():
    # speech-like vs bird-like bands; centroid of the labeled clip falls inside
    spec = SceneSpec(class_bands=((300.0, 3400.0), (800.0, 8000.0)),
                     noise_level=0.005, tone_count=3)
    for seed in (10, 11, 24, 37):
        clip, label, mask = synthesize_scene(spec, seed)
        lo, hi = spec.class_bands[label]
        centroid = _spectral_centroid(clip.samples, spec.sample_rate_hz)
        assert lo <= centroid <= hi
        assert mask.any()


def test_synthesize_scene_deterministic():
    spec = SceneSpec(class_bands=(None, (300.0, 3400.0)))
    a, la, ma = synthesize_scene(spec, 123)
    b, lb, mb = synthesize_scene(spec, 123)
    assert la == lb
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(ma, mb)


def test_synthesize_scene_tone_count_zero():
    spec = SceneSpec(class_bands=((300.0, 3400.0),), tone_count=0)
    clip, label, mask = synthesize_scene(spec, 5)
    assert label == 0
    assert not mask.any()
    assert np.max(np.abs(clip.samples)) > 0  # background noise only


def test_scene_spec_band_above_nyquist():
    with pytest.raises(SpecError):
        SceneSpec(class_bands=((300.0, 9000.0),), sample_rate_hz=16000)


def test_pink_noise_deterministic_unit_rms():
    a = pink_noise(4000, np.random.default_rng(5))
    b = pink_noise(4000, np.random.default_rng(5))
    assert np.array_equal(a, b)
    assert np.sqrt(np.mean(a**2)) == pytest.approx(1.0, abs=1e-9)
