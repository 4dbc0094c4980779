import numpy as np
import pytest
from numpy.testing import assert_allclose

from beamguide import stft
from beamguide.errors import ConfigError
from beamguide.signal import MultichannelWaveform


def direct_dft(frame):
    n = frame.size
    k = np.arange(n // 2 + 1)[:, None]
    return (frame[None, :] * np.exp(-2j * np.pi * k * np.arange(n)[None, :] / n)).sum(axis=1)


def direct_ola(frames, config, num_samples):
    """Plain loop overlap-add with per-sample window-power normalization."""
    win = config.window_array()
    total = config.padded_len(num_samples)
    out = np.zeros(total)
    norm = np.zeros(total)
    for t, fr in enumerate(frames):
        start = t * config.hop
        for n in range(config.frame_len):
            out[start + n] += fr[n] * win[n]
            norm[start + n] += win[n] ** 2
    out = out / np.where(norm > 0, norm, 1.0)
    return out[config.head_pad:config.head_pad + num_samples]


def test_defaults():
    cfg = stft.StftConfig()
    assert (cfg.frame_len, cfg.hop, cfg.fft_size, cfg.num_bins) == (4096, 1024, 4096, 2049)
    assert stft.StftConfig.from_ms(512, 128, 8000) == cfg


def test_window_is_periodic_sqrt_hann():
    w = stft.StftConfig(frame_len=16, hop=4).window_array()
    n = np.arange(16)
    assert_allclose(w, np.sqrt(0.5 - 0.5 * np.cos(2 * np.pi * n / 16)), atol=1e-15)


def test_squared_window_sum_is_constant_in_steady_state():
    cfg = stft.StftConfig()
    w2 = cfg.window_array() ** 2
    acc = np.zeros(cfg.frame_len * 3)
    for start in range(0, acc.size - cfg.frame_len + 1, cfg.hop):
        acc[start:start + cfg.frame_len] += w2
    steady = acc[cfg.frame_len:2 * cfg.frame_len]
    assert_allclose(steady, 2.0, atol=1e-12)


@pytest.mark.parametrize("kwargs", [dict(frame_len=4096, hop=1000), dict(frame_len=256, hop=64, fft_size=128),
                                    dict(frame_len=256, hop=256)])
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigError):
        stft.StftConfig(**kwargs).validate()


def test_frame_count_for_one_second():
    # head padding of frame_len - hop puts sample 0 under four frames, so the
    # count is larger than the end-padding-only formula would give
    cfg = stft.StftConfig()
    spec = stft.analyze(MultichannelWaveform(np.zeros((1, 8000))), cfg)
    assert cfg.num_frames(8000) == 11 == spec.num_frames
    assert spec.bins.shape == (1, 11, 2049)
    for n in (1, 1024, 1025, 4096, 8000):
        t = cfg.num_frames(n)
        # the last padded sample falls in the first hop of the final frame
        last = n - 1 + cfg.head_pad
        assert (t - 1) * cfg.hop <= last < t * cfg.hop


def test_dc_concentrates_in_bin_zero():
    cfg = stft.StftConfig()
    spec = stft.analyze(MultichannelWaveform(np.ones((1, 16384))), cfg)
    frame = spec.bins[0, 6]
    win = cfg.window_array()
    assert_allclose(frame[0].real, win.sum(), rtol=1e-12)
    # a constant frame is the window itself, so the other bins hold the
    # window's own leakage; sqrt-Hann is not band-limited to bin 0
    oracle = direct_dft(win)
    assert_allclose(frame, oracle, atol=1e-9 * abs(frame[0]))
    assert np.max(np.abs(frame[1:])) < 0.34 * abs(frame[0])


def test_bin_centred_sinusoid_matches_direct_dft():
    cfg = stft.StftConfig(frame_len=256, hop=64)
    k = 19
    n = np.arange(2048)
    x = np.cos(2 * np.pi * k * n / cfg.fft_size)
    spec = stft.analyze(MultichannelWaveform(x), cfg)
    t = 10
    raw = stft.frame_signal(x[None], cfg)[0, t]
    oracle = direct_dft(raw * cfg.window_array())
    assert_allclose(spec.bins[0, t], oracle, atol=1e-9)
    energy = np.abs(oracle) ** 2
    # the sqrt-Hann main lobe covers bin k and its two neighbours
    assert np.argmax(energy) == k
    assert energy[k - 1:k + 2].sum() / energy.sum() >= 0.99


def test_perfect_reconstruction_random_noise(rng):
    x = rng.standard_normal((4, 24000))
    y = stft.synthesize(stft.analyze(MultichannelWaveform(x)))
    assert y.samples.shape == x.shape
    assert np.linalg.norm(y.samples - x) / np.linalg.norm(x) <= 1e-6


def test_zero_spectrogram_gives_zero():
    cfg = stft.StftConfig()
    spec = stft.ComplexSpectrogram(np.zeros((2, cfg.num_frames(5000), cfg.num_bins), complex), cfg, 5000)
    assert np.all(stft.synthesize(spec).samples == 0.0)


def test_impulse_at_edge_matches_direct_overlap_add():
    cfg = stft.StftConfig(frame_len=64, hop=16)
    x = np.zeros(200)
    x[0] = 1.0
    spec = stft.analyze(MultichannelWaveform(x), cfg)
    out = stft.synthesize(spec).samples[0]
    frames = np.fft.irfft(spec.bins[0], n=cfg.fft_size)[:, :cfg.frame_len]
    assert_allclose(out, direct_ola(frames, cfg, 200), atol=1e-12)
    assert np.max(np.abs(out - x)) <= 1e-6


def test_default_impulse_round_trip():
    x = np.zeros((1, 8000))
    x[0, 0] = 1.0
    out = stft.synthesize(stft.analyze(MultichannelWaveform(x))).samples
    assert np.max(np.abs(out - x)) <= 1e-6


def test_linearity(rng):
    x, y = rng.standard_normal((2, 2, 5000))
    a, b = 0.7, -2.3
    lhs = stft.analyze(MultichannelWaveform(a * x + b * y)).bins
    rhs = a * stft.analyze(MultichannelWaveform(x)).bins + b * stft.analyze(MultichannelWaveform(y)).bins
    assert_allclose(lhs, rhs, atol=1e-10)


def test_parseval_on_one_frame(rng):
    cfg = stft.StftConfig(frame_len=128, hop=32)
    x = rng.standard_normal(1024)
    spec = stft.analyze(MultichannelWaveform(x), cfg)
    t = 8
    windowed = stft.frame_signal(x[None], cfg)[0, t] * cfg.window_array()
    one_sided = np.abs(spec.bins[0, t]) ** 2
    two_sided = one_sided[0] + one_sided[-1] + 2 * one_sided[1:-1].sum()
    assert_allclose(two_sided / cfg.fft_size, np.sum(windowed**2), rtol=1e-12)
    assert_allclose(spec.bins[0, t], direct_dft(windowed), atol=1e-10)


def test_zero_padded_fft_round_trip(rng):
    cfg = stft.StftConfig(frame_len=256, hop=64, fft_size=512)
    x = rng.standard_normal((1, 3000))
    y = stft.synthesize(stft.analyze(MultichannelWaveform(x), cfg)).samples
    assert np.linalg.norm(y - x) / np.linalg.norm(x) <= 1e-10


def test_short_signal_single_sample():
    cfg = stft.StftConfig(frame_len=64, hop=16)
    spec = stft.analyze(MultichannelWaveform([[0.5]]), cfg)
    assert spec.num_frames >= 1
    assert_allclose(stft.synthesize(spec).samples, [[0.5]], atol=1e-12)


def test_empty_input_rejected():
    with pytest.raises(Exception):
        stft.analyze(MultichannelWaveform(np.zeros((1, 0))))
