import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from beamguide import simulate
from beamguide.errors import ConfigError, DimensionError
from beamguide.signal import mix_images


def ideal_delay(x, delay):
    """Band-limited delay by FFT phase shift on a long zero-padded buffer."""
    n = 1 << int(np.ceil(np.log2(x.size * 4)))
    freqs = np.fft.rfftfreq(n)
    return np.fft.irfft(np.fft.rfft(x, n) * np.exp(-2j * np.pi * freqs * delay), n)[:x.size]


def geometry_at(dist):
    return simulate.Geometry(np.array([[dist, 0.0, 0.0]]), np.array([[0.0, 0.0, 0.0]]))


def test_integer_delay_peak():
    rir = simulate.generate_anechoic_rir(geometry_at(343.0), 0, 0, 8000)
    assert np.argmax(np.abs(rir)) == 8000
    assert_allclose(rir[8000], 1 / 343.0, rtol=1e-12)
    others = np.delete(rir, 8000)
    assert np.max(np.abs(others)) <= 1e-12


def test_equidistant_mics_identical_rirs():
    geo = simulate.Geometry(np.array([[1.0, 0.3, 0.0], [1.0, -0.3, 0.0]]), np.array([[0.0, 0.0, 0.0]]))
    a = simulate.generate_anechoic_rir(geo, 0, 0, 8000)
    b = simulate.generate_anechoic_rir(geo, 0, 1, 8000)
    assert_array_equal(a, b)


def test_zero_distance_rejected():
    with pytest.raises(ConfigError):
        simulate.generate_anechoic_rir(geometry_at(0.0), 0, 0, 8000)


def test_half_sample_delay_matches_sinc_oracle():
    # a full 64-tap kernel needs the delay to exceed half its length
    rng = np.random.default_rng(3)
    dry = simulate.noise_burst(8000, rng)
    delay = 40.5
    rir = simulate.generate_anechoic_rir(geometry_at(delay * 343.0 / 8000), 0, 0, 8000)
    wet = simulate.convolve(dry, rir, dry.size) * (delay * 343.0 / 8000)
    oracle = ideal_delay(dry, delay)
    core = slice(200, 7800)
    assert np.linalg.norm(wet[core] - oracle[core]) / np.linalg.norm(oracle[core]) <= 1e-3


def test_short_delay_kernel_is_truncated_at_time_zero():
    # at 10.5 samples the left half of the kernel would start before t=0
    delay = 10.5
    dist = delay * 343.0 / 8000
    rir = simulate.generate_anechoic_rir(geometry_at(dist), 0, 0, 8000) * dist
    assert rir.size == 11 + 32
    assert_allclose(rir[10], rir[11], rtol=1e-12)
    dry = simulate.noise_burst(8000, np.random.default_rng(3))
    wet = simulate.convolve(dry, rir, dry.size)
    oracle = ideal_delay(dry, delay)
    core = slice(200, 7800)
    err = np.linalg.norm(wet[core] - oracle[core]) / np.linalg.norm(oracle[core])
    assert 1e-3 < err < 0.02


def test_direct_and_fft_convolution_agree(rng):
    dry = rng.standard_normal(5000)
    long_rir = rng.standard_normal(2048) * np.exp(-np.arange(2048) / 300)
    direct = np.convolve(dry, long_rir)[:5000]
    assert np.max(np.abs(simulate.convolve(dry, long_rir, 5000) - direct)) <= 1e-10
    short_rir = long_rir[:500]
    assert np.max(np.abs(simulate.convolve(dry, short_rir, 5000) - np.convolve(dry, short_rir)[:5000])) <= 1e-12


def identity_scene(rng, sir=0.0):
    dry = list(simulate.make_dry_sources(2, 4000, seed=5))
    rirs = [[np.array([1.0]), np.array([0.0, 0.5])] for _ in range(2)]
    return simulate.SceneSpec(dry, rirs=rirs, sir_db=sir)


def test_zero_sir_equal_powers(rng):
    _, truth = simulate.render_scene(identity_scene(rng))
    p = np.sum(truth.images[:, 0] ** 2, axis=1)
    assert abs(p[0] - p[1]) <= 1e-10 * p[0]


@pytest.mark.parametrize("sir", [-5.0, -1.3, 0.0, 4.9])
def test_measured_sir_matches_target(rng, sir):
    _, truth = simulate.render_scene(identity_scene(rng, sir))
    p = np.sum(truth.images[:, 0] ** 2, axis=1)
    assert abs(10 * np.log10(p[0] / p[1]) - sir) <= 1e-6


def test_drawn_sir_inside_range_and_seeded():
    spec = simulate.default_scene(seed=7, sir_db=None)
    sir = spec.resolved_sir()
    assert -5 <= sir[0] <= 5
    assert_array_equal(simulate.default_scene(seed=7, sir_db=None).resolved_sir(), sir)
    with pytest.raises(ConfigError):
        simulate.SceneSpec([np.ones(4), np.ones(4)], rirs=[[np.ones(1)], [np.ones(1)]], sir_db=9.0).resolved_sir()


def test_single_source_mixture_is_its_image():
    spec = simulate.default_scene(num_sources=1, duration=0.5)
    mix, truth = simulate.render_scene(spec)
    assert_array_equal(mix.samples, truth.images[0])


def test_mixture_is_sum_of_truth(scene0):
    mix, truth = scene0
    assert_array_equal(mix.samples, mix_images(truth).samples)
    assert truth.images.shape == (2, 4, 32000)


def test_render_is_deterministic():
    a = simulate.render_scene(simulate.default_scene(seed=3, duration=0.5))
    b = simulate.render_scene(simulate.default_scene(seed=3, duration=0.5))
    assert a[0].samples.tobytes() == b[0].samples.tobytes()
    assert a[1].images.tobytes() == b[1].images.tobytes()


def test_shorter_sources_padded_with_silence():
    spec = simulate.SceneSpec([np.ones(10), np.ones(6)], rirs=[[np.ones(1)], [np.ones(1)]], sir_db=0.0)
    _, truth = simulate.render_scene(spec)
    assert truth.num_samples == 10
    assert_array_equal(truth.images[1, 0, 6:], 0.0)


def test_scene_errors():
    with pytest.raises(ConfigError):
        simulate.render_scene(simulate.SceneSpec([]))
    with pytest.raises(DimensionError):
        simulate.render_scene(simulate.SceneSpec([np.ones(4), np.ones(4)], rirs=[[np.ones(1)]], sir_db=0.0))
    with pytest.raises(ConfigError):
        simulate.render_scene(simulate.SceneSpec([np.ones(4)]))


def test_optional_white_noise_is_seeded():
    spec = simulate.default_scene(duration=0.5)
    spec.noise_snr_db = 20.0
    mix, truth = simulate.render_scene(spec)
    noise = mix.samples - mix_images(truth).samples
    measured = 10 * np.log10(np.mean(mix_images(truth).samples[0] ** 2) / np.mean(noise[0] ** 2))
    assert abs(measured - 20.0) < 0.5
    again, _ = simulate.render_scene(spec)
    assert again.samples.tobytes() == mix.samples.tobytes()


@pytest.mark.parametrize("kind", ["noise_burst", "multitone"])
def test_dry_sources_normalized(kind):
    dry = simulate.make_dry_sources(3, 8000, seed=1, kind=kind)
    assert_allclose(np.sqrt(np.mean(dry**2, axis=1)), 0.1, rtol=1e-12)
