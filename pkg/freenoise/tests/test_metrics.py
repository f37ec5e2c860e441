import numpy as np
import pytest

from freenoise.errors import ConfigError, InputError
from freenoise.metrics import (BenchReport, consistency_sim,
                               count_model_passes, frechet_distance,
                               frechet_feature_distance, kernel_distance,
                               kernel_feature_distance, run_benchmark,
                               split_into_clips)
from freenoise.sampler import (MODES, SamplerConfig, make_diffusion_schedule,
                               sample_video)
from freenoise.toy_videoldm import ModelConfig, ToyVideoLDM

SMALL_MODEL = ModelConfig(latent_channels=4, hidden_channels=8, heads=2,
                          head_dim=4, text_dim=8, text_tokens=4)


def _random_video(n_frames=12, seed=0):
    return np.random.RandomState(seed).rand(3, n_frames, 8, 8)


def test_consistency_static_video():
    frame = _random_video(1)
    video = np.repeat(frame, 10, axis=1)
    assert consistency_sim(video) == 1.0
    assert consistency_sim(video, lag=4) == 1.0


def test_consistency_zero_video():
    assert consistency_sim(np.zeros((3, 4, 8, 8))) == 1.0


def test_consistency_noise():
    for seed in range(20):
        video = np.random.RandomState(seed).randn(3, 16, 8, 8)
        assert consistency_sim(video) < 0.5


def test_consistency_reversal():
    video = _random_video(seed=3)
    np.testing.assert_allclose(consistency_sim(video),
                               consistency_sim(video[:, ::-1]), rtol=1e-12)


def test_consistency_bounds():
    value = consistency_sim(_random_video(seed=5), lag=2)
    assert -1 <= value <= 1


def test_consistency_errors():
    video = _random_video(4)
    with pytest.raises(InputError):
        consistency_sim(video, lag=4)
    with pytest.raises(InputError):
        consistency_sim(video[:, :1])
    with pytest.raises(ConfigError):
        consistency_sim(video, lag=0)


def test_frechet_identical():
    features = np.random.randn(20, 5)
    assert frechet_distance(features, features) == 0
    assert frechet_distance(features, features, covariance="full") < 1e-6


def test_frechet_diagonal_closed_form():
    rng = np.random.RandomState(0)
    features_a = rng.randn(50, 4)
    features_b = 2 * rng.randn(50, 4) + 1
    mean_diff = features_a.mean(0) - features_b.mean(0)
    sd_diff = features_a.std(0) - features_b.std(0)
    np.testing.assert_allclose(frechet_distance(features_a, features_b),
                               np.sum(mean_diff ** 2) + np.sum(sd_diff ** 2))


def test_frechet_symmetric():
    rng = np.random.RandomState(1)
    features_a, features_b = rng.randn(30, 4), rng.randn(40, 4) + 0.5
    for covariance in ("diag", "full"):
        np.testing.assert_allclose(
            frechet_distance(features_a, features_b, covariance),
            frechet_distance(features_b, features_a, covariance), rtol=1e-6)
        assert frechet_distance(features_a, features_b, covariance) > 0


def test_frechet_full_matches_diag_for_diagonal_covariances():
    # Independent coordinates scaled per column have diagonal covariances.
    rng = np.random.RandomState(2)
    centered = rng.randn(64, 3)
    centered -= centered.mean(0)
    base = np.linalg.qr(centered)[0] * np.sqrt(64)
    features_a = base * [1, 2, 3]
    features_b = base * [2, 2, 1] + [1, 0, 0]
    np.testing.assert_allclose(frechet_distance(features_a, features_b),
                               frechet_distance(features_a, features_b,
                                                covariance="full"),
                               rtol=1e-6)


def test_frechet_errors():
    with pytest.raises(ConfigError):
        frechet_distance(np.ones((3, 2)), np.ones((3, 2)), covariance="none")


def test_frechet_feature_distance():
    videos_a = [_random_video(seed=ss) for ss in range(3)]
    videos_b = [np.random.RandomState(ss).randn(3, 12, 8, 8) * 3
                for ss in range(3)]
    assert frechet_feature_distance(videos_a, videos_a) == 0
    assert frechet_feature_distance(videos_a, videos_b) > 0
    with pytest.raises(InputError):
        frechet_feature_distance(videos_a[:1], videos_b)
    with pytest.raises(InputError):
        frechet_feature_distance([], videos_b)


def test_kernel_distance():
    rng = np.random.RandomState(0)
    features = rng.randn(30, 5)
    near = kernel_distance(features, rng.randn(30, 5))
    far = kernel_distance(features, rng.randn(30, 5) + 3)
    assert far > 1 and far > 10 * abs(near)
    with pytest.raises(InputError):
        kernel_distance(features[:1], features)


def test_kernel_feature_distance():
    videos_a = [_random_video(seed=ss) for ss in range(3)]
    videos_b = [np.random.RandomState(ss).randn(3, 12, 8, 8) * 3
                for ss in range(3)]
    assert np.isfinite(kernel_feature_distance(videos_a, videos_b))


def test_split_into_clips():
    video = _random_video(10)
    clips = split_into_clips(video, 4)
    assert len(clips) == 2
    np.testing.assert_array_equal(clips[1], video[:, 4:8])
    with pytest.raises(InputError):
        split_into_clips(video, 11)
    with pytest.raises(ConfigError):
        split_into_clips(video, 0)


###############################################################################
# Compute accounting


def test_count_model_passes_default():
    config = SamplerConfig()
    counts = {mode: count_model_passes(SamplerConfig(mode=mode))
              for mode in MODES}
    assert counts["direct"] == (1, 64 * 64)
    assert counts["freenoise"] == (1, 13 * 16 * 16)
    assert counts["sliding"] == (1, 13 * 16 * 16)
    assert counts["genl"] == (13, 13 * 16 * 16)
    assert counts["freenoise"][1] == 3328 < counts["direct"][1] == 4096
    assert config.window_plan().n_windows == 13


def test_count_model_passes_single_window():
    for mode in MODES:
        config = SamplerConfig(mode=mode, total=16)
        assert count_model_passes(config) == (1, 16 * 16)


def test_count_model_passes_with_model():
    model = ToyVideoLDM.from_config(SMALL_MODEL)
    config = SamplerConfig(mode="genl", total=24, n_train=8,
                           latent_height=4, latent_width=4)
    assert count_model_passes(config, model) == (5, 5 * 8 * 8)
    assert model.unet_passes == 0


def test_count_model_passes_invalid():
    with pytest.raises(ConfigError):
        count_model_passes(SamplerConfig(total=63))


###############################################################################
# Benchmark


def _bench_setup(total=64):
    model = ToyVideoLDM.from_config(SMALL_MODEL)
    schedule = make_diffusion_schedule(ddim_steps=2)
    config = SamplerConfig(total=total, latent_height=4, latent_width=4)
    return config, model, schedule


def test_run_benchmark():
    config, model, schedule = _bench_setup()
    report = run_benchmark(["freenoise", "genl"], config, model, schedule)
    assert isinstance(report, BenchReport)
    assert list(report.entries) == ["freenoise", "genl"]
    freenoise, genl = report.entries["freenoise"], report.entries["genl"]
    assert freenoise.passes_per_step == 1 and genl.passes_per_step == 13
    assert freenoise.attention_pair_ops == genl.attention_pair_ops == 3328
    assert len(freenoise.times) == 3
    assert report.ratio("genl", "freenoise") >= 1.5

    lines = report.to_text().splitlines()
    assert lines[2].split()[0] == "freenoise"
    key_values = report.to_key_values()
    assert "genl.passes_per_step = 13\n" in key_values
    assert key_values.startswith("frames = 64\n")


@pytest.mark.slow
def test_run_benchmark_fifty_steps():
    model = ToyVideoLDM.from_config(SMALL_MODEL)
    schedule = make_diffusion_schedule(ddim_steps=50)
    report = run_benchmark(["freenoise", "genl"], SamplerConfig(), model,
                           schedule, repetitions=5)
    assert len(report.entries["genl"].times) == 5
    assert report.ratio("genl", "freenoise") >= 1.5


def test_run_benchmark_errors():
    config, model, schedule = _bench_setup()
    with pytest.raises(ConfigError):
        run_benchmark(["freenoise"], config, model, schedule, repetitions=2)
    with pytest.raises(ConfigError):
        run_benchmark(["fast"], config, model, schedule)


###############################################################################
# Long-range consistency


def _sample_modes(seed, model_config=SMALL_MODEL, steps=10, latent_size=4):
    model = ToyVideoLDM.from_config(model_config)
    schedule = make_diffusion_schedule(ddim_steps=steps)
    prompt = model.embed_prompt("a man is walking on a beach")
    videos = {}
    for mode in ("freenoise", "sliding"):
        config = SamplerConfig(mode=mode, total=64, seed=seed,
                               latent_height=latent_size,
                               latent_width=latent_size)
        videos[mode] = sample_video(config, prompt, model, schedule)
    return videos


@pytest.mark.slow
def test_freenoise_more_consistent_than_sliding():
    # default network, median over 30 seeds
    scores = {"freenoise": [], "sliding": []}
    for seed in range(30):
        videos = _sample_modes(seed, model_config=ModelConfig(), steps=5,
                               latent_size=8)
        for mode, video in videos.items():
            scores[mode].append(consistency_sim(video))
    assert np.median(scores["freenoise"]) > np.median(scores["sliding"])


def test_freenoise_long_range_consistency():
    # Rescheduled noise reuses the base frames of a unit one training
    # length later.
    scores = {"freenoise": [], "sliding": []}
    for seed in range(3):
        for mode, video in _sample_modes(seed).items():
            scores[mode].append(consistency_sim(video, lag=16))
    assert np.mean(scores["freenoise"]) > np.mean(scores["sliding"])
