import numpy as np
import pytest

from freenoise.errors import ConfigError, InputError, ShapeError
from freenoise.motion_injection import (BASE, TARGET, ConditionResolver,
                                        PromptTimeline, build_timeline,
                                        interpolate_prompt,
                                        interpolation_weights,
                                        plan_transitions, resolve_condition)
from freenoise.sampler import (SamplerConfig, make_diffusion_schedule,
                               sample_video)
from freenoise.toy_videoldm import ModelConfig, ToyVideoLDM

SMALL_MODEL = ModelConfig(latent_channels=4, hidden_channels=8, heads=2,
                          head_dim=4, text_dim=8, text_tokens=4)
PROMPTS = ["a man is boating on a lake", "a man is walking on a beach"]


def _random(shape, seed=0):
    return np.random.RandomState(seed).randn(*shape).astype(np.float32)


@pytest.fixture(scope="module")
def model():
    return ToyVideoLDM.from_config(SMALL_MODEL)


def test_interpolate_prompt_boundaries():
    p1, p2 = _random((4, 8), 1), _random((4, 8), 2)
    np.testing.assert_array_equal(interpolate_prompt(p1, p2, 28, 28, 36), p1)
    np.testing.assert_array_equal(interpolate_prompt(p1, p2, 3, 28, 36), p1)
    np.testing.assert_array_equal(interpolate_prompt(p1, p2, 36, 28, 36), p2)
    np.testing.assert_array_equal(interpolate_prompt(p1, p2, 60, 28, 36), p2)
    middle = (p1.astype(np.float64) + p2) / 2
    np.testing.assert_allclose(interpolate_prompt(p1, p2, 32, 28, 36),
                               middle, rtol=1e-7)


def test_interpolate_prompt_linear():
    p1, p2 = _random((4, 8), 1), _random((4, 8), 2)
    for n in range(28, 37):
        coef = (n - 28) / 8
        np.testing.assert_allclose(interpolate_prompt(p1, p2, n, 28, 36),
                                   (1 - coef) * p1 + coef * p2, atol=1e-6)


def test_interpolate_prompt_degenerate():
    p1 = _random((4, 8))
    for n in range(10):
        np.testing.assert_array_equal(interpolate_prompt(p1, p1, n, 2, 6), p1)
    with pytest.raises(ConfigError):
        interpolate_prompt(p1, p1, 0, 6, 6)


def test_plan_transitions():
    assert plan_transitions([32, 32], 8) == [(28, 36)]
    assert plan_transitions([20, 24, 20], 8) == [(16, 24), (40, 48)]
    assert plan_transitions([64]) == []


@pytest.mark.parametrize('segments, length', [
    ([2, 30], 8),
    ([30, 2], 8),
    ([4, 4, 4], 8),
    ([0, 8], 2),
    ([8, 8], 0),
])
def test_plan_transitions_errors(segments, length):
    with pytest.raises(ConfigError):
        plan_transitions(segments, length)


def test_build_timeline(model):
    timeline = build_timeline(PROMPTS, [32, 32], model)
    assert timeline.transitions == [(28, 36)]
    assert timeline.total == 64
    assert (timeline.t_alpha, timeline.t_beta) == (300, 700)
    assert timeline.decoder_layer == 1
    assert timeline.n_layers == 3
    np.testing.assert_array_equal(timeline.prompts[0],
                                  model.embed_prompt(PROMPTS[0]))


def test_build_timeline_errors(model):
    with pytest.raises(InputError):
        build_timeline([], [], model)
    with pytest.raises(ConfigError):
        build_timeline(PROMPTS, [64], model)
    with pytest.raises(ConfigError):
        build_timeline(PROMPTS, [32, 32], model, decoder_layer=3)


def test_timeline_validation():
    prompt = _random((4, 8))
    kwargs = dict(prompts=[prompt, prompt], transitions=[(28, 36)], total=64,
                  t_alpha=300, t_beta=700, decoder_layer=1, n_layers=3)
    PromptTimeline(**kwargs)
    for key, value in [("t_alpha", 700), ("t_beta", 1001),
                       ("decoder_layer", 3), ("transitions", []),
                       ("transitions", [(36, 28)])]:
        with pytest.raises(ConfigError):
            PromptTimeline(**{**kwargs, key: value})


def test_single_prompt_timeline(model):
    timeline = build_timeline(PROMPTS[:1], [16], model)
    assert timeline.transitions == []
    resolver = ConditionResolver(timeline)
    for t in (100, 500, 900):
        for layer in range(3):
            np.testing.assert_array_equal(
                resolve_condition(resolver, t, layer, 7), timeline.prompts[0])


def test_routing(model):
    timeline = build_timeline(PROMPTS, [32, 32], model)
    resolver = ConditionResolver(timeline)
    target = timeline.target_embedding(30)

    for t in (20, 300, 700, 980):
        np.testing.assert_array_equal(resolver.resolve(t, 2, 30), target)
        np.testing.assert_array_equal(resolver.resolve(t, 1, 30),
                                      timeline.prompts[0])
    np.testing.assert_array_equal(resolver.resolve(500, 0, 30), target)
    branches = [record.branch for record in resolver.log]
    assert branches == [TARGET, BASE] * 4 + [TARGET]


def test_routing_strict_band(model):
    timeline = build_timeline(PROMPTS, [32, 32], model)
    assert not timeline.routes_target(300, 0)
    assert timeline.routes_target(301, 0)
    assert timeline.routes_target(699, 1)
    assert not timeline.routes_target(700, 1)


def test_routing_without_injection(model):
    timeline = build_timeline(PROMPTS, [32, 32], model, injection=False)
    for t in (20, 500, 980):
        for layer in range(3):
            assert timeline.routes_target(t, layer)


def test_later_prompts_do_not_leak(model):
    resolver_1 = ConditionResolver(build_timeline(PROMPTS, [32, 32], model))
    resolver_2 = ConditionResolver(
        build_timeline([PROMPTS[0], "a red car"], [32, 32], model))
    for n in range(28):
        for t, layer in [(100, 0), (500, 0), (100, 2)]:
            np.testing.assert_array_equal(resolver_1.resolve(t, layer, n),
                                          resolver_2.resolve(t, layer, n))


def test_three_prompts(model):
    prompts = PROMPTS + ["a man is swimming in the sea"]
    timeline = build_timeline(prompts, [20, 24, 20], model)
    embeddings = timeline.prompts
    np.testing.assert_array_equal(timeline.target_embedding(10),
                                  embeddings[0])
    np.testing.assert_array_equal(timeline.target_embedding(16),
                                  embeddings[0])
    np.testing.assert_array_equal(timeline.target_embedding(30),
                                  embeddings[1])
    np.testing.assert_array_equal(timeline.target_embedding(50),
                                  embeddings[2])
    np.testing.assert_array_equal(
        timeline.target_embedding(44),
        interpolate_prompt(embeddings[1], embeddings[2], 44, 40, 48))
    np.testing.assert_array_equal(timeline.base_embedding(44), embeddings[1])
    np.testing.assert_array_equal(timeline.base_embedding(20), embeddings[0])

    weights = interpolation_weights(timeline)
    assert weights.shape == (3, 64)
    np.testing.assert_allclose(weights.sum(axis=0), 1)
    assert weights[0, 20] == 0.5 and weights[1, 20] == 0.5


def test_routing_table(model):
    timeline = build_timeline(PROMPTS, [32, 32], model)
    text = timeline.routing_table([980, 500, 20])
    lines = text.splitlines()
    assert lines[0] == "bands: [28, 36)"
    assert lines[-3].split()[1:] == ["P", "P", "T"]
    assert lines[-2].split()[1:] == ["T", "T", "T"]
    assert lines[-1].split()[1:] == ["P", "P", "T"]


def test_routing_log_replay(model):
    total, steps = 64, 50
    timeline = build_timeline(PROMPTS, [32, 32], model)
    schedule = make_diffusion_schedule(ddim_steps=steps)
    config = SamplerConfig(n_train=16, total=total, unit=4, latent_height=4,
                           latent_width=4)
    resolver = ConditionResolver(timeline)
    latent = sample_video(config, timeline, model, schedule,
                          resolver=resolver)
    assert np.isfinite(latent).all()

    assert len(resolver.log) == steps * timeline.n_layers * total
    keys = {(record.t, record.layer, record.frame) for record in resolver.log}
    assert len(keys) == len(resolver.log)
    mismatches = 0
    for record in resolver.log:
        expected = (TARGET if timeline.routes_target(record.t, record.layer)
                    else BASE)
        mismatches += record.branch != expected
    assert mismatches == 0
    assert {record.branch for record in resolver.log} == {TARGET, BASE}


def test_single_prompt_sampling_equivalence(model):
    timeline = build_timeline(PROMPTS[:1], [16], model)
    schedule = make_diffusion_schedule(ddim_steps=3)
    config = SamplerConfig(n_train=8, total=16, unit=4, latent_height=4,
                           latent_width=4)
    np.testing.assert_array_equal(
        sample_video(config, timeline, model, schedule),
        sample_video(config, model.embed_prompt(PROMPTS[0]), model,
                     schedule))


def test_timeline_length_mismatch(model):
    timeline = build_timeline(PROMPTS, [32, 32], model)
    schedule = make_diffusion_schedule(ddim_steps=2)
    config = SamplerConfig(n_train=16, total=32, unit=4, latent_height=4,
                           latent_width=4)
    with pytest.raises(ShapeError):
        sample_video(config, timeline, model, schedule)
