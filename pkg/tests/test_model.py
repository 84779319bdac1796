"""Fusion model: architecture wiring, margin loss behavior, extraction
modes, and state round-trips."""
import math

import numpy as np
import pytest

from voxfuse.errors import ConfigError, NonFiniteError, ShapeError
from voxfuse.model import (
    ExtractMode, FusionModel, ModelConfig, aam_loss, aam_loss_and_grad,
)
from voxfuse.nn.gradcheck import gradient_check


def batch_for(model, batch=4, seed=0):
    rng = np.random.default_rng(seed)
    audio = rng.standard_normal((batch, model.config.audio_in))
    text = rng.standard_normal((batch, model.config.text_in))
    targets = rng.integers(0, model.config.n_classes, batch)
    return audio, text, targets


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(proj_dim=0)
    with pytest.raises(ConfigError):
        ModelConfig(dropout_audio=1.0)
    with pytest.raises(ConfigError):
        ModelConfig(aam_scale=0.0)
    with pytest.raises(ConfigError):
        ModelConfig(aam_margin=math.pi / 2)
    with pytest.raises(ConfigError):
        ModelConfig(loss_weights=(1.0, 0.1, 0.1))
    with pytest.raises(ConfigError):
        ModelConfig(loss_weights=(1.0, -0.1, 0.1, 0.1))
    cfg = ModelConfig(proj_dim=8)
    assert cfg.fusion_dim == 16
    assert cfg.gate_in == 18


def expected_param_count(cfg: ModelConfig) -> int:
    def branch(in_dim):
        ln = 2 * in_dim
        fc = in_dim * cfg.proj_dim + cfg.proj_dim
        conf = (cfg.proj_dim * cfg.confidence_hidden + cfg.confidence_hidden
                + cfg.confidence_hidden + 1)
        return ln + fc + conf

    gate = (cfg.gate_in * cfg.gate_hidden + cfg.gate_hidden
            + cfg.gate_hidden * 3 + 3)
    heads = (cfg.fusion_dim + 2 * cfg.proj_dim) * cfg.n_classes
    return branch(cfg.audio_in) + branch(cfg.text_in) + gate + heads


def test_parameter_count_formula(tiny_config):
    model = FusionModel(tiny_config)
    assert model.count_parameters() == expected_param_count(tiny_config)
    names = [p.name for p in model.parameters()]
    assert len(names) == len(set(names))


def test_forward_shapes_and_ranges(tiny_model):
    audio, text, _ = batch_for(tiny_model, batch=6)
    state = tiny_model.forward(audio, text)
    c = tiny_model.config.n_classes
    for z in (state.z_fusion, state.z_audio, state.z_text, state.z_ens):
        assert z.shape == (6, c)
    assert np.all((state.gamma_a > 0) & (state.gamma_a < 1))
    assert np.all((state.gamma_t > 0) & (state.gamma_t < 1))
    assert state.w_ens.shape == (6, 3)
    assert np.all(state.w_ens >= 0)
    np.testing.assert_allclose(state.w_ens.sum(axis=1), 1.0, atol=1e-12)
    # head cosines live on the unit sphere pairing
    assert np.all(np.abs(state.z_audio) <= 1.0 + 1e-12)
    fused = np.concatenate([state.gamma_a * state.e_a,
                            state.gamma_t * state.e_t], axis=1)
    np.testing.assert_allclose(state.e_fusion, fused, atol=1e-13)
    ens = (state.w_ens[:, 0:1] * state.z_fusion
           + state.w_ens[:, 1:2] * state.z_audio
           + state.w_ens[:, 2:3] * state.z_text)
    np.testing.assert_allclose(state.z_ens, ens, atol=1e-13)


def test_forward_batch_mismatch(tiny_model):
    audio, text, _ = batch_for(tiny_model)
    with pytest.raises(ShapeError):
        tiny_model.forward(audio, text[:-1])


def test_train_mode_needs_rng(tiny_model):
    audio, text, _ = batch_for(tiny_model)
    with pytest.raises(ValueError, match="rng"):
        tiny_model.forward(audio, text, train=True)
    state = tiny_model.forward(audio, text, train=True,
                               rng=np.random.default_rng(0))
    assert np.all(np.isfinite(state.z_ens))


def scaled_cross_entropy(cosines, targets, scale):
    logits = scale * cosines
    row_max = logits.max(axis=1, keepdims=True)
    lse = row_max[:, 0] + np.log(np.exp(logits - row_max).sum(axis=1))
    return float(np.mean(lse - logits[np.arange(len(targets)), targets]))


def test_aam_zero_margin_reduces_to_cross_entropy():
    rng = np.random.default_rng(1)
    for _ in range(50):
        b, c = int(rng.integers(1, 9)), int(rng.integers(2, 12))
        cosines = rng.uniform(-0.99, 0.99, (b, c))
        targets = rng.integers(0, c, b)
        loss, _ = aam_loss_and_grad(cosines.copy(), targets, 30.0, 0.0)
        assert loss == pytest.approx(
            scaled_cross_entropy(cosines, targets, 30.0), abs=1e-12)


def test_aam_loss_nondecreasing_in_margin():
    rng = np.random.default_rng(2)
    for _ in range(20):
        cosines = rng.uniform(-0.99, 0.99, (5, 8))
        targets = rng.integers(0, 8, 5)
        losses = [aam_loss_and_grad(cosines.copy(), targets, 30.0, m)[0]
                  for m in (0.0, 0.05, 0.1, 0.15, 0.2)]
        for lo, hi in zip(losses, losses[1:]):
            assert hi >= lo - 1e-12


def test_aam_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    cosines = rng.uniform(-0.9, 0.9, (4, 6))
    targets = rng.integers(0, 6, 4)
    _, grad = aam_loss_and_grad(cosines.copy(), targets, 30.0, 0.15)
    eps = 1e-7
    for idx in np.ndindex(4, 6):
        up, down = cosines.copy(), cosines.copy()
        up[idx] += eps
        down[idx] -= eps
        numeric = (aam_loss_and_grad(up, targets, 30.0, 0.15)[0]
                   - aam_loss_and_grad(down, targets, 30.0, 0.15)[0]) / (2 * eps)
        assert grad[idx] == pytest.approx(numeric, abs=1e-5)


def test_aam_single_sample_wrapper_and_validation():
    cosines = np.array([0.3, -0.2, 0.8])
    batch, _ = aam_loss_and_grad(cosines[None, :], np.array([2]), 30.0, 0.15)
    assert aam_loss(cosines, 2, 30.0, 0.15) == batch
    with pytest.raises(ShapeError):
        aam_loss_and_grad(cosines, np.array([0]), 30.0, 0.15)
    with pytest.raises(ShapeError):
        aam_loss_and_grad(cosines[None, :], np.array([0, 1]), 30.0, 0.15)
    with pytest.raises(ValueError):
        aam_loss_and_grad(cosines[None, :], np.array([3]), 30.0, 0.15)


def test_aam_margin_fallback_branch():
    # target cosine far enough negative that theta + m would pass pi
    cosines = np.array([[-0.999, 0.5]])
    margin = 0.2
    loss, grad = aam_loss_and_grad(cosines.copy(), np.array([0]), 30.0, margin)
    t = -0.999
    modified = t - margin * math.sin(margin)
    logits = np.array([30.0 * modified, 15.0])
    expected = math.log(np.exp(logits - logits.max()).sum()) + logits.max() - logits[0]
    assert loss == pytest.approx(expected, abs=1e-12)
    assert np.all(np.isfinite(grad))


def total_loss_value(model, audio, text, targets):
    cfg = model.config
    state = model.forward(audio, text)
    lam = cfg.loss_weights
    parts = [state.z_ens, state.z_fusion, state.z_audio, state.z_text]
    return sum(w * aam_loss_and_grad(z, targets, cfg.aam_scale,
                                     cfg.aam_margin)[0]
               for w, z in zip(lam, parts))


def test_full_model_gradient_check(tiny_model):
    audio, text, targets = batch_for(tiny_model, batch=3, seed=4)
    for p in tiny_model.parameters():
        p.zero_grad()
    state = tiny_model.forward(audio, text)
    terms = tiny_model.loss_and_backward(state, targets)
    assert terms.total == pytest.approx(
        total_loss_value(tiny_model, audio, text, targets), abs=1e-10)
    err = gradient_check(
        lambda: total_loss_value(tiny_model, audio, text, targets),
        tiny_model.parameters())
    assert err <= 1e-4


def test_every_parameter_receives_gradient(tiny_model):
    audio, text, targets = batch_for(tiny_model, batch=5, seed=5)
    for p in tiny_model.parameters():
        p.zero_grad()
    state = tiny_model.forward(audio, text)
    tiny_model.loss_and_backward(state, targets)
    for p in tiny_model.parameters():
        assert np.any(p.grad != 0.0), p.name


def test_loss_rejects_non_finite_terms(tiny_model):
    audio, text, targets = batch_for(tiny_model)
    state = tiny_model.forward(audio, text)
    state.z_audio[0, 0] = np.nan
    with pytest.raises(NonFiniteError, match="audio"):
        tiny_model.loss_and_backward(state, targets)


def test_extract_modes(tiny_model):
    audio, text, _ = batch_for(tiny_model, batch=3)
    p = tiny_model.config.proj_dim
    fused = tiny_model.extract(audio, text, ExtractMode.FUSION)
    assert fused.shape == (3, 2 * p)
    assert tiny_model.extract(audio_x=audio, mode="audio_only").shape == (3, p)
    assert tiny_model.extract(text_x=text, mode="text_only").shape == (3, p)
    state = tiny_model.forward(audio, text)
    np.testing.assert_allclose(fused, state.e_fusion, atol=1e-13)


def test_extract_input_requirements(tiny_model):
    audio, text, _ = batch_for(tiny_model)
    with pytest.raises(ValueError):
        tiny_model.extract(text_x=text, mode="audio_only")
    with pytest.raises(ValueError):
        tiny_model.extract(audio_x=audio, mode="text_only")
    with pytest.raises(ValueError):
        tiny_model.extract(audio_x=audio, mode="fusion")
    with pytest.raises(ValueError):
        tiny_model.extract(audio, text, mode="nonsense")
    with pytest.raises(ShapeError):
        tiny_model.extract(audio, text[:-1], mode="fusion")


def test_seeded_init_is_reproducible(tiny_config):
    a = FusionModel(tiny_config, seed=7)
    b = FusionModel(tiny_config, seed=7)
    for pa, pb in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(pa.values, pb.values)
    c = FusionModel(tiny_config, seed=8)
    assert any(not np.array_equal(pa.values, pc.values)
               for pa, pc in zip(a.parameters(), c.parameters()))


def test_state_dict_round_trip(tiny_config):
    source = FusionModel(tiny_config, seed=1)
    clone = FusionModel(tiny_config, seed=2)
    clone.load_state_dict(source.state_dict())
    audio, text, _ = batch_for(source, batch=4, seed=9)
    np.testing.assert_array_equal(source.extract(audio, text),
                                  clone.extract(audio, text))


def test_load_state_dict_validation(tiny_config, tiny_model):
    state = tiny_model.state_dict()
    dropped = dict(state)
    dropped.pop(next(iter(dropped)))
    with pytest.raises(ConfigError, match="mismatch"):
        tiny_model.load_state_dict(dropped)
    bad_shape = dict(state)
    key = next(iter(bad_shape))
    bad_shape[key] = np.zeros((1, 1))
    with pytest.raises(ConfigError, match="shape"):
        tiny_model.load_state_dict(bad_shape)
