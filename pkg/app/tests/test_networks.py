import numpy as np
import pytest

from app.core_math import make_rng, one_hot
from app.errors import DimensionError, LabelRangeError, MissingCacheError
from app.lstm import LstmState, lstm_step
from app.models import NextLabelModel
from app.networks import (NextLabelNet, PredictionNet, TranscriptionNet, networks_backward, next_label_logits,
                          predict_sequence, prediction_backward, prediction_step, transcribe)
from app.tests.conftest import tiny_model


def test_empty_target_gives_single_prediction_vector():
    net = PredictionNet.uniform(3, 2, 0.5, make_rng(1))
    g, _ = predict_sequence(net, [])
    state = lstm_step(np.zeros(3), LstmState.zeros(2), net.lstm)
    assert g.shape == (1, 4)
    np.testing.assert_allclose(g[0], state.h @ net.w_out + net.b_out, rtol=0, atol=1e-15)


def test_prediction_has_prefix_property():
    net = PredictionNet.uniform(4, 3, 0.5, make_rng(2))
    g1, _ = predict_sequence(net, [0, 1, 2])
    g2, _ = predict_sequence(net, [0, 1, 3])
    np.testing.assert_array_equal(g1[:3], g2[:3])
    assert not np.allclose(g1[3], g2[3])


def test_prefix_property_on_random_sequences():
    net = PredictionNet.uniform(3, 4, 0.5, make_rng(3))
    rng = make_rng(4)
    for _ in range(10):
        labels = [int(k) for k in rng.integers(0, 3, size=6)]
        full, _ = predict_sequence(net, labels)
        for cut in range(7):
            prefix, _ = predict_sequence(net, labels[:cut])
            np.testing.assert_array_equal(prefix, full[:cut + 1])


def test_prediction_matches_manual_unroll():
    net = PredictionNet.uniform(3, 2, 0.5, make_rng(5))
    targets = (1, 0, 2)
    g, _ = predict_sequence(net, targets)
    state = LstmState.zeros(2)
    for u, label in enumerate((None,) + targets):
        state = lstm_step(one_hot(label, 3), state, net.lstm)
        np.testing.assert_allclose(g[u], state.h @ net.w_out + net.b_out, rtol=0, atol=1e-14)


def test_prediction_step_matches_sequence():
    net = PredictionNet.uniform(3, 2, 0.5, make_rng(6))
    state, g0 = prediction_step(net, None, LstmState.zeros(2))
    state, g1 = prediction_step(net, 2, state)
    g, _ = predict_sequence(net, [2])
    np.testing.assert_allclose(np.stack([g0, g1]), g, rtol=0, atol=1e-15)


def test_prediction_rejects_out_of_range_label():
    net = PredictionNet.uniform(3, 2, 0.5, make_rng(1))
    with pytest.raises(LabelRangeError):
        predict_sequence(net, [0, 3])


def test_single_step_transcription_uses_both_directions():
    net = TranscriptionNet.uniform(2, 2, 2, 0.5, make_rng(7))
    x = make_rng(8).normal(size=(1, 2))
    f, _ = transcribe(net, x)
    h_fwd = lstm_step(x[0], LstmState.zeros(2), net.fwd).h
    h_bwd = lstm_step(x[0], LstmState.zeros(2), net.bwd).h
    np.testing.assert_allclose(f[0], h_fwd @ net.w_fwd_out + h_bwd @ net.w_bwd_out + net.b_out, rtol=0, atol=1e-15)


def test_first_output_sees_last_input():
    net = TranscriptionNet.uniform(3, 2, 3, 0.5, make_rng(3))
    x = make_rng(3).normal(size=(5, 3))
    f, _ = transcribe(net, x)
    x2 = x.copy()
    x2[-1] += 1.0
    f2, _ = transcribe(net, x2)
    assert np.max(np.abs(f2[0] - f[0])) > 0


def test_transcription_matches_manual_unroll():
    net = TranscriptionNet.uniform(2, 2, 2, 0.5, make_rng(9))
    x = make_rng(10).normal(size=(3, 2))
    f, _ = transcribe(net, x)
    fwd, state = [], LstmState.zeros(2)
    for t in range(3):
        state = lstm_step(x[t], state, net.fwd)
        fwd.append(state.h)
    bwd, state = [None] * 3, LstmState.zeros(2)
    for t in reversed(range(3)):
        state = lstm_step(x[t], state, net.bwd)
        bwd[t] = state.h
    for t in range(3):
        expected = fwd[t] @ net.w_fwd_out + bwd[t] @ net.w_bwd_out + net.b_out
        np.testing.assert_allclose(f[t], expected, rtol=0, atol=1e-14)


def test_transcription_rejects_empty_input():
    net = TranscriptionNet.uniform(2, 2, 2, 0.5, make_rng(9))
    with pytest.raises(DimensionError):
        transcribe(net, np.zeros((0, 2)))


def test_transcription_rejects_wrong_feature_width():
    net = TranscriptionNet.uniform(2, 2, 2, 0.5, make_rng(9))
    with pytest.raises(DimensionError):
        transcribe(net, np.zeros((3, 4)))


def test_output_lengths():
    model = tiny_model()
    f, _ = transcribe(model.transcription, np.zeros((7, 3)))
    g, _ = predict_sequence(model.prediction, [0, 1])
    assert f.shape == (7, 4)
    assert g.shape == (3, 4)


def test_zero_logit_gradients_give_zero_parameter_gradients():
    model = tiny_model()
    x = make_rng(1).normal(size=(3, 3))
    _, f_cache = transcribe(model.transcription, x, cache=True)
    _, g_cache = predict_sequence(model.prediction, [1, 2], cache=True)
    grads = networks_backward(model.prediction, model.transcription, g_cache, f_cache,
                              np.zeros((3, 4)), np.zeros((3, 4)))
    assert set(grads) == set(model.named_parameters())
    for array in grads.values():
        np.testing.assert_array_equal(array, 0.0)


def test_transcription_gradients_ignore_prediction_parameters():
    model = tiny_model()
    other = tiny_model(seed=99)
    x = make_rng(1).normal(size=(3, 3))
    d_f = make_rng(2).normal(size=(3, 4))
    d_g = make_rng(3).normal(size=(3, 4))
    _, f_cache = transcribe(model.transcription, x, cache=True)
    _, g_cache = predict_sequence(model.prediction, [1, 2], cache=True)
    _, g_cache_other = predict_sequence(other.prediction, [1, 2], cache=True)
    first = networks_backward(model.prediction, model.transcription, g_cache, f_cache, d_f, d_g)
    second = networks_backward(other.prediction, model.transcription, g_cache_other, f_cache, d_f, d_g)
    for name in first:
        if name.startswith('transcription.'):
            np.testing.assert_array_equal(first[name], second[name])


def test_backward_requires_cache():
    net = PredictionNet.uniform(3, 2, 0.5, make_rng(1))
    with pytest.raises(MissingCacheError):
        prediction_backward(net, None, np.zeros((1, 4)))


def test_backward_rejects_sequence_mismatch():
    net = PredictionNet.uniform(3, 2, 0.5, make_rng(1))
    _, cache = predict_sequence(net, [0, 1], cache=True)
    with pytest.raises(DimensionError):
        prediction_backward(net, cache, np.zeros((2, 4)))


def test_full_pipeline_gradients_match_finite_differences():
    model = tiny_model(seed=4, alphabet_size=2, feature_dim=2, hidden=2)
    x = make_rng(5).normal(size=(3, 2))
    labels = (1, 0)
    _, grads = model.loss_and_gradients(x, labels)
    eps = 1e-6
    for name, array in model.named_parameters().items():
        for index in np.ndindex(array.shape):
            original = array[index]
            array[index] = original + eps
            plus = -model.log_prob(x, labels)
            array[index] = original - eps
            minus = -model.log_prob(x, labels)
            array[index] = original
            numeric = (plus - minus) / (2 * eps)
            analytic = grads[name][index]
            assert abs(analytic - numeric) <= max(1e-6 * abs(numeric), 1e-8), f"{name}{index}"


def test_next_label_logits_see_only_earlier_labels():
    net = NextLabelNet.uniform(3, 4, 0.5, make_rng(11))
    logits, _ = next_label_logits(net, [2, 0, 1])
    assert logits.shape == (3, 3)
    state = lstm_step(np.zeros(3), LstmState.zeros(4), net.lstm)
    np.testing.assert_allclose(logits[0], state.h @ net.w_out + net.b_out, rtol=0, atol=1e-15)
    other, _ = next_label_logits(net, [2, 0, 2])
    np.testing.assert_array_equal(logits, other)


def test_next_label_logits_reject_bad_targets():
    net = NextLabelNet.uniform(3, 2, 0.5, make_rng(1))
    with pytest.raises(DimensionError):
        next_label_logits(net, [])
    with pytest.raises(LabelRangeError):
        next_label_logits(net, [0, 3])


def test_next_label_log_probs_are_normalised():
    model = NextLabelModel.initialise(4, 3, 0.5, make_rng(12))
    log_probs = model.label_log_probs([1, 3, 0])
    np.testing.assert_allclose(np.exp(log_probs).sum(axis=1), 1.0, rtol=0, atol=1e-12)
    assert model.log_prob(None, [1, 3, 0]) == pytest.approx(log_probs[[0, 1, 2], [1, 3, 0]].sum())
    assert model.log_prob(None, []) == 0.0


def test_next_label_gradients_match_finite_differences():
    model = NextLabelModel.initialise(3, 3, 0.5, make_rng(13))
    labels = [0, 2, 2, 1]
    loss, grads = model.loss_and_gradients(None, labels)
    assert loss == pytest.approx(-model.log_prob(None, labels))
    eps = 1e-6
    for name, param in model.named_parameters().items():
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + eps
            plus = -model.log_prob(None, labels)
            param[index] = original - eps
            minus = -model.log_prob(None, labels)
            param[index] = original
            assert (plus - minus) / (2 * eps) == pytest.approx(grads[name][index], abs=1e-7), name


def test_empty_target_has_zero_next_label_gradients():
    model = NextLabelModel.initialise(3, 2, 0.5, make_rng(14))
    loss, grads = model.loss_and_gradients(None, ())
    assert loss == 0.0
    assert set(grads) == set(model.named_parameters())
    assert all(not np.any(g) for g in grads.values())
