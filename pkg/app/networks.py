"""
Prediction network G and bidirectional transcription network F.

Both emit vectors of length K+1 over the extended alphabet; index K is the
null label. The prediction network reads the target sequence with the null
label prepended, so a length-U target yields U+1 prediction vectors.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from app.core_math import one_hot
from app.errors import DimensionError, LabelRangeError, MissingCacheError
from app.lstm import LstmCache, LstmParams, LstmState, lstm_backward, lstm_forward, lstm_step


@dataclass
class PredictionNet:
    """One LSTM layer over one-hot labels plus a (hidden x K+1) output projection."""
    lstm: LstmParams
    w_out: np.ndarray
    b_out: np.ndarray

    @property
    def alphabet_size(self) -> int:
        return self.lstm.input_size

    @property
    def hidden_size(self) -> int:
        return self.lstm.hidden_size

    @classmethod
    def uniform(cls, alphabet_size: int, hidden_size: int, init_range: float,
                rng: np.random.Generator) -> 'PredictionNet':
        lstm = LstmParams.uniform(alphabet_size, hidden_size, init_range, rng)
        return cls(lstm=lstm,
                   w_out=rng.uniform(-init_range, init_range, size=(hidden_size, alphabet_size + 1)),
                   b_out=rng.uniform(-init_range, init_range, size=alphabet_size + 1))

    def named_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {f"lstm.{name}": value for name, value in self.lstm.named_arrays().items()}
        arrays['w_out'] = self.w_out
        arrays['b_out'] = self.b_out
        return arrays

    def validate(self) -> None:
        self.lstm.validate()
        outputs = self.alphabet_size + 1
        if self.w_out.shape != (self.hidden_size, outputs) or self.b_out.shape != (outputs,):
            raise DimensionError(f"prediction output layer must map {self.hidden_size} -> {outputs}")


@dataclass
class NextLabelNet:
    """
    Prediction network trained on its own: one LSTM layer over one-hot labels
    and a (hidden x K) softmax layer over the next real label. There is no
    null output.
    """
    lstm: LstmParams
    w_out: np.ndarray
    b_out: np.ndarray

    @property
    def alphabet_size(self) -> int:
        return self.lstm.input_size

    @property
    def hidden_size(self) -> int:
        return self.lstm.hidden_size

    @classmethod
    def uniform(cls, alphabet_size: int, hidden_size: int, init_range: float,
                rng: np.random.Generator) -> 'NextLabelNet':
        lstm = LstmParams.uniform(alphabet_size, hidden_size, init_range, rng)
        return cls(lstm=lstm,
                   w_out=rng.uniform(-init_range, init_range, size=(hidden_size, alphabet_size)),
                   b_out=rng.uniform(-init_range, init_range, size=alphabet_size))

    def named_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {f"lstm.{name}": value for name, value in self.lstm.named_arrays().items()}
        arrays['w_out'] = self.w_out
        arrays['b_out'] = self.b_out
        return arrays


@dataclass
class TranscriptionNet:
    """Forward and backward LSTM layers whose projections are summed with one shared bias."""
    fwd: LstmParams
    bwd: LstmParams
    w_fwd_out: np.ndarray
    w_bwd_out: np.ndarray
    b_out: np.ndarray

    @property
    def feature_dim(self) -> int:
        return self.fwd.input_size

    @property
    def hidden_size(self) -> int:
        return self.fwd.hidden_size

    @property
    def output_size(self) -> int:
        return self.b_out.shape[0]

    @classmethod
    def uniform(cls, feature_dim: int, alphabet_size: int, hidden_size: int, init_range: float,
                rng: np.random.Generator) -> 'TranscriptionNet':
        fwd = LstmParams.uniform(feature_dim, hidden_size, init_range, rng)
        bwd = LstmParams.uniform(feature_dim, hidden_size, init_range, rng)
        outputs = alphabet_size + 1
        return cls(fwd=fwd, bwd=bwd,
                   w_fwd_out=rng.uniform(-init_range, init_range, size=(hidden_size, outputs)),
                   w_bwd_out=rng.uniform(-init_range, init_range, size=(hidden_size, outputs)),
                   b_out=rng.uniform(-init_range, init_range, size=outputs))

    def named_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {f"fwd.{name}": value for name, value in self.fwd.named_arrays().items()}
        arrays.update({f"bwd.{name}": value for name, value in self.bwd.named_arrays().items()})
        arrays['w_fwd_out'] = self.w_fwd_out
        arrays['w_bwd_out'] = self.w_bwd_out
        arrays['b_out'] = self.b_out
        return arrays

    def validate(self) -> None:
        self.fwd.validate()
        self.bwd.validate()
        if self.bwd.input_size != self.feature_dim or self.bwd.hidden_size != self.hidden_size:
            raise DimensionError("forward and backward transcription layers disagree in size")
        shape = (self.hidden_size, self.output_size)
        if self.w_fwd_out.shape != shape or self.w_bwd_out.shape != shape:
            raise DimensionError(f"transcription output projections must have shape {shape}")


@dataclass
class PredictionActivations:
    inputs: np.ndarray
    hidden: np.ndarray
    lstm: LstmCache


@dataclass
class TranscriptionActivations:
    hidden_fwd: np.ndarray
    hidden_bwd: np.ndarray
    lstm_fwd: LstmCache
    lstm_bwd: LstmCache


def encode_targets(targets: Sequence[int], alphabet_size: int) -> np.ndarray:
    """
    One-hot encode (null, y_1, ..., y_U) as a (U+1 x K) input matrix.

    Raises:
        LabelRangeError: If any label is outside [0, K).
    """
    rows = [one_hot(None, alphabet_size)]
    for label in targets:
        if not 0 <= int(label) < alphabet_size:
            raise LabelRangeError(f"target label {label} outside alphabet of size {alphabet_size}")
        rows.append(one_hot(int(label), alphabet_size))
    return np.array(rows)


def predict_sequence(net: PredictionNet, targets: Sequence[int],
                     cache: bool = False) -> Tuple[np.ndarray, Optional[PredictionActivations]]:
    """
    Compute the prediction vectors g_0..g_U for a target sequence.

    Args:
        net: Prediction network.
        targets: Labels y_1..y_U in [0, K).
        cache: Keep activations for :func:`networks_backward`.

    Returns:
        Tuple of the (U+1 x K+1) prediction matrix and the cache (or None).
    """
    inputs = encode_targets(targets, net.alphabet_size)
    hidden, lstm_cache = lstm_forward(inputs, net.lstm, cache=cache)
    outputs = hidden @ net.w_out + net.b_out
    if not cache:
        return outputs, None
    return outputs, PredictionActivations(inputs=inputs, hidden=hidden, lstm=lstm_cache)


def next_label_logits(net: NextLabelNet, targets: Sequence[int],
                      cache: bool = False) -> Tuple[np.ndarray, Optional[PredictionActivations]]:
    """
    Logits for y_1..y_U, each computed from the labels before it
    (the first from the null input alone).

    Returns:
        Tuple of the (U x K) logit matrix and the cache (or None).

    Raises:
        DimensionError: If ``targets`` is empty.
    """
    if len(targets) == 0:
        raise DimensionError("next-label prediction needs at least one target label")
    inputs = encode_targets(targets, net.alphabet_size)[:-1]
    hidden, lstm_cache = lstm_forward(inputs, net.lstm, cache=cache)
    outputs = hidden @ net.w_out + net.b_out
    if not cache:
        return outputs, None
    return outputs, PredictionActivations(inputs=inputs, hidden=hidden, lstm=lstm_cache)


def prediction_step(net: PredictionNet, label: Optional[int],
                    state: LstmState) -> Tuple[LstmState, np.ndarray]:
    """
    Feed one label (None for the initial null input) and return the new state
    and prediction vector.
    """
    new_state = lstm_step(one_hot(label, net.alphabet_size), state, net.lstm)
    return new_state, new_state.h @ net.w_out + net.b_out


def transcribe(net: TranscriptionNet, features: np.ndarray,
               cache: bool = False) -> Tuple[np.ndarray, Optional[TranscriptionActivations]]:
    """
    Compute the transcription vectors f_1..f_T.

    The backward layer runs from t = T down to 1, the forward layer from 1 to T;
    each f_t combines both hidden vectors, so it depends on the whole input.

    Args:
        net: Transcription network.
        features: (T x feature_dim) input sequence, T >= 1.
        cache: Keep activations for :func:`networks_backward`.

    Returns:
        Tuple of the (T x K+1) transcription matrix and the cache (or None).

    Raises:
        DimensionError: If the sequence is empty or has the wrong width.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise DimensionError("transcription needs a non-empty (T x feature_dim) input")
    if features.shape[1] != net.feature_dim:
        raise DimensionError(f"feature width {features.shape[1]} does not match network input {net.feature_dim}")

    hidden_fwd, cache_fwd = lstm_forward(features, net.fwd, cache=cache)
    hidden_bwd_rev, cache_bwd = lstm_forward(features[::-1], net.bwd, cache=cache)
    hidden_bwd = hidden_bwd_rev[::-1]
    outputs = hidden_fwd @ net.w_fwd_out + hidden_bwd @ net.w_bwd_out + net.b_out
    if not cache:
        return outputs, None
    return outputs, TranscriptionActivations(hidden_fwd=hidden_fwd, hidden_bwd=hidden_bwd,
                                       lstm_fwd=cache_fwd, lstm_bwd=cache_bwd)


def prediction_backward(net: Union[PredictionNet, NextLabelNet], cache: Optional[PredictionActivations],
                        d_outputs: np.ndarray) -> Dict[str, np.ndarray]:
    """Gradients of every prediction-network parameter given dL/dg (or dL/d logits)."""
    if cache is None:
        raise MissingCacheError("prediction backward pass needs the forward cache")
    if d_outputs.shape != (cache.hidden.shape[0], net.w_out.shape[1]):
        raise DimensionError(
            f"dL/dg shape {d_outputs.shape} does not match {cache.hidden.shape[0]} cached prediction steps")
    d_hidden = d_outputs @ net.w_out.T
    lstm_grads = lstm_backward(cache.lstm, net.lstm, d_hidden)
    grads = {f"lstm.{name}": value for name, value in lstm_grads.params.named_arrays().items()}
    grads['w_out'] = cache.hidden.T @ d_outputs
    grads['b_out'] = d_outputs.sum(axis=0)
    return grads


def transcription_backward(net: TranscriptionNet, cache: Optional[TranscriptionActivations],
                           d_outputs: np.ndarray) -> Dict[str, np.ndarray]:
    """Gradients of every transcription-network parameter given dL/df."""
    if cache is None:
        raise MissingCacheError("transcription backward pass needs the forward cache")
    if d_outputs.shape != (cache.hidden_fwd.shape[0], net.output_size):
        raise DimensionError(
            f"dL/df shape {d_outputs.shape} does not match {cache.hidden_fwd.shape[0]} cached transcription steps")
    fwd_grads = lstm_backward(cache.lstm_fwd, net.fwd, d_outputs @ net.w_fwd_out.T)
    bwd_grads = lstm_backward(cache.lstm_bwd, net.bwd, (d_outputs @ net.w_bwd_out.T)[::-1])
    grads = {f"fwd.{name}": value for name, value in fwd_grads.params.named_arrays().items()}
    grads.update({f"bwd.{name}": value for name, value in bwd_grads.params.named_arrays().items()})
    grads['w_fwd_out'] = cache.hidden_fwd.T @ d_outputs
    grads['w_bwd_out'] = cache.hidden_bwd.T @ d_outputs
    grads['b_out'] = d_outputs.sum(axis=0)
    return grads


def networks_backward(prediction: PredictionNet, transcription: TranscriptionNet,
                      prediction_cache: Optional[PredictionActivations],
                      transcription_cache: Optional[TranscriptionActivations],
                      d_f: np.ndarray, d_g: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Backpropagate dL/df and dL/dg through both networks independently.

    Returns:
        dict: gradients keyed ``prediction.<name>`` and ``transcription.<name>``.
    """
    grads = {f"prediction.{k}": v for k, v in prediction_backward(prediction, prediction_cache, d_g).items()}
    grads.update({f"transcription.{k}": v
                  for k, v in transcription_backward(transcription, transcription_cache, d_f).items()})
    return grads
