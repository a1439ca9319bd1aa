"""
Transducer model: the prediction and transcription networks with their
parameters addressable by name. Also the stand-alone next-label model used
as a prediction-only reference.
"""

import copy
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from app.core_math import log_softmax
from app.errors import CheckpointError
from app.joint import build_lattice
from app.lattice import alignment_grid, loss_and_grads
from app.lstm import LstmParams
from app.networks import (NextLabelNet, PredictionNet, TranscriptionNet, networks_backward, next_label_logits,
                          predict_sequence, prediction_backward, transcribe)


class NoisyCopyMixin:
    """Copying and weight-noise helpers for models exposing ``named_parameters``."""

    def copy(self):
        return copy.deepcopy(self)

    def perturbed(self, std: float, rng: np.random.Generator):
        """A copy with zero-mean Gaussian noise of the given std added to every weight."""
        noisy = self.copy()
        if std > 0:
            for array in noisy.named_parameters().values():
                array += rng.normal(0.0, std, size=array.shape)
        return noisy


@dataclass
class TransducerModel(NoisyCopyMixin):
    """
    RNN transducer parameters.

    Attributes:
        prediction: Prediction network over labels (input size K).
        transcription: Bidirectional transcription network over features.
    """
    prediction: PredictionNet
    transcription: TranscriptionNet

    @classmethod
    def initialise(cls, alphabet_size: int, feature_dim: int, pred_hidden: int, trans_hidden: int,
                   init_range: float, rng: np.random.Generator) -> 'TransducerModel':
        """
        Create a model with every weight drawn uniformly from [-init_range, init_range].

        Args:
            alphabet_size: Number of real labels K.
            feature_dim: Width of the input feature vectors.
            pred_hidden: Prediction LSTM size.
            trans_hidden: Size of each transcription LSTM direction.
            init_range: Half-width of the uniform initialisation.
            rng: Seeded generator.

        Returns:
            TransducerModel: Freshly initialised model.
        """
        prediction = PredictionNet.uniform(alphabet_size, pred_hidden, init_range, rng)
        transcription = TranscriptionNet.uniform(feature_dim, alphabet_size, trans_hidden, init_range, rng)
        return cls(prediction=prediction, transcription=transcription)

    @classmethod
    def from_arrays(cls, dims: Dict[str, int], arrays: Dict[str, np.ndarray]) -> 'TransducerModel':
        """
        Rebuild a model from named arrays.

        Raises:
            CheckpointError: If a parameter is missing or has the wrong shape.
        """
        model = cls.zeros(**dims)
        for name, target in model.named_parameters().items():
            if name not in arrays:
                raise CheckpointError(f"parameter {name} missing")
            if arrays[name].shape != target.shape:
                raise CheckpointError(f"parameter {name} has shape {arrays[name].shape}, expected {target.shape}")
            target[...] = arrays[name]
        return model

    @classmethod
    def zeros(cls, alphabet_size: int, feature_dim: int, pred_hidden: int, trans_hidden: int) -> 'TransducerModel':
        outputs = alphabet_size + 1
        prediction = PredictionNet(lstm=LstmParams.zeros(alphabet_size, pred_hidden),
                                   w_out=np.zeros((pred_hidden, outputs)), b_out=np.zeros(outputs))
        transcription = TranscriptionNet(fwd=LstmParams.zeros(feature_dim, trans_hidden),
                                         bwd=LstmParams.zeros(feature_dim, trans_hidden),
                                         w_fwd_out=np.zeros((trans_hidden, outputs)),
                                         w_bwd_out=np.zeros((trans_hidden, outputs)),
                                         b_out=np.zeros(outputs))
        return cls(prediction=prediction, transcription=transcription)

    @property
    def dims(self) -> Dict[str, int]:
        return {
            'alphabet_size': self.prediction.alphabet_size,
            'feature_dim': self.transcription.feature_dim,
            'pred_hidden': self.prediction.hidden_size,
            'trans_hidden': self.transcription.hidden_size,
        }

    def named_parameters(self) -> Dict[str, np.ndarray]:
        """All parameter arrays in declaration order, as mutable views."""
        params = {f"prediction.{k}": v for k, v in self.prediction.named_arrays().items()}
        params.update({f"transcription.{k}": v for k, v in self.transcription.named_arrays().items()})
        return params

    def parameter_count(self) -> Dict[str, int]:
        """Weight counts per network and in total."""
        prediction = sum(v.size for v in self.prediction.named_arrays().values())
        transcription = sum(v.size for v in self.transcription.named_arrays().values())
        return {'prediction': prediction, 'transcription': transcription, 'total': prediction + transcription}

    def validate(self) -> None:
        self.prediction.validate()
        self.transcription.validate()
        if self.transcription.output_size != self.prediction.alphabet_size + 1:
            raise CheckpointError("transcription and prediction networks disagree on the alphabet")

    def log_prob(self, features: np.ndarray, labels: Sequence[int]) -> float:
        """log Pr(labels|features)."""
        f, _ = transcribe(self.transcription, features)
        g, _ = predict_sequence(self.prediction, labels)
        return alignment_grid(build_lattice(f, g, labels)).log_prob

    def loss_and_gradients(self, features: np.ndarray,
                           labels: Sequence[int]) -> Tuple[float, Dict[str, np.ndarray]]:
        """
        Log-loss of one sequence and its gradient for every named parameter.

        Returns:
            Tuple of (loss in nats, gradients keyed like :meth:`named_parameters`).
        """
        f, f_cache = transcribe(self.transcription, features, cache=True)
        g, g_cache = predict_sequence(self.prediction, labels, cache=True)
        lattice = build_lattice(f, g, labels)
        loss, d_f, d_g = loss_and_grads(lattice, alignment_grid(lattice))
        grads = networks_backward(self.prediction, self.transcription, g_cache, f_cache, d_f, d_g)
        return loss, grads


@dataclass
class NextLabelModel(NoisyCopyMixin):
    """
    Stand-alone prediction network, trained on the target sequences alone to
    predict every label from the ones before it. It measures how much of a
    task the output history explains without seeing the input.
    """
    net: NextLabelNet

    @classmethod
    def initialise(cls, alphabet_size: int, hidden_size: int, init_range: float,
                   rng: np.random.Generator) -> 'NextLabelModel':
        return cls(net=NextLabelNet.uniform(alphabet_size, hidden_size, init_range, rng))

    @property
    def dims(self) -> Dict[str, int]:
        return {'alphabet_size': self.net.alphabet_size, 'pred_hidden': self.net.hidden_size}

    def named_parameters(self) -> Dict[str, np.ndarray]:
        return self.net.named_arrays()

    def parameter_count(self) -> Dict[str, int]:
        total = sum(v.size for v in self.net.named_arrays().values())
        return {'prediction': total, 'total': total}

    def label_log_probs(self, labels: Sequence[int]) -> np.ndarray:
        """(U x K) log Pr(k | y_1..y_{u-1}) for u = 1..U."""
        logits, _ = next_label_logits(self.net, labels)
        return np.array([log_softmax(row) for row in logits])

    def log_prob(self, features: np.ndarray, labels: Sequence[int]) -> float:
        """log Pr(labels); the features are not used."""
        if len(labels) == 0:
            return 0.0
        log_probs = self.label_log_probs(labels)
        return float(log_probs[np.arange(len(labels)), np.asarray(labels)].sum())

    def loss_and_gradients(self, features: np.ndarray,
                           labels: Sequence[int]) -> Tuple[float, Dict[str, np.ndarray]]:
        """
        Summed next-label cross-entropy of one target sequence and its
        gradients. The features are ignored so the model trains through the
        same per-sequence loop as the transducer.
        """
        if len(labels) == 0:
            return 0.0, {name: np.zeros_like(v) for name, v in self.named_parameters().items()}
        logits, cache = next_label_logits(self.net, labels, cache=True)
        log_probs = np.array([log_softmax(row) for row in logits])
        positions, targets = np.arange(len(labels)), np.asarray(labels)
        d_logits = np.exp(log_probs)
        d_logits[positions, targets] -= 1.0
        loss = -float(log_probs[positions, targets].sum())
        return loss, prediction_backward(self.net, cache, d_logits)


TrainableModel = Union[TransducerModel, NextLabelModel]
