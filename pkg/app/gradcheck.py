"""
End-to-end gradient check: analytic gradients of the sequence log-loss for
every weight of both networks against central finite differences.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from app.core_math import make_rng, one_hot
from app.errors import ConfigError, get_logger
from app.models import TransducerModel

EPSILON = 1e-6
DEFAULT_TOLERANCE = 1e-5
# gradients smaller than this are compared absolutely
MAGNITUDE_FLOOR = 1e-2
MAX_INPUT_LENGTH = 4
MAX_TARGET_LENGTH = 3
MAX_HIDDEN = 4


@dataclass
class GradcheckReport:
    """Outcome of a gradient check."""
    passed: bool
    worst_error: float
    worst_parameter: str
    worst_index: Tuple[int, ...]
    tolerance: float
    checked: int
    per_parameter: Dict[str, float] = field(default_factory=dict)

    def summary(self) -> str:
        verdict = 'PASS' if self.passed else 'FAIL'
        return (f"{verdict}: worst relative error {self.worst_error:.3e} in {self.worst_parameter}"
                f"{list(self.worst_index)} over {self.checked} weights (tolerance {self.tolerance:g})")


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), MAGNITUDE_FLOOR)


def tiny_problem(seed: int, alphabet_size: int = 3, hidden: int = 3, input_length: int = 4,
                 target_length: int = 3, init_range: float = 0.5) -> Tuple[TransducerModel, np.ndarray, Tuple[int, ...]]:
    """
    A seeded model and record small enough for exhaustive finite differences.

    Raises:
        ConfigError: If a size exceeds the tiny limits.
    """
    if not 1 <= input_length <= MAX_INPUT_LENGTH:
        raise ConfigError(f"gradient check input length must lie in [1, {MAX_INPUT_LENGTH}]")
    if not 0 <= target_length <= MAX_TARGET_LENGTH:
        raise ConfigError(f"gradient check target length must lie in [0, {MAX_TARGET_LENGTH}]")
    if not 1 <= hidden <= MAX_HIDDEN:
        raise ConfigError(f"gradient check hidden size must lie in [1, {MAX_HIDDEN}]")
    if alphabet_size < 1:
        raise ConfigError("gradient check needs at least one label")
    rng = make_rng(seed)
    model = TransducerModel.initialise(alphabet_size, alphabet_size, hidden, hidden, init_range, rng)
    labels = tuple(int(k) for k in rng.integers(0, alphabet_size, size=target_length))
    symbols = rng.integers(0, alphabet_size, size=input_length)
    features = np.array([one_hot(int(s), alphabet_size) for s in symbols])
    features += rng.normal(0.0, 0.3, size=features.shape)
    return model, features, labels


def check_gradients(model: TransducerModel, features: np.ndarray, labels: Tuple[int, ...],
                    tolerance: float = DEFAULT_TOLERANCE, corrupt: Optional[str] = None) -> GradcheckReport:
    """
    Compare analytic and central-difference gradients for every weight.

    Args:
        model: Model to check; its weights are restored afterwards.
        features: Input sequence.
        labels: Target sequence.
        tolerance: Largest relative error that passes.
        corrupt: Name of a parameter whose analytic gradient is scaled by
            1.01 before comparison, to exercise the failure path.

    Returns:
        GradcheckReport: Worst relative error and where it occurred.
    """
    _, grads = model.loss_and_gradients(features, labels)
    if corrupt is not None:
        if corrupt not in grads:
            raise ConfigError(f"unknown parameter {corrupt!r}")
        grads[corrupt] = grads[corrupt] * 1.01

    def loss() -> float:
        return -model.log_prob(features, labels)

    report = GradcheckReport(passed=True, worst_error=0.0, worst_parameter='', worst_index=(),
                             tolerance=tolerance, checked=0)
    for name, array in model.named_parameters().items():
        worst = 0.0
        for index in np.ndindex(array.shape):
            original = array[index]
            array[index] = original + EPSILON
            plus = loss()
            array[index] = original - EPSILON
            minus = loss()
            array[index] = original
            numeric = (plus - minus) / (2 * EPSILON)
            error = relative_error(float(grads[name][index]), numeric)
            report.checked += 1
            if error > worst:
                worst = error
            if error > report.worst_error or not report.worst_parameter:
                report.worst_error, report.worst_parameter, report.worst_index = error, name, index
        report.per_parameter[name] = worst
    report.passed = report.worst_error < tolerance
    get_logger().info(f"Gradient check {report.summary()}")
    return report


def run_gradcheck(seed: int, tolerance: float = DEFAULT_TOLERANCE, corrupt: Optional[str] = None,
                  **sizes) -> GradcheckReport:
    """Build the tiny problem for ``seed`` and check it."""
    model, features, labels = tiny_problem(seed, **sizes)
    return check_gradients(model, features, labels, tolerance=tolerance, corrupt=corrupt)
