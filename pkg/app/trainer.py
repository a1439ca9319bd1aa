"""
Online training with weight noise and momentum, validation-based early
stopping, and dataset-level evaluation and decoding. The stand-alone
next-label network trains through the same per-sequence update.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from app.checkpoint import Checkpoint
from app.config import RunConfig
from app.datasets import Dataset, DatasetRecord
from app.decoder import Hypothesis, beam_search
from app.errors import DimensionError, DivergenceError, ZeroProbabilityError, get_logger
from app.metrics import bits_per_target, error_rate, misclassification_rate
from app.models import NextLabelModel, TrainableModel, TransducerModel
from app.networks import transcribe


@dataclass
class EpochMetrics:
    """One line of the training log."""
    epoch: int
    train_loss: float
    valid_loss: float
    valid_bits: float
    valid_error_rate: Optional[float] = None

    def to_line(self) -> str:
        line = f"{self.epoch}\t{self.train_loss!r}\t{self.valid_loss!r}\t{self.valid_bits!r}"
        if self.valid_error_rate is not None:
            line += f"\t{self.valid_error_rate!r}"
        return line


@dataclass
class TrainResult:
    best: Checkpoint
    final: Checkpoint
    history: List[EpochMetrics] = field(default_factory=list)


@dataclass
class EvalReport:
    """Dataset-level scores; losses are in nats per sequence."""
    loss: float
    bits_per_target: float
    error_rate: Optional[float] = None

    def to_dict(self) -> Dict[str, Optional[float]]:
        return {
            'loss_nats': self.loss,
            'bits_per_target': self.bits_per_target,
            'error_rate': self.error_rate,
        }


def momentum_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
                  velocity: Dict[str, np.ndarray], learning_rate: float, momentum: float) -> None:
    """In place: v <- momentum * v - learning_rate * g, then w <- w + v."""
    for name, param in params.items():
        v = velocity[name]
        v *= momentum
        v -= learning_rate * grads[name]
        param += v


def zero_velocity(model: TrainableModel) -> Dict[str, np.ndarray]:
    return {name: np.zeros_like(array) for name, array in model.named_parameters().items()}


def training_rng(seed: int) -> np.random.Generator:
    """Stream for shuffling and weight noise, independent of the initialisation stream."""
    return np.random.Generator(np.random.PCG64(seed).jumped())


def _check_dims(model: TransducerModel, dataset: Dataset, what: str) -> None:
    dims = model.dims
    if dataset.alphabet_size != dims['alphabet_size']:
        raise DimensionError(f"{what} alphabet size {dataset.alphabet_size} does not match "
                             f"model alphabet size {dims['alphabet_size']}")
    if dataset.feature_dim != dims['feature_dim']:
        raise DimensionError(f"{what} feature width {dataset.feature_dim} does not match "
                             f"model feature width {dims['feature_dim']}")


def train_sequence(model: TrainableModel, record: DatasetRecord, velocity: Dict[str, np.ndarray],
                   config: RunConfig, rng: np.random.Generator) -> float:
    """
    One online update: gradients at freshly perturbed weights, applied to the clean weights.

    Returns:
        float: The sequence log-loss in nats under the noisy weights.

    Raises:
        DivergenceError: If the loss or a gradient is not finite.
    """
    noisy = model.perturbed(config.train.weight_noise, rng)
    try:
        loss, grads = noisy.loss_and_gradients(record.features, record.labels)
    except ZeroProbabilityError as e:
        get_logger().error(f"Training diverged on sequence {record.id}: {e}")
        raise DivergenceError(f"training diverged on sequence {record.id}: {e}", sequence_id=record.id) from e
    if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
        get_logger().error(f"Non-finite loss or gradient on sequence {record.id}")
        raise DivergenceError(f"non-finite loss on sequence {record.id}", sequence_id=record.id)
    momentum_step(model.named_parameters(), grads, velocity, config.train.learning_rate, config.train.momentum)
    return loss


def decode_record(model: TransducerModel, record: DatasetRecord, width: int, nbest: int = 1) -> List[Hypothesis]:
    f, _ = transcribe(model.transcription, record.features)
    return beam_search(f, model.prediction, width, nbest)


def decode_dataset(model: TransducerModel, dataset: Dataset, width: int, nbest: int = 1,
                   workers: int = 1) -> List[List[Hypothesis]]:
    """
    Decode every record; results keep the dataset order.

    Args:
        model: Read-only model.
        dataset: Records to decode.
        width: Beam width.
        nbest: Hypotheses kept per record.
        workers: Threads decoding records concurrently.
    """
    _check_dims(model, dataset, 'dataset')
    if workers <= 1:
        return [decode_record(model, record, width, nbest) for record in dataset]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda record: decode_record(model, record, width, nbest), dataset))


def evaluate(model: TransducerModel, dataset: Dataset, beam_width: Optional[int] = None,
             workers: int = 1) -> EvalReport:
    """
    Score a model on a dataset.

    Args:
        model: Model to evaluate (clean weights).
        dataset: Non-empty dataset.
        beam_width: When given, also decode and report the label error rate.
        workers: Threads used for decoding.

    Returns:
        EvalReport: Mean loss per sequence, bits per target and the optional error rate.
    """
    _check_dims(model, dataset, 'dataset')
    if not len(dataset):
        raise DimensionError("cannot evaluate on an empty dataset")
    total_nats = -sum(model.log_prob(record.features, record.labels) for record in dataset)
    total_labels = dataset.total_labels
    report = EvalReport(loss=total_nats / len(dataset),
                        bits_per_target=bits_per_target(total_nats, total_labels) if total_labels else float('nan'))
    if beam_width is not None and total_labels:
        outputs = [hyps[0].labels for hyps in decode_dataset(model, dataset, beam_width, 1, workers)]
        targets = [record.labels for record in dataset]
        report.error_rate = error_rate(outputs, targets)
    return report


def _snapshot(model: TransducerModel, velocity: Dict[str, np.ndarray], epoch: int, rng: np.random.Generator,
              config: RunConfig, best_metric: Optional[float], best_epoch: int, stale_epochs: int) -> Checkpoint:
    return Checkpoint(model=model.copy(), velocity={k: v.copy() for k, v in velocity.items()}, epoch=epoch,
                      rng_state=rng.bit_generator.state, config=config.to_dict(), best_metric=best_metric,
                      best_epoch=best_epoch, stale_epochs=stale_epochs)


def train(model: TransducerModel, train_set: Dataset, valid_set: Dataset, config: RunConfig,
          resume: Optional[Checkpoint] = None, resume_best: Optional[Checkpoint] = None,
          on_epoch: Optional[Callable[[EpochMetrics, Checkpoint], None]] = None) -> TrainResult:
    """
    Train by online steepest descent with momentum and per-sequence weight noise.

    Each epoch visits the training records in a freshly shuffled order. For
    every record the gradient is computed at a noisy copy of the weights and
    the momentum update is applied to the clean weights. After the epoch the
    clean weights are scored on the validation set; training stops after
    ``patience`` epochs without improvement or at ``max_epochs``.

    Args:
        model: Initial model; updated in place unless resuming.
        train_set: Non-empty training records.
        valid_set: Non-empty validation records.
        config: Run configuration.
        resume: Checkpoint to continue from; its weights, momentum buffers,
            RNG state and early-stopping state replace the fresh ones.
        resume_best: Best checkpoint of the interrupted run, if it differs
            from ``resume``.
        on_epoch: Called after every epoch with its metrics and checkpoint.

    Returns:
        TrainResult: Best and final checkpoints plus the per-epoch log.

    Raises:
        DimensionError: If a dataset is empty or does not fit the model.
        DivergenceError: If a sequence produces a non-finite loss.
    """
    if not len(train_set) or not len(valid_set):
        raise DimensionError("training needs non-empty training and validation sets")
    _check_dims(model, train_set, 'training set')
    _check_dims(model, valid_set, 'validation set')
    logger = get_logger()
    settings = config.train

    if resume is not None:
        model = resume.model.copy()
        velocity = {k: v.copy() for k, v in resume.velocity.items()}
        rng = resume.restore_rng()
        start_epoch, best_metric = resume.epoch, resume.best_metric
        best_epoch, stale_epochs = resume.best_epoch, resume.stale_epochs
        best = resume_best if resume_best is not None else resume.copy()
        logger.info(f"Resuming training after epoch {start_epoch}")
    else:
        velocity = zero_velocity(model)
        rng = training_rng(settings.seed)
        start_epoch, best_metric, best_epoch, stale_epochs = 0, None, 0, 0
        best = _snapshot(model, velocity, 0, rng, config, None, 0, 0)

    counts = model.parameter_count()
    logger.info(f"Training {counts['total']} weights ({counts['prediction']} prediction, "
                f"{counts['transcription']} transcription) on {len(train_set)} sequences")

    history: List[EpochMetrics] = []
    final = resume.copy() if resume is not None else best
    for epoch in range(start_epoch + 1, settings.max_epochs + 1):
        if stale_epochs >= settings.patience:
            break
        order = rng.permutation(len(train_set))
        total = 0.0
        for index in order:
            record = train_set.records[int(index)]
            loss = train_sequence(model, record, velocity, config, rng)
            logger.debug(f"Epoch {epoch} sequence {record.id}: loss {loss:.6f}")
            total += loss

        use_error_rate = settings.early_stop_metric == 'error_rate'
        report = evaluate(model, valid_set, beam_width=1 if use_error_rate else None)
        metrics = EpochMetrics(epoch=epoch, train_loss=total / len(train_set), valid_loss=report.loss,
                               valid_bits=report.bits_per_target, valid_error_rate=report.error_rate)
        history.append(metrics)

        metric = report.error_rate if use_error_rate else report.loss
        if best_metric is None or metric < best_metric:
            best_metric, best_epoch, stale_epochs = metric, epoch, 0
        else:
            stale_epochs += 1
        final = _snapshot(model, velocity, epoch, rng, config, best_metric, best_epoch, stale_epochs)
        if best_epoch == epoch:
            best = final
        logger.info(f"Epoch {epoch}: train loss {metrics.train_loss:.4f} nats, "
                    f"validation loss {metrics.valid_loss:.4f} nats ({metrics.valid_bits:.4f} bits/target)")
        if on_epoch is not None:
            on_epoch(metrics, final)

    if history:
        logger.info(f"Best validation {settings.early_stop_metric} {best_metric:.4f} at epoch {best_epoch}")
    return TrainResult(best=best, final=final, history=history)


@dataclass
class NextLabelReport:
    """Stand-alone prediction network scores on a dataset."""
    bits_per_target: float
    error_rate: float

    def to_dict(self) -> Dict[str, float]:
        return {'bits_per_target': self.bits_per_target, 'error_rate': self.error_rate}


@dataclass
class NextLabelResult:
    best: NextLabelModel
    report: NextLabelReport
    history: List[NextLabelReport] = field(default_factory=list)


def _check_alphabet_size(model: NextLabelModel, dataset: Dataset, what: str) -> None:
    if dataset.alphabet_size != model.dims['alphabet_size']:
        raise DimensionError(f"{what} alphabet size {dataset.alphabet_size} does not match "
                             f"model alphabet size {model.dims['alphabet_size']}")


def evaluate_next_label(model: NextLabelModel, dataset: Dataset) -> NextLabelReport:
    """
    Log-loss in bits per target label and the percentage of target labels
    that are not the most probable guess given the labels before them.

    Raises:
        DimensionError: If the alphabets differ or every target is empty.
    """
    _check_alphabet_size(model, dataset, 'dataset')
    targets = [record.labels for record in dataset if record.labels]
    if not targets:
        raise DimensionError("next-label scores are undefined for empty targets")
    total_nats, guesses = 0.0, []
    for labels in targets:
        log_probs = model.label_log_probs(labels)
        total_nats -= float(log_probs[np.arange(len(labels)), np.asarray(labels)].sum())
        guesses.append(np.argmax(log_probs, axis=1))
    return NextLabelReport(bits_per_target=bits_per_target(total_nats, sum(len(t) for t in targets)),
                           error_rate=misclassification_rate(guesses, targets))


def train_next_label(model: NextLabelModel, train_set: Dataset, valid_set: Dataset,
                     config: RunConfig) -> NextLabelResult:
    """
    Train the stand-alone prediction network on the target sequences with
    the transducer's optimiser settings, stopping on validation bits per
    target.

    Returns:
        NextLabelResult: The best model, its validation report and the
        per-epoch validation history.
    """
    if not len(train_set) or not len(valid_set):
        raise DimensionError("training needs non-empty training and validation sets")
    _check_alphabet_size(model, train_set, 'training set')
    _check_alphabet_size(model, valid_set, 'validation set')
    logger = get_logger()
    settings = config.train
    velocity = zero_velocity(model)
    rng = training_rng(settings.seed)
    best, best_report, stale_epochs = model.copy(), None, 0
    history: List[NextLabelReport] = []
    logger.info(f"Training stand-alone prediction network ({model.parameter_count()['total']} weights)")
    for epoch in range(1, settings.max_epochs + 1):
        if stale_epochs >= settings.patience:
            break
        for index in rng.permutation(len(train_set)):
            train_sequence(model, train_set.records[int(index)], velocity, config, rng)
        report = evaluate_next_label(model, valid_set)
        history.append(report)
        if best_report is None or report.bits_per_target < best_report.bits_per_target:
            best, best_report, stale_epochs = model.copy(), report, 0
        else:
            stale_epochs += 1
        logger.info(f"Epoch {epoch}: next-label validation {report.bits_per_target:.4f} bits/target, "
                    f"{report.error_rate:.2f}% misclassified")
    return NextLabelResult(best=best, report=best_report, history=history)
