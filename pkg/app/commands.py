"""
Command-line interface, registered on the ``flask`` command through a blueprint.

Exit codes: 0 on success, 1 on runtime failures (divergence, zero
probability, degenerate models, failed gradient checks), 2 on usage and
input errors (malformed or missing files, invalid configuration,
dimension mismatches).
"""

import json
import os
from functools import wraps

import click
import numpy as np
from flask import Blueprint, current_app

from app.checkpoint import load_checkpoint, save_checkpoint
from app.config import load_run_config, write_run_config
from app.core_math import make_rng
from app.datasets import Dataset, read_dataset, write_dataset
from app.errors import CheckpointError, ConfigError, DataFormatError, DimensionError, TransducerError
from app.gradcheck import run_gradcheck
from app.joint import build_lattice
from app.lattice import alignment_grid
from app.metrics import error_rate
from app.models import NextLabelModel, TransducerModel
from app.networks import predict_sequence, transcribe
from app.tasks import generate_task, split_dataset
from app.trainer import EpochMetrics, decode_dataset, evaluate, train, train_next_label

bp = Blueprint('transducer', __name__, cli_group=None)

INPUT_ERRORS = (DataFormatError, ConfigError, CheckpointError, DimensionError)
METRICS_HEADER = "epoch\ttrain_loss_nats\tvalid_loss_nats\tvalid_bits_per_target"
CSV_FORMAT = '%.17g'


def handle_errors(f):
    """Translate transducer errors into diagnostics on stderr and exit codes."""
    @wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except INPUT_ERRORS as e:
            current_app.logger.error(f"{f.__name__}: {e.message}")
            click.echo(f"error: {e.user_message}", err=True)
            raise SystemExit(2)
        except TransducerError as e:
            current_app.logger.error(f"{f.__name__}: {e.message}")
            click.echo(f"error: {e.user_message}", err=True)
            raise SystemExit(1)
    return wrapper


def _ensure_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {path}: {e.strerror}") from e


def _check_alphabet(model: TransducerModel, dataset: Dataset) -> None:
    dims = model.dims
    if dataset.alphabet_size != dims['alphabet_size']:
        raise DimensionError(f"dataset alphabet size {dataset.alphabet_size} does not match "
                             f"checkpoint alphabet size {dims['alphabet_size']}")
    if dataset.feature_dim != dims['feature_dim']:
        raise DimensionError(f"dataset feature width {dataset.feature_dim} does not match "
                             f"checkpoint feature width {dims['feature_dim']}")


def _decode_settings(config_path, beam_width, nbest):
    """Beam width and n-best size: flags first, then the run configuration, then the environment."""
    if config_path is not None:
        config = load_run_config(config_path)
        defaults = config.beam_width, config.nbest
    else:
        defaults = current_app.config['DEFAULT_BEAM_WIDTH'], current_app.config['DEFAULT_NBEST']
    width = beam_width if beam_width is not None else defaults[0]
    nbest = nbest if nbest is not None else defaults[1]
    if width < 1:
        raise ConfigError(f"beam width must be at least 1, got {width}")
    if not 1 <= nbest <= width:
        raise ConfigError(f"n-best count must lie in [1, {width}], got {nbest}")
    return width, nbest


def _training_sets(config, data_paths):
    """A training file plus a validation file, or a split of the training file."""
    if len(data_paths) > 2:
        raise ConfigError("--data takes a training file and at most one validation file")
    train_set = read_dataset(data_paths[0])
    if len(data_paths) == 2:
        return train_set, read_dataset(data_paths[1])
    return split_dataset(train_set, config.validation_fraction, config.train.seed)


def format_hypotheses(record_id: str, hypotheses) -> str:
    """``id<TAB>labels|score`` per hypothesis, labels space-separated."""
    fields = [record_id]
    for hyp in hypotheses:
        fields.append(f"{' '.join(str(k) for k in hyp.labels)}|{hyp.score!r}")
    return '\t'.join(fields)


def parse_transcript(path: str) -> dict:
    """Read a decode output file into ``{id: best labels}``."""
    if not os.path.isfile(path):
        raise DataFormatError("file not found", path=path)
    outputs = {}
    with open(path, encoding='utf-8') as f:
        for number, line in enumerate(f, start=1):
            fields = line.rstrip('\n').split('\t')
            if len(fields) < 2 or '|' not in fields[1]:
                raise DataFormatError("expected 'id<TAB>labels|score'", path=path, line=number)
            labels_text = fields[1].rsplit('|', 1)[0]
            try:
                outputs[fields[0]] = tuple(int(k) for k in labels_text.split())
            except ValueError as e:
                raise DataFormatError(f"non-integer label in {labels_text!r}", path=path, line=number) from e
    return outputs


@bp.cli.command('gen')
@click.option('--config', 'config_path', default=None, help='Run configuration file.')
@click.option('--task', default=None, type=click.Choice(['copy', 'double', 'dedup']), help='Toy task.')
@click.option('--count', default=None, type=int, help='Number of records.')
@click.option('--seed', default=None, type=int, help='Random seed.')
@click.option('--out', required=True, help='Output directory for train.jsonl and valid.jsonl.')
@handle_errors
def gen_command(config_path, task, count, seed, out):
    """Generate a toy-task dataset split into training and validation files."""
    config = load_run_config(config_path, {'task': task, 'count': count, 'seed': seed})
    dataset = generate_task(config.task, config.count, config.min_length, config.max_length,
                            config.alphabet_size, config.train.seed, feature_dim=config.feature_dim,
                            input_noise=config.input_noise)
    train_set, valid_set = split_dataset(dataset, config.validation_fraction, config.train.seed)
    _ensure_dir(out)
    write_dataset(train_set, os.path.join(out, 'train.jsonl'))
    write_dataset(valid_set, os.path.join(out, 'valid.jsonl'))
    click.echo(f"wrote {len(train_set)} training and {len(valid_set)} validation records to {out}")


@bp.cli.command('train')
@click.option('--config', 'config_path', default=None, help='Run configuration file.')
@click.option('--data', 'data_paths', multiple=True, required=True,
              help='Training file, then optionally a validation file.')
@click.option('--out', required=True, help='Output directory.')
@click.option('--seed', default=None, type=int, help='Random seed.')
@click.option('--resume', 'resume_path', default=None, help='Checkpoint to continue training from.')
@handle_errors
def train_command(config_path, data_paths, out, seed, resume_path):
    """Train a transducer and write best.ckpt, final.ckpt, metrics.tsv and the effective config.cfg."""
    config = load_run_config(config_path, {'seed': seed})
    train_set, valid_set = _training_sets(config, data_paths)
    _ensure_dir(out)
    write_run_config(config, os.path.join(out, 'config.cfg'))

    resume, resume_best = None, None
    if resume_path is not None:
        resume = load_checkpoint(resume_path)
        model = resume.model
        best_path = os.path.join(os.path.dirname(resume_path), 'best.ckpt')
        if os.path.isfile(best_path) and os.path.abspath(best_path) != os.path.abspath(resume_path):
            resume_best = load_checkpoint(best_path)
    else:
        model = TransducerModel.initialise(config.alphabet_size, config.feature_dim, config.pred_hidden,
                                           config.trans_hidden, config.train.init_range,
                                           make_rng(config.train.seed))

    metrics_path = os.path.join(out, 'metrics.tsv')
    if resume is None:
        with open(metrics_path, 'w', encoding='utf-8') as f:
            header = METRICS_HEADER
            if config.train.early_stop_metric == 'error_rate':
                header += "\tvalid_error_rate"
            f.write(header + '\n')

    def on_epoch(metrics: EpochMetrics, checkpoint) -> None:
        with open(metrics_path, 'a', encoding='utf-8') as f:
            f.write(metrics.to_line() + '\n')
        save_checkpoint(checkpoint, os.path.join(out, 'final.ckpt'))

    result = train(model, train_set, valid_set, config, resume=resume, resume_best=resume_best,
                   on_epoch=on_epoch)
    save_checkpoint(result.best, os.path.join(out, 'best.ckpt'))
    save_checkpoint(result.final, os.path.join(out, 'final.ckpt'))
    click.echo(f"trained {len(result.history)} epochs; best epoch {result.best.epoch}")


@bp.cli.command('decode')
@click.option('--checkpoint', 'checkpoint_path', required=True, help='Trained checkpoint.')
@click.option('--data', 'data_path', required=True, help='Dataset to decode.')
@click.option('--out', default=None, help='Transcription file (stdout when omitted).')
@click.option('--config', 'config_path', default=None, help='Run configuration supplying beam_width and nbest.')
@click.option('--beam-width', default=None, type=int, help='Beam width W.')
@click.option('--nbest', default=None, type=int, help='Hypotheses written per record.')
@handle_errors
def decode_command(checkpoint_path, data_path, out, config_path, beam_width, nbest):
    """Beam-search decode every record of a dataset."""
    checkpoint = load_checkpoint(checkpoint_path)
    dataset = read_dataset(data_path)
    _check_alphabet(checkpoint.model, dataset)
    width, nbest = _decode_settings(config_path, beam_width, nbest)
    results = decode_dataset(checkpoint.model, dataset, width, nbest,
                             workers=current_app.config['DECODE_WORKERS'])
    lines = [format_hypotheses(record.id, hyps) for record, hyps in zip(dataset, results)]
    if out is None:
        for line in lines:
            click.echo(line)
    else:
        with open(out, 'w', encoding='utf-8') as f:
            f.writelines(line + '\n' for line in lines)
        current_app.logger.info(f"Wrote {len(lines)} transcriptions to {out}")


@bp.cli.command('eval')
@click.option('--checkpoint', 'checkpoint_path', required=True, help='Trained checkpoint.')
@click.option('--data', 'data_path', required=True, help='Reference dataset.')
@click.option('--config', 'config_path', default=None, help='Run configuration supplying beam_width.')
@click.option('--beam-width', default=None, type=int, help='Beam width used to decode.')
@click.option('--transcript', default=None, help='Score this decode output instead of decoding.')
@handle_errors
def eval_command(checkpoint_path, data_path, config_path, beam_width, transcript):
    """Report loss, bits per target and label error rate."""
    checkpoint = load_checkpoint(checkpoint_path)
    dataset = read_dataset(data_path)
    _check_alphabet(checkpoint.model, dataset)
    if transcript is None:
        width, _ = _decode_settings(config_path, beam_width, 1)
        report = evaluate(checkpoint.model, dataset, beam_width=width,
                          workers=current_app.config['DECODE_WORKERS']).to_dict()
    else:
        report = evaluate(checkpoint.model, dataset).to_dict()
        outputs = parse_transcript(transcript)
        missing = [record.id for record in dataset if record.id not in outputs]
        if missing:
            raise DataFormatError(f"no transcription for record {missing[0]!r}", path=transcript)
        report['error_rate'] = error_rate([outputs[record.id] for record in dataset],
                                          [record.labels for record in dataset])
    for key, value in report.items():
        if value is not None:
            click.echo(f"{key}\t{value!r}")


@bp.cli.command('gradcheck')
@click.option('--config', 'config_path', default=None, help='Run configuration (alphabet size, init range).')
@click.option('--seed', default=42, type=int, help='Random seed.')
@click.option('--corrupt', default=None, hidden=True, help='Scale this parameter gradient by 1.01.')
@handle_errors
def gradcheck_command(config_path, seed, corrupt):
    """Compare every analytic gradient with central finite differences on a tiny problem."""
    sizes = {}
    if config_path is not None:
        config = load_run_config(config_path)
        sizes = {'alphabet_size': min(config.alphabet_size, 3), 'init_range': config.train.init_range}
    report = run_gradcheck(seed, tolerance=current_app.config['GRADCHECK_TOLERANCE'], corrupt=corrupt, **sizes)
    click.echo(report.summary())
    if not report.passed:
        raise SystemExit(1)


@bp.cli.command('baseline')
@click.option('--config', 'config_path', default=None, help='Run configuration file.')
@click.option('--data', 'data_paths', multiple=True, required=True,
              help='Training file, then optionally a validation file.')
@click.option('--seed', default=None, type=int, help='Random seed.')
@handle_errors
def baseline_command(config_path, data_paths, seed):
    """Train the prediction network alone on the targets and report its next-label scores."""
    config = load_run_config(config_path, {'seed': seed})
    train_set, valid_set = _training_sets(config, data_paths)
    model = NextLabelModel.initialise(config.alphabet_size, config.pred_hidden, config.train.init_range,
                                      make_rng(config.train.seed))
    result = train_next_label(model, train_set, valid_set, config)
    current_app.logger.info(f"Stand-alone prediction network trained for {len(result.history)} epochs")
    for key, value in result.report.to_dict().items():
        click.echo(f"{key}\t{value!r}")


@bp.cli.command('lattice')
@click.option('--checkpoint', 'checkpoint_path', required=True, help='Trained checkpoint.')
@click.option('--data', 'data_path', required=True, help='Dataset holding the record.')
@click.option('--record', 'record_id', default=None, help='Record id (first record when omitted).')
@click.option('--out', required=True, help='Output directory for the CSV grids.')
@handle_errors
def lattice_command(checkpoint_path, data_path, record_id, out):
    """Export log alpha, log beta and log(alpha*beta) grids (row u, column t) for one record."""
    checkpoint = load_checkpoint(checkpoint_path)
    dataset = read_dataset(data_path)
    _check_alphabet(checkpoint.model, dataset)
    records = [r for r in dataset if record_id is None or r.id == record_id]
    if not records:
        raise DataFormatError(f"no record {record_id!r}" if record_id else "dataset has no records", path=data_path)
    record = records[0]
    model = checkpoint.model
    f, _ = transcribe(model.transcription, record.features)
    g, _ = predict_sequence(model.prediction, record.labels)
    grid = alignment_grid(build_lattice(f, g, record.labels))
    _ensure_dir(out)
    for name, values in (('log_alpha', grid.log_alpha), ('log_beta', grid.log_beta),
                         ('log_alpha_beta', grid.log_occupancy)):
        np.savetxt(os.path.join(out, f'{name}.csv'), values.T, fmt=CSV_FORMAT, delimiter=',')
    with open(os.path.join(out, 'log_prob.txt'), 'w', encoding='utf-8') as fh:
        fh.write(CSV_FORMAT % grid.log_prob + '\n')
    click.echo(f"record {record.id}: log Pr = {grid.log_prob!r}")


@bp.cli.command('info')
@click.option('--checkpoint', 'checkpoint_path', required=True, help='Checkpoint to describe.')
@handle_errors
def info_command(checkpoint_path):
    """Print model dimensions and weight counts of a checkpoint."""
    checkpoint = load_checkpoint(checkpoint_path)
    info = {'epoch': checkpoint.epoch, **checkpoint.model.dims,
            **{f"weights_{k}": v for k, v in checkpoint.model.parameter_count().items()}}
    click.echo(json.dumps(info, sort_keys=True))
