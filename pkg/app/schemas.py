"""
Marshmallow schemas for dataset records, run configurations and checkpoint headers.
"""

from marshmallow import RAISE, Schema, ValidationError, fields, validate, validates_schema

DATASET_FORMAT = 'rnnt-dataset'
CHECKPOINT_FORMAT = 'rnnt-checkpoint'
EARLY_STOP_METRICS = ['log_loss', 'error_rate']
TASK_NAMES = ['copy', 'double', 'dedup']


class DatasetHeaderSchema(Schema):
    """Schema for the first line of a dataset file."""
    class Meta:
        unknown = RAISE

    format = fields.Str(required=True, validate=validate.Equal(DATASET_FORMAT))
    version = fields.Int(required=True, validate=validate.Equal(1))
    feature_dim = fields.Int(required=True, validate=validate.Range(min=1))
    alphabet_size = fields.Int(required=True, validate=validate.Range(min=1))


class DatasetRecordSchema(Schema):
    """Schema for one dataset record; needs ``feature_dim`` and ``alphabet_size`` in its context."""
    class Meta:
        unknown = RAISE

    id = fields.Str(required=True, validate=validate.Length(min=1))
    features = fields.List(fields.List(fields.Float(allow_nan=False)), required=True,
                           validate=validate.Length(min=1))
    labels = fields.List(fields.Int(strict=True), required=True)

    @validates_schema
    def validate_dimensions(self, data, **kwargs):
        """Validate feature widths and label range against the file header."""
        width = self.context['feature_dim']
        for n, row in enumerate(data['features']):
            if len(row) != width:
                raise ValidationError(f'Feature vector {n} has width {len(row)}, expected {width}',
                                      field_name='features')
        alphabet_size = self.context['alphabet_size']
        for label in data['labels']:
            if not 0 <= label < alphabet_size:
                raise ValidationError(f'Label {label} outside alphabet of size {alphabet_size}',
                                      field_name='labels')


class RunConfigSchema(Schema):
    """Schema for run configuration files; every key is optional and defaulted."""
    class Meta:
        unknown = RAISE

    alphabet_size = fields.Int(load_default=5, validate=validate.Range(min=2))
    feature_dim = fields.Int(load_default=5, validate=validate.Range(min=1))
    pred_hidden = fields.Int(load_default=16, validate=validate.Range(min=1))
    trans_hidden = fields.Int(load_default=16, validate=validate.Range(min=1))
    learning_rate = fields.Float(load_default=1e-4, validate=validate.Range(min=0, min_inclusive=False))
    momentum = fields.Float(load_default=0.9, validate=validate.Range(min=0, max=1, max_inclusive=False))
    weight_noise = fields.Float(load_default=0.075, validate=validate.Range(min=0))
    init_range = fields.Float(load_default=0.1, validate=validate.Range(min=0))
    max_epochs = fields.Int(load_default=100, validate=validate.Range(min=1))
    early_stop_metric = fields.Str(load_default='log_loss', validate=validate.OneOf(EARLY_STOP_METRICS))
    patience = fields.Int(load_default=10, validate=validate.Range(min=1))
    seed = fields.Int(load_default=1, validate=validate.Range(min=0, max=2 ** 64 - 1))
    beam_width = fields.Int(load_default=100, validate=validate.Range(min=1))
    nbest = fields.Int(load_default=1, validate=validate.Range(min=1))
    task = fields.Str(load_default='copy', validate=validate.OneOf(TASK_NAMES))
    count = fields.Int(load_default=250, validate=validate.Range(min=1))
    min_length = fields.Int(load_default=4, validate=validate.Range(min=1))
    max_length = fields.Int(load_default=12, validate=validate.Range(min=1))
    validation_fraction = fields.Float(load_default=0.2,
                                       validate=validate.Range(min=0, max=1, min_inclusive=False, max_inclusive=False))
    input_noise = fields.Float(load_default=0.1, validate=validate.Range(min=0))

    @validates_schema
    def validate_ranges(self, data, **kwargs):
        """Validate cross-field constraints."""
        if data['nbest'] > data['beam_width']:
            raise ValidationError('nbest must not exceed beam_width', field_name='nbest')
        if data['min_length'] > data['max_length']:
            raise ValidationError('min_length must not exceed max_length', field_name='min_length')


class ArraySpecSchema(Schema):
    name = fields.Str(required=True)
    shape = fields.List(fields.Int(validate=validate.Range(min=0)), required=True)


class CheckpointHeaderSchema(Schema):
    """Schema for the JSON header line of a checkpoint file."""
    class Meta:
        unknown = RAISE

    format = fields.Str(required=True, validate=validate.Equal(CHECKPOINT_FORMAT))
    version = fields.Int(required=True)
    epoch = fields.Int(required=True, validate=validate.Range(min=0))
    dims = fields.Dict(keys=fields.Str(), values=fields.Int(), required=True)
    config = fields.Dict(required=True)
    rng_state = fields.Dict(required=True)
    best_metric = fields.Float(allow_none=True, allow_nan=False, load_default=None)
    best_epoch = fields.Int(load_default=0)
    stale_epochs = fields.Int(load_default=0)
    arrays = fields.List(fields.Nested(ArraySpecSchema), required=True)


dataset_header_schema = DatasetHeaderSchema()
run_config_schema = RunConfigSchema()
checkpoint_header_schema = CheckpointHeaderSchema()
