"""
Entry point for the transducer command-line tools.

    python run.py train --data data/train.jsonl --data data/valid.jsonl --out runs/copy
"""

import numpy as np
from flask.cli import FlaskGroup

from app import create_app
from app.checkpoint import load_checkpoint
from app.datasets import read_dataset
from app.models import TransducerModel

app = create_app()


@app.shell_context_processor
def make_shell_context():
    """
    Provide a shell context for the 'flask shell' command.

    Returns:
        dict: Context with numpy and the model and file helpers.
    """
    return {
        'np': np,
        'TransducerModel': TransducerModel,
        'load_checkpoint': load_checkpoint,
        'read_dataset': read_dataset,
    }


cli = FlaskGroup(create_app=lambda: app)

if __name__ == '__main__':
    cli()
