"""Command-line harness: dataset statistics, training runs, evaluation and gradient checks."""
