"""Pool-based active learning for in-context tabular predictors.

The engine couples pluggable probabilistic predictors (built-ins or external
servers speaking a newline-delimited JSON protocol) with batch acquisition
strategies, a query/label/update loop, evaluation metrics, and an experiment
harness that produces per-run records, summary tables, learning-curve files,
and paired significance reports.
"""

__version__ = "0.1.0"
