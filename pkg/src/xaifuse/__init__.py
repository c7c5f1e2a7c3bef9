"""Tabular anomaly-detection toolkit: classifiers, explainers, rank fusion."""

__version__ = "0.1.0"
