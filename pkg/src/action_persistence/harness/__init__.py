"""Experiment harness: dataset and run I/O, evaluation, verification suites, reports and the CLI."""
