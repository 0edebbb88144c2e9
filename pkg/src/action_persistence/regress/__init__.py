"""Regressors and Q-function representations."""
