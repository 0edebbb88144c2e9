"""Persistence selection and the performance-loss metric."""
