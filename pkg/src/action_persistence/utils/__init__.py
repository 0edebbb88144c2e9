"""Shared constants, exceptions and seeding helpers."""
