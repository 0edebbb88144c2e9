"""Pydantic data models shared across the package."""
