"""Persistent Fitted Q-Iteration."""
