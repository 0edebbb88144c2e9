"""Exact dynamic programming on tabular MDPs: operators, solvers and bound checks."""
