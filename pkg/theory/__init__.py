"""Finite-dimensional verification backend.

Realises the integral operator, its fractional powers, the K-functional and the
one-step error decomposition on the support grid of a discrete measure, and
checks the analytic bounds (constants, sum lemmas, operator-norm and
concentration inequalities) numerically.

Modules import numpy/scipy only; nothing here writes files or talks to the CLI.
"""
