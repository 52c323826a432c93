"""Rescaled systems and the trichotomy/dichotomy equivalence."""
