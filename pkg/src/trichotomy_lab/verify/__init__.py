"""Sharp bound constants and trichotomy/dichotomy verdicts."""
