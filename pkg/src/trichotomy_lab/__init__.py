"""trichotomy-lab: trichotomy and dichotomy checks for discrete linear time-varying systems."""

__version__ = "0.1.0"
