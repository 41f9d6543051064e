"""Behavioral simulator, compiler and cost model for magneto-electric
probability arithmetic composers built from straintronic MTJs."""

__version__ = "0.1.0"
