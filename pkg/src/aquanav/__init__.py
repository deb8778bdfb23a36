"""Underwater InEKF localization and water-quality mapping."""

__version__ = "0.1.0"
