"""Quadrotor slung-load simulation and control benchmark."""

__version__ = "0.1.0"
