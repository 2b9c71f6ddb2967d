"""Offline figures for greedyclean CSV outputs."""

from .figures import SchemaError, plot_log_ratio, plot_phase_curve, plot_rho

__all__ = ["SchemaError", "plot_log_ratio", "plot_phase_curve", "plot_rho"]

__version__ = "0.1.0"
