"""Numerical laboratory for a parabolic-elliptic chemotaxis system with weak
singular sensitivity and logistic source."""

from .constants import ThresholdReport, delta0, mu1_star, mu2_star, mu3_star, mu4_star, mu_tilde, threshold_report
from .diagnostics import DiagnosticsSample, LedgerEntry, energy, fit_decay_rate, sample
from .elliptic import EllipticConfig, apply_helmholtz, solve_signal
from .grid import AnchoredField, Grid, ScalarField, gradient_centered, integrate, laplacian_neumann
from .stepper import Params, RunOutcome, Status, chemotactic_velocity, imex_step, simulate

__version__ = "0.1.0"

__all__ = [
    "AnchoredField", "DiagnosticsSample", "EllipticConfig", "Grid", "LedgerEntry", "Params", "RunOutcome",
    "ScalarField", "Status", "ThresholdReport", "apply_helmholtz", "chemotactic_velocity", "delta0", "energy",
    "fit_decay_rate", "gradient_centered", "imex_step", "integrate", "laplacian_neumann", "mu1_star",
    "mu2_star", "mu3_star", "mu4_star", "mu_tilde", "sample", "simulate", "solve_signal", "threshold_report",
]
