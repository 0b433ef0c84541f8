"""Autoresonance in a dissipative Duffing oscillator: envelope-equation runs,
the autoresonant germ, full-oscillator comparison and scaling-law sweeps."""

from .integrate import IntegrationError, IntegratorConfig, Trajectory, detect_event, integrate
from .resonance import SweepLaw, SystemParams, simulate

__all__ = [
    "IntegrationError",
    "IntegratorConfig",
    "Trajectory",
    "detect_event",
    "integrate",
    "SweepLaw",
    "SystemParams",
    "simulate",
]

__version__ = "0.1.0"
