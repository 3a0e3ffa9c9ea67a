"""Decentralized estimation in energy-harvesting sensor networks.

Graph-bandlimited signal model, probabilistic quantizer, LMMSE fusion,
radio/battery model, and drift-plus-penalty controllers that either minimize
the estimation error (``min_bmse``) or the transmit energy under an error
target (``min_energy``).
"""
from .errors import InvalidArgument, InvariantViolation
from .simulation import ExperimentConfig, run_monte_carlo, run_trial

__all__ = ["ExperimentConfig", "InvalidArgument", "InvariantViolation", "run_monte_carlo",
           "run_trial"]
__version__ = "0.1.0"
