"""Entangled-photon strategies for the two-machine competitive bandit.

Modules: ``qcore`` (state vectors and rotations), ``states`` (closed-form
states and the state file format), ``rules`` (certification), ``solver``
(numerical state search), ``game`` (reward accounting and fairness),
``agents`` (decentralized realignment), ``experiments`` and ``cli``.
"""

from .game import MachineConfig, jain_index, pondered_index
from .qcore import AngleConfig, StateVector, apply_rotations, outcome_distribution
from .rules import certify
from .states import a4, build_state, load_state, psi2, psi3, s4, save_state, singlet

__version__ = "0.1.0"

__all__ = [
    "AngleConfig",
    "MachineConfig",
    "StateVector",
    "a4",
    "apply_rotations",
    "build_state",
    "certify",
    "jain_index",
    "load_state",
    "outcome_distribution",
    "pondered_index",
    "psi2",
    "psi3",
    "s4",
    "save_state",
    "singlet",
]
