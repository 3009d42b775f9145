"""Equilibrium computations for persuasion against a finite-memory receiver."""

from .best_response import SenderStrategy, solve_value
from .chain import absorption, simulate
from .errors import ProtocolError
from .model import Environment, Protocol, SignalModel, classify_states, shape, validate
from .payoffs import evaluate, receiver_optimal_value, sender_limit_value, solve_relaxed
from .reduction import to_parsimonious, to_simple

__all__ = [
    "Environment",
    "Protocol",
    "ProtocolError",
    "SenderStrategy",
    "SignalModel",
    "absorption",
    "classify_states",
    "evaluate",
    "receiver_optimal_value",
    "sender_limit_value",
    "shape",
    "simulate",
    "solve_relaxed",
    "solve_value",
    "to_parsimonious",
    "to_simple",
    "validate",
]
