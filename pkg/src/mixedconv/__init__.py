"""Shooting solver and verification suite for the mixed-convection similarity problem

    f''' + (1 + lam) f f'' + 2 lam (1 - f') f' = 0,  f(0) = alpha, f'(0) = beta, f'(inf) = 1.
"""
from .errors import (BracketNotFound, DomainError, IntegrationStalled, MaxIterations,
                     NotBracketed, NumericalFailure, ShootError, ToleranceNotMet)
from .integrate import EventKind, EventSpec, IntegratorConfig, Trajectory, integrate_ivp
from .model import AugState, Params, VState
from .shoot import (Classification, ShootConfig, ShootResult, Tag, classify, initial_bracket,
                    solve, tail_diagnostics)
from .verify import VerificationReport, VerifyConfig, run_verification

__all__ = [
    "AugState", "BracketNotFound", "Classification", "DomainError", "EventKind", "EventSpec",
    "IntegrationStalled", "IntegratorConfig", "MaxIterations", "NotBracketed",
    "NumericalFailure", "Params", "ShootConfig", "ShootError", "ShootResult", "Tag", "ToleranceNotMet",
    "Trajectory", "VState", "VerificationReport", "VerifyConfig", "classify",
    "initial_bracket", "integrate_ivp", "run_verification", "solve", "tail_diagnostics",
]
