"""Similarity ODE for mixed convection in a porous medium and its first integrals.

The boundary-value problem is

    f''' + (1 + lam) f f'' + 2 lam (1 - f') f' = 0,
    f(0) = alpha,  f'(0) = beta,  f'(inf) = 1.

Integration runs on an augmented state ``[f, f', f'', F, I, K]`` where
``F = int f``, ``I = int f'^2`` and ``K = J exp(-(1 + lam) F)`` is the
exponential-identity accumulator ``J = int 2 lam (1 - f') f' exp((1 + lam) F)``
kept in scaled form so that it never overflows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# Within this distance of 1 the wall slope is snapped to exactly 1.
BETA_SNAP = 1e-12

# Column indices of the augmented state vector.
F, FP, FPP, BIGF, ACCI, ACCK = range(6)
NSTATE = 6


@dataclass(frozen=True)
class Params:
    lam: float
    alpha: float
    beta: float
    allow_lambda_zero: bool = False

    def __post_init__(self):
        for name in ("lam", "alpha", "beta"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite, got {getattr(self, name)!r}")
        if self.beta <= 0:
            raise DomainError(f"beta must be > 0, got {self.beta!r}")
        if self.lam < 0:
            raise DomainError(
                f"lambda must be > 0, got {self.lam!r}; for lambda < 0 the problem "
                "is known to admit infinitely many solutions and is not supported"
            )
        if self.lam == 0 and not self.allow_lambda_zero:
            raise DomainError(
                "lambda must be > 0; lambda = 0 (Blasius validation) requires "
                "allow_lambda_zero=True"
            )
        if abs(self.beta - 1.0) <= BETA_SNAP and self.beta != 1.0:
            object.__setattr__(self, "beta", 1.0)

    @property
    def is_linear(self) -> bool:
        return self.beta == 1.0

    @property
    def mode(self) -> str:
        if self.beta < 1.0:
            return "convex"
        if self.beta > 1.0:
            return "concave"
        return "linear"

    def initial_state(self, gamma: float) -> np.ndarray:
        return np.array([self.alpha, self.beta, gamma, 0.0, 0.0, 0.0])


@dataclass(frozen=True)
class AugState:
    t: float
    f: float
    fp: float
    fpp: float
    bigF: float = 0.0
    accI: float = 0.0
    accJ: float = 0.0

    def as_tuple(self):
        return (self.f, self.fp, self.fpp, self.bigF, self.accI, self.accJ)

    @classmethod
    def from_vector(cls, t: float, y, lam: float) -> "AugState":
        """Build from an internal state vector, unscaling K back to J."""
        return cls(
            t=float(t), f=float(y[F]), fp=float(y[FP]), fpp=float(y[FPP]),
            bigF=float(y[BIGF]), accI=float(y[ACCI]),
            accJ=_times_exp(float(y[ACCK]), (1.0 + lam) * float(y[BIGF])),
        )


@dataclass(frozen=True)
class VState:
    y: float
    v: float
    vp: float


def _times_exp(a: float, x: float) -> float:
    """a * exp(x), through logarithms near the overflow limit; inf past it."""
    if a == 0.0:
        return 0.0
    if x < 700.0:
        return a * math.exp(x)
    logmag = math.log(abs(a)) + x
    if logmag > 709.0:
        return math.copysign(math.inf, a)
    return math.copysign(math.exp(logmag), a)


def _check_finite(*values):
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"non-finite state component {v!r}")


def third_derivative(f, fp, fpp, lam):
    return -(1.0 + lam) * f * fpp - 2.0 * lam * (1.0 - fp) * fp


def rhs(state: AugState, params: Params) -> tuple:
    """Derivative of the augmented state in its unscaled form.

    Returns ``(f', f'', f''', f, f'^2, 2 lam (1 - f') f' exp((1 + lam) F))``.
    """
    _check_finite(state.f, state.fp, state.fpp, state.bigF, state.accI, state.accJ)
    lam = params.lam
    src = 2.0 * lam * (1.0 - state.fp) * state.fp
    return (
        state.fp,
        state.fpp,
        third_derivative(state.f, state.fp, state.fpp, lam),
        state.f,
        state.fp * state.fp,
        _times_exp(src, (1.0 + lam) * state.bigF),
    )


def aug_rhs(y: np.ndarray, lam: float, freeze_k: bool = False) -> np.ndarray:
    """Derivative of the internal state vector ``[f, f', f'', F, I, K]``.

    ``K' = 2 lam (1 - f') f' - (1 + lam) f K`` follows from ``K = J exp(-(1+lam) F)``.
    With ``freeze_k`` the K component is held constant (exp check suspended).
    """
    f, fp, fpp, _, _, k = y
    src = 2.0 * lam * (1.0 - fp) * fp
    dk = 0.0 if freeze_k else src - (1.0 + lam) * f * k
    return np.array([fp, fpp, -(1.0 + lam) * f * fpp - src, f, fp * fp, dk])


def exact_linear(params: Params, t: float) -> AugState:
    """The straight-line solution g(t) = t + alpha with its accumulators."""
    a = params.alpha
    return AugState(t=t, f=t + a, fp=1.0, fpp=0.0,
                    bigF=0.5 * t * t + a * t, accI=t, accJ=0.0)


def i1_terms(f, fp, fpp, accI, params: Params, gamma: float):
    """Individual terms of the integrated identity, as a tuple of arrays."""
    lam, a, b = params.lam, params.alpha, params.beta
    return (
        fpp,
        -gamma * np.ones_like(np.asarray(f, dtype=float)),
        (1.0 + lam) * (f * fp - a * b),
        2.0 * lam * (f - a),
        -(3.0 * lam + 1.0) * accI,
    )


def identity_i1_residual(state: AugState, params: Params, gamma: float) -> float:
    """f'' - gamma + (1+lam)(f f' - alpha beta) + 2 lam (f - alpha) - (3 lam + 1) int f'^2."""
    return float(sum(i1_terms(state.f, state.fp, state.fpp, state.accI, params, gamma)))


def identity_exp_residual(state: AugState, params: Params, gamma: float,
                          cap: float = 500.0) -> float:
    """f'' exp((1+lam) F) - gamma + J; ``nan`` once (1+lam) F exceeds ``cap``."""
    x = (1.0 + params.lam) * state.bigF
    if x > cap:
        return math.nan
    return _times_exp(state.fpp, x) - gamma + state.accJ


def i1_residuals(Y: np.ndarray, params: Params, gamma: float, normalized: bool = False):
    """Vectorized i1 residual over trajectory rows.

    ``normalized`` divides by ``1 + max |term|`` so the figure is a relative
    cancellation error rather than an absolute one.
    """
    terms = np.array(i1_terms(Y[:, F], Y[:, FP], Y[:, FPP], Y[:, ACCI], params, gamma))
    r = terms.sum(axis=0)
    if normalized:
        r = r / (1.0 + np.abs(terms).max(axis=0))
    return r


def exp_residuals_scaled(Y: np.ndarray, params: Params, gamma: float,
                         cap: float = 500.0) -> np.ndarray:
    """Exponential identity divided by exp((1+lam) F); ``nan`` past ``cap``.

    This is ``f'' - gamma exp(-(1+lam) F) + K``: the same identity measured in
    units of the integrating factor, which keeps it finite.
    """
    x = (1.0 + params.lam) * Y[:, BIGF]
    r = Y[:, FPP] - gamma * np.exp(-np.minimum(x, 700.0)) + Y[:, ACCK]
    return np.where(x > cap, np.nan, r)


def v_rhs(state: VState, params: Params) -> tuple:
    """Right-hand side of the equation for v(y), where v(f'(t)^2) = f(t)."""
    y, v, vp = state.y, state.v, state.vp
    if not y > 0:
        raise DomainError(f"v-equation requires y > 0, got {y!r}")
    lam = params.lam
    sy = math.sqrt(y)
    return vp, (1.0 + lam) * v * vp * vp / sy + 4.0 * lam * (1.0 - sy) * vp ** 3
