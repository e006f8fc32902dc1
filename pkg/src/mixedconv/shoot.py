"""Shooting on the wall curvature gamma = f''(0).

Every trajectory of the initial value problem is sorted into one of three
types. In convex mode (0 < beta < 1, gamma > 0):

  A  f'' changes sign while f' < 1,
  B  f' reaches 1 while f'' > 0,
  C  0 < f' < 1 and f'' > 0 for all t (the solution of the boundary problem).

Concave mode (beta > 1, gamma < 0) mirrors the signs. Types A and B occupy
open, disjoint, nonempty sets of gamma, so bisecting between an A and a B
label closes in on a type C trajectory.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (BracketNotFound, DomainError, InsufficientData, MaxIterations,
                     ToleranceNotMet)
from .integrate import (EventKind, EventSpec, IntegratorConfig, Trajectory,
                        extend_horizon, integrate_ivp)
from .model import (FP, FPP, AugState, Params, exact_linear, exp_residuals_scaled,
                    i1_residuals)

log = logging.getLogger(__name__)


class Tag(enum.Enum):
    TYPE_A = "TypeA"
    TYPE_B = "TypeB"
    TYPE_C = "TypeC"
    BLOW_UP = "BlowUp"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class ShootConfig:
    integrator: IntegratorConfig = IntegratorConfig()
    gamma_atol: float = 1e-12
    gamma_rtol: float = 1e-12
    max_iter: int = 200
    tail_tol: float = 1e-6
    # tolerance on the sign invariants of an accepted profile
    sign_eps: float = 1e-8
    seed: float = 1e-6
    seed_floor: float = 1e-15
    margin: float = 0.10
    max_expansions: int = 60


@dataclass
class Classification:
    tag: Tag
    t_event: Optional[float]
    witness: AugState
    # -1 on the A side of the solution, +1 on the B side, 0 if unknown
    side: int = 0
    detail: str = ""
    trajectory: Optional[Trajectory] = field(default=None, repr=False)


@dataclass(frozen=True)
class TailDiagnostics:
    limit: float
    gap: float
    decay_rate: float


@dataclass(frozen=True)
class Bracket:
    gamma_a: float
    gamma_b: float
    bound: float
    tag_a: Tag
    tag_b: Tag
    expansions: int = 0


@dataclass
class ShootResult:
    params: Params
    gamma_star: float
    bracket_final: tuple
    profile: Trajectory
    tail_limit: float
    tail_gap: float
    residual_report: dict
    iterations: int
    status: str = "converged"
    bracket: Optional[Bracket] = None
    certificate: Optional[Classification] = None
    history: list = field(default_factory=list, repr=False)

    @property
    def mode(self) -> str:
        return self.params.mode


def _sign(mode: str) -> float:
    return 1.0 if mode == "convex" else -1.0


def mode_events(mode: str):
    """The two decisive events for a mode: (type A event, type B event)."""
    if mode == "convex":
        return (
            EventSpec(EventKind.SECOND_DERIV_ZERO, -1, lambda y: y[FP] < 1.0),
            EventSpec(EventKind.SLOPE_REACHES_ONE, +1, lambda y: y[FPP] > 0.0),
        )
    return (
        EventSpec(EventKind.SECOND_DERIV_ZERO, +1, lambda y: y[FP] > 1.0),
        EventSpec(EventKind.SLOPE_REACHES_ONE, -1, lambda y: y[FPP] < 0.0),
    )


def _check_mode(params: Params, gamma: float, mode: str):
    if mode not in ("convex", "concave"):
        raise DomainError(f"unknown mode {mode!r}")
    if mode == "convex" and not (params.beta < 1.0 and gamma >= 0.0):
        raise DomainError(f"convex mode needs 0 < beta < 1 and gamma >= 0, got "
                          f"beta={params.beta}, gamma={gamma}")
    if mode == "concave" and not (params.beta > 1.0 and gamma <= 0.0):
        raise DomainError(f"concave mode needs beta > 1 and gamma <= 0, got "
                          f"beta={params.beta}, gamma={gamma}")


def invariants_hold(traj: Trajectory, mode: str, eps: float) -> bool:
    """Sign structure of a convex (or concave) profile, to within eps."""
    fp, fpp, b = traj.y[:, FP], traj.y[:, FPP], traj.params.beta
    if mode == "convex":
        return bool(np.all(fpp > -eps) and np.all(fp >= b - eps) and np.all(fp <= 1.0 + eps))
    return bool(np.all(fpp < eps) and np.all(fp <= b + eps) and np.all(fp >= 1.0 - eps))


def tail_diagnostics(traj: Trajectory) -> TailDiagnostics:
    """Far-field slope, its distance to 1 and a log-linear decay fit of |f' - 1|."""
    if traj.stop.kind != "horizon":
        raise ValueError(f"trajectory stopped by {traj.stop.kind}, not at the horizon")
    n = len(traj.t)
    tail = slice(n - n // 4, n)
    if n // 4 < 8:
        raise InsufficientData(f"only {n // 4} tail samples, need 8")
    limit = float(traj.y[-1, FP])
    gap = abs(limit - 1.0)
    g = np.abs(traj.y[tail, FP] - 1.0)
    ok = g > 0
    if ok.sum() >= 2:
        slope = np.polyfit(traj.t[tail][ok], np.log(g[ok]), 1)[0]
        rate = float(-slope)
    else:
        rate = math.nan
    return TailDiagnostics(limit, gap, rate)


def _gap_shrinking(traj: Trajectory) -> bool:
    """Whether |f' - 1| is still falling over the last quarter of the horizon."""
    t_q = 0.75 * traj.t_max
    i = int(np.searchsorted(traj.t, t_q))
    g_q = abs(traj.y[i, FP] - 1.0)
    g_end = abs(traj.y[-1, FP] - 1.0)
    return g_end < 0.5 * g_q


def _horizon_side(traj: Trajectory, mode: str) -> int:
    d = _sign(mode) * (traj.y[-1, FP] - 1.0)
    return int(np.sign(d))


def certify(traj: Trajectory, mode: str, cfg: ShootConfig, events=()) -> tuple:
    """Accept a horizon-reaching run as type C, extending the horizon if the
    tail is still closing in. Returns (Classification, trajectory)."""
    icfg = cfg.integrator
    while True:
        gap = abs(traj.y[-1, FP] - 1.0)
        if gap <= cfg.tail_tol or traj.doublings >= icfg.max_doublings or not _gap_shrinking(traj):
            break
        traj = extend_horizon(traj, traj.params, traj.gamma, icfg, events)
        if traj.stop.kind != "horizon":
            break
    final = traj.final
    side = _horizon_side(traj, mode) if traj.stop.kind == "horizon" else 0
    if traj.stop.kind != "horizon":
        return Classification(Tag.UNDETERMINED, traj.stop.t, final, side,
                              f"horizon extension ended by {traj.stop.kind}", traj), traj
    gap = abs(final.fp - 1.0)
    if not invariants_hold(traj, mode, cfg.sign_eps):
        return Classification(Tag.UNDETERMINED, None, final, side,
                              "sign invariants violated before the horizon", traj), traj
    if gap > cfg.tail_tol:
        return Classification(Tag.UNDETERMINED, None, final, side,
                              f"tail gap {gap:.3e} above {cfg.tail_tol:.1e} after "
                              f"{traj.doublings} horizon doublings", traj), traj
    return Classification(Tag.TYPE_C, None, final, side, f"tail gap {gap:.3e}", traj), traj


def classify(params: Params, gamma: float, mode: Optional[str] = None,
             cfg: ShootConfig = ShootConfig()) -> Classification:
    """Integrate f_gamma and report the first decisive outcome."""
    mode = mode or params.mode
    if params.is_linear:
        if gamma != 0.0:
            raise DomainError("beta = 1 is only classified for gamma = 0 (the straight line)")
        t = cfg.integrator.t_max
        return Classification(Tag.TYPE_C, None, exact_linear(params, t), 0, "linear solution")
    _check_mode(params, gamma, mode)
    if gamma == 0.0:
        # f'''(0) = 2 lam beta (beta - 1) pushes f'' off zero with the wrong sign
        w = AugState(0.0, params.alpha, params.beta, 0.0)
        return Classification(Tag.TYPE_A, 0.0, w, -1, "gamma = 0 is type A by continuity")

    ev_a, ev_b = mode_events(mode)
    traj = integrate_ivp(params, gamma, (ev_a, ev_b), cfg.integrator)
    stop, final = traj.stop, traj.final
    if stop.kind == "event":
        if stop.event is EventKind.SECOND_DERIV_ZERO:
            return Classification(Tag.TYPE_A, stop.t, final, -1, "", traj)
        return Classification(Tag.TYPE_B, stop.t, final, +1, "", traj)
    if stop.kind == "tie":
        return Classification(Tag.UNDETERMINED, stop.t, final, 0,
                              "f'' = 0 and f' = 1 simultaneously", traj)
    if stop.kind == "blowup":
        return Classification(Tag.BLOW_UP, stop.t, final,
                              int(np.sign(_sign(mode) * (final.fp - 1.0))), "", traj)
    if stop.kind != "horizon":
        return Classification(Tag.UNDETERMINED, stop.t, final, 0,
                              f"integration ended by {stop.kind}", traj)
    cls, _ = certify(traj, mode, cfg, (ev_a, ev_b))
    return cls


def convex_bound(params: Params) -> float:
    """Smallest gamma for which the lower polynomial bound on f' exceeds 1."""
    lam, a, b = params.lam, params.alpha, params.beta
    return (1 + lam) * (abs(a) - a * b) + math.sqrt(2 * (3 * lam + 1) * (1 - b))


def concave_bound(params: Params) -> float:
    """Largest gamma for which the upper polynomial bound on f' drops to 1."""
    lam, a, b = params.lam, params.alpha, params.beta
    return -(1 + lam) * (a * b + abs(a) * b) - b * math.sqrt(2 * (3 * lam + 1) * (b - 1))


def side_of(c: Classification) -> int:
    if c.tag is Tag.TYPE_A:
        return -1
    if c.tag is Tag.TYPE_B:
        return 1
    return c.side


def initial_bracket(params: Params, mode: Optional[str] = None,
                    cfg: ShootConfig = ShootConfig()) -> Bracket:
    """A verified (A side, B side) pair of gammas.

    The B-side endpoint starts from the analytic bound plus a margin; the
    A-side endpoint from a small seed of the right sign.
    """
    mode = mode or params.mode
    s = _sign(mode)
    _check_mode(params, 0.0, mode)

    seed = s * cfg.seed
    ca = classify(params, seed, mode, cfg)
    while side_of(ca) != -1 and abs(seed) > cfg.seed_floor:
        seed /= 2
        ca = classify(params, seed, mode, cfg)
    if side_of(ca) != -1:
        raise BracketNotFound(f"no A-side seed down to {seed:.3e} (last: {ca.tag.value})")

    bound = convex_bound(params) if mode == "convex" else concave_bound(params)
    gb = bound * (1 + cfg.margin)
    cb = classify(params, gb, mode, cfg)
    n = 0
    while side_of(cb) != 1 and n < cfg.max_expansions:
        gb *= 2
        n += 1
        cb = classify(params, gb, mode, cfg)
    if side_of(cb) != 1:
        raise BracketNotFound(
            f"B-side endpoint not found after {n} expansions: "
            f"gamma_a={seed!r} is {ca.tag.value}, gamma_b={gb!r} is {cb.tag.value}")
    return Bracket(seed, gb, bound, ca.tag, cb.tag, n)


def _width_ok(lo: float, hi: float, cfg: ShootConfig) -> bool:
    mid = 0.5 * (lo + hi)
    return abs(hi - lo) <= max(cfg.gamma_atol, cfg.gamma_rtol * abs(mid))


def residual_report(traj: Trajectory, params: Params, gamma: float,
                    exp_cap: float = 500.0) -> dict:
    i1 = i1_residuals(traj.y, params, gamma)
    i1n = i1_residuals(traj.y, params, gamma, normalized=True)
    ex = exp_residuals_scaled(traj.y, params, gamma, exp_cap)
    live = ~np.isnan(ex)
    return {
        "max_i1": float(np.max(np.abs(i1))),
        "max_i1_normalized": float(np.max(np.abs(i1n))),
        "max_exp_scaled": float(np.max(np.abs(ex[live]))) if live.any() else math.nan,
        "exp_checked_samples": int(live.sum()),
        "exp_skipped_samples": int((~live).sum()),
        "exp_suspended_at": traj.exp_frozen_at,
    }


def _linear_result(params: Params, cfg: ShootConfig) -> ShootResult:
    traj = integrate_ivp(params, 0.0, (), cfg.integrator)
    cert = Classification(Tag.TYPE_C, None, traj.final, 0, "linear solution", traj)
    return ShootResult(params, 0.0, (0.0, 0.0), traj, float(traj.y[-1, FP]),
                       abs(traj.y[-1, FP] - 1.0),
                       residual_report(traj, params, 0.0, cfg.integrator.exp_cap),
                       0, "converged", None, cert)


def solve(params: Params, cfg: ShootConfig = ShootConfig()) -> ShootResult:
    """Unique convex (beta < 1) or concave (beta > 1) solution by bisection on gamma."""
    if params.is_linear:
        return _linear_result(params, cfg)
    mode = params.mode
    br = initial_bracket(params, mode, cfg)
    lo, hi = br.gamma_a, br.gamma_b
    history = [(lo, br.tag_a), (hi, br.tag_b)]
    it = 0
    while not _width_ok(lo, hi, cfg) and it < cfg.max_iter:
        mid = 0.5 * (lo + hi)
        c = classify(params, mid, mode, cfg)
        history.append((mid, c.tag))
        it += 1
        s = side_of(c)
        if s < 0:
            lo = mid
        elif s > 0:
            hi = mid
        else:
            log.warning("gamma=%r classified %s with no side: %s", mid, c.tag.value, c.detail)
            break

    gamma_star = 0.5 * (lo + hi)
    traj = integrate_ivp(params, gamma_star, (), cfg.integrator)
    cert, traj = certify(traj, mode, cfg) if traj.stop.kind == "horizon" else (
        Classification(Tag.UNDETERMINED, traj.stop.t, traj.final, 0,
                       f"profile ended by {traj.stop.kind}", traj), traj)
    limit = float(traj.y[-1, FP])
    result = ShootResult(params, gamma_star, (lo, hi), traj, limit, abs(limit - 1.0),
                         residual_report(traj, params, gamma_star, cfg.integrator.exp_cap),
                         it, "converged", br, cert, history)
    if not _width_ok(lo, hi, cfg):
        result.status = MaxIterations.status
        raise MaxIterations(f"bracket width {abs(hi - lo):.3e} after {it} iterations", result)
    if cert.tag is not Tag.TYPE_C:
        result.status = ToleranceNotMet.status
        raise ToleranceNotMet(f"profile at gamma*={gamma_star!r} not accepted: {cert.detail}",
                              result)
    return result


def _classify_job(args):
    params, gamma, mode, cfg = args
    return classify(params, gamma, mode, cfg)


def classify_many(params: Params, gammas, mode: Optional[str] = None,
                  cfg: ShootConfig = ShootConfig(), workers: Optional[int] = None) -> list:
    """Classify each gamma; results come back in input order."""
    jobs = [(params, float(g), mode, cfg) for g in gammas]
    if not workers or workers <= 1:
        return [_classify_job(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_classify_job, jobs))
