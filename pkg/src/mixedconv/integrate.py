"""Adaptive Dormand-Prince 5(4) integration of the augmented IVP with guarded events."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import IntegrationStalled, NotBracketed, NumericalFailure
from .model import BIGF, F, FP, FPP, AugState, Params, aug_rhs, i1_residuals

# Dormand-Prince tableau.
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array(A[6] + [0.0])
B_HAT = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                  -92097 / 339200, 187 / 2100, 1 / 40])
E = B - B_HAT
# Continuous extension of order 4; row i gives the sigma, sigma^2, sigma^3, sigma^4
# coefficients for stage i.
P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
# PI controller exponents (Hairer's DOPRI5 defaults).
PI_BETA = 0.04
PI_ALPHA = 0.2 - 0.75 * PI_BETA
FAC_MIN, FAC_MAX = 0.2, 10.0
MAX_SUBSAMPLES = 32


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    h_init: float = 1e-3
    h_min: float = 1e-12
    h_max: float = 0.5
    t_max: float = 50.0
    blowup_cap: float = 1e8
    exp_cap: float = 500.0
    max_doublings: int = 4
    sample_dfp: float = 0.01
    # work bound; runaway trajectories turn stiff because f'' relaxes at rate (1+lam) f
    max_steps: int = 20_000

    def __post_init__(self):
        if not (0 < self.h_min <= self.h_init <= self.h_max):
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        if not (self.rtol > 0 and self.atol > 0 and self.t_max > 0):
            raise ValueError("rtol, atol and t_max must be positive")

    def with_(self, **kw) -> "IntegratorConfig":
        return replace(self, **kw)


class EventKind(enum.Enum):
    SECOND_DERIV_ZERO = "second_deriv_zero"
    SLOPE_REACHES_ONE = "slope_reaches_one"

    def value_of(self, y) -> float:
        if self is EventKind.SECOND_DERIV_ZERO:
            return y[FPP]
        return y[FP] - 1.0


@dataclass(frozen=True)
class EventSpec:
    kind: EventKind
    direction: int = 0
    guard: Optional[Callable[[np.ndarray], bool]] = None

    def __call__(self, y) -> float:
        return self.kind.value_of(y)

    def crosses(self, ga: float, gb: float) -> bool:
        if self.direction >= 0 and ga < 0.0 <= gb:
            return True
        if self.direction <= 0 and ga > 0.0 >= gb:
            return True
        return False

    def accepts(self, y) -> bool:
        return self.guard is None or bool(self.guard(y))


@dataclass(frozen=True)
class Stop:
    """Why integration ended: horizon, event, tie, blowup, underflow or max_steps."""

    kind: str
    t: float
    event: Optional[EventKind] = None


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    stop: Stop
    params: Params
    gamma: float
    t_max: float
    # time at which the exponential accumulator was frozen, if ever
    exp_frozen_at: Optional[float] = None
    doublings: int = 0
    n_steps: int = 0
    n_rejected: int = 0
    last_h: float = 0.0

    def __len__(self):
        return len(self.t)

    def state(self, i: int) -> AugState:
        return AugState.from_vector(self.t[i], self.y[i], self.params.lam)

    def states(self):
        return [self.state(i) for i in range(len(self.t))]

    @property
    def final(self) -> AugState:
        return self.state(-1)


class _Step:
    """One accepted step with its dense-output polynomial."""

    __slots__ = ("t0", "h", "y0", "y1", "K")

    def __init__(self, t0, h, y0, y1, K):
        self.t0, self.h, self.y0, self.y1, self.K = t0, h, y0, y1, K

    def __call__(self, t):
        s = (t - self.t0) / self.h
        return self.y0 + self.h * (self.K.T @ (P @ np.array([s, s * s, s ** 3, s ** 4])))


def _dopri_step(fun, t, y, f0, h):
    K = np.empty((7, y.size))
    K[0] = f0
    for i in range(1, 7):
        dy = h * np.dot(A[i], K[:i])
        K[i] = fun(y + dy)
    y_new = y + h * np.dot(B[:6], K[:6])
    err = h * (E @ K)
    return y_new, err, K


def locate_event(dense: Callable[[float], np.ndarray], t0: float, t1: float,
                 event: EventSpec) -> tuple:
    """Root of the event function on [t0, t1] using the dense-output polynomial."""
    g = lambda t: event(dense(t))  # noqa: E731
    ga, gb = g(t0), g(t1)
    if ga == 0.0:
        return t0, dense(t0)
    if gb == 0.0:
        return t1, dense(t1)
    if np.sign(ga) == np.sign(gb):
        raise NotBracketed(f"no sign change of {event.kind.value} on [{t0}, {t1}]")
    ts = brentq(g, t0, t1, xtol=1e-15, rtol=1e-13, maxiter=200)
    return ts, dense(ts)


def _scan_events(step: _Step, t1: float, events: Sequence[EventSpec], tie_tol: float):
    """First accepted crossing in the step, as (t, y, kind) or None."""
    tm = step.t0 + 0.5 * step.h
    pts = [(step.t0, step.y0), (tm, step(tm)), (t1, step.y1)]
    hits = []
    for ev in events:
        for (ta, ya), (tb, yb) in zip(pts, pts[1:]):
            if ev.crosses(ev(ya), ev(yb)):
                ts, ys = locate_event(step, ta, tb, ev)
                hits.append((ts, ys, ev))
                break
    if not hits:
        return None
    hits.sort(key=lambda h: h[0])
    if len(hits) > 1 and abs(hits[1][0] - hits[0][0]) <= tie_tol * (1.0 + abs(hits[0][0])):
        # f'' = 0 and f' = 1 together: only the straight line passes there
        return hits[0][0], hits[0][1], None
    for ts, ys, ev in hits:
        if ev.accepts(ys):
            return ts, ys, ev.kind
    return None


def _run(params: Params, gamma: float, y0: np.ndarray, t0: float, t_end: float,
         events: Sequence[EventSpec], cfg: IntegratorConfig,
         frozen_at: Optional[float] = None):
    lam = params.lam
    c = 1.0 + lam
    frozen = frozen_at is not None
    fun = lambda y: aug_rhs(y, lam, frozen)  # noqa: E731

    ts, ys = [t0], [y0.copy()]
    t, y = t0, y0.copy()
    f0 = fun(y)
    h = min(cfg.h_init, cfg.h_max, t_end - t0)
    err_prev = 1e-4
    n_acc = n_rej = 0
    stop = None
    tie_tol = 1e-9

    while stop is None:
        if not frozen and c * y[BIGF] > cfg.exp_cap:
            frozen, frozen_at = True, t
            fun = lambda y: aug_rhs(y, lam, True)  # noqa: E731
            f0 = fun(y)
        h = min(h, cfg.h_max, t_end - t)
        if h < cfg.h_min:
            if t - t0 < cfg.h_init:
                raise IntegrationStalled(f"step size underflow at t={t}")
            stop = Stop("underflow", t)
            break
        if n_acc + n_rej >= cfg.max_steps:
            stop = Stop("max_steps", t)
            break
        y_new, err, K = _dopri_step(fun, t, y, f0, h)
        if not np.all(np.isfinite(y_new)):
            h *= 0.25
            if h < cfg.h_min:
                raise NumericalFailure(f"non-finite state after t={t}",
                                       AugState.from_vector(t, y, lam))
            n_rej += 1
            continue
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = math.sqrt(float(np.mean((err / scale) ** 2)))
        if en <= 1.0:
            t_new = t + h if t_end - (t + h) > 1e-14 * max(1.0, t_end) else t_end
            step = _Step(t, h, y, y_new, K)
            hit = _scan_events(step, t_new, events, tie_tol) if events else None
            if hit is not None:
                te, ye, kind = hit
                _densify(step, ts, ys, te, ye, cfg.sample_dfp)
                stop = Stop("event" if kind is not None else "tie", te, kind)
                n_acc += 1
                break
            _densify(step, ts, ys, t_new, y_new, cfg.sample_dfp)
            fac = SAFETY * max(en, 1e-10) ** -PI_ALPHA * err_prev ** PI_BETA
            err_prev = max(en, 1e-4)
            t, y = t_new, y_new
            f0 = K[6]
            n_acc += 1
            h *= min(FAC_MAX, max(FAC_MIN, fac))
            if max(abs(y[F]), abs(y[FP]), abs(y[FPP])) > cfg.blowup_cap:
                stop = Stop("blowup", t)
            elif t >= t_end:
                stop = Stop("horizon", t)
        else:
            n_rej += 1
            h *= max(FAC_MIN, SAFETY * en ** -PI_ALPHA)
    return np.array(ts), np.array(ys), stop, frozen_at, n_acc, n_rej, h


def _densify(step: _Step, ts: list, ys: list, t_end: float, y_end, dfp: float):
    """Append samples up to t_end so that f' moves by at most dfp between them."""
    jump = abs(y_end[FP] - ys[-1][FP])
    # runaway trajectories (heading for blow-up) are not resolved this finely
    m = min(MAX_SUBSAMPLES, max(1, math.ceil(jump / dfp)))
    t_start = ts[-1]
    while True:
        grid = [t_start + (t_end - t_start) * k / m for k in range(1, m)]
        inner = [step(tk) for tk in grid]
        fps = [ys[-1][FP]] + [v[FP] for v in inner] + [y_end[FP]]
        if max(abs(b - a) for a, b in zip(fps, fps[1:])) <= dfp or m >= MAX_SUBSAMPLES:
            break
        m *= 2
    ts.extend(grid)
    ys.extend(inner)
    ts.append(t_end)
    ys.append(np.array(y_end, dtype=float))


def integrate_ivp(params: Params, gamma: float, events: Sequence[EventSpec] = (),
                  cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate from (alpha, beta, gamma) at t=0 until an event, blow-up or t_max."""
    if not math.isfinite(gamma):
        raise ValueError(f"gamma must be finite, got {gamma!r}")
    y0 = params.initial_state(gamma)
    ts, ys, stop, frozen_at, n_acc, n_rej, h = _run(
        params, gamma, y0, 0.0, cfg.t_max, events, cfg)
    _check_blowup_honest(ts, ys, stop, params, gamma)
    return Trajectory(ts, ys, stop, params, gamma, cfg.t_max, frozen_at,
                      n_steps=n_acc, n_rejected=n_rej, last_h=h)


def extend_horizon(traj: Trajectory, params: Params, gamma: float,
                   cfg: IntegratorConfig = IntegratorConfig(),
                   events: Sequence[EventSpec] = ()) -> Trajectory:
    """Double the horizon and continue from the final state."""
    if traj.stop.kind != "horizon":
        raise ValueError(f"can only extend a trajectory that reached its horizon, got {traj.stop.kind}")
    if traj.doublings >= cfg.max_doublings:
        raise ValueError(f"horizon already doubled {traj.doublings} times")
    t0 = float(traj.t[-1])
    new_tmax = 2.0 * traj.t_max
    run_cfg = cfg.with_(h_init=min(cfg.h_max, max(cfg.h_min, traj.last_h or cfg.h_init)))
    ts, ys, stop, frozen_at, n_acc, n_rej, h = _run(
        params, gamma, traj.y[-1], t0, new_tmax, events, run_cfg, traj.exp_frozen_at)
    _check_blowup_honest(ts, ys, stop, params, gamma)
    return Trajectory(
        np.concatenate([traj.t, ts[1:]]), np.concatenate([traj.y, ys[1:]]), stop,
        params, gamma, new_tmax, frozen_at, traj.doublings + 1,
        traj.n_steps + n_acc, traj.n_rejected + n_rej, h)


def _check_blowup_honest(ts, ys, stop, params, gamma):
    """A blow-up only counts if the first integrals were still being respected."""
    if stop.kind != "blowup":
        return
    r = np.abs(i1_residuals(ys[:-1], params, gamma, normalized=True))
    if r.size and np.nanmax(r) > 1e-6:
        raise NumericalFailure(
            f"state grew past the blow-up cap at t={stop.t} but the integral "
            f"identity had already drifted to {np.nanmax(r):.3e}",
            AugState.from_vector(ts[-1], ys[-1], params.lam))
