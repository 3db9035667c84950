"""Adaptive Dormand-Prince 5(4) integration of the semi-discrete system.

The pair is used in local-extrapolation mode (the 5th order solution is
propagated), steps are controlled by a PI controller on a componentwise
scaled RMS error norm, and output times are served by the 4th order
continuous extension, so they never shorten a step.

Bookkeeping: stage 1 of each step reuses the last stage of the previous
accepted step (FSAL), so every attempted step costs 6 new evaluations and
``rhs_evals == 6 * (accepted + rejected) + 1 + startup_evals``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between the 5th and embedded 4th order weights
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Shampine's 4th order dense output, coefficients of theta, theta^2, theta^3, theta^4
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
FAC_MIN = 0.2
FAC_MAX = 10.0
BETA = 0.04
ALPHA = 0.2 - 0.75 * BETA


class IntegrationError(RuntimeError):
    """Raised when a trajectory cannot be completed."""


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-12
    atol: float = 1e-13
    max_steps: int = 1_000_000
    initial_step: float | None = None
    output_times: tuple | None = None

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError(f"tolerances must be positive, got rtol={self.rtol}, atol={self.atol}")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.output_times is not None:
            ts = tuple(float(t) for t in self.output_times)
            if any(b < a for a, b in zip(ts, ts[1:])):
                raise ValueError("output_times must be sorted")
            object.__setattr__(self, "output_times", ts)

    def times_for(self, T: float) -> tuple:
        ts = self.output_times if self.output_times is not None else (T,)
        if ts and (ts[0] < 0 or ts[-1] > T):
            raise ValueError(f"output_times must lie in [0, {T}]")
        return ts


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _rms(v: np.ndarray) -> float:
    return float(np.sqrt(np.mean(v * v)))


def estimate_initial_step(f: Callable, t0: float, u0: np.ndarray, f0: np.ndarray,
                          rtol: float, atol: float, T: float, order: int = 5) -> tuple[float, int]:
    """Starting step from the Hairer-Norsett-Wanner heuristic.

    Returns ``(h, evals)`` with ``evals`` the number of extra right-hand side
    evaluations spent.  A zero right-hand side yields ``T / 100``.
    """
    span = T - t0
    if not np.any(f0):
        return min(span / 100.0, span), 0
    scale = atol + rtol * np.abs(u0)
    d0 = _rms(u0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = f(t0 + h0, u0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1, span), 1


def integrate(f: Callable, u0, T: float, cfg: IntegratorConfig | None = None,
              t0: float = 0.0) -> Trajectory:
    """Integrate ``u' = f(t, u)`` from ``t0`` to ``T``.

    ``f`` is usually a :class:`nfuq.model.SemiDiscreteSystem`.  States are
    returned at ``cfg.output_times`` (default: ``T`` only).
    """
    cfg = cfg or IntegratorConfig()
    out_t = cfg.times_for(T)
    u = np.array(u0, dtype=float)
    if not np.all(np.isfinite(u)):
        raise IntegrationError("initial state is not finite")
    rtol, atol = cfg.rtol, cfg.atol
    states = np.empty((len(out_t), u.size))
    j = 0
    while j < len(out_t) and out_t[j] <= t0:
        states[j] = u
        j += 1

    k = np.empty((7, u.size))
    k[0] = f(t0, u)
    nfev = 1
    startup = 0
    if cfg.initial_step is not None:
        h = min(cfg.initial_step, T - t0)
    else:
        h, startup = estimate_initial_step(f, t0, u, k[0], rtol, atol, T)
        nfev += startup
    t = t0
    accepted = rejected = 0
    err_old = 1e-4
    hmin_rel = 16 * np.finfo(float).eps

    while t < T:
        if accepted + rejected >= cfg.max_steps:
            raise IntegrationError(f"max_steps={cfg.max_steps} exceeded at t = {t!r}")
        if h <= hmin_rel * max(abs(t), 1.0):
            raise IntegrationError(f"step size underflow at t = {t!r} (h = {h:.3e})")
        last = t + h >= T
        if last:
            h = T - t
        for s in range(1, 7):
            k[s] = f(t + C[s] * h, u + h * (A[s] @ k[:s]))
        nfev += 6
        u_new = u + h * (B @ k)
        scale = atol + rtol * np.maximum(np.abs(u), np.abs(u_new))
        err = _rms(h * (E @ k) / scale)
        if not np.isfinite(err):
            rejected += 1
            h *= FAC_MIN
            continue
        if err <= 1.0:
            t_new = T if last else t + h
            while j < len(out_t) and out_t[j] <= t_new:
                theta = (out_t[j] - t) / h
                if out_t[j] == t_new:
                    states[j] = u_new
                else:
                    coef = P @ (theta ** np.arange(1, 5))
                    states[j] = u + h * (coef @ k)
                j += 1
            fac = SAFETY * max(err, 1e-10) ** -ALPHA * err_old ** BETA
            fac = min(FAC_MAX, max(FAC_MIN, fac))
            err_old = max(err, 1e-4)
            t, u = t_new, u_new
            k[0] = k[6]
            accepted += 1
            if not np.all(np.isfinite(u)):
                raise IntegrationError(f"state became non-finite at t = {t!r}")
            h = h * fac
        else:
            rejected += 1
            h = h * max(FAC_MIN, SAFETY * err ** -ALPHA)

    stats = {"steps_accepted": accepted, "steps_rejected": rejected,
             "rhs_evals": nfev, "startup_evals": startup}
    return Trajectory(np.array(out_t, dtype=float), states, stats)


def integrate_system(sys, cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate a semi-discrete system from its projected initial condition to ``sys.T``."""
    return integrate(sys, sys.initial_state(), sys.T, cfg)


def rk_tableau_check(tol: float = 1e-15) -> bool:
    """Internal consistency of the tableau: row sums equal nodes, dense output hits ``B`` at 1."""
    ok = all(abs(A[s].sum() - C[s]) < tol for s in range(1, 7))
    ok &= bool(np.allclose(P.sum(axis=1), B, atol=tol, rtol=0))
    return ok
