"""Neural field problems with finite-dimensional random data.

A problem is the quadruple (kernel, firing rate, forcing, initial condition)
on a 1-D domain, together with the parameter space the random data is
drawn from.  Each data field reads a contiguous slice of the parameter
vector ``y``; an empty slice means the field is deterministic.

All data callables must be pure and vectorized over ``x`` (and ``x'``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .param_space import Normal, ParameterSpace, Uniform
from .spatial import CHEBYSHEV, PERIODIC, SpatialDiscretization, assemble_kernel_operator, project

FIELDS = ("kernel", "firing", "forcing", "initial")

_EXP_CLAMP = 700.0


def sigmoid(u, F0: float = 1.0, mu: float = 1.0, h: float = 0.0):
    """``F0 / (1 + exp(-mu (u - h)))`` with the exponent clamped to +-700."""
    z = np.clip(-mu * (np.asarray(u, dtype=float) - h), -_EXP_CLAMP, _EXP_CLAMP)
    return F0 / (1.0 + np.exp(z))


@dataclass(frozen=True)
class Linear:
    """Identity firing rate ``f(u) = u``."""

    linear = True

    def __call__(self, u, y_f=()):
        return u

    def derivative(self, u, y_f=()):
        return np.ones_like(u)


@dataclass(frozen=True)
class Sigmoid:
    """Sigmoidal firing rate.  If the firing slice of ``y`` is non-empty its
    first entry replaces ``F0``."""

    F0: float = 1.0
    mu: float = 10.0
    h: float = 0.3

    linear = False

    def gain(self, y_f) -> float:
        return float(y_f[0]) if len(y_f) else self.F0

    def __call__(self, u, y_f=()):
        return sigmoid(u, self.gain(y_f), self.mu, self.h)

    def derivative(self, u, y_f=()):
        s = sigmoid(u, 1.0, self.mu, self.h)
        return self.gain(y_f) * self.mu * s * (1.0 - s)


@dataclass(frozen=True)
class Custom:
    fn: Callable
    deriv: Callable | None = None

    linear = False

    def __call__(self, u, y_f=()):
        return self.fn(u, y_f)

    def derivative(self, u, y_f=()):
        if self.deriv is None:
            raise NotImplementedError("custom firing rate has no derivative")
        return self.deriv(u, y_f)


@dataclass(frozen=True)
class ProblemSpec:
    kernel: Callable
    firing: object
    forcing: Callable
    initial: Callable
    T: float
    params: ParameterSpace
    slices: Mapping[str, tuple]
    domain: tuple = (-1.0, 1.0)
    spatial_kind: str = CHEBYSHEV
    name: str = "custom"
    exact_mean: Callable | None = None
    exact_solution: Callable | None = None
    constants: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"time horizon must be positive, got {self.T}")
        slices = {f: tuple(self.slices.get(f, (0, 0))) for f in FIELDS}
        extra = set(self.slices) - set(FIELDS)
        if extra:
            raise ValueError(f"unknown data fields in slices: {sorted(extra)}")
        covered = []
        for f, (lo, hi) in slices.items():
            if not 0 <= lo <= hi <= self.params.m:
                raise ValueError(f"slice {f}={lo, hi} out of range for m={self.params.m}")
            covered.extend(range(lo, hi))
        if sorted(covered) != list(range(self.params.m)):
            raise ValueError(
                f"slices must partition the {self.params.m} parameters disjointly, got {slices}")
        object.__setattr__(self, "slices", slices)

    @property
    def linear(self) -> bool:
        return bool(getattr(self.firing, "linear", False))

    @property
    def periodic(self) -> bool:
        return self.spatial_kind == PERIODIC

    def part(self, name: str, y) -> np.ndarray:
        lo, hi = self.slices[name]
        return np.asarray(y, dtype=float)[lo:hi]


class SemiDiscreteSystem:
    """The projected problem ``u' = -u + W_n F(u) + g(t)`` at one parameter point.

    ``W`` may be passed in to share one assembly between parameter points
    with the same kernel slice.
    """

    def __init__(self, spec: ProblemSpec, disc: SpatialDiscretization, y, W: np.ndarray | None = None):
        self.spec = spec
        self.disc = disc
        self.y = np.asarray(y, dtype=float)
        if len(self.y) != spec.params.m:
            raise ValueError(f"parameter point has {len(self.y)} entries, problem has {spec.params.m}")
        self.y_w = spec.part("kernel", self.y)
        self.y_f = spec.part("firing", self.y)
        self.y_g = spec.part("forcing", self.y)
        self.y_v = spec.part("initial", self.y)
        self.W = assemble_kernel_operator(spec.kernel, disc, self.y_w) if W is None else W
        self.T = spec.T
        self._x = disc.nodes

    def initial_state(self) -> np.ndarray:
        return project(self.disc, lambda x: self.spec.initial(x, self.y_v))

    def forcing(self, t: float) -> np.ndarray:
        return np.broadcast_to(self.spec.forcing(self._x, t, self.y_g), self._x.shape)

    def __call__(self, t: float, u: np.ndarray) -> np.ndarray:
        fu = u if self.spec.linear else self.spec.firing(u, self.y_f)
        out = self.W @ fu - u + self.forcing(t)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"non-finite right-hand side at t = {t!r}")
        return out

    def jacobian(self, u: np.ndarray | None = None) -> np.ndarray:
        """``-I + W diag(f'(u))``; for linear firing ``u`` is ignored."""
        n = self.disc.size
        if self.spec.linear:
            return self.W - np.eye(n)
        if u is None:
            raise ValueError("a linearization state is required for nonlinear firing")
        return self.W * self.spec.firing.derivative(u, self.y_f)[None, :] - np.eye(n)


def eval_rhs(sys: SemiDiscreteSystem, t: float, u) -> np.ndarray:
    return sys(t, np.asarray(u, dtype=float))


# -- Problem 1: linear field, one uniform parameter in the forcing -----------------

def problem1_exact_solution(x, t, y):
    return np.exp(y * t) * np.sin(4 * np.pi * np.asarray(x))


def problem1_mean_factor(t: float, alpha: float, beta: float) -> float:
    """``(e^{beta t} - e^{alpha t}) / (t (beta - alpha))``, continuous at ``t (beta - alpha) = 0``."""
    s = (beta - alpha) * t
    if s == 0.0:
        return float(np.exp(alpha * t))
    return float(np.exp(alpha * t) * np.expm1(s) / s)


def problem1_exact_mean(x, t, alpha: float, beta: float):
    return problem1_mean_factor(t, alpha, beta) * np.sin(4 * np.pi * np.asarray(x))


def preset_problem1(alpha: float = -2.0, beta: float = 0.5, T: float = 1.0) -> ProblemSpec:
    def kernel(x, xp, y_w):
        return x * xp

    def forcing(x, t, y_g):
        y = y_g[0]
        return np.exp(t * y) * ((y + 1.0) * np.sin(4 * np.pi * x) + x / (2 * np.pi))

    def initial(x, y_v):
        return np.sin(4 * np.pi * x)

    return ProblemSpec(
        kernel=kernel, firing=Linear(), forcing=forcing, initial=initial, T=T,
        params=ParameterSpace((Uniform(alpha, beta, "forcing"),)),
        slices={"forcing": (0, 1)},
        domain=(-1.0, 1.0), spatial_kind=CHEBYSHEV, name="problem1",
        exact_mean=lambda x, t: problem1_exact_mean(x, t, alpha, beta),
        exact_solution=problem1_exact_solution,
        constants={"alpha": alpha, "beta": beta, "T": T},
    )


# -- Problems 2 and 3: sigmoidal field on [-L, L] ------------------------------------

def _problem2_data(sigma_w, A1, omega_A, omega_g, sigma_g, A0):
    def kernel(x, xp, y_w):
        amp = y_w[0] if len(y_w) else A0
        r = sigma_w * np.abs(x - xp)
        return (1.0 - r) * np.exp(-r) * (amp + A1 * np.sin(omega_A * xp))

    def forcing(x, t, y_g):
        return y_g[0] * np.sin(omega_g * t) * np.exp(-x * x / sigma_g ** 2)

    def initial(x, y_v):
        return y_v[0] * np.exp(-x * x)

    return kernel, forcing, initial


def preset_problem2(distribution: str = "uniform", *,
                    a1: float = 1.25, b1: float = 1.75, a2: float = 0.5, b2: float = 1.5,
                    mu1: float = 1.5, s1: float = 0.25, mu2: float = 1.0, s2: float = 0.5,
                    sigma_w: float = 1.0, A0: float = 1.0, A1: float = 1.0, omega_A: float = 1.0,
                    F0: float = 1.0, mu: float = 10.0, h: float = 0.3,
                    omega_g: float = 1.0, sigma_g: float = 0.4,
                    L: float = 10.0, T: float = 1.0) -> ProblemSpec:
    """Sigmoidal field with random initial amplitude ``y_1`` and forcing amplitude ``y_2``."""
    if distribution == "uniform":
        dims = (Uniform(a1, b1, "initial"), Uniform(a2, b2, "forcing"))
    elif distribution == "normal":
        dims = (Normal(mu1, s1, "initial"), Normal(mu2, s2, "forcing"))
    else:
        raise ValueError(f"distribution must be 'uniform' or 'normal', got {distribution!r}")
    kernel, forcing, initial = _problem2_data(sigma_w, A1, omega_A, omega_g, sigma_g, A0)
    consts = dict(distribution=distribution, sigma_w=sigma_w, A0=A0, A1=A1, omega_A=omega_A,
                  F0=F0, mu=mu, h=h, omega_g=omega_g, sigma_g=sigma_g, L=L, T=T)
    return ProblemSpec(
        kernel=kernel, firing=Sigmoid(F0, mu, h), forcing=forcing, initial=initial, T=T,
        params=ParameterSpace(dims), slices={"initial": (0, 1), "forcing": (1, 2)},
        domain=(-L, L), spatial_kind=CHEBYSHEV, name="problem2", constants=consts,
    )


def preset_problem3(*, a1: float = 1.25, b1: float = 1.75, a2: float = 0.5, b2: float = 1.5,
                    aA: float = 0.75, bA: float = 1.25, aF: float = 0.75, bF: float = 1.25,
                    sigma_w: float = 1.0, A1: float = 1.0, omega_A: float = 1.0,
                    mu: float = 10.0, h: float = 0.3, omega_g: float = 1.0, sigma_g: float = 0.4,
                    L: float = 10.0, T: float = 1.0) -> ProblemSpec:
    """Problem 2 with uniformly distributed kernel amplitude ``A_0`` and gain ``F_0``.

    Parameter order: ``(y_1, y_2, A_0, F_0)``.
    """
    kernel, forcing, initial = _problem2_data(sigma_w, A1, omega_A, omega_g, sigma_g, 1.0)
    dims = (Uniform(a1, b1, "initial"), Uniform(a2, b2, "forcing"),
            Uniform(aA, bA, "kernel"), Uniform(aF, bF, "firing"))
    consts = dict(sigma_w=sigma_w, A1=A1, omega_A=omega_A, mu=mu, h=h,
                  omega_g=omega_g, sigma_g=sigma_g, L=L, T=T)
    return ProblemSpec(
        kernel=kernel, firing=Sigmoid(1.0, mu, h), forcing=forcing, initial=initial, T=T,
        params=ParameterSpace(dims),
        slices={"initial": (0, 1), "forcing": (1, 2), "kernel": (2, 3), "firing": (3, 4)},
        domain=(-L, L), spatial_kind=CHEBYSHEV, name="problem3", constants=consts,
    )


# -- Ring with a randomly moving pulse --------------------------------------------------

RING_RANGES = ((0.0, 4.0), (1 / 6, 2 / 3), (1 / 10, 4 / 5), (40.0, 60.0), (10.0, 50 / 3), (100.0, 200.0))


def ring_kernel_profile(z):
    return (2.0 - z * z) * np.exp(-z * z)


def ring_pulse_centre(t, y):
    """``c(t, y) = sum_k c_k sin(2 pi t / f_k)`` with ``y = (c_1, c_2, c_3, f_1, f_2, f_3)``."""
    c, f = y[:3], y[3:6]
    return float(np.sum(np.asarray(c) * np.sin(2 * np.pi * t / np.asarray(f))))


def preset_ring(T: float = 20.0, L: float = 22.0, amplitude: float = 1.4,
                steepness: float = 20.0, threshold: float = 10.0,
                ranges=RING_RANGES) -> ProblemSpec:
    """Excitatory-inhibitory ring ``R / L Z`` centred at 0, driven by a pulse with
    random oscillating position."""

    def wrap(d):
        return d - L * np.round(d / L)

    def kernel(x, xp, y_w):
        return ring_kernel_profile(wrap(x - xp))

    def forcing(x, t, y_g):
        return amplitude * np.exp(-wrap(x - ring_pulse_centre(t, y_g)) ** 2)

    def initial(x, y_v):
        return 2.5 + 0.5 / np.cosh(0.5 * x) ** 2

    dims = tuple(Uniform(a, b, "forcing") for a, b in ranges)
    consts = dict(T=T, L=L, amplitude=amplitude, steepness=steepness, threshold=threshold)
    return ProblemSpec(
        kernel=kernel, firing=Sigmoid(1.0, steepness, threshold), forcing=forcing,
        initial=initial, T=T, params=ParameterSpace(dims), slices={"forcing": (0, 6)},
        domain=(-L / 2, L / 2), spatial_kind=PERIODIC, name="ring", constants=consts,
    )


PRESETS = {
    "problem1": preset_problem1,
    "problem2": preset_problem2,
    "problem3": preset_problem3,
    "ring": preset_ring,
}
