"""Spatial-projection stochastic collocation for neural fields.

The projected problem is solved at every node of a tensor Gauss grid in
parameter space.  Because the Gauss rule with ``q_i + 1`` points integrates
each degree-``q_i`` Lagrange basis polynomial exactly, the mean of the
surrogate is the weighted sum of the node states.  The variance uses the
same weights on squared states, which aliases degree ``2 q_i`` content.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .integrator import IntegrationError, IntegratorConfig, integrate
from .model import ProblemSpec, SemiDiscreteSystem
from .param_space import TensorGrid, tensor_lagrange_eval
from .spatial import SpatialDiscretization, assemble_kernel_operator, evaluate_offgrid, sup_distance

log = logging.getLogger(__name__)

VARIANCE_CLAMP = 1e-12


class SolveError(RuntimeError):
    """An integration failed at a specific collocation node or sample."""


@dataclass
class CollocationSolution:
    grid: TensorGrid
    disc: SpatialDiscretization
    node_states: np.ndarray  # (d(q), n_times, s), global-index order
    output_times: np.ndarray
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.node_states.shape[0] != self.grid.total:
            raise ValueError(f"need {self.grid.total} node states, got {self.node_states.shape[0]}")
        if self.node_states.shape[2] != self.disc.size:
            raise ValueError("node states do not match the spatial discretization")

    def time_index(self, time: float | None) -> int:
        if time is None:
            return len(self.output_times) - 1
        hits = np.flatnonzero(np.isclose(self.output_times, time, rtol=0, atol=1e-12))
        if not hits.size:
            raise KeyError(f"time {time} not among output times {self.output_times}")
        return int(hits[0])

    @classmethod
    def from_states(cls, grid: TensorGrid, disc: SpatialDiscretization, states, times=(1.0,)):
        """Wrap manufactured node states of shape ``(d(q), s)`` or ``(d(q), n_times, s)``."""
        states = np.asarray(states, dtype=float)
        if states.ndim == 2:
            states = states[:, None, :]
        return cls(grid, disc, states, np.asarray(times, dtype=float))


@dataclass
class MomentField:
    mean: np.ndarray
    variance: np.ndarray
    time: float


# The fork-based pool reads its task from this module global so that
# problem closures need not be picklable.
_TASK = None


def _solve_node(spec, disc, y, W, cfg):
    sys = SemiDiscreteSystem(spec, disc, y, W=W)
    return integrate(sys, sys.initial_state(), spec.T, cfg)


def _pool_worker(k):
    spec, disc, ys, Ws, keys, cfg = _TASK
    try:
        return k, _solve_node(spec, disc, ys[k], Ws[keys[k]], cfg).states, None
    except (IntegrationError, FloatingPointError) as exc:
        return k, None, str(exc)


def _resolve_workers(workers) -> int:
    if workers in (None, "auto"):
        return os.cpu_count() or 1
    return max(1, int(workers))


def solve_points(spec: ProblemSpec, disc: SpatialDiscretization, ys: np.ndarray,
                 cfg: IntegratorConfig, workers=1, what: str = "node") -> np.ndarray:
    """Solve at each parameter point; returns states ``(len(ys), n_times, s)``.

    Kernel operators are assembled once per distinct kernel slice.  Results
    land in the slot of their point, so the output does not depend on
    ``workers``.
    """
    global _TASK
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    times = cfg.times_for(spec.T)
    Ws, keys = {}, []
    for y in ys:
        key = tuple(spec.part("kernel", y))
        if key not in Ws:
            Ws[key] = assemble_kernel_operator(spec.kernel, disc, np.array(key))
        keys.append(key)
    out = np.empty((len(ys), len(times), disc.size))
    nw = min(_resolve_workers(workers), len(ys))
    if nw <= 1:
        for k, y in enumerate(ys):
            try:
                out[k] = _solve_node(spec, disc, y, Ws[keys[k]], cfg).states
            except (IntegrationError, FloatingPointError) as exc:
                raise SolveError(f"{what} {k + 1} at y = {y.tolist()}: {exc}") from exc
        return out
    _TASK = (spec, disc, ys, Ws, keys, cfg)
    try:
        with ProcessPoolExecutor(nw, mp_context=mp.get_context("fork")) as pool:
            for k, states, err in pool.map(_pool_worker, range(len(ys)), chunksize=max(1, len(ys) // (4 * nw))):
                if err is not None:
                    raise SolveError(f"{what} {k + 1} at y = {ys[k].tolist()}: {err}")
                out[k] = states
    finally:
        _TASK = None
    return out


def solve_collocation(spec: ProblemSpec, disc: SpatialDiscretization, grid: TensorGrid,
                      cfg: IntegratorConfig | None = None, workers=1) -> CollocationSolution:
    """Solve the projected problem at every tensor node, stored by global index."""
    cfg = cfg or IntegratorConfig()
    if grid.m != spec.params.m:
        raise ValueError(f"grid has {grid.m} dimensions, problem has {spec.params.m}")
    t0 = time.perf_counter()
    states = solve_points(spec, disc, grid.nodes(), cfg, workers)
    elapsed = time.perf_counter() - t0
    log.debug("solved %d collocation nodes in %.2fs", grid.total, elapsed)
    return CollocationSolution(grid, disc, states, np.array(cfg.times_for(spec.T)),
                               stats={"seconds": elapsed})


def mean_field(sol: CollocationSolution, time: float | None = None) -> np.ndarray:
    """Nodal mean ``sum_k w_k u_k`` at ``time`` (default: final output time)."""
    return sol.grid.weights() @ sol.node_states[:, sol.time_index(time), :]


def variance_field(sol: CollocationSolution, time: float | None = None) -> np.ndarray:
    """Nodal variance ``sum_k w_k u_k^2 - mean^2``, clamped at roundoff level.

    Evaluated in the equivalent deviation form ``sum_k w_k (u_k - mean)^2``
    (the weights sum to one), which avoids cancellation when the mean is
    large compared with the spread.
    """
    w = sol.grid.weights()
    u = sol.node_states[:, sol.time_index(time), :]
    mean = w @ u
    dev = u - mean
    var = w @ (dev * dev)
    second = w @ (u * u)
    floor = -VARIANCE_CLAMP * (second + 1.0)
    if np.any(var < floor):
        i = int(np.argmin(var - floor))
        raise ArithmeticError(f"variance {var[i]:.3e} at node {i} is below the roundoff floor")
    return np.maximum(var, 0.0)


def moments(sol: CollocationSolution, time: float | None = None) -> MomentField:
    idx = sol.time_index(time)
    t = float(sol.output_times[idx])
    return MomentField(mean_field(sol, t), variance_field(sol, t), t)


def surrogate_eval(sol: CollocationSolution, x, y, time: float | None = None):
    """Evaluate ``u_{n,q}(x, t, y)``: interpolate in ``y`` first, then in ``x``."""
    nodal = tensor_lagrange_eval(sol.grid, sol.node_states[:, sol.time_index(time), :], y)
    return evaluate_offgrid(sol.disc, nodal, x)


def evaluation_mesh(disc: SpatialDiscretization, points: int = 200) -> np.ndarray:
    return np.union1d(disc.nodes, np.linspace(disc.a, disc.b, points))


def error_vs_exact(sol: CollocationSolution, exact_mean, time: float | None = None,
                   points: int = 200) -> float:
    """Sup over grid nodes and ``points`` equispaced points of ``|exact - computed mean|``."""
    xs = evaluation_mesh(sol.disc, points)
    computed = evaluate_offgrid(sol.disc, mean_field(sol, time), xs)
    return float(np.max(np.abs(np.asarray(exact_mean(xs), dtype=float) - computed)))


def error_self(sol_q: CollocationSolution, sol_ref: CollocationSolution,
               time: float | None = None) -> float:
    """Sup distance between two collocation means on shared spatial nodes."""
    if not sol_q.disc.same_as(sol_ref.disc):
        raise ValueError("collocation solutions live on different spatial grids")
    return sup_distance(mean_field(sol_q, time), mean_field(sol_ref, time))


def monte_carlo_mean(spec: ProblemSpec, disc: SpatialDiscretization, cfg: IntegratorConfig | None,
                     samples: int, seed: int, workers=1, time: float | None = None):
    """Sample mean and standard error over ``samples`` i.i.d. parameter draws.

    Draws come from a Philox counter-based generator seeded with ``seed``.
    """
    if samples < 2:
        raise ValueError("Monte Carlo needs at least 2 samples for a standard error")
    cfg = cfg or IntegratorConfig()
    rng = np.random.Generator(np.random.Philox(seed))
    ys = spec.params.sample(rng, samples)
    times = np.array(cfg.times_for(spec.T))
    idx = len(times) - 1 if time is None else int(np.flatnonzero(np.isclose(times, time))[0])
    states = solve_points(spec, disc, ys, cfg, workers, what="sample")[:, idx, :]
    mean = states.mean(axis=0)
    stderr = states.std(axis=0, ddof=1) / np.sqrt(samples)
    return mean, stderr


@dataclass
class SpectrumReport:
    samples: np.ndarray
    max_real: np.ndarray

    @property
    def global_max(self) -> float:
        return float(np.max(self.max_real))

    @property
    def contractive(self) -> bool:
        return self.global_max < 0


def spectrum_diagnostic(spec: ProblemSpec, disc: SpatialDiscretization, y_w_samples=None,
                        state: np.ndarray | None = None, y_f=None, grid: TensorGrid | None = None
                        ) -> SpectrumReport:
    """Spectral abscissa of ``A_n = -I + W_n diag(f'(state))`` per kernel sample.

    With linear firing ``state`` is not needed.  Without explicit samples the
    distinct kernel slices of ``grid``'s nodes are used (one empty sample for
    a deterministic kernel).
    """
    if y_w_samples is None:
        lo, hi = spec.slices["kernel"]
        if grid is not None and hi > lo:
            y_w_samples = np.unique(grid.nodes()[:, lo:hi], axis=0)
        else:
            y_w_samples = np.zeros((1, hi - lo))
    y_w_samples = np.asarray(y_w_samples, dtype=float).reshape(len(y_w_samples), -1)
    if not spec.linear:
        if state is None:
            raise ValueError("nonlinear firing needs a linearization state")
        lo, hi = spec.slices["firing"]
        y_f = np.zeros(0) if y_f is None else np.asarray(y_f, dtype=float)
        if len(y_f) != hi - lo:
            raise ValueError(f"need {hi - lo} firing parameters, got {len(y_f)}")
    eye = np.eye(disc.size)
    out = []
    for y_w in y_w_samples:
        W = assemble_kernel_operator(spec.kernel, disc, y_w)
        if spec.linear:
            A = W - eye
        else:
            A = W * spec.firing.derivative(np.asarray(state, dtype=float), y_f)[None, :] - eye
        try:
            ev = np.linalg.eigvals(A)
        except np.linalg.LinAlgError as exc:
            raise ArithmeticError(f"eigensolver did not converge for y_w = {y_w.tolist()}") from exc
        out.append(float(ev.real.max()))
    return SpectrumReport(y_w_samples, np.array(out))
