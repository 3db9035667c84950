"""Command-line front end.

    nfuq <solve|uq|converge|mc-check|spectrum> [--config FILE] [--set key=value ...]
         [--out DIR] [--workers K] [--format csv,svg]

Configuration is a TOML file; ``--set`` takes dotted keys (``spatial.n=24``)
with TOML-syntax values and is applied on top of it.

Exit codes: 0 success, 1 configuration error, 2 solver error, 3 Monte Carlo
validation failure.
"""

from __future__ import annotations

import argparse
import csv
import importlib.util
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli

from . import plots
from .engine import (
    SolveError,
    error_self,
    error_vs_exact,
    mean_field,
    moments,
    monte_carlo_mean,
    solve_collocation,
    spectrum_diagnostic,
)
from .integrator import IntegrationError, IntegratorConfig, integrate
from .model import PRESETS, SemiDiscreteSystem
from .spatial import make_grid

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 1, 2, 3

PRESET_DEFAULTS = {
    "problem1": {"n": 40, "orders": [20], "reference_orders": [30]},
    "problem2": {"n": 40, "orders": [8, 8], "reference_orders": [12, 12]},
    "problem3": {"n": 40, "orders": [4, 4, 4, 4], "reference_orders": [8, 8, 8, 8]},
    "ring": {"n": 64, "orders": [2] * 6, "reference_orders": [4] * 6,
             "output_count": 41, "rtol": 1e-10, "atol": 1e-11},
}
SECTIONS = {
    "problem": {"name", "file", "params"},
    "spatial": {"kind", "n"},
    "stochastic": {"orders", "reference_orders"},
    "integrator": {"rtol", "atol", "max_steps", "output_times", "output_count"},
    "output": {"directory", "formats"},
    "execution": {"workers"},
    "solve": {"y"},
    "sweep": {"n", "q", "direction"},
    "mc": {"samples", "seed", "orders"},
    "spectrum": {"samples", "state"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    raw: dict
    spec: object
    disc: object
    orders: list
    reference_orders: list
    integrator: IntegratorConfig
    out_dir: Path
    formats: set
    workers: object

    def section(self, name) -> dict:
        return self.raw.get(name, {})


def parse_value(text: str):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, value = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {key}: {p!r} is not a table")
    node[parts[-1]] = parse_value(value.strip())


def load_raw(path: str | None, overrides=()) -> dict:
    raw = {}
    if path:
        try:
            with open(path, "rb") as fh:
                raw = tomli.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    for o in overrides:
        apply_override(raw, o)
    for sec, body in raw.items():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown config section [{sec}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{sec}] must be a table")
        unknown = set(body) - SECTIONS[sec]
        if unknown:
            raise ConfigError(f"unknown field(s) in [{sec}]: {', '.join(sorted(unknown))}")
    return raw


def _require(raw, sec, key):
    try:
        return raw[sec][key]
    except KeyError:
        raise ConfigError(f"missing required field '{sec}.{key}'") from None


def _load_custom(path: str, params: dict):
    spec_ = importlib.util.spec_from_file_location("nfuq_custom_problem", path)
    if spec_ is None or spec_.loader is None:
        raise ConfigError(f"problem.file: cannot import {path}")
    mod = importlib.util.module_from_spec(spec_)
    try:
        spec_.loader.exec_module(mod)
    except OSError as exc:
        raise ConfigError(f"problem.file: {exc}") from exc
    if not hasattr(mod, "build_problem"):
        raise ConfigError(f"problem.file: {path} does not define build_problem(**params)")
    return mod.build_problem(**params)


def build_config(raw: dict) -> RunConfig:
    name = _require(raw, "problem", "name")
    params = dict(raw.get("problem", {}).get("params", {}))
    try:
        if name == "custom-file":
            spec = _load_custom(_require(raw, "problem", "file"), params)
            defaults = {"n": 40, "orders": [4] * spec.params.m, "reference_orders": [8] * spec.params.m}
        elif name in PRESETS:
            spec = PRESETS[name](**params)
            defaults = PRESET_DEFAULTS[name]
        else:
            raise ConfigError(f"problem.name must be one of {sorted(PRESETS) + ['custom-file']}, got {name!r}")
    except TypeError as exc:
        raise ConfigError(f"problem.params: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"problem.params: {exc}") from exc

    sp = raw.get("spatial", {})
    kind = sp.get("kind", spec.spatial_kind)
    try:
        disc = make_grid(kind, int(sp.get("n", defaults["n"])), *spec.domain)
    except ValueError as exc:
        raise ConfigError(f"spatial: {exc}") from exc
    if (kind == "periodic") != spec.periodic:
        raise ConfigError(f"spatial.kind={kind!r} does not fit the {name} domain")

    st = raw.get("stochastic", {})
    m = spec.params.m
    orders = _orders(st.get("orders", defaults["orders"]), m, "stochastic.orders")
    ref = _orders(st.get("reference_orders", defaults["reference_orders"]), m, "stochastic.reference_orders")

    it = raw.get("integrator", {})
    times = it.get("output_times")
    count = it.get("output_count", defaults.get("output_count") if times is None else None)
    if times is None:
        times = [spec.T] if not count else np.linspace(0.0, spec.T, int(count)).tolist()
    try:
        icfg = IntegratorConfig(rtol=float(it.get("rtol", defaults.get("rtol", 1e-12))),
                                atol=float(it.get("atol", defaults.get("atol", 1e-13))),
                                max_steps=int(it.get("max_steps", 1_000_000)),
                                output_times=tuple(float(t) for t in times))
        icfg.times_for(spec.T)
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from exc

    out = raw.get("output", {})
    formats = out.get("formats", ["csv", "svg"])
    if isinstance(formats, str):
        formats = [f.strip() for f in formats.split(",") if f.strip()]
    if not set(formats) <= {"csv", "svg"}:
        raise ConfigError(f"output.formats must be a subset of csv, svg; got {formats}")
    workers = raw.get("execution", {}).get("workers", 1)
    if workers != "auto" and (not isinstance(workers, int) or workers < 1):
        raise ConfigError(f"execution.workers must be a positive integer or 'auto', got {workers!r}")
    return RunConfig(raw, spec, disc, orders, ref, icfg, Path(out.get("directory", "out")),
                     set(formats), workers)


def _orders(val, m, where):
    if isinstance(val, int):
        val = [val] * m
    if not isinstance(val, list) or not all(isinstance(v, int) and v >= 0 for v in val):
        raise ConfigError(f"{where} must be a non-negative integer or a list of them")
    if len(val) != m:
        raise ConfigError(f"{where} has {len(val)} entries but the problem has {m} random parameters")
    return list(val)


# -- output helpers ---------------------------------------------------------------

def fmt(v) -> str:
    return f"{float(v):.17g}"


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def write_field(rc: RunConfig, stem: str, times, values) -> None:
    """``values`` has shape ``(len(times), s)``; one column per output time."""
    x = rc.disc.nodes
    values = np.asarray(values)
    if "csv" in rc.formats:
        header = ["x"] + [f"t={fmt(t)}" for t in times]
        write_csv(rc.out_dir / f"{stem}.csv", header, ([x[i], *values[:, i]] for i in range(len(x))))
    if "svg" in rc.formats:
        rc.out_dir.mkdir(parents=True, exist_ok=True)
        plots.field_figure(rc.out_dir / f"{stem}.svg", x, list(times), values, stem)


# -- subcommands ------------------------------------------------------------------

def cmd_solve(rc: RunConfig) -> int:
    y = rc.section("solve").get("y", "midpoint")
    if y == "midpoint":
        y = rc.spec.params.midpoint()
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if len(y) != rc.spec.params.m:
        raise ConfigError(f"solve.y needs {rc.spec.params.m} entries, got {len(y)}")
    sys_ = SemiDiscreteSystem(rc.spec, rc.disc, y)
    tr = integrate(sys_, sys_.initial_state(), rc.spec.T, rc.integrator)
    write_field(rc, "solution", tr.times, tr.states)
    print(f"solve: {rc.spec.name} at y = {y.tolist()}, {tr.stats['steps_accepted']} steps, "
          f"sup|u(T)| = {np.abs(tr.final).max():.6g}")
    return EXIT_OK


def cmd_uq(rc: RunConfig) -> int:
    grid = rc.spec.params.grid(rc.orders)
    sol = solve_collocation(rc.spec, rc.disc, grid, rc.integrator, rc.workers)
    times = sol.output_times
    mom = [moments(sol, t) for t in times]
    write_field(rc, "mean", times, [mm.mean for mm in mom])
    write_field(rc, "variance", times, [mm.variance for mm in mom])
    print(f"uq: {rc.spec.name}, {grid.total} collocation nodes, "
          f"sup|mean(T)| = {np.abs(mom[-1].mean).max():.10g}, max var(T) = {mom[-1].variance.max():.6g}")
    return EXIT_OK


def _sweep_orders(rc: RunConfig) -> list:
    sw = rc.section("sweep")
    m = rc.spec.params.m
    levels = sw.get("q", [rc.orders])
    direction = sw.get("direction")
    out = []
    for lv in levels:
        if isinstance(lv, int):
            if direction is None:
                out.append([lv] * m)
            else:
                if not 1 <= direction <= m:
                    raise ConfigError(f"sweep.direction must be in 1..{m}")
                o = list(rc.orders)
                o[direction - 1] = lv
                out.append(o)
        else:
            out.append(_orders(lv, m, "sweep.q"))
    return out


def cmd_converge(rc: RunConfig) -> int:
    sw = rc.section("sweep")
    ns = sw.get("n", [rc.disc.size - 1 if rc.disc.kind != "periodic" else rc.disc.size])
    qs = _sweep_orders(rc)
    ref_orders = list(rc.reference_orders)
    direction = sw.get("direction")
    if direction is not None:
        base = list(rc.orders)
        base[direction - 1] = rc.reference_orders[direction - 1]
        ref_orders = base
    exact = rc.spec.exact_mean
    T = float(rc.integrator.times_for(rc.spec.T)[-1])
    rows = []
    for n in ns:
        disc = make_grid(rc.disc.kind, int(n), *rc.spec.domain)
        ref = None
        if exact is None:
            ref = solve_collocation(rc.spec, disc, rc.spec.params.grid(ref_orders), rc.integrator, rc.workers)
        for q in qs:
            t0 = time.perf_counter()
            sol = solve_collocation(rc.spec, disc, rc.spec.params.grid(q), rc.integrator, rc.workers)
            err = error_vs_exact(sol, lambda x: exact(x, T)) if exact else error_self(sol, ref)
            rows.append((int(n), list(q), err, time.perf_counter() - t0))
            print(f"converge: n = {n}, q = {q}, error = {err:.3e}")
    m = rc.spec.params.m
    if "csv" in rc.formats:
        header = ["n"] + [f"q_{i + 1}" for i in range(m)] + ["error", "seconds"]
        write_csv(rc.out_dir / "convergence.csv", header,
                  ([str(n), *map(str, q), e, s] for n, q, e, s in rows))
    if "svg" in rc.formats:
        rc.out_dir.mkdir(parents=True, exist_ok=True)
        plots.convergence_figure(rc.out_dir / "convergence.svg", rows, m)
    return EXIT_OK


def zscores(diff, stderr):
    """``diff / stderr`` with ``0 / 0 = 0`` and ``x / 0 = inf``."""
    diff, stderr = np.asarray(diff), np.asarray(stderr)
    safe = np.where(stderr > 0, stderr, 1.0)
    z = np.where(stderr > 0, diff / safe, np.where(diff == 0, 0.0, np.inf))
    return z


def cmd_mc_check(rc: RunConfig) -> int:
    mc = rc.section("mc")
    samples = int(mc.get("samples", 2000))
    seed = int(mc.get("seed", 20240917))
    if samples < 2:
        raise ConfigError("mc.samples must be >= 2 (the standard error needs two samples)")
    orders = _orders(mc.get("orders", rc.orders), rc.spec.params.m, "mc.orders")
    sol = solve_collocation(rc.spec, rc.disc, rc.spec.params.grid(orders), rc.integrator, rc.workers)
    coll = mean_field(sol)
    mcm, se = monte_carlo_mean(rc.spec, rc.disc, rc.integrator, samples, seed, rc.workers)
    z = zscores(mcm - coll, se)
    bad = np.abs(z) > 4
    if "csv" in rc.formats:
        write_csv(rc.out_dir / "mc_check.csv",
                  ["x", "collocation_mean", "mc_mean", "stderr", "z"],
                  zip(rc.disc.nodes, coll, mcm, se, z))
    frac = bad.mean()
    ok = frac <= 0.01
    print(f"mc-check: {samples} samples, seed {seed}: {bad.sum()}/{len(z)} nodes with |z| > 4 "
          f"({100 * frac:.2f}%), max |z| = {np.abs(z).max():.3f} -> {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_spectrum(rc: RunConfig) -> int:
    spec, disc = rc.spec, rc.disc
    sec = rc.section("spectrum")
    grid = spec.params.grid(rc.orders)
    samples = sec.get("samples")
    state, y_f = None, None
    if not spec.linear:
        mid = spec.params.midpoint()
        sys_ = SemiDiscreteSystem(spec, disc, mid)
        which = sec.get("state", "final")
        if which == "initial":
            state = sys_.initial_state()
        elif which == "final":
            state = integrate(sys_, sys_.initial_state(), spec.T, IntegratorConfig(
                rtol=rc.integrator.rtol, atol=rc.integrator.atol)).final
        else:
            raise ConfigError("spectrum.state must be 'initial' or 'final'")
        y_f = spec.part("firing", mid)
    rep = spectrum_diagnostic(spec, disc, samples, state=state, y_f=y_f, grid=grid)
    if "csv" in rc.formats:
        k = rep.samples.shape[1]
        write_csv(rc.out_dir / "spectrum.csv", ["sample"] + [f"y_w_{i + 1}" for i in range(k)] + ["max_real_eig"],
                  ([str(i + 1), *s, e] for i, (s, e) in enumerate(zip(rep.samples, rep.max_real))))
    print(f"contractive: {'yes' if rep.contractive else 'no'} (max Re λ = {rep.global_max:.12g})")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "uq": cmd_uq,
    "converge": cmd_converge,
    "mc-check": cmd_mc_check,
    "spectrum": cmd_spectrum,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nfuq", description="Stochastic collocation for neural field equations.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. spatial.n=24 (repeatable)")
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.add_argument("--workers", help="worker processes, integer or 'auto'")
    p.add_argument("--format", help="comma-separated subset of csv,svg")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _int_flag(text, flag):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{flag} expects an integer or 'auto', got {text!r}") from None


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = load_raw(args.config, args.overrides)
        if args.out:
            raw.setdefault("output", {})["directory"] = args.out
        if args.workers:
            raw.setdefault("execution", {})["workers"] = (
                args.workers if args.workers == "auto" else _int_flag(args.workers, "--workers"))
        if args.format:
            raw.setdefault("output", {})["formats"] = [f.strip() for f in args.format.split(",") if f.strip()]
        rc = build_config(raw)
        return COMMANDS[args.command](rc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolveError, IntegrationError, FloatingPointError, ArithmeticError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
