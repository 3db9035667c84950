import csv
import math
import subprocess
import sys
import textwrap
from pathlib import Path

import numpy as np
import pytest

from nfuq.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_VALIDATION,
    ConfigError,
    apply_override,
    build_config,
    fmt,
    load_raw,
    main,
    parse_value,
    zscores,
)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def run(tmp_path, command, *sets, fmt_="csv", config=None, extra=()):
    argv = [command, "--out", str(tmp_path), "--format", fmt_]
    if config:
        argv += ["--config", str(config)]
    for s in sets:
        argv += ["--set", s]
    return main(argv + list(extra))


def test_solve_problem1_stationary(tmp_path, capsys):
    code = run(tmp_path, "solve", 'problem.name="problem1"', "solve.y=[0.0]",
               "integrator.output_times=[0.5, 1.0]")
    assert code == EXIT_OK
    header, data = read_csv(tmp_path / "solution.csv")
    assert header == ["x", "t=0.5", "t=1"]
    assert data.shape == (41, 3)
    np.testing.assert_allclose(data[:, 2], np.sin(4 * np.pi * data[:, 0]), atol=1e-10)
    assert "problem1" in capsys.readouterr().out


def test_solve_ring_smoke(tmp_path):
    code = run(tmp_path, "solve", 'problem.name="ring"', "problem.params.T=5.0", "spatial.n=64",
               "integrator.output_count=0", fmt_="csv,svg")
    assert code == EXIT_OK
    header, data = read_csv(tmp_path / "solution.csv")
    assert data.shape[0] == 64 and np.all(np.isfinite(data))
    assert (tmp_path / "solution.svg").read_text().lstrip().startswith("<?xml")


def test_missing_required_field(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[spatial]\nn = 10\n")
    assert run(tmp_path, "solve", config=cfg) == EXIT_CONFIG
    assert "problem.name" in capsys.readouterr().err


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[problem\nname = 1\n")
    assert run(tmp_path, "solve", config=bad) == EXIT_CONFIG
    assert "bad.toml" in capsys.readouterr().err
    assert run(tmp_path, "solve", 'problem.name="nope"') == EXIT_CONFIG
    assert run(tmp_path, "solve", 'problem.name="problem1"', "spatial.bogus=1") == EXIT_CONFIG
    assert "bogus" in capsys.readouterr().err
    assert run(tmp_path, "uq", 'problem.name="problem2"', "stochastic.orders=[2, 2, 2]") == EXIT_CONFIG
    assert "2 random parameters" in capsys.readouterr().err
    assert run(tmp_path, "uq", 'problem.name="problem1"', "problem.params.gamma=3") == EXIT_CONFIG
    assert run(tmp_path, "uq", 'problem.name="problem1"', "integrator.rtol=-1") == EXIT_CONFIG
    assert run(tmp_path, "uq", 'problem.name="problem1"', fmt_="csv,png") == EXIT_CONFIG
    assert main(["solve", "--set", 'problem.name="problem1"', "--workers", "many"]) == EXIT_CONFIG
    assert run(tmp_path, "solve", 'problem.name="problem1"', 'spatial.kind="periodic"') == EXIT_CONFIG


def test_solver_error_exit(tmp_path, capsys):
    code = run(tmp_path, "uq", 'problem.name="problem1"', "stochastic.orders=[1]", "integrator.max_steps=2")
    assert code == EXIT_SOLVER
    assert "node 1" in capsys.readouterr().err


def test_uq_problem1(tmp_path):
    code = run(tmp_path, "uq", 'problem.name="problem1"', "stochastic.orders=[14]", fmt_="csv,svg")
    assert code == EXIT_OK
    _, mean = read_csv(tmp_path / "mean.csv")
    _, var = read_csv(tmp_path / "variance.csv")
    x = mean[:, 0]
    factor = (math.exp(0.5) - math.exp(-2)) / 2.5
    np.testing.assert_allclose(mean[:, 1], factor * np.sin(4 * np.pi * x), atol=1e-9)
    assert np.all(var[:, 1] >= 0)
    for stem in ("mean", "variance"):
        assert "<svg" in (tmp_path / f"{stem}.svg").read_text()


def test_uq_heatmap_for_multiple_times(tmp_path):
    code = run(tmp_path, "uq", 'problem.name="problem2"', "spatial.n=12", "stochastic.orders=[1, 1]",
               "integrator.output_count=5", "integrator.rtol=1e-8", "integrator.atol=1e-9", fmt_="csv,svg")
    assert code == EXIT_OK
    header, mean = read_csv(tmp_path / "mean.csv")
    assert header == ["x", "t=0", "t=0.25", "t=0.5", "t=0.75", "t=1"]
    _, var = read_csv(tmp_path / "variance.csv")
    assert np.all(var[:, 1:] >= 0)
    assert "<svg" in (tmp_path / "mean.svg").read_text()


def test_converge_problem1(tmp_path):
    code = run(tmp_path, "converge", 'problem.name="problem1"', "sweep.n=[40]", "sweep.q=[2, 4, 6]",
               fmt_="csv,svg")
    assert code == EXIT_OK
    header, data = read_csv(tmp_path / "convergence.csv")
    assert header == ["n", "q_1", "error", "seconds"]
    assert data[:, 1].tolist() == [2, 4, 6]
    assert np.all(np.diff(np.log10(data[:, 2])) < 0)
    assert (tmp_path / "convergence.svg").exists()


def test_converge_problem2_self(tmp_path):
    code = run(tmp_path, "converge", 'problem.name="problem2"', "spatial.n=16", "sweep.q=[1, 2]",
               "stochastic.reference_orders=[5, 5]", "integrator.rtol=1e-9", "integrator.atol=1e-10")
    assert code == EXIT_OK
    header, data = read_csv(tmp_path / "convergence.csv")
    assert header == ["n", "q_1", "q_2", "error", "seconds"]
    assert data[1, 3] < data[0, 3]


def test_converge_direction(tmp_path):
    code = run(tmp_path, "converge", 'problem.name="problem3"', "spatial.n=10", "stochastic.orders=1",
               "stochastic.reference_orders=4", "sweep.q=[0, 2]", "sweep.direction=3",
               "integrator.rtol=1e-8", "integrator.atol=1e-9")
    assert code == EXIT_OK
    _, data = read_csv(tmp_path / "convergence.csv")
    assert data[:, 1:5].tolist() == [[1, 1, 0, 1], [1, 1, 2, 1]]


def test_mc_check(tmp_path, capsys):
    sets = ('problem.name="problem1"', "spatial.n=16", "mc.samples=200", "mc.seed=7", "mc.orders=[10]",
            "integrator.rtol=1e-9", "integrator.atol=1e-10")
    assert run(tmp_path / "a", "mc-check", *sets) == EXIT_OK
    assert "pass" in capsys.readouterr().out
    header, data = read_csv(tmp_path / "a" / "mc_check.csv")
    assert header == ["x", "collocation_mean", "mc_mean", "stderr", "z"]
    assert data.shape == (17, 5)
    assert run(tmp_path / "b", "mc-check", *sets) == EXIT_OK
    assert (tmp_path / "a" / "mc_check.csv").read_bytes() == (tmp_path / "b" / "mc_check.csv").read_bytes()


def test_mc_check_rejects_one_sample(tmp_path, capsys):
    assert run(tmp_path, "mc-check", 'problem.name="problem1"', "mc.samples=1") == EXIT_CONFIG
    assert "samples" in capsys.readouterr().err


def test_mc_check_failure_exit(tmp_path):
    # a 0-order collocation mean is far from the Monte Carlo mean
    code = run(tmp_path, "mc-check", 'problem.name="problem1"', "spatial.n=16", "mc.samples=400",
               "mc.orders=[0]", "integrator.rtol=1e-8", "integrator.atol=1e-9")
    assert code == EXIT_VALIDATION


def test_zscores():
    z = zscores(np.array([0.0, 1.0, -2.0, 3.0]), np.array([0.0, 0.0, 1.0, 2.0]))
    assert z.tolist() == [0.0, np.inf, -2.0, 1.5]


def test_spectrum_problem1(tmp_path, capsys):
    assert run(tmp_path, "spectrum", 'problem.name="problem1"') == EXIT_OK
    out = capsys.readouterr().out
    assert "contractive: yes" in out
    header, data = read_csv(tmp_path / "spectrum.csv")
    assert header == ["sample", "max_real_eig"]
    assert data[0, 1] == pytest.approx(-1 / 3, abs=1e-10)


CUSTOM = """
import numpy as np
from nfuq.model import Linear, ProblemSpec
from nfuq.param_space import ParameterSpace, Uniform

def build_problem(scale=3.0):
    return ProblemSpec(kernel=lambda x, xp, y: scale * x * xp, firing=Linear(),
                       forcing=lambda x, t, y: 0 * x, initial=lambda x, y: y[0] * np.cos(x),
                       T=1.0, params=ParameterSpace([Uniform(0, 1)]), slices={"initial": (0, 1)})
"""


def test_spectrum_custom_file(tmp_path, capsys):
    mod = tmp_path / "prob.py"
    mod.write_text(CUSTOM)
    base = ('problem.name="custom-file"', f'problem.file="{mod}"')
    assert run(tmp_path, "spectrum", *base) == EXIT_OK
    assert "contractive: no" in capsys.readouterr().out
    assert run(tmp_path, "spectrum", *base, "problem.params.scale=0.0") == EXIT_OK
    out = capsys.readouterr().out
    assert "contractive: yes" in out and "max Re λ = -1)" in out
    assert run(tmp_path, "uq", *base, "stochastic.orders=[2]", "spatial.n=8") == EXIT_OK


def test_spectrum_nonlinear(tmp_path, capsys):
    assert run(tmp_path, "spectrum", 'problem.name="problem3"', "spatial.n=12", "stochastic.orders=[0, 0, 2, 0]",
               'spectrum.state="initial"') == EXIT_OK
    _, data = read_csv(tmp_path / "spectrum.csv")
    assert data.shape == (3, 3)
    assert "contractive:" in capsys.readouterr().out


def test_byte_identical_reruns_and_workers(tmp_path):
    sets = ('problem.name="problem2"', "spatial.n=14", "stochastic.orders=[2, 3]",
            "integrator.rtol=1e-9", "integrator.atol=1e-10")
    for name, workers in (("a", "1"), ("b", "1"), ("c", "4")):
        assert run(tmp_path / name, "uq", *sets, extra=["--workers", workers]) == EXIT_OK
    for stem in ("mean.csv", "variance.csv"):
        ref = (tmp_path / "a" / stem).read_bytes()
        assert (tmp_path / "b" / stem).read_bytes() == ref
        assert (tmp_path / "c" / stem).read_bytes() == ref


def test_csv_format(tmp_path):
    run(tmp_path, "uq", 'problem.name="problem1"', "spatial.n=8", "stochastic.orders=[3]")
    raw = (tmp_path / "mean.csv").read_bytes()
    lines = raw.split(b"\r\n")
    assert lines[0] == b"x,t=1" and lines[-1] == b""
    for line in lines[1:-1]:
        for cell in line.decode().split(","):
            assert float(repr(float(cell))) == float(cell)
            assert float(fmt(float(cell))) == float(cell)
    assert fmt(0.1) == "0.10000000000000001"


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(textwrap.dedent("""
        [problem]
        name = "problem1"
        [problem.params]
        alpha = -0.5
        beta = 0.5
        [spatial]
        n = 24
        [stochastic]
        orders = [6]
    """))
    raw = load_raw(str(cfg), ["spatial.n=30", 'stochastic.orders=[8]'])
    assert raw["spatial"]["n"] == 30 and raw["stochastic"]["orders"] == [8]
    assert raw["problem"]["params"] == {"alpha": -0.5, "beta": 0.5}
    assert run(tmp_path, "uq", config=cfg) == EXIT_OK
    _, mean = read_csv(tmp_path / "mean.csv")
    assert mean.shape == (25, 2)


def test_override_parsing():
    assert parse_value("3") == 3 and parse_value("[1, 2]") == [1, 2]
    assert parse_value("midpoint") == "midpoint" and parse_value('"x"') == "x"
    d = {}
    apply_override(d, "a.b.c=1.5")
    assert d == {"a": {"b": {"c": 1.5}}}
    with pytest.raises(ConfigError):
        apply_override(d, "novalue")


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "nfuq", "spectrum", "--set", 'problem.name="problem1"',
                          "--set", "spatial.n=10", "--out", str(tmp_path), "--format", "csv"],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "contractive: yes" in res.stdout


@pytest.mark.parametrize("path", sorted((Path(__file__).parents[1] / "configs").glob("*.toml")), ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    rc = build_config(load_raw(str(path)))
    assert len(rc.orders) == rc.spec.params.m
