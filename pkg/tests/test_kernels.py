"""The compiled and pure-Python kernels must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from freediag import _pykernels, kernels

BERNOULLI = (np.array([0.0, 1.0]), np.array([0.75, 0.25]), np.array([0.0, 2.0]), np.array([0.75, 0.25]))


def test_dyson_zero_profile(backend):
    b0 = np.array([1 + 2j, -3 + 0.5j])
    g, it, ok = kernels.dyson_damped(np.zeros((2, 2)), b0, -1j * np.ones(2), 0.5, 1e-12, 1000)
    assert ok and np.allclose(g, 1 / b0, rtol=1e-12)


def test_dyson_scalar(backend):
    g, it, ok = kernels.dyson_damped([[1.0]], [2j], [-1j], 0.5, 1e-13, 100000)
    assert ok and g[0] == pytest.approx(1j * (2 - np.sqrt(8)) / 2, abs=1e-12)


def test_dyson_reports_failure(backend):
    g, it, ok = kernels.dyson_damped([[1.0]], [0.1 + 1e-6j], [-1j], 0.5, 1e-15, 3)
    assert not ok and it == 3


def test_atomic_cauchy(backend):
    G, dG = kernels.atomic_cauchy(1 + 1j, [0, 2], [0.5, 0.5])
    assert G == pytest.approx(0.5 / (1 + 1j) + 0.5 / (-1 + 1j))
    assert dG == pytest.approx(-0.5 / (1 + 1j) ** 2 - 0.5 / (-1 + 1j) ** 2)


@pytest.mark.parametrize("b", [1j, 0.5 + 0.1j, 1e-9j, 3 + 1e-6j, -2 + 0.01j])
def test_atomic_subordination_agrees(b):
    mods = kernels.available_backends()
    if "cython" not in mods:
        pytest.skip("compiled backend not built")
    outs = [mods[k].atomic_subordination(b, *BERNOULLI, b, 0.5, 1e-12, 20000) for k in ("python", "cython")]
    (w1, _, ok1, _), (w2, _, ok2, _) = outs
    assert ok1 == ok2
    assert abs(w1 - w2) <= 1e-10 * max(1, abs(w1))
    assert abs(w1.imag - w2.imag) <= 1e-8 * abs(w1.imag)


def test_dyson_agrees():
    mods = kernels.available_backends()
    if "cython" not in mods:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(2)
    for _ in range(10):
        S = rng.uniform(0, 1, (3, 3))
        b0 = rng.uniform(-2, 2, 3) + 1j * rng.uniform(0.05, 1, 3)
        r = [mods[k].dyson_damped(S, b0, -1j * np.ones(3), 0.5, 1e-12, 100000) for k in ("python", "cython")]
        assert r[0][1] == r[1][1] and r[0][2] == r[1][2]
        assert np.allclose(r[0][0], r[1][0], atol=1e-13)


def test_block_average(backend):
    W = np.arange(12.0).reshape(6, 2)
    out = kernels.block_average_rows(W, [2, 4])
    assert np.allclose(out, [[1, 2], [7, 8]])


def test_block_average_validates():
    with pytest.raises(ValueError):
        kernels.block_average_rows(np.ones((5, 2)), [2, 2])


def test_converged_rule():
    x = np.array([1 + 1e-8j])
    assert kernels.converged(np.array([1e-13 + 1e-21j]), x, 1e-12)
    # the imaginary test is relative to Im x, not |x|
    assert not kernels.converged(np.array([1e-19j]), x, 1e-12)


def test_pure_python_switch():
    env = dict(os.environ, FREEDIAG_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import freediag; print(freediag.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


def test_benchmark_runs(capsys):
    import importlib.util
    path = os.path.join(os.path.dirname(__file__), "..", "benchmarks", "bench_kernels.py")
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    bench.main(["--repeat", "1"])
    out = capsys.readouterr().out
    assert "atomic_subordination" in out and "ladder Bernoulli" in out
