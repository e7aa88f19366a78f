"""Equivalence of the compiled kernels and the numpy fallback."""

import numpy as np
import pytest

from entot import _kernels_np
from entot import kernels

try:
    from entot import _core
except ImportError:  # pragma: no cover - fallback-only environments
    _core = None

requires_compiled = pytest.mark.skipif(_core is None, reason="compiled backend unavailable")


def make_instance(rng, m=17, k=13, d=3):
    x = rng.uniform(-0.3, 0.3, size=(m, d))
    y = rng.uniform(-0.3, 0.3, size=(k, d))
    C = np.ascontiguousarray(((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2))
    u = rng.uniform(0.5, 1.0, size=m)
    u /= u.sum()
    w = rng.uniform(0.5, 1.0, size=k)
    w /= w.sum()
    return C, u, w, np.log(u), np.log(w)


def test_backend_selected_is_exposed():
    assert kernels.BACKEND in ("compiled", "numpy")
    for name in ("update_f", "update_g", "marginal_residuals", "dual_value", "sinkhorn_loop"):
        assert hasattr(kernels, name)


@requires_compiled
def test_single_updates_agree():
    rng = np.random.default_rng(0)
    C, u, w, logu, logw = make_instance(rng)
    f1, g1 = np.zeros(C.shape[0]), np.zeros(C.shape[1])
    f2, g2 = np.zeros(C.shape[0]), np.zeros(C.shape[1])
    eta = 1.7
    for _ in range(5):
        _core.update_f(C, logu, logw, f1, g1, eta)
        _core.update_g(C, logu, logw, f1, g1, eta)
        _kernels_np.update_f(C, logu, logw, f2, g2, eta)
        _kernels_np.update_g(C, logu, logw, f2, g2, eta)
    assert np.abs(f1 - f2).max() <= 1e-12
    assert np.abs(g1 - g2).max() <= 1e-12


@requires_compiled
def test_residuals_and_value_agree():
    rng = np.random.default_rng(1)
    C, u, w, logu, logw = make_instance(rng)
    f = rng.uniform(-0.3, 0.3, size=C.shape[0])
    g = rng.uniform(-0.3, 0.3, size=C.shape[1])
    eta = 2.0
    r1, c1 = _core.marginal_residuals(C, logu, logw, f, g, eta)
    r2, c2 = _kernels_np.marginal_residuals(C, logu, logw, f, g, eta)
    assert np.abs(r1 - r2).max() <= 1e-13
    assert np.abs(c1 - c2).max() <= 1e-13
    v1 = _core.dual_value(C, u, w, logu, logw, f, g, eta)
    v2 = _kernels_np.dual_value(C, u, w, logu, logw, f, g, eta)
    assert abs(v1 - v2) <= 1e-13


@requires_compiled
def test_full_solves_agree():
    rng = np.random.default_rng(2)
    for eta in (0.5, 1.0, 2.0):
        C, u, w, logu, logw = make_instance(rng)
        f1, g1 = np.zeros(C.shape[0]), np.zeros(C.shape[1])
        f2, g2 = np.zeros(C.shape[0]), np.zeros(C.shape[1])
        n1, i1, conv1 = _core.sinkhorn_loop(C, u, w, logu, logw, f1, g1, eta, 1e-12, 10000)
        n2, i2, conv2 = _kernels_np.sinkhorn_loop(C, u, w, logu, logw, f2, g2, eta, 1e-12, 10000)
        assert conv1 and conv2
        assert np.abs(f1 - f2).max() <= 1e-9
        assert np.abs(g1 - g2).max() <= 1e-9


@requires_compiled
def test_compiled_accepts_readonly_arrays():
    rng = np.random.default_rng(3)
    C, u, w, logu, logw = make_instance(rng)
    for a in (C, u, w, logu, logw):
        a.flags.writeable = False
    f, g = np.zeros(C.shape[0]), np.zeros(C.shape[1])
    norm, iters, conv = _core.sinkhorn_loop(C, u, w, logu, logw, f, g, 1.0, 1e-10, 10000)
    assert conv


def test_env_var_forces_numpy_backend():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "from entot import kernels; print(kernels.BACKEND)"],
        env={"ENTOT_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"},
        capture_output=True,
        text=True,
    )
    assert out.stdout.strip() == "numpy"
