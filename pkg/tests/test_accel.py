import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_body, random_unit
from pabandits import _accel
from pabandits.baselines import eps_greedy_run
from pabandits.env import TABLE3, TieBreak
from pabandits.geometry import interior_point
from pabandits.ipa import run_ipa


def both(fn):
    with _accel.using_backend("numba"):
        a = fn()
    with _accel.using_backend("numpy"):
        b = fn()
    return a, b


def test_backend_switch():
    assert _accel.backend() in ("numba", "numpy")
    with _accel.using_backend("numpy"):
        assert _accel.backend() == "numpy"
    with pytest.raises(ValueError):
        _accel.set_backend("fortran")


def test_maximize_parity():
    rng = np.random.default_rng(0)
    for _ in range(20):
        d = int(rng.integers(1, 5))
        body = random_body(d, rng, n_cuts=int(rng.integers(0, 10)))
        w = random_unit(d, rng)
        (fa, xa), (fb, xb) = both(lambda: _accel.maximize(body.G, body.b, w))
        assert fa and fb
        assert np.allclose(xa, xb, atol=1e-12)


def test_widths_and_fibres_parity():
    rng = np.random.default_rng(1)
    body = random_body(3, rng)
    W = np.array([random_unit(3, rng) for _ in range(15)])
    a, b = both(lambda: _accel.widths(body.G, body.b, W))
    assert np.allclose(a, b, atol=1e-12)
    U = random_unit(3, rng)[:, None]
    X = rng.uniform(-1, 1, (200, 3))
    X -= (X @ U) @ U.T
    a, b = both(lambda: _accel.fibres_feasible(body.G, body.b, X, U))
    assert np.array_equal(a, b) and a.any() and not a.all()


def test_empty_body_width_is_nan():
    G = np.array([[1.0, 0.0], [-1.0, 0.0]])
    b = np.array([-0.5, -0.5])
    for name in ("numba", "numpy"):
        with _accel.using_backend(name):
            assert np.isnan(_accel.widths(G, b, np.array([[0.0, 1.0]]))[0])


def test_hit_and_run_parity():
    rng = np.random.default_rng(2)
    body = random_body(3, rng)
    V = np.zeros((0, 3))
    x0 = interior_point(body)
    a, b = both(lambda: _accel.hit_and_run(body.G, body.b, x0, V, np.random.default_rng(9), 300, burn_in=20, thin=2))
    assert np.allclose(a, b, atol=1e-10)
    assert body.contains_many(a, 1e-12).all()


@pytest.mark.parametrize("tie", list(TieBreak))
def test_game_loop_parity(tie):
    a, b = both(lambda: run_ipa(TABLE3, "ucb", 3000, seed=[1], tie=tie))
    assert np.array_equal(a.chosen_arm, b.chosen_arm) and np.array_equal(a.reward, b.reward)
    a, b = both(lambda: eps_greedy_run(TABLE3, 3000, seed=[1], m=5, tie=tie))
    assert np.array_equal(a.chosen_arm, b.chosen_arm) and np.array_equal(a.paid, b.paid)


@pytest.mark.parametrize("tie", [_accel.ADVERSARIAL, _accel.LEXICOGRAPHIC])
def test_agent_kernel_parity(tie):
    rng = np.random.default_rng(3)
    for _ in range(200):
        s = rng.integers(0, 5, size=int(rng.integers(1, 6))) / 4
        target = int(rng.integers(s.size))
        amount = float(rng.integers(0, 5)) / 4
        assert _accel._greedy_arm_py(s, target, amount, tie) == _accel._greedy_arm_nb(s, target, amount, tie)


def test_environment_variable_selects_numpy():
    env = dict(os.environ, PABANDITS_DISABLE_NUMBA="1")
    code = (
        "from pabandits import _accel; from pabandits.ipa import run_ipa; from pabandits.env import TABLE3;"
        "t = run_ipa(TABLE3, 'ucb', 500, seed=[0]); print(_accel.backend(), float(t.reward.sum()).hex())"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    name, total = out.stdout.split()
    assert name == "numpy"
    with _accel.using_backend("numba"):
        assert float(run_ipa(TABLE3, "ucb", 500, seed=[0]).reward.sum()).hex() == total
