import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uqboltz.errors import DomainError
from uqboltz.quadrature import QuadratureRule, default_rule, gauss_legendre, uniform_circle
from tests.conftest import main_domain


def test_gauss_legendre_examples():
    x, w = gauss_legendre(1)
    assert x[0] == 0.0 and w[0] == 2.0
    x, w = gauss_legendre(2)
    assert np.allclose(np.sort(x), [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    assert np.allclose(w, [1.0, 1.0], atol=1e-15)
    assert np.sum(w * x**2) == pytest.approx(2.0 / 3.0, abs=1e-15)
    x, w = gauss_legendre(5, 0.0, 1.0)
    assert np.sum(w * x**8) == pytest.approx(1.0 / 9.0, abs=1e-14)


@given(st.integers(1, 20), st.floats(-3.0, 0.0), st.floats(0.1, 3.0))
def test_gauss_legendre_exactness(n, a, width):
    b = a + width
    x, w = gauss_legendre(n, a, b)
    assert np.all(w > 0)
    deg = 2 * n - 1
    exact = (b ** (deg + 1) - a ** (deg + 1)) / (deg + 1)
    assert np.sum(w * x**deg) == pytest.approx(exact, rel=1e-10, abs=1e-10)


def test_gauss_legendre_rejects_bad_input():
    with pytest.raises(DomainError):
        gauss_legendre(0)
    with pytest.raises(DomainError):
        gauss_legendre(3, 1.0, 1.0)


def test_uniform_circle_examples():
    th, w = uniform_circle(4)
    assert w * len(th) == pytest.approx(2 * math.pi)
    th, w = uniform_circle(16)
    assert np.sum(w * np.cos(th) ** 2) == pytest.approx(math.pi, abs=1e-14)
    th, w = uniform_circle(8)
    assert abs(np.sum(w * np.cos(th))) < 1e-15
    with pytest.raises(DomainError):
        uniform_circle(3)


def test_rule_weights_sum_to_measures():
    q = QuadratureRule(n_r=7, n_theta=12, n_sigma=9, n_z=5, grid_M=10)
    dom = main_domain(3)
    _, wr = q.radial(dom.R)
    assert np.sum(wr) == pytest.approx(dom.R)
    _, dth = q.angular()
    assert dth * q.n_theta == pytest.approx(2 * math.pi)
    _, wz = q.z_rule()
    assert np.sum(wz) == pytest.approx(1.0)
    _, wg = q.grid(dom)
    assert wg * q.grid_M**2 == pytest.approx(dom.volume)


def test_default_rule_sizes():
    q = default_rule(main_domain(24), K=3)
    assert (q.n_r, q.n_theta, q.n_sigma, q.n_z, q.grid_M) == (64, 180, 90, 8, 196)
    q = default_rule(main_domain(2))
    assert (q.n_r, q.n_theta, q.n_sigma) == (32, 32, 32)
    assert q.grid_M >= 2 * (2 * 2 + 1)
    assert default_rule(main_domain(2), n_r=40).n_r == 40
