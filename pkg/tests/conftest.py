import math

import numpy as np
import pytest

from uqboltz.kernel import Domain, maxwell_kernel
from uqboltz.quadrature import default_rule
from uqboltz.weights import kernel_hash, load_weights, precompute_weights, save_weights

# support radius of the production domain: R = 12, L = (3 + sqrt 2)/2 * 6
S_MAIN = 6.0
N_MAIN = 24
# small box with L = pi
S_SMALL = 2.0 * math.pi / (3.0 + math.sqrt(2.0))


def main_domain(N):
    return Domain.from_support(S_MAIN, N)


def small_domain(N):
    return Domain.from_support(S_SMALL, N)


def with_domain(G, dom):
    """Reattach the configured domain (the cache header does not store S)."""
    from uqboltz.weights import WeightTable

    return WeightTable(dom, G.entries, G.kernel_hash, G.quad_tol, G.quad, G.part)


@pytest.fixture(scope="session")
def maxwell():
    return maxwell_kernel(2)


@pytest.fixture(scope="session")
def table24(request, maxwell):
    """Maxwell weights on the S = 6 box at N = 24, cached across test sessions."""
    dom = main_domain(N_MAIN)
    quad = default_rule(dom)
    h = kernel_hash(maxwell, dom, quad)
    cache = request.config.cache.mkdir("uqboltz-weights") / f"maxwell_S6_N24_{h[:16]}.bin"
    if cache.exists():
        G = load_weights(str(cache), h)
    else:
        G = precompute_weights(maxwell, dom, quad)
        save_weights(G, str(cache))
    return with_domain(G, dom)


@pytest.fixture(scope="session")
def table_small6(maxwell):
    dom = small_domain(6)
    return precompute_weights(maxwell, dom, default_rule(dom))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def restricted(G, N):
    return with_domain(G.restrict(N), G.domain.with_N(N))


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def report(criterion: int, passed: bool, detail: str) -> None:
    line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
