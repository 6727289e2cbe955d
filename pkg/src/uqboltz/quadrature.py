"""Fixed quadrature rules: Gauss-Legendre, uniform circle, z-rule, projection grid."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0):
    """Gauss-Legendre nodes and weights on [a, b]; exact up to degree 2n - 1."""
    if n < 1:
        raise DomainError("need at least one Gauss node")
    if not a < b:
        raise DomainError("interval must satisfy a < b")
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def uniform_circle(n_theta: int):
    """Angles 2*pi*j/n and the common trapezoid weight 2*pi/n."""
    if n_theta < 4:
        raise DomainError("uniform circle rule needs at least 4 points")
    return 2.0 * math.pi * np.arange(n_theta) / n_theta, 2.0 * math.pi / n_theta


def bandwidth(domain) -> float:
    """Largest phase 2*pi*N*R/L reached by the collision-weight integrands."""
    return 2.0 * math.pi * domain.N * domain.R / domain.L


@dataclass(frozen=True)
class QuadratureRule:
    """Sizes of every rule used by weights, oracles, gPC tensor and grid projection.

    n_r      radial Gauss-Legendre points on [0, R] (Jacobian r folded in by users)
    n_theta  uniform points on S^1 for the q-direction
    n_sigma  Gauss-Legendre points on the support arc of the symmetrized b
    n_z      Gauss-Legendre points on [-1, 1] with the density 1/2 folded in
    grid_M   uniform points per dimension of the projection grid on [-L, L)^d
    """

    n_r: int = 32
    n_theta: int = 32
    n_sigma: int = 32
    n_z: int = 2
    grid_M: int = 4

    def __post_init__(self):
        if min(self.n_r, self.n_sigma, self.n_z) < 1 or self.n_theta < 4 or self.grid_M < 1:
            raise DomainError(f"invalid quadrature sizes {self}")

    def radial(self, R: float):
        """Nodes on [0, R] and plain Gauss weights (no Jacobian)."""
        return gauss_legendre(self.n_r, 0.0, R)

    def angular(self):
        return uniform_circle(self.n_theta)

    def arc(self):
        """Relative angle psi in [-pi/2, pi/2] between sigma and q-hat, with weights."""
        return gauss_legendre(self.n_sigma, -0.5 * math.pi, 0.5 * math.pi)

    def z_rule(self):
        """Nodes on [-1, 1] with weights summing to 1 (uniform density 1/2)."""
        z, w = gauss_legendre(self.n_z, -1.0, 1.0)
        return z, 0.5 * w

    def grid(self, domain):
        """1-D uniform nodes on [-L, L) and the tensor weight (2L/M)^d."""
        M = self.grid_M
        v = -domain.L + 2.0 * domain.L * np.arange(M) / M
        return v, (2.0 * domain.L / M) ** domain.d

    def grid_points(self, domain):
        """All grid points, shape (M, ..., M, d) in 'ij' order."""
        v, _ = self.grid(domain)
        mesh = np.meshgrid(*([v] * domain.d), indexing="ij")
        return np.stack(mesh, axis=-1)

    def with_(self, **kw) -> "QuadratureRule":
        return replace(self, **kw)

    def refined(self, factor: int = 2) -> "QuadratureRule":
        return replace(self, n_r=self.n_r * factor, n_theta=self.n_theta * factor,
                       n_sigma=self.n_sigma * factor)

    def sizes(self) -> dict:
        return {"n_r": self.n_r, "n_theta": self.n_theta, "n_sigma": self.n_sigma,
                "n_z": self.n_z, "grid_M": self.grid_M}


def default_rule(domain, K: int = 0, **overrides) -> QuadratureRule:
    """Default sizes for a domain and gPC order.

    The angular and radial counts grow with the phase 2*pi*N*R/L once the
    32-point floor no longer resolves the highest modes.
    """
    B = bandwidth(domain)
    n_theta = max(32, 4 * math.ceil((1.2 * B + 16) / 4))
    n_r = max(32, math.ceil(0.35 * B + 16))
    n_sigma = max(32, n_theta // 2)
    rule = QuadratureRule(n_r=n_r, n_theta=n_theta, n_sigma=n_sigma, n_z=2 * K + 2,
                          grid_M=4 * (2 * domain.N + 1))
    return rule.with_(**{k: v for k, v in overrides.items() if v is not None})
