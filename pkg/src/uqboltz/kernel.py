"""Collision-kernel models, truncation geometry and kernel assumption checks.

The kernel is B(|q|, cos(theta), z) = Phi(|q|) * b(cos(theta), z) with a
separable random factor, b(c, z) = lambda(z) * b0_sym(c).  Only the
symmetrized angular part (supported on theta in [0, pi/2]) is used by the
solver.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AssumptionViolation, DomainError

SQRT2 = math.sqrt(2.0)


def sphere_area(d: int) -> float:
    """|S^{d-1}|."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


# --------------------------------------------------------------------------
# kinetic part


@dataclass(frozen=True)
class HardPower:
    """Phi(|q|) = |q|^gamma, 0 <= gamma <= 1."""

    gamma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError(f"hard-potential exponent must lie in [0, 1], got {self.gamma}")

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        if self.gamma == 0.0:
            return np.ones_like(q)
        return q**self.gamma

    def sup(self, R: float) -> float:
        return 1.0 if self.gamma == 0.0 else R**self.gamma


@dataclass(frozen=True)
class ModifiedSoft:
    """Phi(|q|) = (1 + |q|)^gamma, -d < gamma < 0."""

    gamma: float = -1.0

    def __post_init__(self):
        if not self.gamma < 0.0:
            raise DomainError(f"modified soft exponent must be negative, got {self.gamma}")

    def __call__(self, q):
        return (1.0 + np.asarray(q, dtype=float)) ** self.gamma

    def sup(self, R: float) -> float:
        return 1.0


# --------------------------------------------------------------------------
# angular part (unsymmetrized base b0 as a function of cos(theta))


@dataclass(frozen=True)
class ConstantAngular:
    """b0(cos theta) = value.  The default is 1/|S^1|, i.e. Maxwell molecules in 2-D."""

    value: float = 1.0 / (2.0 * math.pi)

    def __call__(self, c):
        return np.full(np.shape(c), self.value, dtype=float)

    def describe(self):
        return {"type": "constant", "value": float(self.value)}


@dataclass(frozen=True)
class TabulatedAngular:
    """b0 given by values on increasing cos(theta) nodes, linearly interpolated."""

    cos_nodes: tuple
    values: tuple

    def __post_init__(self):
        c = np.asarray(self.cos_nodes, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if c.shape != v.shape or c.ndim != 1 or c.size < 2:
            raise DomainError("tabulated angular kernel needs matching 1-D node/value arrays")
        if np.any(np.diff(c) <= 0) or c[0] > -1.0 or c[-1] < 1.0:
            raise DomainError("cos nodes must increase and cover [-1, 1]")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("angular kernel values must be finite and nonnegative")

    def __call__(self, c):
        return np.interp(c, self.cos_nodes, self.values)

    def describe(self):
        return {"type": "table", "cos": list(map(float, self.cos_nodes)),
                "values": list(map(float, self.values))}


def symmetrize(b0: Callable) -> Callable:
    """Return c -> [b0(c) + b0(-c)] * 1{c >= 0}."""

    def b_sym(c):
        c = np.asarray(c, dtype=float)
        return np.where(c >= 0.0, b0(c) + b0(-c), 0.0)

    return b_sym


# --------------------------------------------------------------------------
# random factor lambda(z)


@dataclass(frozen=True)
class ConstantFactor:
    """lambda(z) = 1."""

    degree = 0

    def __call__(self, z):
        return np.ones_like(np.asarray(z, dtype=float))

    def derivative(self, z, k: int):
        z = np.asarray(z, dtype=float)
        return np.ones_like(z) if k == 0 else np.zeros_like(z)

    def describe(self):
        return {"type": "constant"}


@dataclass(frozen=True)
class AffineFactor:
    """lambda(z) = 1 + eps * z."""

    eps: float = 0.0
    degree = 1

    def __call__(self, z):
        return 1.0 + self.eps * np.asarray(z, dtype=float)

    def derivative(self, z, k: int):
        z = np.asarray(z, dtype=float)
        if k == 0:
            return self(z)
        if k == 1:
            return np.full_like(z, self.eps)
        return np.zeros_like(z)

    def describe(self):
        return {"type": "affine", "eps": float(self.eps)}


@dataclass(frozen=True)
class CustomFactor:
    """Smooth user-supplied lambda(z).

    ``degree`` is the polynomial degree when lambda is a polynomial; it sizes the
    z-quadrature so the gPC tensor is exact.  Derivatives use central differences.
    """

    func: Callable = field(compare=False)
    degree: int | None = None
    step: float = 1e-4

    def __call__(self, z):
        return np.asarray(self.func(np.asarray(z, dtype=float)), dtype=float)

    def derivative(self, z, k: int):
        z = np.asarray(z, dtype=float)
        if k == 0:
            return self(z)
        # round-off grows like eps / h^k, so widen the step past second order
        h = self.step * 10.0 ** max(0, k - 2)
        total = np.zeros_like(z)
        for j in range(k + 1):
            total += (-1) ** j * math.comb(k, j) * self(z + (k / 2.0 - j) * h)
        return total / h**k

    def describe(self):
        zs = np.linspace(-1.0, 1.0, 65)
        return {"type": "custom", "samples": [float(x) for x in self(zs)]}


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    """Kinetic part, angular base, random factor and truncation radius."""

    kinetic: HardPower | ModifiedSoft = HardPower(0.0)
    angular: Callable = ConstantAngular()
    random_factor: ConstantFactor | AffineFactor | CustomFactor = ConstantFactor()
    symmetrized: bool = True
    R: float | None = None

    def phi(self, q):
        return eval_phi(self, q)

    def b_base(self, c):
        """Symmetrized angular part at lambda = 1."""
        b = self.angular
        return symmetrize(b)(c) if self.symmetrized else np.asarray(b(np.asarray(c, float)), float)

    def b_sym(self, c, z=0.0):
        return eval_b_sym(self, c, z)

    def lam(self, z):
        return self.random_factor(z)

    def scaled(self, factor: float) -> "KernelSpec":
        """Same kernel with the angular part multiplied by ``factor``."""
        base = self.angular

        if isinstance(base, ConstantAngular):
            angular = ConstantAngular(base.value * factor)
        else:
            angular = _ScaledAngular(base, factor)
        return KernelSpec(self.kinetic, angular, self.random_factor, self.symmetrized, self.R)

    def describe(self) -> dict:
        """Canonical description of the lambda = 1 kernel (used for cache hashing)."""
        ang = self.angular
        if hasattr(ang, "describe"):
            ang_desc = ang.describe()
        else:
            cs = np.linspace(-1.0, 1.0, 257)
            ang_desc = {"type": "callable", "samples": [float(x) for x in ang(cs)]}
        return {
            "kinetic": type(self.kinetic).__name__,
            "gamma": float(self.kinetic.gamma),
            "angular": ang_desc,
            "symmetrized": bool(self.symmetrized),
        }


@dataclass(frozen=True)
class _ScaledAngular:
    base: Callable
    factor: float

    def __call__(self, c):
        return self.factor * np.asarray(self.base(c), dtype=float)

    def describe(self):
        inner = self.base.describe() if hasattr(self.base, "describe") else {"type": "callable"}
        return {"type": "scaled", "factor": float(self.factor), "base": inner}


def maxwell_kernel(d: int = 2, cross_section: float = 1.0, random_factor=None) -> KernelSpec:
    """Maxwell molecules: Phi = 1, b0 = cross_section / |S^{d-1}|."""
    return KernelSpec(
        HardPower(0.0),
        ConstantAngular(cross_section / sphere_area(d)),
        random_factor if random_factor is not None else ConstantFactor(),
    )


def eval_phi(spec: KernelSpec, q_mag):
    q = np.asarray(q_mag, dtype=float)
    if np.any(q < 0):
        raise DomainError("relative speed |q| must be nonnegative")
    return spec.kinetic(q)


def eval_b_sym(spec: KernelSpec, cos_theta, z=0.0):
    """lambda(z) * [b0(c) + b0(-c)] for c >= 0, zero otherwise."""
    if not spec.symmetrized:
        raise DomainError("the solver requires a symmetrized angular kernel")
    c = np.asarray(cos_theta, dtype=float)
    if np.any(np.abs(c) > 1.0 + 1e-14):
        raise DomainError("cos(theta) must lie in [-1, 1]")
    z = np.asarray(z, dtype=float)
    if np.any(np.abs(z) > 1.0 + 1e-14):
        raise DomainError("z must lie in [-1, 1]")
    return spec.lam(z) * symmetrize(spec.angular)(c)


def angular_l1(spec: KernelSpec, d: int = 2, n: int = 64) -> float:
    """Integral of the lambda = 1 symmetrized angular part over S^{d-1}."""
    if d == 2:
        x, w = np.polynomial.legendre.leggauss(n)
        psi = 0.5 * math.pi * x
        return float(np.sum(0.5 * math.pi * w * spec.b_base(np.cos(psi))))
    if d == 3:
        x, w = np.polynomial.legendre.leggauss(n)
        c = 0.5 * (x + 1.0)
        return float(2.0 * math.pi * np.sum(0.5 * w * spec.b_base(c)))
    raise DomainError(f"unsupported dimension d={d}")


@dataclass
class AssumptionReport:
    cutoff_integral: float
    C_b: float
    positive: bool
    derivative_sups: list
    min_lambda: float

    def as_dict(self):
        return {
            "cutoff_integral": self.cutoff_integral,
            "C_b": self.C_b,
            "positive": self.positive,
            "derivative_sups": list(self.derivative_sups),
            "min_lambda": self.min_lambda,
        }


def check_assumptions(spec: KernelSpec, r: int, n_samples: int = 201, d: int = 2,
                      strict: bool = True) -> AssumptionReport:
    """Numerically check cutoff, positivity and bounded z-derivatives of b.

    With ``strict`` a failed check raises AssumptionViolation; otherwise the
    report is returned with ``positive`` set accordingly.
    """
    if r < 0:
        raise DomainError("derivative order r must be nonnegative")
    zs = np.linspace(-1.0, 1.0, n_samples)
    cs = np.linspace(0.0, 1.0, n_samples)
    base = spec.b_base(cs)
    lam = spec.lam(zs)

    cutoff = angular_l1(spec, d) * float(np.max(np.abs(lam)))
    sups = []
    for k in range(r + 1):
        dk = spec.random_factor.derivative(zs, k)
        sups.append(float(np.max(np.abs(dk)) * np.max(base)))
    C_b = max(sups)
    positive = bool(np.min(base) > 0.0 and np.min(lam) > 0.0)
    report = AssumptionReport(cutoff, C_b, positive, sups, float(np.min(lam)))
    if strict:
        if not (math.isfinite(cutoff) and all(math.isfinite(s) for s in sups)):
            raise AssumptionViolation(f"angular kernel is not integrable (cutoff integral {cutoff})")
        if not positive:
            raise AssumptionViolation(
                f"b(cos theta, z) must be positive; min lambda = {report.min_lambda:.3g}, "
                f"min b0_sym = {float(np.min(base)):.3g}")
    return report


# --------------------------------------------------------------------------
# truncation geometry


@dataclass(frozen=True)
class Domain:
    """Periodic box [-L, L]^d, collision truncation radius R and mode bound N."""

    d: int
    L: float
    R: float
    N: int
    S: float | None = None

    def __post_init__(self):
        if self.d not in (2, 3):
            raise DomainError(f"velocity dimension must be 2 or 3, got {self.d}")
        if self.N < 0 or int(self.N) != self.N:
            raise DomainError(f"N must be a nonnegative integer, got {self.N}")
        if not self.R > 0:
            raise DomainError(f"truncation radius must be positive (L >= R > 0), got R={self.R}")
        if self.L < self.R:
            raise DomainError(f"L >= R > 0 violated: L={self.L}, R={self.R}")
        if self.S is not None:
            if not math.isclose(self.R, 2.0 * self.S, rel_tol=1e-12):
                raise DomainError(f"support radius S={self.S} requires R = 2S, got R={self.R}")
            lmin = 0.5 * (3.0 + SQRT2) * self.S
            if self.L < lmin * (1.0 - 1e-12):
                raise DomainError(f"L >= (3+sqrt2)/2 * S violated: L={self.L} < {lmin}")

    @classmethod
    def from_support(cls, S: float, N: int, d: int = 2, L: float | None = None) -> "Domain":
        if not S > 0:
            raise DomainError("support radius must be positive")
        lmin = 0.5 * (3.0 + SQRT2) * S
        return cls(d=d, L=lmin if L is None else L, R=2.0 * S, N=N, S=S)

    def with_N(self, N: int) -> "Domain":
        return Domain(self.d, self.L, self.R, N, self.S)

    @property
    def volume(self) -> float:
        return (2.0 * self.L) ** self.d

    @property
    def n_modes(self) -> int:
        return (2 * self.N + 1) ** self.d

    def same_geometry(self, other: "Domain") -> bool:
        return self.d == other.d and self.L == other.L and self.R == other.R

    def describe(self) -> dict:
        return {"d": self.d, "L": float(self.L), "R": float(self.R), "N": int(self.N)}


def digest(*parts) -> str:
    """sha256 over the canonical JSON of the given descriptions."""
    blob = json.dumps(parts, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
