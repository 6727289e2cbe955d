"""Reference computations that do not go through the weight table.

* direct physical-space quadrature of the truncated collision operator,
* a brute-force evaluation of single weights from the gain-minus-loss form,
* the 2-D BKW self-similar solution for Maxwell molecules and its residual check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolation, DomainError, UsageError
from .kernel import Domain, KernelSpec, maxwell_kernel
from .quadrature import QuadratureRule
from .spectral import SpectralField, coeffs_to_grid, grid_to_coeffs


def _wrap(x, L):
    return (x + L) % (2.0 * L) - L


def direct_qr(f_values, spec: KernelSpec, z: float, points, quad: QuadratureRule,
              domain: Domain | None = None, g_values=None, R: float | None = None) -> np.ndarray:
    """Q^R(g, f) at the given points by nested quadrature (radius x q-angle x sigma-angle).

    ``f_values`` (and ``g_values``, default f) map arrays of velocities (..., 2)
    to values.  With a domain, arguments are wrapped periodically into [-L, L)^2.
    """
    g_values = f_values if g_values is None else g_values
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != 2:
        raise UsageError("direct quadrature is implemented for d = 2")
    if R is None:
        R = domain.R if domain is not None else spec.R
    if R is None:
        raise UsageError("truncation radius needed (pass a domain or R)")
    L = domain.L if domain is not None else None
    wrap = (lambda x: _wrap(x, L)) if L is not None else (lambda x: x)

    r_nodes, r_w = quad.radial(R)
    theta, dth = quad.angular()
    psi, w_psi = quad.arc()
    bw = spec.b_sym(np.cos(psi), z) * w_psi  # (n_sigma,)
    btot = float(np.sum(bw))
    qhat = np.stack([np.cos(theta), np.sin(theta)], axis=-1)  # (T, 2)
    sig = np.stack([np.cos(theta[:, None] + psi[None, :]), np.sin(theta[:, None] + psi[None, :])], axis=-1)

    out = np.zeros(len(pts), dtype=complex)
    for ip, v in enumerate(pts):
        acc = 0.0 + 0.0j
        fv = complex(np.asarray(f_values(v[None, :])).reshape(-1)[0])
        for r, wr in zip(r_nodes, r_w):
            q = r * qhat  # (T, 2)
            a = 0.5 * (q[:, None, :] - r * sig)  # (T, S, 2)
            b = 0.5 * (q[:, None, :] + r * sig)
            gain = np.asarray(g_values(wrap(v - b))) * np.asarray(f_values(wrap(v - a)))
            loss = np.asarray(g_values(wrap(v - q))) * fv
            inner = np.sum(gain * bw[None, :]) - btot * np.sum(loss)
            acc += wr * r * spec.phi(r) * dth * inner
        out[ip] = acc
    return out


def direct_qr_field(f: SpectralField, spec: KernelSpec, z: float, quad: QuadratureRule,
                    g: SpectralField | None = None) -> SpectralField:
    """Projection onto the lattice of the direct quadrature of Q^R(g, f) for trigonometric fields.

    For every quadrature node the shifts v - (q -/+ |q| sigma)/2 and v - q are
    the same at all velocities, so the shifted fields are evaluated on the
    whole uniform grid by one inverse FFT each.  The product is accumulated on
    a grid fine enough (M > 3N) that projecting the quadratic output back onto
    |n_i| <= N is alias free.
    """
    g = f if g is None else g
    dom = f.domain
    if dom.d != 2:
        raise UsageError("direct quadrature is implemented for d = 2")
    N, L, R = dom.N, dom.L, dom.R
    M = 3 * N + 2
    r_nodes, r_w = quad.radial(R)
    theta, dth = quad.angular()
    psi, w_psi = quad.arc()
    bw = spec.b_sym(np.cos(psi), z) * w_psi
    n = np.arange(-N, N + 1)
    k = math.pi / L

    def shifted(c, shifts):
        # c shape (2N+1, 2N+1); shifts (..., 2) -> values on grid (..., M, M)
        p1 = np.exp(-1j * k * shifts[..., 0, None] * n)
        p2 = np.exp(-1j * k * shifts[..., 1, None] * n)
        coeffs = p1[..., :, None] * c * p2[..., None, :]
        return coeffs_to_grid(coeffs, dom, M)

    f_grid = coeffs_to_grid(f.coeffs, dom, M)
    total = np.zeros((M, M), dtype=complex)
    qhat = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    sig = np.stack([np.cos(theta[:, None] + psi[None, :]), np.sin(theta[:, None] + psi[None, :])], axis=-1)
    for r, wr in zip(r_nodes, r_w):
        q = r * qhat
        wq = wr * r * float(spec.phi(r)) * dth
        # gain, one block of q-directions at a time to bound memory
        step = max(1, 4096 // len(psi))
        for j0 in range(0, len(theta), step):
            qs = q[j0:j0 + step, None, :]
            ss = sig[j0:j0 + step]
            fa = shifted(f.coeffs, 0.5 * (qs - r * ss))
            gb = shifted(g.coeffs, 0.5 * (qs + r * ss))
            total += wq * np.einsum("ts,tsxy->xy", np.broadcast_to(bw, ss.shape[:2]), fa * gb)
        gl = shifted(g.coeffs, q)
        total -= wq * float(np.sum(bw)) * f_grid * gl.sum(axis=0)
    coeffs = grid_to_coeffs(total, dom)
    return SpectralField(dom, coeffs, f.real_valued and g.real_valued)


def brute_force_weight(spec: KernelSpec, domain: Domain, l, m, quad: QuadratureRule) -> complex:
    """One weight from the gain-minus-loss form with the sigma-integral done by quadrature.

    Uses the form before the sigma/qhat exchange, so it shares no algebra with the
    Jacobi-Anger evaluation in the weights module.
    """
    if domain.d != 2:
        raise UsageError("brute-force weights are implemented for d = 2")
    L, R = domain.L, domain.R
    l = np.asarray(l, dtype=float)
    m = np.asarray(m, dtype=float)
    r_nodes, r_w = quad.radial(R)
    theta, dth = quad.angular()
    psi, w_psi = quad.arc()
    b = spec.b_base(np.cos(psi)) * w_psi
    qhat = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    sig = np.stack([np.cos(theta[:, None] + psi[None, :]), np.sin(theta[:, None] + psi[None, :])], axis=-1)
    k = math.pi / (2.0 * L)
    total = 0.0 + 0.0j
    for r, wr in zip(r_nodes, r_w):
        q = r * qhat
        gain = np.exp(-1j * k * (q @ (l + m)))[:, None] * np.exp(1j * k * r * (sig @ (l - m)))
        loss = np.exp(-2j * k * (q @ m))[:, None]
        total += wr * r * float(spec.phi(r)) * dth * np.sum((gain - loss) * b[None, :])
    return complex(total)


# --------------------------------------------------------------------------
# BKW


@dataclass(frozen=True)
class BkwParams:
    """2-D BKW profile for Maxwell molecules with b0 = cross_section / (2 pi).

    ``rho`` is the (conserved) mass and ``T`` the temperature, so the energy
    integral of |v|^2 is 2 rho T.  ``t0`` shifts the start of the self-similar
    evolution; t0 = 0 is the earliest admissible time (K = 1/2).
    """

    rho: float = 1.0
    T: float = 1.0
    cross_section: float = 1.0
    t0: float = 0.0
    d: int = 2

    def __post_init__(self):
        if self.d != 2:
            raise DomainError("only the 2-D BKW profile is provided")
        if self.rho <= 0 or self.T <= 0 or self.cross_section <= 0:
            raise DomainError("BKW mass, temperature and cross-section must be positive")
        if self.t0 < 0:
            raise DomainError("BKW start shift must be nonnegative")

    def K(self, t):
        return 1.0 - 0.5 * np.exp(-self.rho * self.cross_section * (np.asarray(t, float) + self.t0) / 8.0)

    def kernel(self) -> KernelSpec:
        return maxwell_kernel(2, self.cross_section)


def bkw(t, v, p: BkwParams = BkwParams()):
    """rho/(2 pi K^2 T) exp(-|v|^2/(2KT)) (2K - 1 + (1 - K)|v|^2/(2KT))."""
    v = np.asarray(v, dtype=float)
    K = p.K(t)
    u = np.sum(v * v, axis=-1) / (2.0 * K * p.T)
    return p.rho / (2.0 * math.pi * K * K * p.T) * np.exp(-u) * (2.0 * K - 1.0 + (1.0 - K) * u)


def bkw_tail_mass(t, S: float, p: BkwParams = BkwParams()) -> float:
    """Mass of the profile outside the ball of radius S."""
    K = float(p.K(t))
    u0 = S * S / (2.0 * K * p.T)
    return p.rho / K * math.exp(-u0) * ((2.0 * K - 1.0) + (1.0 - K) * (u0 + 1.0))


def verify_bkw(p: BkwParams, sample_times, quad: QuadratureRule, domain: Domain,
               kernel: KernelSpec | None = None, dt_fd: float = 1e-4, points=None,
               tail_tol: float = 1e-12, tol: float | None = None) -> float:
    """max |central-difference d/dt bkw - Q^R(bkw, bkw)| over sampled times and velocities.

    The collision term uses ``kernel`` (default: the Maxwell kernel matching
    ``p``), so a kernel with the wrong cross-section shows up as a large residual.
    Velocities default to a 5 x 5 grid on [-S/2, S/2]^2 with S = R/2.
    With ``tol`` set, a residual above it raises AssumptionViolation.
    """
    kernel = p.kernel() if kernel is None else kernel
    S = domain.S if domain.S is not None else 0.5 * domain.R
    for t in sample_times:
        tail = bkw_tail_mass(t, S, p)
        if tail > tail_tol:
            raise DomainError(f"BKW mass outside the support ball is {tail:.2e} at t={t} "
                              f"(limit {tail_tol:.0e}); enlarge S or lower the temperature")
    if points is None:
        x = np.linspace(-0.5 * S, 0.5 * S, 5)
        points = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
    points = np.asarray(points, dtype=float)
    worst = 0.0
    for t in sample_times:
        dfdt = (bkw(t + dt_fd, points, p) - bkw(t - dt_fd, points, p)) / (2.0 * dt_fd)
        q = direct_qr(lambda v: bkw(t, v, p), kernel, 0.0, points, quad, domain=domain)
        worst = max(worst, float(np.max(np.abs(dfdt - q))))
    if tol is not None and worst > tol:
        raise AssumptionViolation(f"BKW residual {worst:.3e} exceeds {tol:.1e}; "
                                  "normalization constants do not match the kernel")
    return worst
