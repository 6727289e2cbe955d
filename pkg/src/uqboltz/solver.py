"""Explicit time stepping of the deterministic, gPC-Galerkin and collocation systems."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import bilinear_constant, record_for
from .errors import BlowUpError, DomainError, UsageError
from .gpc import GpcField, STensor, gpc_collision_rhs
from .kernel import KernelSpec
from .quadrature import QuadratureRule, default_rule
from .spectral import SpectralField, norms
from .weights import WeightTable, collision_rhs

INTEGRATORS = ("rk4", "euler")


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_final: float
    integrator: str = "rk4"
    record_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "integrator", str(self.integrator).lower())
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError(f"time step must be positive, got {self.dt}")
        if not (self.t_final > 0 and math.isfinite(self.t_final)):
            raise DomainError(f"final time must be positive, got {self.t_final}")
        if self.dt > self.t_final * (1 + 1e-12):
            raise DomainError(f"dt={self.dt} exceeds t_final={self.t_final}")
        if self.integrator not in INTEGRATORS:
            raise DomainError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise DomainError("record_every must be a positive integer")

    @property
    def n_steps(self) -> int:
        return max(1, int(math.ceil(self.t_final / self.dt - 1e-9)))

    def step_sizes(self) -> np.ndarray:
        """Fixed dt, with the last step shortened to land on t_final."""
        n = self.n_steps
        h = np.full(n, self.dt)
        h[-1] = self.t_final - self.dt * (n - 1)
        return h

    def stability_margin(self, C: float, l1_norm: float) -> float:
        """dt * C * ||f0||_1 (advisory: should stay below 0.5)."""
        return self.dt * C * l1_norm


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    diagnostics: list
    final: object = None
    z: float | None = None
    failed: bool = False
    error: str | None = None
    steps: int = 0
    mode_mass0: np.ndarray | None = field(default=None, repr=False)

    @property
    def mass_drift(self) -> float:
        """max over snapshots of |mass(t) - mass(0)| / |mass(0)|."""
        return max((r.mass_drift for r in self.diagnostics), default=0.0)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.diagnostics])


def _safe_l2(y: np.ndarray, volume: float) -> float:
    """L2 norm from coefficients without overflow for very large entries."""
    m = float(np.max(np.abs(y))) if y.size else 0.0
    if m == 0.0 or not np.isfinite(m):
        return m
    return m * float(np.sqrt(volume * np.sum(np.abs(y / m) ** 2)))


def _advance(y: np.ndarray, rhs, dt: float, method: str) -> np.ndarray:
    # overflow is detected explicitly after the step, so silence numpy's warnings here
    with np.errstate(over="ignore", invalid="ignore"):
        return _advance_unchecked(y, rhs, dt, method)


def _advance_unchecked(y: np.ndarray, rhs, dt: float, method: str) -> np.ndarray:
    if method == "euler":
        return y + dt * rhs(y)
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _deterministic_rhs(G: WeightTable, f: SpectralField, scale: float):
    dom, real = f.domain, f.real_valued

    def rhs(c):
        out = collision_rhs(G, SpectralField(dom, c, real)).coeffs
        return out * scale if scale != 1.0 else out

    return rhs


def _gpc_rhs(G: WeightTable, S: STensor, F: GpcField):
    dom, real = F.domain, F.real_valued

    def rhs(c):
        return gpc_collision_rhs(G, S, GpcField(dom, c, real)).coeffs

    return rhs


def step_deterministic(f: SpectralField, G: WeightTable, dt: float, integrator: str = "rk4",
                       scale: float = 1.0, t: float = 0.0) -> SpectralField:
    """One explicit step of df/dt = scale * P_N Q(f, f)."""
    method = integrator.lower()
    if method not in INTEGRATORS:
        raise DomainError(f"unknown integrator {integrator!r}")
    new = _advance(f.coeffs, _deterministic_rhs(G, f, scale), dt, method)
    if not np.all(np.isfinite(new)):
        raise BlowUpError(f"non-finite coefficients after step at t={t + dt:.6g}", t=t + dt,
                          norm=_safe_l2(f.coeffs, f.domain.volume))
    return SpectralField(f.domain, new, f.real_valued)


def step_gpc(F: GpcField, G: WeightTable, S: STensor, dt: float, integrator: str = "rk4",
             t: float = 0.0) -> GpcField:
    new = _advance(F.coeffs, _gpc_rhs(G, S, F), dt, integrator.lower())
    if not np.all(np.isfinite(new)):
        raise BlowUpError(f"non-finite gPC coefficients after step at t={t + dt:.6g}", t=t + dt,
                          norm=_safe_l2(F.coeffs, F.domain.volume))
    return GpcField(F.domain, new, F.real_valued)


def default_dt(spec: KernelSpec, f0: SpectralField, quad: QuadratureRule, lam_max: float = 1.0) -> float:
    """0.01 / (C * ||f0||_1) with C the bilinear-bound constant of the kernel."""
    C = bilinear_constant(spec, f0.domain, lam_max=lam_max)
    l1 = norms(f0, quad)["l1"]
    return 0.01 / (C * max(l1, 1e-300))


def run(f0, G: WeightTable, S: STensor | None = None, cfg: SolverConfig | None = None,
        quad: QuadratureRule | None = None, scale: float = 1.0, z: float | None = None,
        keep_states: bool = True) -> Trajectory:
    """Integrate to cfg.t_final, recording a diagnostics snapshot every cfg.record_every steps.

    A gPC state needs the triple-product tensor S; a deterministic state must
    not get one.  ``scale`` multiplies the collision term (lambda(z) for a
    collocation node).  On blow-up the raised error carries the partial
    trajectory.
    """
    if cfg is None:
        raise UsageError("a SolverConfig is required")
    is_gpc = isinstance(f0, GpcField)
    if is_gpc and S is None:
        raise UsageError("a gPC state requires the triple-product tensor")
    if not is_gpc and S is not None:
        raise UsageError("the triple-product tensor is only used with gPC states")
    if not (f0.domain.same_geometry(G.domain) and f0.domain.N == G.domain.N):
        raise UsageError("initial state and weight table live on different domains")
    quad = quad or default_rule(f0.domain, f0.order if is_gpc else 0)

    if is_gpc:
        rhs = _gpc_rhs(G, S, f0)
        wrap = lambda c: GpcField(f0.domain, c, f0.real_valued)  # noqa: E731
    else:
        rhs = _deterministic_rhs(G, f0, scale)
        wrap = lambda c: SpectralField(f0.domain, c, f0.real_valued)  # noqa: E731

    rec0 = record_for(f0, 0.0, quad)
    ref = rec0
    traj = Trajectory(times=[0.0], states=[f0] if keep_states else [], diagnostics=[rec0], z=z)
    y = f0.coeffs
    t = 0.0
    h = cfg.step_sizes()
    for i, dt in enumerate(h, start=1):
        y_new = _advance(y, rhs, float(dt), cfg.integrator)
        if not np.all(np.isfinite(y_new)):
            last = wrap(y)
            traj.final = last
            traj.failed = True
            traj.times = np.asarray(traj.times)
            norm = _safe_l2(y, f0.domain.volume)
            traj.error = f"blow-up at t={t + dt:.6g}"
            raise BlowUpError(f"non-finite coefficients at t={t + dt:.6g} (last finite L2 norm {norm:.6g})",
                              t=t + float(dt), norm=norm, trajectory=traj)
        y = y_new
        t = float(np.sum(h[:i]))
        if i % cfg.record_every == 0:
            state = wrap(y)
            traj.times.append(t)
            if keep_states:
                traj.states.append(state)
            with np.errstate(over="ignore", invalid="ignore"):
                traj.diagnostics.append(record_for(state, t, quad, reference=ref))
    traj.times = np.asarray(traj.times)
    traj.final = wrap(y)
    traj.steps = len(h)
    return traj


def run_collocation(f0_param, z_nodes, G: WeightTable, cfg: SolverConfig, lam,
                    quad: QuadratureRule | None = None, keep_states: bool = True) -> list:
    """Independent deterministic runs at each z node with the collision term scaled by lambda(z).

    ``f0_param(z)`` returns the initial SpectralField at z.  A node that blows
    up is returned as a flagged partial trajectory; the other nodes proceed.
    """
    out = []
    for z in z_nodes:
        z = float(z)
        if not -1.0 <= z <= 1.0:
            raise DomainError(f"collocation node {z} outside [-1, 1]")
        f0 = f0_param(z)
        scale = float(np.asarray(lam(z)))
        try:
            out.append(run(f0, G, None, cfg, quad, scale=scale, z=z, keep_states=keep_states))
        except BlowUpError as exc:
            tr = exc.trajectory or Trajectory(np.array([0.0]), [], [], z=z)
            tr.failed = True
            tr.error = str(exc)
            tr.z = z
            out.append(tr)
    return out
