"""Construction of impulse potentials from invertible maps.

The strong route steers every point of the coordinate space along the
straight interpolation ``X(x_i, tau) = (1 - g) x_i + g mu(x_i)`` between
its initial and final positions.  For maps that are gradients of convex
potentials there is a unique potential whose Hamilton-Jacobi flow is
exactly that interpolation; ``ImpulseDesign`` evaluates it together with
the flow's action, velocity and force fields.

The weak route imprints a phase directly: ``OrdinaryImpulse`` applies
``-delta_s(x) nu(tau)`` with a unit-integral envelope ``nu``.  The
hybrid route composes both, painting the phase along the moving flow so
that each trajectory accumulates its full increment by the end of the
pulse.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import (
    ConfigError,
    ConvergenceError,
    ConvexityError,
    DegenerateDensityError,
)
from .geometry import Wavefunction, density_and_phase
from .schedule import Schedule
from .transportmap import (
    ConvexityCertificate,
    MapSpec,
    builtin_map,
    certify_gradient_of_convex,
    monotone_rearrangement_1d,
)

__all__ = [
    "DesignFields",
    "ImpulseDesign",
    "PhasePaint",
    "OrdinaryImpulse",
    "HybridImpulse",
    "LocalDesign",
    "build_global_design",
    "make_envelope",
    "design_ordinary",
    "design_hybrid",
    "design_local_1d",
]

_NEWTON_MAX_ITER = 60
_NEWTON_TOL = 1e-10
_SCHEDULE_EDGE = 1e-14


def _invert_blend(map_spec: MapSpec, points: np.ndarray, g: float, init=None):
    """Solve (1 - g) x_i + g mu(x_i) = x for x_i, batched over points.

    Damped Newton iteration; ``init`` warm-starts the solve (the caller
    typically reuses the previous time sample's answer).
    """
    pts = np.asarray(points, dtype=float)
    shape = pts.shape
    dim = map_spec.dim
    flat = pts.reshape(-1, dim)
    if init is None:
        xi = flat.copy()
    else:
        xi = np.asarray(init, dtype=float).reshape(flat.shape).copy()
    scale = max(1.0, float(np.max(np.abs(flat)))) if flat.size else 1.0
    tol = _NEWTON_TOL * scale
    eye = np.eye(dim)

    def residual(z):
        return (1.0 - g) * z + g * np.asarray(map_spec.forward(z), dtype=float) - flat

    r = residual(xi)
    rnorm = np.max(np.abs(r), axis=-1)
    for _ in range(_NEWTON_MAX_ITER):
        if np.all(rnorm <= tol):
            return xi.reshape(shape)
        J = np.asarray(map_spec.jacobian(xi), dtype=float)
        J = np.broadcast_to(J, (flat.shape[0], dim, dim))
        A = (1.0 - g) * eye + g * J
        step = np.linalg.solve(A, r[..., None])[..., 0]
        alpha = np.ones(flat.shape[0])
        cand = xi - step
        rc = residual(cand)
        rcnorm = np.max(np.abs(rc), axis=-1)
        for _backtrack in range(10):
            worse = (rcnorm > rnorm) & (rnorm > tol)
            if not np.any(worse):
                break
            alpha = np.where(worse, 0.5 * alpha, alpha)
            cand = xi - alpha[:, None] * step
            rc = residual(cand)
            rcnorm = np.max(np.abs(rc), axis=-1)
        unconverged = rnorm > tol
        xi = np.where(unconverged[:, None], cand, xi)
        r = np.where(unconverged[:, None], rc, r)
        rnorm = np.where(unconverged, rcnorm, rnorm)
    raise ConvergenceError(
        f"interpolated-map inversion stalled at residual {float(np.max(rnorm)):.3e}"
    )


@dataclass(frozen=True)
class DesignFields:
    """All flow fields of a design at one time sample, on given points."""

    start: np.ndarray
    final: np.ndarray
    displacement_potential: np.ndarray
    action: np.ndarray
    potential: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    force: np.ndarray


@dataclass(frozen=True)
class ImpulseDesign:
    """Strong impulse potential executing a coordinate map.

    With ``x_i`` the starting point of the trajectory currently passing
    through ``x`` and ``x_f = mu(x_i)``, the generating field is

        W(x) = (g/2) |x_f - x_i|^2 - |x_i|^2 / 2 + phi(x_i)

    and the action and potential are ``S = m gdot W`` and
    ``U = -m gddot W``.  The pair solves the Hamilton-Jacobi equation
    exactly, so every trajectory runs along the straight interpolation
    and arrives at ``mu(x_i)`` when the ramp completes.
    """

    map_spec: MapSpec
    schedule: Schedule
    mass: float = 1.0
    certificate: ConvexityCertificate | None = None

    has_u1 = False
    has_u2 = True

    @property
    def T(self) -> float:
        return self.schedule.T

    @property
    def dim(self) -> int:
        return self.map_spec.dim

    def lagrangian_position(self, x_i, tau: float) -> np.ndarray:
        g = self.schedule.g(tau)
        pts = np.asarray(x_i, dtype=float)
        return (1.0 - g) * pts + g * np.asarray(self.map_spec.forward(pts), dtype=float)

    def lagrangian_start(self, x, tau: float, init=None) -> np.ndarray:
        g = self.schedule.g(tau)
        pts = np.asarray(x, dtype=float)
        if g <= _SCHEDULE_EDGE:
            return pts.copy()
        if g >= 1.0 - _SCHEDULE_EDGE:
            return np.asarray(self.map_spec.inverse(pts), dtype=float)
        if self.map_spec.blend_inverse is not None:
            return np.asarray(self.map_spec.blend_inverse(pts, g), dtype=float)
        return _invert_blend(self.map_spec, pts, g, init=init)

    def evaluate_fields(self, points, tau: float, init=None) -> DesignFields:
        if self.map_spec.phi is None:
            raise ConvexityError(
                "design fields need a map with a convex potential"
            )
        pts = np.asarray(points, dtype=float)
        g = self.schedule.g(tau)
        gdot = self.schedule.gdot(tau)
        gddot = self.schedule.gddot(tau)
        x_i = self.lagrangian_start(pts, tau, init=init)
        x_f = np.asarray(self.map_spec.forward(x_i), dtype=float)
        dx = x_f - x_i
        sep_sq = np.sum(dx**2, axis=-1)
        w = (
            0.5 * g * sep_sq
            - 0.5 * np.sum(x_i**2, axis=-1)
            + np.asarray(self.map_spec.phi(x_i), dtype=float)
        )
        return DesignFields(
            start=x_i,
            final=x_f,
            displacement_potential=w,
            action=self.mass * gdot * w,
            potential=-self.mass * gddot * w,
            velocity=gdot * dx,
            acceleration=gddot * dx,
            force=self.mass * gddot * dx,
        )

    def displacement_potential(self, x, tau: float) -> np.ndarray:
        return self.evaluate_fields(x, tau).displacement_potential

    def action(self, x, tau: float) -> np.ndarray:
        return self.evaluate_fields(x, tau).action

    def potential(self, x, tau: float) -> np.ndarray:
        return self.evaluate_fields(x, tau).potential

    def velocity(self, x, tau: float) -> np.ndarray:
        return self.evaluate_fields(x, tau).velocity

    def acceleration(self, x, tau: float) -> np.ndarray:
        return self.evaluate_fields(x, tau).acceleration

    def force(self, x, tau: float) -> np.ndarray:
        return self.evaluate_fields(x, tau).force

    def u1(self, points, tau: float) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.zeros(pts.shape[:-1])

    def u2(self, points, tau: float) -> np.ndarray:
        return self.potential(points, tau)

    def field_sampler(self, points):
        """Per-time-sample evaluation closure for propagators.

        Keeps the previous start points as the Newton warm start, which
        matters when the map has no interpolated inverse in closed form.
        """
        pts = np.asarray(points, dtype=float)
        state = {"init": None}

        def sample(tau: float):
            fields = self.evaluate_fields(pts, tau, init=state["init"])
            state["init"] = fields.start
            return None, fields.potential

        return sample


def build_global_design(
    map_spec: MapSpec,
    schedule: Schedule,
    region,
    mass: float = 1.0,
    certify: bool = True,
) -> ImpulseDesign:
    """Design the strong potential for a map, verifying admissibility.

    The construction requires the map to be the gradient of a convex
    potential; ``region`` bounds the domain over which that is checked.
    Raises ``ConvexityError`` (carrying the sampling certificate) when
    the check fails.
    """
    if mass <= 0:
        raise ConfigError("mass must be positive")
    if map_spec.phi is None:
        raise ConvexityError(
            f"map kind '{map_spec.kind}' carries no convex potential; "
            "use the density-level route instead"
        )
    certificate = None
    if certify:
        certificate = certify_gradient_of_convex(map_spec, region)
        if not certificate.holds:
            raise ConvexityError(
                f"map kind '{map_spec.kind}' is not the gradient of a convex "
                f"function on the requested region ({certificate.witness_kind} "
                f"at {certificate.witness_point})",
                certificate=certificate,
            )
    return ImpulseDesign(
        map_spec=map_spec, schedule=schedule, mass=mass, certificate=certificate
    )


ENVELOPE_KINDS = ("uniform", "hann")


def make_envelope(kind: str, T: float) -> Callable[[float], float]:
    """Unit-integral time envelope for phase painting."""
    if T <= 0:
        raise ConfigError("envelope duration must be positive")
    if kind == "uniform":
        return lambda tau: 1.0 / T
    if kind == "hann":
        return lambda tau: (1.0 - np.cos(2.0 * np.pi * tau / T)) / T
    raise ConfigError(f"unknown envelope kind '{kind}'")


@dataclass(frozen=True)
class PhasePaint:
    """A phase increment painted over the pulse by a weak potential."""

    delta_s: Callable[[np.ndarray], np.ndarray]
    nu: Callable[[float], float]
    T: float
    kind: str = "uniform"


@dataclass(frozen=True)
class OrdinaryImpulse:
    """Weak impulse: a pure phase imprint with no density transport."""

    paint: PhasePaint
    dim: int = 1

    has_u1 = True
    has_u2 = False

    @property
    def T(self) -> float:
        return self.paint.T

    def u1(self, points, tau: float) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return -np.asarray(self.paint.delta_s(pts), dtype=float) * self.paint.nu(tau)

    def u2(self, points, tau: float) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.zeros(pts.shape[:-1])

    def field_sampler(self, points):
        pts = np.asarray(points, dtype=float)
        base = -np.asarray(self.paint.delta_s(pts), dtype=float)

        def sample(tau: float):
            return base * self.paint.nu(tau), None

        return sample


@dataclass(frozen=True)
class HybridImpulse:
    """Strong transport plus a weak phase painted along the moving flow.

    The weak term evaluates the phase increment at the final position of
    the trajectory passing through each point, so the paint follows the
    flow and every trajectory collects exactly its own increment.
    """

    design: ImpulseDesign
    paint: PhasePaint

    has_u1 = True
    has_u2 = True

    def __post_init__(self):
        if abs(self.design.T - self.paint.T) > 1e-12 * max(1.0, self.design.T):
            raise ConfigError("transport and paint must share one duration")

    @property
    def T(self) -> float:
        return self.design.T

    @property
    def dim(self) -> int:
        return self.design.dim

    def u1(self, points, tau: float) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        x_i = self.design.lagrangian_start(pts, tau)
        x_f = np.asarray(self.design.map_spec.forward(x_i), dtype=float)
        return -np.asarray(self.paint.delta_s(x_f), dtype=float) * self.paint.nu(tau)

    def u2(self, points, tau: float) -> np.ndarray:
        return self.design.potential(points, tau)

    def field_sampler(self, points):
        # one flow inversion per time sample serves both components
        pts = np.asarray(points, dtype=float)
        state = {"init": None}

        def sample(tau: float):
            fields = self.design.evaluate_fields(pts, tau, init=state["init"])
            state["init"] = fields.start
            u1 = -np.asarray(self.paint.delta_s(fields.final), dtype=float)
            return u1 * self.paint.nu(tau), fields.potential

        return sample


def design_ordinary(
    delta_s: Callable[[np.ndarray], np.ndarray],
    T: float,
    envelope: str = "uniform",
    dim: int = 1,
) -> OrdinaryImpulse:
    """Weak impulse painting the phase increment ``delta_s``."""
    paint = PhasePaint(
        delta_s=delta_s, nu=make_envelope(envelope, T), T=T, kind=envelope
    )
    return OrdinaryImpulse(paint=paint, dim=dim)


def design_hybrid(
    map_spec: MapSpec,
    delta_s: Callable[[np.ndarray], np.ndarray],
    schedule: Schedule,
    region,
    mass: float = 1.0,
    envelope: str = "uniform",
) -> HybridImpulse:
    """Strong transport and weak phase paint sharing one pulse window."""
    design = build_global_design(map_spec, schedule, region, mass=mass)
    paint = PhasePaint(
        delta_s=delta_s,
        nu=make_envelope(envelope, schedule.T),
        T=schedule.T,
        kind=envelope,
    )
    return HybridImpulse(design=design, paint=paint)


@dataclass(frozen=True)
class LocalDesign:
    """Density-level design for one-dimensional states.

    ``design`` transports the density by the monotone rearrangement,
    ``paint`` supplies the leftover phase, and ``predicted`` is the
    deformation the combination should produce.
    """

    design: ImpulseDesign
    paint: PhasePaint
    predicted: Wavefunction

    @property
    def hybrid(self) -> HybridImpulse:
        return HybridImpulse(design=self.design, paint=self.paint)


_SNAP_TOL = 1e-7


def _snap_translation_1d(map_spec: MapSpec, rho_i) -> MapSpec:
    """Swap a tabulated map for the exact shift it approximates.

    A rearrangement between two densities of the same shape is a pure
    translation up to interpolation noise; substituting the closed form
    keeps the designed potential exactly linear instead of linear plus
    spline noise.  Maps that genuinely bend are left alone.
    """
    x = rho_i.grid.axis(0)
    w = np.asarray(rho_i.values, dtype=float)
    mask = w > 1e-6 * w.max()
    mu = np.asarray(map_spec.forward(x[mask][:, None]), dtype=float)[:, 0]
    offsets = mu - x[mask]
    weights = w[mask]
    d = float(np.sum(weights * offsets) / np.sum(weights))
    if float(np.max(np.abs(offsets - d))) <= _SNAP_TOL:
        return builtin_map("translation", dim=1, d=d)
    return map_spec


def design_local_1d(
    psi_i: Wavefunction,
    psi_f: Wavefunction,
    schedule: Schedule,
    envelope: str = "uniform",
    refine: int = 4,
    mass: float | None = None,
) -> LocalDesign:
    """Hybrid design reaching a target state rather than a target map.

    Works at the level of the two densities: the strong component runs
    the monotone rearrangement between them, and the weak component
    paints on the phase left over after that transport.  One dimension
    only (the rearrangement is not unique beyond it).
    """
    if psi_i.grid.dim != 1:
        raise ConfigError("density-level design is one-dimensional")
    if psi_i.grid != psi_f.grid:
        raise ConfigError("initial and target states must share a grid")
    if mass is None:
        mass = psi_i.mass
    rho_i = psi_i.density()
    rho_f = psi_f.density()
    rearr = monotone_rearrangement_1d(rho_i, rho_f, refine=refine)
    rearr = _snap_translation_1d(rearr, rho_i)
    region = tuple((float(lo), float(hi)) for lo, hi in psi_i.grid.bounds)
    design = build_global_design(rearr, schedule, region, mass=mass)

    from .quantumsim import predicted_deformation

    transported = predicted_deformation(psi_i, rearr)
    paint = phase_paint_from_states(
        transported, psi_f, T=schedule.T, envelope=envelope
    )
    # full prediction: transported density with the painted phase on top
    pts = psi_i.grid.points()
    phased = transported.values * np.exp(
        1j * np.asarray(paint.delta_s(pts), dtype=float) / psi_i.hbar
    )
    predicted = replace(transported, values=phased, carrier=psi_f.carrier)
    return LocalDesign(design=design, paint=paint, predicted=predicted)


def phase_paint_from_states(
    psi_bar: Wavefunction,
    psi_target: Wavefunction,
    T: float,
    envelope: str = "uniform",
    support_relative: float = 1e-8,
) -> PhasePaint:
    """Phase increment turning ``psi_bar`` into ``psi_target``.

    The pointwise phase difference is unwrapped over the region where
    the transported density is meaningful and continued as a constant
    beyond it (the painted phase is irrelevant where there is no mass,
    but the potential must stay bounded).
    """
    if psi_bar.grid != psi_target.grid:
        raise ConfigError("states must share a grid")
    if psi_bar.grid.dim != 1:
        raise ConfigError("phase painting is one-dimensional")
    rho = psi_bar.density()
    mask = rho.support_mask(relative=support_relative)
    if np.count_nonzero(mask) < 4:
        raise DegenerateDensityError("transported state has no usable support")
    idx = np.flatnonzero(mask)
    if not np.all(np.diff(idx) == 1):
        raise DegenerateDensityError(
            "transported density support is not contiguous; phase "
            "difference cannot be unwrapped across the gap"
        )
    x = psi_bar.grid.axis(0)[idx]
    wrapped = np.angle(psi_target.values[idx] * np.conj(psi_bar.values[idx]))
    theta = np.unwrap(wrapped)
    hbar = psi_target.hbar
    values = hbar * theta
    interp = PchipInterpolator(x, values, extrapolate=False)
    lo_x, hi_x = x[0], x[-1]
    lo_v, hi_v = values[0], values[-1]

    def delta_s(points):
        pts = np.asarray(points, dtype=float)[..., 0]
        out = np.asarray(interp(np.clip(pts, lo_x, hi_x)))
        out = np.where(pts < lo_x, lo_v, out)
        out = np.where(pts > hi_x, hi_v, out)
        return out

    return PhasePaint(delta_s=delta_s, nu=make_envelope(envelope, T), T=T, kind=envelope)
