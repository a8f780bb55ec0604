"""Split-operator propagation of impulse pulses at finite sharpness.

The rescaled evolution over the pulse interval ``tau in [0, T]`` is

    i hbar_eff d_tau psi = [ -hbar_eff^2 lap / 2m
                             + eps^2 U0(x, eps tau)
                             + eps U1(x, tau)
                             + U2(x, tau)
                             + eps^2 g |psi|^2 ] psi

with ``hbar_eff = eps hbar``.  ``eps`` is the sharpness of the pulse in
lab time; the designed potentials become exact in the limit ``eps -> 0``
and the point of the propagator is to measure how fast the finite-eps
deviation closes.

``predicted_deformation`` evaluates the instantaneous deformation a map
should produce, and ``compare`` reduces a pair of states to deviation
metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft

from .errors import (
    ConfigError,
    MassLeakError,
    ResourceGuardError,
    StabilityError,
    SupportEscapeError,
)
from .geometry import Grid, Wavefunction, sample_field
from .transportmap import MapSpec

__all__ = [
    "ExplicitImpulse",
    "PropagationSpec",
    "PropagationResult",
    "propagate",
    "predicted_deformation",
    "DeviationReport",
    "compare",
]

MIN_STEPS = 1024
PHASE_PER_STEP = np.pi / 8.0
NORM_DRIFT_LIMIT = 1e-7
SHELL_MASS_LIMIT = 1e-6
_SURVEY_SAMPLES = 17


@dataclass(frozen=True)
class ExplicitImpulse:
    """Impulse given directly as potential callables.

    ``u1_fn`` and ``u2_fn`` take ``(points, tau)`` and return the weak
    and strong components; either may be omitted.
    """

    T: float
    u1_fn: Callable | None = None
    u2_fn: Callable | None = None
    dim: int = 1

    def __post_init__(self):
        if self.T <= 0:
            raise ConfigError("pulse duration must be positive")
        if self.u1_fn is None and self.u2_fn is None:
            raise ConfigError("at least one potential component is required")

    @property
    def has_u1(self) -> bool:
        return self.u1_fn is not None

    @property
    def has_u2(self) -> bool:
        return self.u2_fn is not None

    def u1(self, points, tau: float) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.u1_fn is None:
            return np.zeros(pts.shape[:-1])
        return np.asarray(self.u1_fn(pts, tau), dtype=float)

    def u2(self, points, tau: float) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.u2_fn is None:
            return np.zeros(pts.shape[:-1])
        return np.asarray(self.u2_fn(pts, tau), dtype=float)

    def field_sampler(self, points):
        pts = np.asarray(points, dtype=float)

        def sample(tau: float):
            u1 = None if self.u1_fn is None else np.asarray(self.u1_fn(pts, tau), float)
            u2 = None if self.u2_fn is None else np.asarray(self.u2_fn(pts, tau), float)
            return u1, u2

        return sample


@dataclass(frozen=True)
class PropagationSpec:
    """Everything one finite-eps propagation needs."""

    psi: Wavefunction
    impulse: object
    eps: float
    background: Callable | None = None
    gpe_g: float = 0.0
    nsteps: int | None = None
    snapshot_count: int = 0
    check_interval: int = 32
    max_nsteps: int = 4_000_000
    workers: int | None = None

    def __post_init__(self):
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.nsteps is not None and self.nsteps < 1:
            raise ConfigError("nsteps must be positive")
        if getattr(self.impulse, "T", 0.0) <= 0:
            raise ConfigError("impulse must define a positive duration")


@dataclass(frozen=True)
class PropagationResult:
    psi_f: Wavefunction
    nsteps: int
    dtau: float
    norm_drift: float
    shell_mass: float
    snapshots: list = field(default_factory=list)


def _sampler_for(impulse, points):
    maker = getattr(impulse, "field_sampler", None)
    if maker is not None:
        return maker(points)

    def sample(tau: float):
        u1 = impulse.u1(points, tau) if getattr(impulse, "has_u1", True) else None
        u2 = impulse.u2(points, tau) if getattr(impulse, "has_u2", True) else None
        return u1, u2

    return sample


def _combined_potential(u1, u2, eps):
    if u2 is None and u1 is None:
        return 0.0
    if u2 is None:
        return eps * u1
    if u1 is None:
        return u2
    return u2 + eps * u1


def auto_nsteps(spec: PropagationSpec) -> int:
    """Step count keeping the potential rotation small per step.

    Surveys the total potential over the grid at a spread of times and
    limits the phase advanced per step to ``pi / 8``.
    """
    grid = spec.psi.grid
    pts = grid.points()
    sampler = _sampler_for(spec.impulse, pts)
    T = float(spec.impulse.T)
    hbar_eff = spec.eps * spec.psi.hbar
    umax = 0.0
    for tau in np.linspace(0.0, T, _SURVEY_SAMPLES):
        u1, u2 = sampler(tau)
        u = _combined_potential(u1, u2, spec.eps)
        if spec.background is not None:
            u = u + spec.eps**2 * np.asarray(
                spec.background(pts, spec.eps * tau), dtype=float
            )
        if spec.gpe_g != 0.0:
            u = u + spec.eps**2 * spec.gpe_g * np.abs(spec.psi.values) ** 2
        umax = max(umax, float(np.max(np.abs(u))))
    if umax == 0.0:
        return MIN_STEPS
    needed = int(np.ceil(T * umax / (PHASE_PER_STEP * hbar_eff)))
    return max(MIN_STEPS, needed)


def _shell_mask(grid: Grid, cells: int = 2) -> np.ndarray:
    mask = np.zeros(grid.npoints, dtype=bool)
    for a in range(grid.dim):
        idx = [slice(None)] * grid.dim
        idx[a] = slice(0, cells)
        mask[tuple(idx)] = True
        idx[a] = slice(-cells, None)
        mask[tuple(idx)] = True
    return mask


def propagate(spec: PropagationSpec) -> PropagationResult:
    """Integrate the rescaled equation over one pulse.

    Strang splitting with the potential evaluated at each step midpoint;
    the kinetic factor is exact in Fourier space.  Monitors norm drift
    and mass reaching the box boundary, raising ``StabilityError`` or
    ``MassLeakError`` when either guard trips.
    """
    psi0 = spec.psi
    grid = psi0.grid
    T = float(spec.impulse.T)
    hbar_eff = spec.eps * psi0.hbar
    mass = psi0.mass

    nsteps = spec.nsteps if spec.nsteps is not None else auto_nsteps(spec)
    if nsteps > spec.max_nsteps:
        raise ResourceGuardError(
            f"propagation needs {nsteps} steps, above the limit {spec.max_nsteps}; "
            "shorten the pulse, soften the potential or raise max_nsteps"
        )
    dtau = T / nsteps

    pts = grid.points()
    sampler = _sampler_for(spec.impulse, pts)
    ksq = grid.wavenumber_sq()
    kin = np.exp(-0.5j * hbar_eff * ksq * dtau / mass)

    shell = _shell_mask(grid)
    cell = grid.cell_volume
    workers = spec.workers if spec.workers is not None else -1
    axes = tuple(range(grid.dim))

    snap_every = None
    snapshots = []
    if spec.snapshot_count > 0:
        snap_every = max(1, nsteps // spec.snapshot_count)

    values = psi0.values.astype(complex)
    norm0 = float(np.sum(np.abs(values) ** 2) * cell)
    nonlinear = spec.gpe_g != 0.0
    coef = dtau / (2.0 * hbar_eff)
    shell_mass = 0.0

    def checks(step):
        nonlocal shell_mass
        norm = float(np.sum(np.abs(values) ** 2) * cell)
        drift = abs(norm - norm0)
        if not np.isfinite(norm) or drift > NORM_DRIFT_LIMIT:
            raise StabilityError(
                f"norm drifted by {drift:.3e} at step {step}; integration unstable"
            )
        shell_mass = float(np.sum(np.abs(values[shell]) ** 2) * cell)
        if shell_mass > SHELL_MASS_LIMIT:
            raise MassLeakError(
                f"{shell_mass:.3e} of the mass reached the box boundary "
                f"at step {step}; enlarge the box"
            )
        return drift

    for step in range(nsteps):
        tau_mid = (step + 0.5) * dtau
        u1, u2 = sampler(tau_mid)
        u = _combined_potential(u1, u2, spec.eps)
        if spec.background is not None:
            u = u + spec.eps**2 * np.asarray(
                spec.background(pts, spec.eps * tau_mid), dtype=float
            )
        if nonlinear:
            half = u + spec.eps**2 * spec.gpe_g * np.abs(values) ** 2
            values = values * np.exp(-1j * coef * half)
        else:
            phase = np.exp(-1j * coef * u)
            values = values * phase
        values = scipy.fft.ifftn(
            kin * scipy.fft.fftn(values, axes=axes, workers=workers),
            axes=axes,
            workers=workers,
        )
        if nonlinear:
            half = u + spec.eps**2 * spec.gpe_g * np.abs(values) ** 2
            values = values * np.exp(-1j * coef * half)
        else:
            values = values * phase
        if (step + 1) % spec.check_interval == 0 or step + 1 == nsteps:
            checks(step + 1)
        if snap_every is not None and (
            (step + 1) % snap_every == 0 or step + 1 == nsteps
        ):
            snapshots.append(
                ((step + 1) * dtau, psi0.with_values(values.copy()))
            )

    norm = float(np.sum(np.abs(values) ** 2) * cell)
    drift = abs(norm - norm0)
    psi_f = Wavefunction(
        grid=grid, values=values, mass=mass, hbar=psi0.hbar, carrier=None
    )
    return PropagationResult(
        psi_f=psi_f,
        nsteps=nsteps,
        dtau=dtau,
        norm_drift=drift,
        shell_mass=shell_mass,
        snapshots=snapshots,
    )


def predicted_deformation(
    psi: Wavefunction,
    map_spec: MapSpec,
    upsample: int | None = None,
    mass_tolerance: float = 1e-6,
) -> Wavefunction:
    """The instantaneous deformation a completed pulse should produce.

    Pulls the state back through the map and rescales by the root of the
    Jacobian determinant, so the density transforms by change of
    variables while the local phase rides along unchanged.  Raises
    ``SupportEscapeError`` when the transported state does not fit in
    the box.
    """
    grid = psi.grid
    if map_spec.dim != grid.dim:
        raise ConfigError("map dimension does not match the state grid")
    if upsample is None:
        upsample = {1: 8, 2: 4, 3: 2}[grid.dim]
    pts = grid.points()
    # escape is measured in the source frame, where the density is
    # smooth: quadrature of the transported density itself has O(h)
    # errors at any jacobian jump and would false-alarm
    fwd = np.asarray(map_spec.forward(pts), dtype=float)
    escaped_mask = np.zeros(grid.npoints, dtype=bool)
    for a in range(grid.dim):
        lo, hi = grid.bounds[a]
        escaped_mask |= (fwd[..., a] < lo) | (fwd[..., a] > hi)
    rho_i = np.abs(psi.values) ** 2
    escaped = float(np.sum(rho_i[escaped_mask]) * grid.cell_volume)
    if escaped > mass_tolerance:
        raise SupportEscapeError(
            f"transported support does not fit in the box: mass {escaped:.3e} "
            "maps outside"
        )
    xi = np.asarray(map_spec.inverse(pts), dtype=float)
    J = np.asarray(map_spec.jacobian(xi), dtype=float)
    det = np.abs(np.linalg.det(J))
    vals = sample_field(grid, psi.values, xi, upsample=upsample, carrier=psi.carrier)
    vals = vals / np.sqrt(det)
    outside = np.zeros(vals.shape, dtype=bool)
    for a in range(grid.dim):
        lo, hi = grid.bounds[a]
        outside |= (xi[..., a] < lo) | (xi[..., a] > hi)
    vals = np.where(outside, 0.0, vals)
    total = float(np.sum(np.abs(vals) ** 2) * grid.cell_volume)
    vals = vals / np.sqrt(total)
    return Wavefunction(
        grid=grid, values=vals, mass=psi.mass, hbar=psi.hbar, carrier=None
    )


def apply_phase_paint(psi: Wavefunction, paint) -> Wavefunction:
    """Multiply the state by the painted phase, leaving the density alone.

    ``paint`` is anything exposing ``delta_s(points)``, or a bare
    callable returning the phase increment in action units.
    """
    delta_s = getattr(paint, "delta_s", paint)
    if not callable(delta_s):
        raise ConfigError("paint must provide a callable phase increment")
    pts = psi.grid.points()
    ds = np.asarray(delta_s(pts), dtype=float)
    if ds.shape != psi.values.shape:
        raise ConfigError("phase increment shape does not match the grid")
    if not np.all(np.isfinite(ds)):
        raise ConfigError("phase increment must be finite on the grid")
    return psi.with_values(psi.values * np.exp(1j * ds / psi.hbar))


@dataclass(frozen=True)
class DeviationReport:
    """Deviation metrics between a predicted and a simulated state."""

    fidelity: float
    infidelity: float
    l1_density: float
    phase_rms: float
    global_phase: float
    support_fraction: float


def compare(
    predicted: Wavefunction,
    simulated: Wavefunction,
    support_relative: float = 1e-8,
) -> DeviationReport:
    """Reduce two states to overlap, density and phase deviations.

    The phase statistic removes one global phase (the best-fit overlap
    phase) and is measured only where the predicted density is above
    ``support_relative`` of its peak.
    """
    if predicted.grid != simulated.grid:
        raise ConfigError("states must share a grid")
    cell = predicted.grid.cell_volume
    ov = np.vdot(predicted.values, simulated.values) * cell
    fid = float(np.abs(ov))
    alpha = float(np.angle(ov))
    rho_p = np.abs(predicted.values) ** 2
    rho_s = np.abs(simulated.values) ** 2
    l1 = float(np.sum(np.abs(rho_p - rho_s)) * cell)
    mask = rho_p > support_relative * float(rho_p.max())
    resid = simulated.values[mask] * np.conj(predicted.values[mask])
    dphase = np.angle(resid * np.exp(-1j * alpha))
    weights = rho_p[mask]
    phase_rms = float(np.sqrt(np.sum(weights * dphase**2) / np.sum(weights)))
    support_fraction = float(np.sum(rho_p[mask]) * cell)
    return DeviationReport(
        fidelity=fid,
        infidelity=max(0.0, 1.0 - fid),
        l1_density=l1,
        phase_rms=phase_rms,
        global_phase=alpha,
        support_fraction=support_fraction,
    )
