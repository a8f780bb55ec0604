"""Classical trajectories and phase-space diagnostics for impulse pulses.

The rescaled motion over a pulse solves

    dx/dtau = p / m
    dp/dtau = -grad u2(x, tau)

with optional finite-sharpness terms (the weak potential at eps, a
background at eps^2).  Integration is leapfrog with the force sampled at
the step midpoint, which keeps the scheme symplectic and integrates the
piecewise-constant toy forces exactly on an even step count.

``phase_space_map`` linearizes the endpoint map around a rest initial
condition by central differences, giving the position block J and the
momentum block L whose product J^T L is the identity for balanced
pulses.  ``liouville_check`` verifies the volume factorization
det J * det L = 1 on an ensemble and compares the transported coordinate
marginal against the density pushforward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import ConfigError, ResourceGuardError, SupportEscapeError
from .geometry import DensityField, Wavefunction
from .transportmap import MapSpec, pushforward_density

__all__ = [
    "PhasePoint",
    "FlowReport",
    "LiouvilleReport",
    "WavevectorReport",
    "integrate_rescaled",
    "integrate_ensemble",
    "trajectory_samples",
    "phase_space_map",
    "liouville_check",
    "sample_from_density",
    "wkb_wavevector_check",
]

DEFAULT_NSTEPS = 1024
ENDPOINT_TOL = 1e-8
_FD_RELATIVE = 1e-5
_POTENTIAL_FD_STEP = 1e-6
_DOMAIN_CHECK_EVERY = 16
_MAX_AUTO_NSTEPS = 1 << 18


@dataclass(frozen=True)
class PhasePoint:
    """A single classical state in the rescaled frame."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if x.shape != p.shape or x.ndim != 1:
            raise ConfigError("position and momentum must be vectors of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise ConfigError("phase point has non-finite components")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class FlowReport:
    """Endpoint and linearization of the pulse flow at one start point.

    ``balance_residual`` is the time-integrated force along the rest
    trajectory; ``rest_residual`` is the final momentum magnitude of the
    same trajectory.  Both vanish for balanced pulses.
    """

    x_f: np.ndarray
    p_f: np.ndarray
    J: np.ndarray
    L: np.ndarray
    balance_residual: np.ndarray
    rest_residual: float

    def record(self) -> dict:
        return {
            "x_f": self.x_f.tolist(),
            "p_f": self.p_f.tolist(),
            "J": self.J.tolist(),
            "L": self.L.tolist(),
            "balance_residual": self.balance_residual.tolist(),
            "rest_residual": self.rest_residual,
        }


@dataclass(frozen=True)
class LiouvilleReport:
    det_J: np.ndarray
    det_L: np.ndarray
    product_error: float
    marginal_l1: float | None
    nsamples: int


@dataclass(frozen=True)
class WavevectorReport:
    k_measured: float
    k_expected: float
    resolution: float
    center_image: float


def _resolve_mass(source, mass):
    if mass is not None:
        return float(mass)
    return float(getattr(source, "mass", 1.0))


def _u2_only_force(source):
    def force(xs, tau):
        out = np.empty_like(xs)
        dim = xs.shape[-1]
        for a in range(dim):
            step = np.zeros(dim)
            step[a] = _POTENTIAL_FD_STEP
            hi = np.asarray(source.u2(xs + step, tau), dtype=float)
            lo = np.asarray(source.u2(xs - step, tau), dtype=float)
            out[..., a] = -(hi - lo) / (2.0 * _POTENTIAL_FD_STEP)
        return out

    return force


def _weak_force(source):
    def force(xs, tau):
        out = np.empty_like(xs)
        dim = xs.shape[-1]
        for a in range(dim):
            step = np.zeros(dim)
            step[a] = _POTENTIAL_FD_STEP
            hi = np.asarray(source.u1(xs + step, tau), dtype=float)
            lo = np.asarray(source.u1(xs - step, tau), dtype=float)
            out[..., a] = -(hi - lo) / (2.0 * _POTENTIAL_FD_STEP)
        return out

    return force


def _force_field(source, eps: float, background):
    """Total force callable (points, tau) -> force array."""
    if hasattr(source, "evaluate_fields"):
        state = {"init": None}

        def strong(xs, tau):
            fields = source.evaluate_fields(xs, tau, init=state["init"])
            state["init"] = fields.start
            return np.array(fields.force, dtype=float)

    elif hasattr(source, "u2"):
        strong = _u2_only_force(source)
    else:
        raise ConfigError(
            "source provides neither design fields nor a strong potential"
        )

    weak = None
    if eps > 0.0 and getattr(source, "has_u1", False):
        weak = _weak_force(source)

    if weak is None and background is None:
        return strong

    def total(xs, tau):
        f = strong(xs, tau)
        if weak is not None:
            f = f + eps * weak(xs, tau)
        if background is not None:
            dim = xs.shape[-1]
            for a in range(dim):
                step = np.zeros(dim)
                step[a] = _POTENTIAL_FD_STEP
                hi = np.asarray(background(xs + step, eps * tau), dtype=float)
                lo = np.asarray(background(xs - step, eps * tau), dtype=float)
                f[..., a] -= eps**2 * (hi - lo) / (2.0 * _POTENTIAL_FD_STEP)
        return f

    return total


def _check_domain(xs, domain, tau):
    for a, (lo, hi) in enumerate(domain):
        if np.any(xs[..., a] < lo) or np.any(xs[..., a] > hi):
            raise SupportEscapeError(
                f"trajectory left the sampling domain along axis {a} "
                f"near tau={tau:.4f}"
            )


def _run(xs, ps, source, nsteps, mass, eps, background, domain, record_every):
    T = float(source.T)
    dtau = T / nsteps
    force = _force_field(source, eps, background)
    xs = np.array(xs, dtype=float)
    ps = np.array(ps, dtype=float)
    impulses = np.zeros_like(ps)
    half = dtau / (2.0 * mass)
    recorded = []
    for step in range(nsteps):
        xs = xs + ps * half
        f = force(xs, (step + 0.5) * dtau)
        ps = ps + f * dtau
        impulses = impulses + f * dtau
        xs = xs + ps * half
        if domain is not None and (
            (step + 1) % _DOMAIN_CHECK_EVERY == 0 or step + 1 == nsteps
        ):
            _check_domain(xs, domain, (step + 1) * dtau)
        if record_every and ((step + 1) % record_every == 0 or step + 1 == nsteps):
            recorded.append(((step + 1) * dtau, xs.copy(), ps.copy()))
    return xs, ps, impulses, recorded


def _resolve_nsteps(xs, ps, source, nsteps, mass, eps, background, domain):
    """Fixed count if given, else double until the endpoint settles."""
    if nsteps is not None:
        if nsteps < 1:
            raise ConfigError("nsteps must be positive")
        return int(nsteps)
    scale = max(1.0, float(np.max(np.abs(xs))) if np.size(xs) else 1.0)
    n = DEFAULT_NSTEPS
    prev = _run(xs, ps, source, n, mass, eps, background, domain, 0)
    while True:
        n *= 2
        cur = _run(xs, ps, source, n, mass, eps, background, domain, 0)
        change = max(
            float(np.max(np.abs(cur[0] - prev[0]))),
            float(np.max(np.abs(cur[1] - prev[1]))),
        )
        if change < ENDPOINT_TOL * scale:
            return n
        if n >= _MAX_AUTO_NSTEPS:
            raise ResourceGuardError(
                f"endpoint still moving by {change:.2e} at {n} steps; "
                "the force field may be too rough for trajectory integration"
            )
        prev = cur


def integrate_rescaled(
    point: PhasePoint,
    source,
    nsteps: int | None = None,
    mass: float | None = None,
    eps: float = 0.0,
    background=None,
    domain=None,
) -> PhasePoint:
    """Integrate one classical trajectory over the pulse.

    ``source`` is a design or an impulse exposing the strong potential.
    ``nsteps=None`` doubles the step count until the endpoint changes by
    less than ``ENDPOINT_TOL``.
    """
    m = _resolve_mass(source, mass)
    xs = point.x[None, :]
    ps = point.p[None, :]
    n = _resolve_nsteps(xs, ps, source, nsteps, m, eps, background, domain)
    xf, pf, _, _ = _run(xs, ps, source, n, m, eps, background, domain, 0)
    return PhasePoint(x=xf[0], p=pf[0])


def integrate_ensemble(
    xs,
    ps,
    source,
    nsteps: int | None = None,
    mass: float | None = None,
    eps: float = 0.0,
    background=None,
    domain=None,
):
    """Vectorized endpoint integration; returns (x_f, p_f) arrays."""
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    if xs.shape != ps.shape:
        raise ConfigError("ensemble position and momentum shapes differ")
    m = _resolve_mass(source, mass)
    n = _resolve_nsteps(xs, ps, source, nsteps, m, eps, background, domain)
    xf, pf, _, _ = _run(xs, ps, source, n, m, eps, background, domain, 0)
    return xf, pf


def trajectory_samples(
    point: PhasePoint,
    source,
    nsteps: int = DEFAULT_NSTEPS,
    mass: float | None = None,
    record_every: int = 1,
    eps: float = 0.0,
    background=None,
    domain=None,
):
    """Sampled (tau, x, p) rows along one trajectory, including tau=0."""
    if record_every < 1:
        raise ConfigError("record_every must be positive")
    m = _resolve_mass(source, mass)
    xs = point.x[None, :]
    ps = point.p[None, :]
    _, _, _, rec = _run(xs, ps, source, int(nsteps), m, eps, background, domain, record_every)
    taus = np.array([0.0] + [t for t, _, _ in rec])
    xs_out = np.stack([point.x] + [x[0] for _, x, _ in rec])
    ps_out = np.stack([point.p] + [p[0] for _, _, p in rec])
    return taus, xs_out, ps_out


def phase_space_map(
    x_i,
    p_i,
    source,
    nsteps: int | None = None,
    mass: float | None = None,
    fd_step: float | None = None,
    domain=None,
) -> FlowReport:
    """Endpoint and linearized flow blocks at one start point.

    J = dx_f/dx_i and L = dp_f/dp_i are central differences around the
    rest start (x_i, 0); the reported endpoint uses the supplied p_i.
    """
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    p_i = np.atleast_1d(np.asarray(p_i, dtype=float))
    dim = x_i.size
    m = _resolve_mass(source, mass)
    h = fd_step if fd_step is not None else _FD_RELATIVE * max(
        1.0, float(np.max(np.abs(x_i)))
    )

    starts_x = [x_i]
    starts_p = [np.zeros(dim)]
    for a in range(dim):
        e = np.zeros(dim)
        e[a] = h
        starts_x += [x_i + e, x_i - e]
        starts_p += [np.zeros(dim), np.zeros(dim)]
    for a in range(dim):
        e = np.zeros(dim)
        e[a] = h
        starts_x += [x_i, x_i]
        starts_p += [e, -e]
    starts_x.append(x_i)
    starts_p.append(p_i)
    xs = np.stack(starts_x)
    ps = np.stack(starts_p)

    n = _resolve_nsteps(xs, ps, source, nsteps, m, 0.0, None, domain)
    xf, pf, impulses, _ = _run(xs, ps, source, n, m, 0.0, None, domain, 0)

    J = np.empty((dim, dim))
    L = np.empty((dim, dim))
    for a in range(dim):
        J[:, a] = (xf[1 + 2 * a] - xf[2 + 2 * a]) / (2.0 * h)
        L[:, a] = (pf[1 + 2 * dim + 2 * a] - pf[2 + 2 * dim + 2 * a]) / (2.0 * h)
    return FlowReport(
        x_f=xf[-1],
        p_f=pf[-1],
        J=J,
        L=L,
        balance_residual=impulses[0],
        rest_residual=float(np.linalg.norm(pf[0])),
    )


def sample_from_density(density: DensityField, nsamples: int, rng) -> np.ndarray:
    """Draw positions from a gridded density (cell lottery plus jitter)."""
    grid = density.grid
    vals = np.clip(np.asarray(density.values, dtype=float), 0.0, None)
    probs = vals.reshape(-1)
    probs = probs / probs.sum()
    picks = rng.choice(probs.size, size=nsamples, p=probs)
    idx = np.unravel_index(picks, grid.npoints)
    out = np.empty((nsamples, grid.dim))
    for a in range(grid.dim):
        axis = grid.axis(a)
        step = grid.spacing[a]
        out[:, a] = axis[idx[a]] + rng.uniform(-0.5, 0.5, nsamples) * step
    return out


def liouville_check(
    ensemble,
    source,
    nsteps: int | None = None,
    mass: float | None = None,
    density: DensityField | None = None,
    map_spec: MapSpec | None = None,
    bins: int = 32,
    det_points: int = 64,
    domain=None,
    mass_tolerance: float = 1e-6,
) -> LiouvilleReport:
    """Volume and marginal diagnostics over an ensemble of rest starts.

    Checks det J * det L = 1 at up to ``det_points`` of the ensemble
    (all finite-difference trajectories integrated in one batch).  When
    the initial ``density`` and the transporting map are supplied, the
    endpoint coordinate marginals of the full ensemble are histogrammed
    against the density pushforward and the worst L1 discrepancy is
    reported.
    """
    pts = np.asarray(ensemble, dtype=float)
    if pts.ndim != 2:
        raise ConfigError("ensemble must be an (n, dim) array")
    dim = pts.shape[1]
    sub = pts[: min(det_points, pts.shape[0])]
    m = _resolve_mass(source, mass)
    h = _FD_RELATIVE * max(1.0, float(np.max(np.abs(sub))))
    # per sample point: 2 dim position offsets then 2 dim momentum offsets
    per = 4 * dim
    starts_x = np.repeat(sub, per, axis=0)
    starts_p = np.zeros_like(starts_x)
    for a in range(dim):
        starts_x[4 * a :: per, a] += h
        starts_x[4 * a + 1 :: per, a] -= h
        starts_p[4 * a + 2 :: per, a] += h
        starts_p[4 * a + 3 :: per, a] -= h
    n = _resolve_nsteps(starts_x, starts_p, source, nsteps, m, 0.0, None, domain)
    xf, pf, _, _ = _run(starts_x, starts_p, source, n, m, 0.0, None, domain, 0)
    det_J = np.empty(sub.shape[0])
    det_L = np.empty(sub.shape[0])
    for i in range(sub.shape[0]):
        block_x = xf[i * per : (i + 1) * per]
        block_p = pf[i * per : (i + 1) * per]
        J = np.empty((dim, dim))
        L = np.empty((dim, dim))
        for a in range(dim):
            J[:, a] = (block_x[4 * a] - block_x[4 * a + 1]) / (2.0 * h)
            L[:, a] = (block_p[4 * a + 2] - block_p[4 * a + 3]) / (2.0 * h)
        det_J[i] = np.linalg.det(J)
        det_L[i] = np.linalg.det(L)
    product_error = float(np.max(np.abs(det_J * det_L - 1.0)))

    marginal_l1 = None
    if density is not None:
        if map_spec is None:
            map_spec = getattr(source, "map_spec", None)
        if map_spec is None:
            raise ConfigError("marginal check needs the transporting map")
        xf, _ = integrate_ensemble(
            pts, np.zeros_like(pts), source, nsteps=nsteps, mass=mass, domain=domain
        )
        target = pushforward_density(
            density, map_spec, mass_tolerance=mass_tolerance
        )
        grid = density.grid
        cell = grid.cell_volume
        worst = 0.0
        for a in range(grid.dim):
            lo, hi = grid.bounds[a]
            edges = np.linspace(lo, hi, bins + 1)
            hist, _ = np.histogram(xf[:, a], bins=edges)
            hist = hist / pts.shape[0]
            tvals = np.asarray(target.values, dtype=float)
            axes = tuple(b for b in range(grid.dim) if b != a)
            marg = tvals.sum(axis=axes) * cell
            centers_idx = np.clip(
                np.searchsorted(edges, grid.axis(a), side="right") - 1, 0, bins - 1
            )
            expected = np.bincount(centers_idx, weights=marg, minlength=bins)
            worst = max(worst, float(np.sum(np.abs(hist - expected))))
        marginal_l1 = worst

    return LiouvilleReport(
        det_J=det_J,
        det_L=det_L,
        product_error=product_error,
        marginal_l1=marginal_l1,
        nsamples=pts.shape[0],
    )


def wkb_wavevector_check(
    psi: Wavefunction,
    map_spec: MapSpec,
    window_center: float,
    window_width: float | None = None,
) -> WavevectorReport:
    """Local wavevector of the deformed state versus the map prediction.

    The deformation leaves the phase untouched while stretching the
    coordinate, so a carrier k near ``window_center`` appears at
    k / gamma near the image point, gamma the local map slope.  Measured
    by the power centroid of a Gaussian-windowed Fourier transform.
    """
    if psi.grid.dim != 1:
        raise ConfigError("wavevector check is one-dimensional")
    if psi.carrier is None or psi.carrier[0] == 0.0:
        raise ConfigError("state must declare a nonzero carrier")
    k0 = float(psi.carrier[0])
    dx = psi.grid.spacing[0]
    if 2.0 * np.pi / (abs(k0) * dx) < 8.0:
        raise ConfigError(
            "carrier is unresolved: fewer than 8 grid points per wavelength"
        )

    from .quantumsim import predicted_deformation

    pred = predicted_deformation(psi, map_spec)
    center = np.atleast_1d(np.asarray(window_center, dtype=float))
    center_img = float(np.asarray(map_spec.forward(center[None, :]))[0, 0])
    gamma = float(np.asarray(map_spec.jacobian(center[None, :]))[0, 0, 0])
    k_expected = k0 / gamma

    lo, hi = psi.grid.bounds[0]
    if window_width is None:
        window_width = (hi - lo) / 8.0
    s = window_width / 4.0
    x = psi.grid.axis(0)
    window = np.exp(-((x - center_img) ** 2) / (2.0 * s**2))
    spec = scipy.fft.fftshift(scipy.fft.fft(pred.values * window))
    kax = scipy.fft.fftshift(2.0 * np.pi * scipy.fft.fftfreq(x.size, d=dx))
    power = np.abs(spec) ** 2
    band = power >= 0.5 * power.max()
    k_measured = float(np.sum(kax[band] * power[band]) / np.sum(power[band]))
    return WavevectorReport(
        k_measured=k_measured,
        k_expected=k_expected,
        resolution=1.0 / s,
        center_image=center_img,
    )
