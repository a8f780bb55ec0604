"""Invertible coordinate maps and one-dimensional optimal transport.

A map is a deformation ``x_f = mu(x_i)`` of the coordinate space.  Maps
that are gradients of convex potentials (``mu = grad phi``, certified by
``certify_gradient_of_convex``) admit a global impulse design; everything
else goes through the density-level route: push the density forward,
take the monotone rearrangement between initial and target densities,
and correct the phase separately.

Point arrays carry coordinates in a trailing axis of length ``dim``; a
single point is a length-``dim`` vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import (
    CubicHermiteSpline,
    PchipInterpolator,
    RegularGridInterpolator,
)

from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateDensityError,
    SupportEscapeError,
)
from .geometry import DensityField, Grid, fourier_upsample, sample_field

__all__ = [
    "MapSpec",
    "ConvexityCertificate",
    "Cdf1D",
    "builtin_map",
    "tabulated_map_1d",
    "certify_gradient_of_convex",
    "pushforward_density",
    "cdf_1d",
    "monotone_rearrangement_1d",
    "wasserstein2_cost",
    "export_map_table",
    "import_map_table",
]

BUILTIN_KINDS = (
    "identity",
    "translation",
    "scaling",
    "cleave",
    "tanh_cleave",
    "reflection",
    "linear_matrix",
)


@dataclass(frozen=True)
class MapSpec:
    """An invertible deformation with optional convex-potential data.

    ``phi`` is populated exactly when the map is the gradient of a known
    convex potential.  ``blend_inverse(y, g)`` solves the interpolated
    relation ``(1-g) x + g mu(x) = y`` in closed form when the map kind
    allows it; designs fall back to Newton iteration otherwise.
    """

    dim: int
    kind: str
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], np.ndarray] | None = None
    blend_inverse: Callable[[np.ndarray, float], np.ndarray] | None = None
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ConvexityCertificate:
    """Result of sampling-based gradient-of-convex verification."""

    holds: bool
    npoints: int
    min_eigenvalue: float
    max_asymmetry: float
    region: tuple[tuple[float, float], ...]
    witness_point: tuple[float, ...] | None = None
    witness_kind: str | None = None


@dataclass(frozen=True)
class Cdf1D:
    """Cumulative distribution sampled on a one-dimensional grid."""

    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(np.diff(v) < -1e-14):
            raise ConfigError("cumulative values must be nondecreasing")


def _wrap_pointwise(core):
    """Lift a scalar-field core f(x) to the (..., 1) point convention."""

    def f(points):
        pts = np.asarray(points, dtype=float)
        return core(pts[..., 0])[..., None]

    return f


def _wrap_jacobian_1d(core):
    def jac(points):
        pts = np.asarray(points, dtype=float)
        return core(pts[..., 0])[..., None, None]

    return jac


def _wrap_phi_1d(core):
    def phi(points):
        pts = np.asarray(points, dtype=float)
        return core(pts[..., 0])

    return phi


def _log_cosh(u):
    au = np.abs(u)
    return au + np.log1p(np.exp(-2.0 * au)) - np.log(2.0)


def _identity_map(dim: int) -> MapSpec:
    eye = np.eye(dim)

    def fwd(p):
        return np.asarray(p, dtype=float)

    def jac(p):
        pts = np.asarray(p, dtype=float)
        return np.broadcast_to(eye, pts.shape[:-1] + (dim, dim)).copy()

    def phi(p):
        pts = np.asarray(p, dtype=float)
        return 0.5 * np.sum(pts**2, axis=-1)

    return MapSpec(
        dim=dim,
        kind="identity",
        forward=fwd,
        inverse=fwd,
        jacobian=jac,
        phi=phi,
        blend_inverse=lambda y, g: np.asarray(y, dtype=float),
    )


def _translation_map(dim: int, d) -> MapSpec:
    dvec = np.atleast_1d(np.asarray(d, dtype=float))
    if dvec.shape != (dim,):
        raise ConfigError(f"translation distance must have shape ({dim},)")
    eye = np.eye(dim)

    def fwd(p):
        return np.asarray(p, dtype=float) + dvec

    def inv(p):
        return np.asarray(p, dtype=float) - dvec

    def jac(p):
        pts = np.asarray(p, dtype=float)
        return np.broadcast_to(eye, pts.shape[:-1] + (dim, dim)).copy()

    def phi(p):
        pts = np.asarray(p, dtype=float)
        return 0.5 * np.sum(pts**2, axis=-1) + pts @ dvec

    return MapSpec(
        dim=dim,
        kind="translation",
        forward=fwd,
        inverse=inv,
        jacobian=jac,
        phi=phi,
        blend_inverse=lambda y, g: np.asarray(y, dtype=float) - g * dvec,
        params={"d": dvec.copy()},
    )


def _scaling_map(dim: int, c: float) -> MapSpec:
    c = float(c)
    if c <= 0:
        raise ConfigError("scaling factor must be positive")
    eye = np.eye(dim)

    def fwd(p):
        return c * np.asarray(p, dtype=float)

    def inv(p):
        return np.asarray(p, dtype=float) / c

    def jac(p):
        pts = np.asarray(p, dtype=float)
        return np.broadcast_to(c * eye, pts.shape[:-1] + (dim, dim)).copy()

    def phi(p):
        pts = np.asarray(p, dtype=float)
        return 0.5 * c * np.sum(pts**2, axis=-1)

    return MapSpec(
        dim=dim,
        kind="scaling",
        forward=fwd,
        inverse=inv,
        jacobian=jac,
        phi=phi,
        blend_inverse=lambda y, g: np.asarray(y, dtype=float) / (1.0 - g + g * c),
        params={"c": c},
    )


def _cleave_map(a: float, b: float) -> MapSpec:
    a, b = float(a), float(b)
    if not (b > a > 0):
        raise ConfigError(f"cleave requires b > a > 0, got a={a}, b={b}")
    shift = b - a
    ratio = b / a

    def fwd_core(x):
        return np.where(np.abs(x) <= a, ratio * x, x + shift * np.sign(x))

    def inv_core(y):
        return np.where(np.abs(y) <= b, y / ratio, y - shift * np.sign(y))

    def jac_core(x):
        return np.where(np.abs(x) <= a, ratio, 1.0)

    def phi_core(x):
        inner = 0.5 * ratio * x**2
        outer = 0.5 * x**2 + shift * np.abs(x) - 0.5 * a * shift
        return np.where(np.abs(x) <= a, inner, outer)

    def blend_inv(y, g):
        yv = np.asarray(y, dtype=float)[..., 0]
        c = (1.0 - g) * a + g * b
        x = np.where(np.abs(yv) <= c, yv * a / c, yv - g * shift * np.sign(yv))
        return x[..., None]

    return MapSpec(
        dim=1,
        kind="cleave",
        forward=_wrap_pointwise(fwd_core),
        inverse=_wrap_pointwise(inv_core),
        jacobian=_wrap_jacobian_1d(jac_core),
        phi=_wrap_phi_1d(phi_core),
        blend_inverse=blend_inv,
        params={"a": a, "b": b},
    )


def _tanh_cleave_map(a: float, b: float) -> MapSpec:
    a, b = float(a), float(b)
    if not (b > a > 0):
        raise ConfigError(f"tanh_cleave requires b > a > 0, got a={a}, b={b}")
    shift = b - a

    def fwd_core(x):
        return x + shift * np.tanh(x / a)

    def jac_core(x):
        return 1.0 + (shift / a) / np.cosh(x / a) ** 2

    def phi_core(x):
        return 0.5 * x**2 + shift * a * _log_cosh(x / a)

    def inv_core(y):
        y = np.asarray(y, dtype=float)
        lo, hi = y - shift, y + shift
        # hard-cleave inverse is a good global start; Newton on a
        # monotone function with derivative >= 1, iterates kept in the
        # bracket [y - shift, y + shift]
        x = np.where(np.abs(y) <= b, y * a / b, y - shift * np.sign(y))
        for _ in range(80):
            r = fwd_core(x) - y
            if np.max(np.abs(r)) < 1e-13 * max(1.0, float(np.max(np.abs(y), initial=0.0))):
                break
            x = np.clip(x - r / jac_core(x), lo, hi)
        else:
            raise ConvergenceError("tanh_cleave inversion did not converge")
        return x

    return MapSpec(
        dim=1,
        kind="tanh_cleave",
        forward=_wrap_pointwise(fwd_core),
        inverse=_wrap_pointwise(inv_core),
        jacobian=_wrap_jacobian_1d(jac_core),
        phi=_wrap_phi_1d(phi_core),
        params={"a": a, "b": b},
    )


def _reflection_map(dim: int) -> MapSpec:
    eye = np.eye(dim)

    def fwd(p):
        return -np.asarray(p, dtype=float)

    def jac(p):
        pts = np.asarray(p, dtype=float)
        return np.broadcast_to(-eye, pts.shape[:-1] + (dim, dim)).copy()

    return MapSpec(
        dim=dim, kind="reflection", forward=fwd, inverse=fwd, jacobian=jac
    )


def _linear_matrix_map(matrix) -> MapSpec:
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError("linear map matrix must be square")
    dim = M.shape[0]
    if abs(np.linalg.det(M)) < 1e-14:
        raise ConfigError("linear map matrix must be invertible")
    Minv = np.linalg.inv(M)
    symmetric = np.allclose(M, M.T, atol=1e-12)
    positive = symmetric and np.linalg.eigvalsh(M).min() > 0

    def fwd(p):
        pts = np.asarray(p, dtype=float)
        return pts @ M.T

    def inv(p):
        pts = np.asarray(p, dtype=float)
        return pts @ Minv.T

    def jac(p):
        pts = np.asarray(p, dtype=float)
        return np.broadcast_to(M, pts.shape[:-1] + (dim, dim)).copy()

    phi = None
    if positive:

        def phi(p):
            pts = np.asarray(p, dtype=float)
            return 0.5 * np.einsum("...a,ab,...b->...", pts, M, pts)

    def blend_inv(y, g):
        B = (1.0 - g) * np.eye(dim) + g * M
        return np.asarray(y, dtype=float) @ np.linalg.inv(B).T

    return MapSpec(
        dim=dim,
        kind="linear_matrix",
        forward=fwd,
        inverse=inv,
        jacobian=jac,
        phi=phi,
        blend_inverse=blend_inv,
        params={"matrix": M.copy()},
    )


def builtin_map(kind: str, dim: int = 1, **params) -> MapSpec:
    """Construct one of the built-in map families.

    Kinds and their parameters:

    - ``identity``
    - ``translation``: ``d`` (scalar or vector)
    - ``scaling``: ``c > 0``
    - ``cleave``: ``a``, ``b`` with ``b > a > 0`` (1d, piecewise linear:
      stretches the core ``|x| <= a`` onto ``|x| <= b`` and shifts the
      outer branches outward rigidly)
    - ``tanh_cleave``: smooth variant ``x + (b - a) tanh(x/a)``
    - ``reflection``: ``x -> -x`` (orientation-reversing; no convex
      potential, handled by the density-level design route)
    - ``linear_matrix``: ``matrix`` (square, invertible; the convex
      potential exists exactly when the matrix is symmetric positive
      definite)
    """
    if kind == "identity":
        return _identity_map(dim)
    if kind == "translation":
        d = params.get("d")
        if d is None:
            raise ConfigError("translation needs parameter d")
        dvec = np.atleast_1d(np.asarray(d, dtype=float))
        use_dim = dvec.size if dvec.size > 1 else dim
        if dvec.size == 1:
            dvec = np.full(use_dim, float(dvec[0]))
        return _translation_map(use_dim, dvec)
    if kind == "scaling":
        if "c" not in params:
            raise ConfigError("scaling needs parameter c")
        return _scaling_map(dim, params["c"])
    if kind == "cleave":
        return _cleave_map(params.get("a", 0.5), params.get("b", 3.0))
    if kind == "tanh_cleave":
        return _tanh_cleave_map(params.get("a", 0.5), params.get("b", 3.0))
    if kind == "reflection":
        return _reflection_map(dim)
    if kind == "linear_matrix":
        if "matrix" not in params:
            raise ConfigError("linear_matrix needs parameter matrix")
        return _linear_matrix_map(params["matrix"])
    raise ConfigError(f"unknown map kind '{kind}'")


def tabulated_map_1d(
    x_nodes,
    y_nodes,
    kind: str = "custom",
    params: dict | None = None,
    dydx=None,
) -> MapSpec:
    """Monotone 1d map from sampled values, affine beyond the node range.

    Forward and inverse are monotone piecewise-cubic interpolants; the
    convex potential is the antiderivative of the forward branch (zero
    at the first node).  If the slope ``dydx`` is known at the nodes,
    passing it upgrades the interpolants from shape-preserving cubics
    (third order) to Hermite cubics (fourth order).
    """
    x = np.asarray(x_nodes, dtype=float)
    y = np.asarray(y_nodes, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 4:
        raise ConfigError("need matching 1d node arrays with >= 4 samples")
    if np.any(np.diff(x) <= 0):
        raise ConfigError("x nodes must be strictly increasing")
    if np.any(np.diff(y) < 0):
        raise ConfigError("map values must be nondecreasing")

    if dydx is not None:
        slopes = np.asarray(dydx, dtype=float)
        if slopes.shape != x.shape:
            raise ConfigError("dydx must match the node arrays")
        if np.any(slopes < 0):
            raise ConfigError("node slopes must be nonnegative")
        fwd_spline = CubicHermiteSpline(x, y, slopes)
    else:
        fwd_spline = PchipInterpolator(x, y, extrapolate=True)
    dfwd = fwd_spline.derivative()
    anti = fwd_spline.antiderivative()
    m_lo = max(float(dfwd(x[0])), 0.0)
    m_hi = max(float(dfwd(x[-1])), 0.0)
    # anchor the potential at a central point: a large additive constant
    # is pure gauge but inflates potential magnitudes downstream
    anchor = float(np.clip(0.0, x[0], x[-1]))
    anchor_val = float(anti(anchor)) - 0.5 * anchor**2

    def fwd_core(q):
        q = np.asarray(q, dtype=float)
        out = np.asarray(fwd_spline(np.clip(q, x[0], x[-1])))
        lo = q < x[0]
        hi = q > x[-1]
        if np.any(lo):
            out = np.where(lo, y[0] + m_lo * (q - x[0]), out)
        if np.any(hi):
            out = np.where(hi, y[-1] + m_hi * (q - x[-1]), out)
        return out

    def jac_core(q):
        q = np.asarray(q, dtype=float)
        out = np.asarray(dfwd(np.clip(q, x[0], x[-1])))
        out = np.where(q < x[0], m_lo, out)
        out = np.where(q > x[-1], m_hi, out)
        return np.clip(out, 0.0, None)

    def phi_core(q):
        q = np.asarray(q, dtype=float)
        out = np.asarray(anti(np.clip(q, x[0], x[-1])))
        lo = q < x[0]
        hi = q > x[-1]
        if np.any(lo):
            dq = q - x[0]
            out = np.where(lo, y[0] * dq + 0.5 * m_lo * dq**2, out)
        if np.any(hi):
            dq = q - x[-1]
            out = np.where(hi, float(anti(x[-1])) + y[-1] * dq + 0.5 * m_hi * dq**2, out)
        return out - anchor_val

    # strictly increasing subset carries the invertible part
    keep = np.concatenate([[True], np.diff(y) > 0])
    ys, xs = y[keep], x[keep]
    if ys.size < 4:
        raise DegenerateDensityError("map values are flat; inverse undefined")
    if dydx is not None and np.all(slopes[keep] > 0):
        inv_spline = CubicHermiteSpline(ys, xs, 1.0 / slopes[keep])
    else:
        inv_spline = PchipInterpolator(ys, xs, extrapolate=True)
    im_lo = 1.0 / m_lo if m_lo > 0 else 0.0
    im_hi = 1.0 / m_hi if m_hi > 0 else 0.0

    def inv_core(q):
        q = np.asarray(q, dtype=float)
        out = np.asarray(inv_spline(np.clip(q, ys[0], ys[-1])))
        lo = q < ys[0]
        hi = q > ys[-1]
        if np.any(lo):
            out = np.where(lo, xs[0] + im_lo * (q - ys[0]), out)
        if np.any(hi):
            out = np.where(hi, xs[-1] + im_hi * (q - ys[-1]), out)
        return out

    return MapSpec(
        dim=1,
        kind=kind,
        forward=_wrap_pointwise(fwd_core),
        inverse=_wrap_pointwise(inv_core),
        jacobian=_wrap_jacobian_1d(jac_core),
        phi=_wrap_phi_1d(phi_core),
        params=dict(params or {}),
    )


def _region_bounds(region) -> np.ndarray:
    b = np.asarray(region, dtype=float)
    if b.ndim == 1:
        b = b[None, :]
    if b.ndim != 2 or b.shape[1] != 2:
        raise ConfigError("region must be (lo, hi) pairs")
    return b


def certify_gradient_of_convex(
    map_spec: MapSpec,
    region,
    nrandom: int = 10_000,
    seed: int = 0,
    eig_floor: float = 1e-10,
    sym_tol: float = 1e-9,
) -> ConvexityCertificate:
    """Sample the Jacobian for symmetry and positive-definiteness.

    Checks a dense lattice plus ``nrandom`` uniform points inside
    ``region``.  The certificate fails with a witness point if the
    Jacobian is asymmetric beyond tolerance or has an eigenvalue at or
    below ``eig_floor`` anywhere in the sample.
    """
    bounds = _region_bounds(region)
    dim = bounds.shape[0]
    if dim != map_spec.dim:
        raise ConfigError("region dimension does not match the map")

    per_axis = {1: 4096, 2: 64, 3: 16}[dim]
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in bounds]
    lattice = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    rng = np.random.default_rng(seed)
    randoms = rng.uniform(bounds[:, 0], bounds[:, 1], size=(nrandom, dim))
    pts = np.concatenate([lattice, randoms], axis=0)

    J = np.asarray(map_spec.jacobian(pts), dtype=float)
    asym = np.max(np.abs(J - np.swapaxes(J, -1, -2)), axis=(-1, -2))
    scale = 1.0 + np.max(np.abs(J), axis=(-1, -2))
    max_asym = float(np.max(asym / scale))

    bad_sym = asym > sym_tol * scale
    if np.any(bad_sym):
        idx = int(np.argmax(bad_sym))
        return ConvexityCertificate(
            holds=False,
            npoints=len(pts),
            min_eigenvalue=float("nan"),
            max_asymmetry=max_asym,
            region=tuple(map(tuple, bounds)),
            witness_point=tuple(pts[idx]),
            witness_kind="asymmetric",
        )

    sym_part = 0.5 * (J + np.swapaxes(J, -1, -2))
    eigs = np.linalg.eigvalsh(sym_part)
    min_eig = float(eigs.min())
    if min_eig <= eig_floor:
        idx = int(np.argmin(eigs.min(axis=-1)))
        return ConvexityCertificate(
            holds=False,
            npoints=len(pts),
            min_eigenvalue=min_eig,
            max_asymmetry=max_asym,
            region=tuple(map(tuple, bounds)),
            witness_point=tuple(pts[idx]),
            witness_kind="nonpositive",
        )

    return ConvexityCertificate(
        holds=True,
        npoints=len(pts),
        min_eigenvalue=min_eig,
        max_asymmetry=max_asym,
        region=tuple(map(tuple, bounds)),
    )


def pushforward_density(
    rho: DensityField,
    map_spec: MapSpec,
    upsample: int | None = None,
    mass_tolerance: float = 1e-6,
) -> DensityField:
    """Transport a density through a map by the change-of-variables rule.

    Evaluates ``rho(mu^{-1}(x)) / |det J(mu^{-1}(x))|`` on the grid of
    ``rho``.  Raises ``SupportEscapeError`` when more than
    ``mass_tolerance`` of the mass falls outside quadrature (the
    transported support left the box).  Maps with a Jacobian jump lose
    about one cell of mass to quadrature at the jump, so callers
    transporting through such maps should loosen the tolerance.
    """
    grid = rho.grid
    if map_spec.dim != grid.dim:
        raise ConfigError("map dimension does not match the density grid")
    if upsample is None:
        upsample = {1: 8, 2: 4, 3: 2}[grid.dim]
    pts = grid.points()
    xi = map_spec.inverse(pts)
    J = np.asarray(map_spec.jacobian(xi), dtype=float)
    det = np.abs(np.linalg.det(J))
    vals = sample_field(grid, rho.values, xi, upsample=upsample).real / det
    vals = np.where(vals < 0, 0.0, vals)
    # interpolation wraps periodically; preimages outside the box carry no mass
    outside = np.zeros(vals.shape, dtype=bool)
    for a in range(grid.dim):
        lo, hi = grid.bounds[a]
        outside |= (xi[..., a] < lo) | (xi[..., a] > hi)
    vals = np.where(outside, 0.0, vals)
    total = float(np.sum(vals) * grid.cell_volume)
    if abs(total - 1.0) > mass_tolerance:
        raise SupportEscapeError(
            f"pushforward mass is {total:.8f}; transported support left the box"
        )
    return DensityField(grid, vals / total)


def cdf_1d(rho: DensityField) -> Cdf1D:
    """Cumulative distribution of a 1d density by trapezoid quadrature."""
    if rho.grid.dim != 1:
        raise ConfigError("cdf_1d needs a one-dimensional density")
    x = rho.grid.axis(0)
    return Cdf1D(x=x, values=_cumulative(x, rho.values))


def _cumulative(x: np.ndarray, vals: np.ndarray) -> np.ndarray:
    dx = np.diff(x)
    cells = 0.5 * (vals[1:] + vals[:-1]) * dx
    c = np.concatenate([[0.0], np.cumsum(cells)])
    return c


def _spectral_cumulative(vals: np.ndarray, dx: float) -> np.ndarray:
    """Antiderivative on a uniform periodic grid, zero at the first node.

    Integrates the mean term analytically and the fluctuation in Fourier
    space, which is far more accurate than trapezoid sums for smooth
    fields that decay at the box edge.
    """
    n = vals.size
    spec = np.fft.rfft(vals)
    k = 2 * np.pi * np.fft.rfftfreq(n, d=dx)
    mean = spec[0].real / n
    spec_int = np.zeros_like(spec)
    spec_int[1:] = spec[1:] / (1j * k[1:])
    fluct = np.fft.irfft(spec_int, n=n)
    return mean * dx * np.arange(n) + (fluct - fluct[0])


def _support_run(vals: np.ndarray, label: str) -> None:
    mask = vals > 1e-12 * float(vals.max())
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise DegenerateDensityError(f"{label} has no support")
    if not np.all(np.diff(idx) == 1):
        raise DegenerateDensityError(
            f"{label} has an interior interval of zero mass; "
            "the monotone rearrangement is undefined across the gap"
        )


_CDF_TRUST = 1e-9


def monotone_rearrangement_1d(
    rho_i: DensityField, rho_f: DensityField, refine: int = 4
) -> MapSpec:
    """Unique monotone-increasing map transporting ``rho_i`` to ``rho_f``.

    Composes the source cumulative with the inverse target cumulative.
    Inversion is restricted to quantiles in ``[1e-9, 1 - 1e-9]``; beyond
    the corresponding positions the map continues affinely with the
    boundary slope ``rho_i / (rho_f o map)``.  Densities are refined
    spectrally by ``refine`` before quadrature, which keeps the map
    accurate to ~1e-9 for well-resolved inputs.

    Raises ``DegenerateDensityError`` if either density has an interior
    zero-mass interval (the rearrangement would be discontinuous there).
    """
    for rho, label in ((rho_i, "source density"), (rho_f, "target density")):
        if rho.grid.dim != 1:
            raise ConfigError("monotone rearrangement is one-dimensional")
        _support_run(rho.values, label)

    def refined(rho):
        x = rho.grid.axis(0)
        v = rho.values
        dx = rho.grid.spacing[0]
        if refine > 1:
            v = np.clip(fourier_upsample(v, refine), 0.0, None)
            dx = dx / refine
            x = rho.grid.bounds[0][0] + dx * np.arange(v.size)
        c = _spectral_cumulative(v, dx)
        c = c / c[-1]
        return x, v, c

    xi_ax, vi, ci = refined(rho_i)
    xf_ax, vf, cf = refined(rho_f)

    # invertible part of the target cumulative; the cumulative's slope is
    # the density itself, so Hermite interpolation of the inverse is
    # fourth order with no extra data
    keep = np.concatenate([[True], np.diff(cf) > 0.0])
    trust = keep & (cf >= _CDF_TRUST) & (cf <= 1.0 - _CDF_TRUST) & (vf > 0)
    if np.count_nonzero(trust) < 4:
        raise DegenerateDensityError("target density support is too narrow")
    inv_cf = CubicHermiteSpline(cf[trust], xf_ax[trust], 1.0 / vf[trust])
    dinv_cf = inv_cf.derivative()

    lo_c, hi_c = cf[trust][0], cf[trust][-1]
    src_trust = (ci >= max(_CDF_TRUST, lo_c)) & (ci <= min(1.0 - _CDF_TRUST, hi_c))
    if np.count_nonzero(src_trust) < 4:
        raise DegenerateDensityError("densities share too little quantile range")

    xs = xi_ax[src_trust]
    mu = np.asarray(inv_cf(ci[src_trust]))
    # chain rule: d mu / d x = rho_i(x) / rho_f(mu(x))
    dmu = np.clip(vi[src_trust] * np.asarray(dinv_cf(ci[src_trust])), 1e-12, None)

    # affine tails over the full source axis with the boundary slopes
    s_lo, s_hi = float(dmu[0]), float(dmu[-1])
    left = xi_ax[xi_ax < xs[0]]
    right = xi_ax[xi_ax > xs[-1]]
    x_all = np.concatenate([left, xs, right])
    mu_all = np.concatenate(
        [mu[0] + s_lo * (left - xs[0]), mu, mu[-1] + s_hi * (right - xs[-1])]
    )
    dmu_all = np.concatenate(
        [np.full(left.size, s_lo), dmu, np.full(right.size, s_hi)]
    )

    return tabulated_map_1d(
        x_all,
        mu_all,
        kind="monotone_1d",
        params={"trusted": (float(xs[0]), float(xs[-1]))},
        dydx=dmu_all,
    )


def wasserstein2_cost(rho: DensityField, map_spec: MapSpec) -> float:
    """Quadratic transport cost of moving ``rho`` through the map."""
    if map_spec.dim != rho.grid.dim:
        raise ConfigError("map dimension does not match the density grid")
    pts = rho.grid.points()
    disp = np.asarray(map_spec.forward(pts), dtype=float) - pts
    cost = np.sum(rho.values * np.sum(disp**2, axis=-1)) * rho.grid.cell_volume
    return float(cost)


def export_map_table(map_spec: MapSpec, points: np.ndarray, path) -> None:
    """Write sampled (input, output) coordinate pairs as CSV."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    pts = pts.reshape(-1, map_spec.dim)
    out = np.asarray(map_spec.forward(pts), dtype=float)
    cols = [pts[:, a] for a in range(map_spec.dim)]
    cols += [out[:, a] for a in range(map_spec.dim)]
    names = [f"xi{a}" for a in range(map_spec.dim)] + [
        f"xf{a}" for a in range(map_spec.dim)
    ]
    np.savetxt(
        path,
        np.column_stack(cols),
        delimiter=",",
        header=",".join(names),
    )


def import_map_table(path, dim: int = 1) -> MapSpec:
    """Rebuild a map from a sampled table written by ``export_map_table``.

    One-dimensional tables reconstruct a monotone interpolated map with
    inverse and convex potential; higher-dimensional tables must sample
    a full lattice and reconstruct forward/jacobian by interpolation
    with a Newton-iterated inverse.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    data = np.atleast_2d(data)
    if data.shape[1] != 2 * dim:
        raise ConfigError(
            f"table has {data.shape[1]} columns, expected {2 * dim} for dim={dim}"
        )
    if dim == 1:
        order = np.argsort(data[:, 0])
        return tabulated_map_1d(data[order, 0], data[order, 1], kind="custom")

    pts = data[:, :dim]
    out = data[:, dim:]
    axes = [np.unique(pts[:, a]) for a in range(dim)]
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != len(pts):
        raise ConfigError("table must sample a full lattice for dim > 1")
    comps = [
        RegularGridInterpolator(
            # NB the modern "cubic" method does not even reproduce linear
            # fields exactly; the legacy spline does
            axes, out[:, a].reshape(shape), method="cubic_legacy", bounds_error=False,
            fill_value=None,
        )
        for a in range(dim)
    ]

    def fwd(p):
        pv = np.asarray(p, dtype=float)
        flat = pv.reshape(-1, dim)
        res = np.stack([c(flat) for c in comps], axis=-1)
        return res.reshape(pv.shape)

    def jac(p):
        pv = np.asarray(p, dtype=float)
        h = 1e-5 * max(float(a[-1] - a[0]) for a in axes)
        cols = []
        for a in range(dim):
            e = np.zeros(dim)
            e[a] = h
            cols.append((fwd(pv + e) - fwd(pv - e)) / (2 * h))
        return np.stack(cols, axis=-1)

    def inv(p):
        pv = np.asarray(p, dtype=float)
        x = pv.copy()
        for _ in range(60):
            r = fwd(x) - pv
            if np.max(np.abs(r)) < 1e-10 * max(
                1.0, float(np.max(np.abs(pv), initial=0.0))
            ):
                return x
            Jx = jac(x)
            step = np.linalg.solve(Jx, r[..., None])[..., 0]
            x = x - step
        raise ConvergenceError("imported map inversion did not converge")

    return MapSpec(dim=dim, kind="custom", forward=fwd, inverse=inv, jacobian=jac)
