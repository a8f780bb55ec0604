"""Grids, wavefunctions, and densities on periodic boxes.

All fields live on uniform periodic lattices: axis ``a`` holds ``n_a``
points ``x_j = lo_a + j * dx_a`` with the right endpoint excluded, which
is the natural sampling for FFT-based propagation.  Point arrays carry
their coordinates in a trailing axis of length ``dim`` so the same code
paths serve one, two, and three dimensions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
import numpy.ma as ma
import scipy.fft as sfft
from scipy.ndimage import map_coordinates
from scipy.signal import resample

from .errors import ConfigError, GridMismatchError, TailClippingError

__all__ = [
    "Grid",
    "Wavefunction",
    "DensityField",
    "make_grid",
    "gaussian_packet",
    "density_and_phase",
    "fidelity",
    "sample_field",
    "fourier_upsample",
    "save_wavefunction_csv",
    "load_wavefunction_csv",
    "save_wavefunction_npz",
    "load_wavefunction_npz",
]

SUPPORT_RELATIVE_THRESHOLD = 1e-8
EDGE_RELATIVE_THRESHOLD = 1e-12


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice over a rectangular box.

    Attributes
    ----------
    bounds : tuple of (lo, hi) pairs, one per axis.
    npoints : tuple of int, points per axis (powers of two).
    """

    bounds: tuple[tuple[float, float], ...]
    npoints: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.npoints)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.bounds, self.npoints))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def extent(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in self.bounds)

    def axis(self, a: int) -> np.ndarray:
        lo, _ = self.bounds[a]
        return lo + self.spacing[a] * np.arange(self.npoints[a])

    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(self.axis(a) for a in range(self.dim))

    def points(self) -> np.ndarray:
        """All lattice points, shape ``npoints + (dim,)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def wavenumber_axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            2.0 * np.pi * sfft.fftfreq(n, d=dx)
            for n, dx in zip(self.npoints, self.spacing)
        )

    def wavenumber_sq(self) -> np.ndarray:
        """|k|^2 on the FFT-ordered lattice."""
        ks = np.meshgrid(*self.wavenumber_axes(), indexing="ij")
        return sum(k * k for k in ks)

    def index_coords(self, points: np.ndarray) -> np.ndarray:
        """Fractional lattice indices of physical points, shape (dim, ...)."""
        pts = np.asarray(points, dtype=float)
        coords = [
            (pts[..., a] - self.bounds[a][0]) / self.spacing[a]
            for a in range(self.dim)
        ]
        return np.stack(coords, axis=0)


def make_grid(bounds, npoints) -> Grid:
    """Build a periodic grid.

    Parameters
    ----------
    bounds : (lo, hi) pair, or a sequence of pairs (one per axis).
    npoints : int or sequence of int; each must be a power of two >= 16.
    """
    b = np.asarray(bounds, dtype=float)
    if b.ndim == 1:
        b = b[None, :]
    if b.ndim != 2 or b.shape[1] != 2:
        raise ConfigError(f"bounds must be (lo, hi) pairs, got shape {b.shape}")
    dim = b.shape[0]
    if dim not in (1, 2, 3):
        raise ConfigError(f"supported dimensions are 1..3, got {dim}")
    if np.isscalar(npoints):
        ns = (int(npoints),) * dim
    else:
        ns = tuple(int(n) for n in npoints)
    if len(ns) != dim:
        raise ConfigError("npoints does not match the number of axes")
    for n in ns:
        if n < 16 or not _is_power_of_two(n):
            raise ConfigError(f"npoints must be powers of two >= 16, got {n}")
    for lo, hi in b:
        if not hi > lo:
            raise ConfigError(f"empty axis range ({lo}, {hi})")
    return Grid(bounds=tuple((float(lo), float(hi)) for lo, hi in b), npoints=ns)


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Wavefunction:
    """A complex field on a grid, unit-normalized under the cell quadrature.

    ``carrier`` optionally declares the dominant plane-wave factor
    ``exp(i k . x)``; interpolation routines factor it out to keep the
    interpolated remainder slowly varying.
    """

    grid: Grid
    values: np.ndarray
    mass: float = 1.0
    hbar: float = 1.0
    carrier: tuple[float, ...] | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.npoints:
            raise GridMismatchError(
                f"values shape {vals.shape} does not match grid {self.grid.npoints}"
            )
        object.__setattr__(self, "values", _frozen(vals))
        if self.carrier is not None:
            object.__setattr__(
                self, "carrier", tuple(float(c) for c in self.carrier)
            )

    def norm(self) -> float:
        return float(
            np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume)
        )

    def normalized(self) -> "Wavefunction":
        n = self.norm()
        if n == 0.0:
            raise ConfigError("cannot normalize a zero field")
        return replace(self, values=self.values / n)

    def density(self) -> "DensityField":
        return DensityField(self.grid, np.abs(self.values) ** 2)

    def with_values(self, values: np.ndarray) -> "Wavefunction":
        return replace(self, values=values)

    def expectation_position(self) -> np.ndarray:
        rho = np.abs(self.values) ** 2
        w = rho * self.grid.cell_volume
        pts = self.grid.points()
        return np.array(
            [np.sum(pts[..., a] * w) for a in range(self.grid.dim)]
        ) / np.sum(w)

    def expectation_momentum(self) -> np.ndarray:
        """<p> per axis via the spectral derivative, in physical units."""
        psihat = sfft.fftn(self.values)
        w = np.abs(psihat) ** 2
        ks = np.meshgrid(*self.grid.wavenumber_axes(), indexing="ij")
        total = np.sum(w)
        return np.array(
            [self.hbar * np.sum(k * w) / total for k in ks]
        )


@dataclass(frozen=True)
class DensityField:
    """Nonnegative field integrating to one under the cell quadrature."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.npoints:
            raise GridMismatchError(
                f"values shape {vals.shape} does not match grid {self.grid.npoints}"
            )
        peak = float(vals.max(initial=0.0))
        if peak <= 0.0:
            raise ConfigError("density has no positive values")
        if float(vals.min()) < -1e-9 * peak:
            raise ConfigError("density has significantly negative values")
        vals = np.clip(vals, 0.0, None)
        total = float(np.sum(vals) * self.grid.cell_volume)
        if abs(total - 1.0) > 1e-3:
            raise ConfigError(f"field integrates to {total}, not a density")
        object.__setattr__(self, "values", _frozen(vals / total))

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def support_mask(self, relative: float = SUPPORT_RELATIVE_THRESHOLD) -> np.ndarray:
        return self.values > relative * float(self.values.max())


def _as_vector(value, dim, name) -> np.ndarray:
    if np.isscalar(value):
        return np.full(dim, float(value))
    v = np.asarray(value, dtype=float)
    if v.shape != (dim,):
        raise ConfigError(f"{name} must be a scalar or length-{dim} vector")
    return v


def gaussian_packet(
    grid: Grid,
    sigma=1.0,
    wavevector=0.0,
    center=0.0,
    mass: float = 1.0,
    hbar: float = 1.0,
) -> Wavefunction:
    """Normalized Gaussian wavepacket with an optional plane-wave carrier.

    In one dimension this is
    ``(2 pi sigma^2)^(-1/4) exp(-(x-s)^2 / (4 sigma^2)) exp(i k x)``,
    whose density has standard deviation ``sigma``.  ``sigma`` may be a
    scalar, a per-axis sequence, or a symmetric positive-definite matrix
    ``Q`` declaring the density ``rho ~ exp(-(x-s)^T Q (x-s) / 2)``
    (for diagonal ``Q``, ``Q_aa = 1/sigma_a^2``).

    Raises
    ------
    TailClippingError
        If the density does not fall below 1e-12 of its peak at the
        domain edges (the box is too small for the requested packet).
    """
    dim = grid.dim
    s = _as_vector(center, dim, "center")
    k = _as_vector(wavevector, dim, "wavevector")

    sig = np.asarray(sigma, dtype=float)
    if sig.ndim == 2:
        if sig.shape != (dim, dim) or not np.allclose(sig, sig.T, atol=1e-12):
            raise ConfigError("matrix sigma must be symmetric (dim, dim)")
        quad = sig
        eigs = np.linalg.eigvalsh(quad)
        if eigs.min() <= 0:
            raise ConfigError("matrix sigma must be positive definite")
    else:
        widths = _as_vector(sigma, dim, "sigma")
        if np.any(widths <= 0):
            raise ConfigError("sigma must be positive")
        quad = np.diag(1.0 / widths**2)

    pts = grid.points()
    d = pts - s
    form = np.einsum("...a,ab,...b->...", d, quad, d)
    phase = np.einsum("...a,a->...", pts, k)
    vals = np.exp(-form / 4.0) * np.exp(1j * phase)

    rho = np.abs(vals) ** 2
    peak = rho.max()
    edge = 0.0
    for a in range(dim):
        edge = max(edge, float(np.take(rho, 0, axis=a).max()))
        edge = max(edge, float(np.take(rho, -1, axis=a).max()))
    if edge > EDGE_RELATIVE_THRESHOLD * peak:
        raise TailClippingError(
            f"packet edge density {edge / peak:.2e} of peak exceeds "
            f"{EDGE_RELATIVE_THRESHOLD:.0e}; enlarge the box or shrink sigma"
        )

    psi = Wavefunction(grid, vals, mass=mass, hbar=hbar, carrier=tuple(k))
    return psi.normalized()


def density_and_phase(psi: Wavefunction, relative: float = SUPPORT_RELATIVE_THRESHOLD):
    """Split a wavefunction into density and phase.

    Returns ``(rho, theta)`` where ``theta`` is a masked array: entries
    with ``rho <= relative * max(rho)`` are masked as undefined.
    """
    rho = psi.density()
    theta = np.angle(psi.values)
    undefined = ~rho.support_mask(relative)
    return rho, ma.masked_array(theta, mask=undefined)


def fidelity(a: Wavefunction, b: Wavefunction) -> float:
    """|<a|b>| under the cell quadrature; both states must share a grid."""
    if a.grid != b.grid:
        raise GridMismatchError("fidelity requires a common grid")
    return float(abs(np.vdot(a.values, b.values)) * a.grid.cell_volume)


def overlap(a: Wavefunction, b: Wavefunction) -> complex:
    if a.grid != b.grid:
        raise GridMismatchError("overlap requires a common grid")
    return complex(np.vdot(a.values, b.values) * a.grid.cell_volume)


def fourier_upsample(values: np.ndarray, factor: int) -> np.ndarray:
    """Band-limited refinement of periodic samples by ``factor`` per axis."""
    if factor == 1:
        return np.asarray(values)
    out = np.asarray(values)
    for ax in range(out.ndim):
        out = resample(out, out.shape[ax] * factor, axis=ax)
    return out


def sample_field(
    grid: Grid,
    values: np.ndarray,
    points: np.ndarray,
    upsample: int = 1,
    carrier: tuple[float, ...] | None = None,
) -> np.ndarray:
    """Evaluate a periodic grid field at arbitrary physical points.

    Uses cubic interpolation with periodic wrap, optionally preceded by
    spectral refinement of the samples.  If ``carrier`` is given the
    plane-wave factor ``exp(i k . x)`` is divided out before
    interpolation and restored exactly at the requested points, so only
    the slowly varying remainder is interpolated.
    """
    vals = np.asarray(values)
    pts = np.asarray(points, dtype=float)
    working_grid = grid

    if carrier is not None and np.any(np.asarray(carrier) != 0.0):
        kvec = np.asarray(carrier, dtype=float)
        gp = grid.points()
        vals = vals * np.exp(-1j * np.einsum("...a,a->...", gp, kvec))
    else:
        kvec = None

    if upsample > 1:
        vals = fourier_upsample(vals, upsample)
        working_grid = Grid(
            bounds=grid.bounds, npoints=tuple(n * upsample for n in grid.npoints)
        )

    coords = working_grid.index_coords(pts)
    if np.iscomplexobj(vals):
        re = map_coordinates(vals.real, coords, order=3, mode="grid-wrap")
        im = map_coordinates(vals.imag, coords, order=3, mode="grid-wrap")
        out = re + 1j * im
    else:
        out = map_coordinates(vals, coords, order=3, mode="grid-wrap")

    if kvec is not None:
        out = out * np.exp(1j * np.einsum("...a,a->...", pts, kvec))
    return out


_CSV_MAGIC = "# impulsekit-wavefunction v1"


def _grid_meta(psi: Wavefunction) -> dict:
    return {
        "bounds": [list(b) for b in psi.grid.bounds],
        "npoints": list(psi.grid.npoints),
        "mass": psi.mass,
        "hbar": psi.hbar,
        "carrier": list(psi.carrier) if psi.carrier is not None else None,
    }


def _psi_from_meta(meta: dict, values: np.ndarray) -> Wavefunction:
    grid = make_grid(meta["bounds"], meta["npoints"])
    carrier = meta.get("carrier")
    return Wavefunction(
        grid,
        values.reshape(grid.npoints),
        mass=float(meta.get("mass", 1.0)),
        hbar=float(meta.get("hbar", 1.0)),
        carrier=tuple(carrier) if carrier is not None else None,
    )


def save_wavefunction_csv(psi: Wavefunction, path) -> None:
    """Columnar text dump: one row per cell with coordinates, Re, Im."""
    pts = psi.grid.points().reshape(-1, psi.grid.dim)
    flat = psi.values.reshape(-1)
    cols = [pts[:, a] for a in range(psi.grid.dim)] + [flat.real, flat.imag]
    header = "\n".join(
        [
            _CSV_MAGIC.lstrip("# "),
            json.dumps(_grid_meta(psi)),
            ",".join([f"x{a}" for a in range(psi.grid.dim)] + ["re", "im"]),
        ]
    )
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header)


def load_wavefunction_csv(path) -> Wavefunction:
    with open(path) as fh:
        first = fh.readline()
        if _CSV_MAGIC.lstrip("# ") not in first:
            raise ConfigError(f"{path} is not a wavefunction table")
        meta = json.loads(fh.readline().lstrip("# ").strip())
    data = np.loadtxt(path, delimiter=",", skiprows=3)
    data = np.atleast_2d(data)
    values = data[:, -2] + 1j * data[:, -1]
    return _psi_from_meta(meta, values)


def save_wavefunction_npz(psi: Wavefunction, path) -> None:
    """Columnar binary dump; preferred for large multi-axis grids."""
    np.savez_compressed(
        path,
        meta=np.array(json.dumps(_grid_meta(psi))),
        re=psi.values.real,
        im=psi.values.imag,
    )


def load_wavefunction_npz(path) -> Wavefunction:
    with np.load(path) as data:
        meta = json.loads(str(data["meta"]))
        values = data["re"] + 1j * data["im"]
    return _psi_from_meta(meta, values)
