"""Convergence scans over pulse sharpness and their tabulated reports.

A scan propagates one scenario at a ladder of decreasing ``eps`` values
and reduces each run against the zero-sharpness prediction.  The
resulting table carries the deviation metrics per ``eps``, wall-clock
runtimes, and a fitted scaling exponent over the smallest ladder rungs.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GridMismatchError
from .geometry import DensityField, Wavefunction
from .quantumsim import PropagationSpec, compare, propagate

__all__ = [
    "ScanCase",
    "ScanRow",
    "ConvergenceTable",
    "run_epsilon_scan",
    "l1_density_error",
]

SLOPE_POINTS = 3


@dataclass(frozen=True)
class ScanCase:
    """One scenario prepared for an eps ladder.

    ``predicted`` is the reference state each run is reduced against:
    either one zero-sharpness deformation, or a callable of eps for
    scenarios whose exact reference depends on the sharpness (the
    identity control compares against closed-form free evolution).
    """

    label: str
    psi: Wavefunction
    impulse: object
    predicted: Wavefunction | Callable
    gpe_g: float = 0.0
    background: Callable | None = None
    nsteps: int | None = None
    max_nsteps: int = 4_000_000

    def reference(self, eps: float) -> Wavefunction:
        if callable(self.predicted):
            return self.predicted(eps)
        return self.predicted


@dataclass(frozen=True)
class ScanRow:
    eps: float
    infidelity: float
    l1_density: float
    phase_rms: float
    state_l2: float
    runtime: float


@dataclass(frozen=True)
class ConvergenceTable:
    """Per-eps deviations of one scenario, sorted by decreasing eps.

    ``fitted_slope`` is the least-squares exponent of infidelity against
    eps over the ``SLOPE_POINTS`` smallest ladder values;
    ``successive_phase_rms`` holds the support-phase deviation between
    consecutive runs, the witness used for unbalanced pulses.
    """

    scenario: str
    rows: tuple = field(default_factory=tuple)
    fitted_slope: float = float("nan")
    successive_phase_rms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        eps = [row.eps for row in self.rows]
        if eps != sorted(eps, reverse=True):
            raise ValueError("rows must be sorted by decreasing eps")

    def record(self) -> dict:
        return {
            "scenario": self.scenario,
            "fitted_slope": self.fitted_slope,
            "successive_phase_rms": list(self.successive_phase_rms),
            "rows": [
                {
                    "eps": row.eps,
                    "one_minus_fidelity": row.infidelity,
                    "l1_density": row.l1_density,
                    "phase_rms": row.phase_rms,
                    "state_l2": row.state_l2,
                    "runtime_s": row.runtime,
                }
                for row in self.rows
            ],
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.record(), fh, indent=2)
            fh.write("\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "eps",
                    "one_minus_fidelity",
                    "l1_density",
                    "phase_rms",
                    "state_l2",
                    "runtime_s",
                ]
            )
            for row in self.rows:
                writer.writerow(
                    [
                        f"{row.eps:.17g}",
                        f"{row.infidelity:.17g}",
                        f"{row.l1_density:.17g}",
                        f"{row.phase_rms:.17g}",
                        f"{row.state_l2:.17g}",
                        f"{row.runtime:.6f}",
                    ]
                )


def _state_l2(predicted: Wavefunction, simulated: Wavefunction, alpha: float) -> float:
    diff = simulated.values * np.exp(-1j * alpha) - predicted.values
    return float(
        np.sqrt(np.sum(np.abs(diff) ** 2) * predicted.grid.cell_volume)
    )


def fit_slope(eps_values, deviations, points: int = SLOPE_POINTS) -> float:
    """Least-squares exponent of deviation vs eps over the smallest rungs."""
    eps_arr = np.asarray(eps_values, dtype=float)
    dev_arr = np.asarray(deviations, dtype=float)
    order = np.argsort(eps_arr)
    eps_arr, dev_arr = eps_arr[order[:points]], dev_arr[order[:points]]
    good = dev_arr > 0
    if np.count_nonzero(good) < 2:
        return float("nan")
    coeffs = np.polyfit(np.log(eps_arr[good]), np.log(dev_arr[good]), 1)
    return float(coeffs[0])


def run_epsilon_scan(
    case: ScanCase,
    eps_ladder,
    snapshot_count: int = 0,
    workers: int | None = None,
) -> ConvergenceTable:
    """Propagate the case at every ladder eps and tabulate deviations.

    Rows are produced largest-eps first.  Resource guard errors from the
    propagator pass through to the caller.
    """
    ladder = sorted((float(e) for e in eps_ladder), reverse=True)
    if not ladder:
        raise ValueError("eps ladder is empty")
    rows = []
    finals = []
    for eps in ladder:
        spec = PropagationSpec(
            psi=case.psi,
            impulse=case.impulse,
            eps=eps,
            background=case.background,
            gpe_g=case.gpe_g,
            nsteps=case.nsteps,
            max_nsteps=case.max_nsteps,
            snapshot_count=snapshot_count,
            workers=workers,
        )
        start = time.perf_counter()
        result = propagate(spec)
        elapsed = time.perf_counter() - start
        reference = case.reference(eps)
        report = compare(reference, result.psi_f)
        rows.append(
            ScanRow(
                eps=eps,
                infidelity=report.infidelity,
                l1_density=report.l1_density,
                phase_rms=report.phase_rms,
                state_l2=_state_l2(reference, result.psi_f, report.global_phase),
                runtime=elapsed,
            )
        )
        finals.append(result.psi_f)

    successive = tuple(
        compare(finals[i], finals[i + 1]).phase_rms for i in range(len(finals) - 1)
    )
    slope = fit_slope([r.eps for r in rows], [r.infidelity for r in rows])
    return ConvergenceTable(
        scenario=case.label,
        rows=tuple(rows),
        fitted_slope=slope,
        successive_phase_rms=successive,
    )


def l1_density_error(rho_a: DensityField, rho_b: DensityField) -> float:
    """Total-variation style distance, in [0, 2] for unit densities."""
    if rho_a.grid != rho_b.grid:
        raise GridMismatchError("densities must share a grid")
    cell = rho_a.grid.cell_volume
    return float(
        np.sum(np.abs(np.asarray(rho_a.values) - np.asarray(rho_b.values))) * cell
    )
