"""Ramp schedules for impulse designs.

A schedule is a smooth monotone ramp ``g`` on the window ``[0, T]`` with
``g(0) = 0``, ``g(T) = 1`` and flat endpoints ``g'(0) = g'(T) = 0``.
The flat endpoints are what make a designed strong potential balanced:
the net force integral along every trajectory vanishes, so states that
start at rest end at rest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError

__all__ = [
    "Schedule",
    "make_schedule",
    "make_unbalanced_schedule",
    "balance_integral",
]


@dataclass(frozen=True)
class Schedule:
    """Ramp ``g`` with its first two derivatives on ``[0, T]``."""

    T: float
    g: Callable[[np.ndarray], np.ndarray]
    gdot: Callable[[np.ndarray], np.ndarray]
    gddot: Callable[[np.ndarray], np.ndarray]
    kind: str = "custom"


def _sine_sq(T: float) -> Schedule:
    w = np.pi / T

    def g(tau):
        return np.sin(0.5 * w * np.asarray(tau)) ** 2

    def gdot(tau):
        return 0.5 * w * np.sin(w * np.asarray(tau))

    def gddot(tau):
        return 0.5 * w * w * np.cos(w * np.asarray(tau))

    return Schedule(T=T, g=g, gdot=gdot, gddot=gddot, kind="sine_sq")


def _quintic(T: float) -> Schedule:
    def g(tau):
        u = np.asarray(tau) / T
        return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)

    def gdot(tau):
        u = np.asarray(tau) / T
        return 30.0 * u**2 * (1.0 - u) ** 2 / T

    def gddot(tau):
        u = np.asarray(tau) / T
        return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / T**2

    return Schedule(T=T, g=g, gdot=gdot, gddot=gddot, kind="quintic")


_BUILTIN = {"sine_sq": _sine_sq, "quintic": _quintic}

_ENDPOINT_TOL = 1e-10
_DERIV_TOL = 1e-6


def _validate(s: Schedule) -> None:
    checks = [
        ("g(0)", float(s.g(0.0)), 0.0),
        ("g(T)", float(s.g(s.T)), 1.0),
        ("g'(0)", float(s.gdot(0.0)), 0.0),
        ("g'(T)", float(s.gdot(s.T)), 0.0),
    ]
    for name, got, want in checks:
        if abs(got - want) > _ENDPOINT_TOL:
            raise ConfigError(f"schedule endpoint {name} = {got}, expected {want}")

    taus = np.linspace(0.0, s.T, 1001)[1:-1]
    gv = np.asarray(s.g(taus), dtype=float)
    if np.any(gv <= 0.0) or np.any(gv >= 1.0):
        raise ConfigError("schedule must stay strictly inside (0, 1) on the interior")

    # derivative consistency by central differences at interior samples
    h = s.T * 1e-6
    probe = np.linspace(0.1 * s.T, 0.9 * s.T, 17)
    fd1 = (np.asarray(s.g(probe + h)) - np.asarray(s.g(probe - h))) / (2 * h)
    fd2 = (np.asarray(s.gdot(probe + h)) - np.asarray(s.gdot(probe - h))) / (2 * h)
    scale = 1.0 / s.T
    if np.max(np.abs(fd1 - np.asarray(s.gdot(probe)))) > _DERIV_TOL * max(1.0, scale):
        raise ConfigError("gdot inconsistent with finite differences of g")
    if np.max(np.abs(fd2 - np.asarray(s.gddot(probe)))) > _DERIV_TOL * max(
        1.0, scale**2
    ):
        raise ConfigError("gddot inconsistent with finite differences of gdot")


def make_schedule(kind: str, T: float = 1.0, g=None, gdot=None, gddot=None) -> Schedule:
    """Construct a validated ramp schedule.

    ``kind`` is ``'sine_sq'`` (half-sine squared, the default used by the
    scenario catalog), ``'quintic'`` (minimum-order polynomial with flat
    endpoints), or ``'custom'`` with explicit ``g``, ``gdot``, ``gddot``
    callables.  Custom schedules violating the endpoint or interior
    constraints are rejected.
    """
    if T <= 0:
        raise ConfigError(f"window length must be positive, got {T}")
    if kind in _BUILTIN:
        return _BUILTIN[kind](float(T))
    if kind == "custom":
        if g is None or gdot is None or gddot is None:
            raise ConfigError("custom schedules need g, gdot, and gddot")
        s = Schedule(T=float(T), g=g, gdot=gdot, gddot=gddot, kind="custom")
        _validate(s)
        return s
    raise ConfigError(f"unknown schedule kind '{kind}'")


def make_unbalanced_schedule(T: float = 1.0) -> Schedule:
    """Ramp that deliberately violates the flat-endpoint condition.

    ``g(u) = 2u^2 - u^3`` reaches 1 with ``g'(T) = 1/T != 0``, so designs
    built on it leave a residual velocity field at the end of the window.
    Used by the unbalance demonstrations; bypasses validation on purpose.
    """

    def g(tau):
        u = np.asarray(tau) / T
        return u**2 * (2.0 - u)

    def gdot(tau):
        u = np.asarray(tau) / T
        return u * (4.0 - 3.0 * u) / T

    def gddot(tau):
        u = np.asarray(tau) / T
        return (4.0 - 6.0 * u) / T**2

    return Schedule(T=float(T), g=g, gdot=gdot, gddot=gddot, kind="unbalanced")


def balance_integral(schedule: Schedule) -> float:
    """Integral of ``g''`` over the window; zero for balanced ramps.

    Equal to ``g'(T) - g'(0)`` for smooth ramps, so a nonzero value is
    the schedule-level witness of an unbalanced design.
    """
    val, _ = quad(
        lambda t: float(schedule.gddot(t)), 0.0, schedule.T, limit=400, epsabs=1e-13
    )
    return float(val)
