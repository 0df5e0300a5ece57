"""Windowed sinusoidal point source.

The sine is switched on over ``m`` cycles by the quintic smoothstep
``10x^3 - 15x^4 + 6x^5``, held for ``n`` cycles and switched off over ``m``
cycles by the mirrored polynomial.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import EPS0


def _smoothstep(x):
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


@dataclass(frozen=True)
class WindowedSine:
    f0: float = 30e9
    m: int = 5
    n: int = 10
    amplitude: float = 1.0

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise ValueError("cycle counts must be non-negative")
        if not self.f0 > 0:
            raise ValueError("center frequency must be positive")

    @property
    def period(self) -> float:
        return 1.0 / self.f0

    @property
    def duration(self) -> float:
        return (2 * self.m + self.n) * self.period

    def __call__(self, t):
        return evaluate(self, t)


def evaluate(signal: WindowedSine, t):
    """Signal value(s) at time(s) ``t`` (seconds)."""
    t = np.asarray(t, dtype=float)
    tp = signal.period
    t_on = signal.m * tp
    t_hold = (signal.m + signal.n) * tp
    t_end = (2 * signal.m + signal.n) * tp
    carrier = np.sin(2.0 * np.pi * signal.f0 * t)
    if signal.m > 0:
        g_on = _smoothstep(np.clip(1.0 - (t_on - t) / t_on, 0.0, 1.0))
        g_off = 1.0 - _smoothstep(np.clip((t - t_hold) / t_on, 0.0, 1.0))
    else:
        g_on = g_off = np.ones_like(t)
    window = np.select(
        [t < 0, t < t_on, t < t_hold, t < t_end],
        [0.0, g_on, 1.0, g_off],
        default=0.0,
    )
    out = signal.amplitude * window * carrier
    return float(out) if out.ndim == 0 else out


def injection_gain(dt: float, eps: float = EPS0) -> float:
    """Field increment per unit signal: the source acts as a point current density."""
    return dt / eps


def inject_soft_source(ezx, ezy, signal_value: float, dt: float, gain: float | None = None):
    """Add the source contribution to the split components of one E-node.

    Half of the increment goes to each split part, so ``E_z = E_zx + E_zy``
    carries the full signal.
    """
    if gain is None:
        gain = injection_gain(dt)
    inc = gain * signal_value
    return ezx + 0.5 * inc, ezy + 0.5 * inc
