"""Drude dispersion for the left-handed slab.

Time convention is ``exp(+j omega t)``, so the Drude term reads
``omega_p^2 / (omega^2 - j gamma omega)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import EPS0, MU0
from .lattice import NodeLattice


@dataclass(frozen=True)
class DrudeMedium:
    omega_p: float = 0.0
    gamma: float = 0.0
    eps0: float = EPS0
    mu0: float = MU0

    def __post_init__(self):
        if self.omega_p < 0 or self.gamma < 0:
            raise ValueError("plasma and collision frequencies must be non-negative")

    def _drude_factor(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.omega_p == 0.0:
            return np.ones_like(omega, dtype=complex)
        if np.any(omega < 0):
            raise ValueError("angular frequency must be positive")
        if self.gamma == 0.0 and np.any(omega == 0):
            raise ZeroDivisionError("lossless Drude model has a pole at omega = 0")
        return 1.0 - self.omega_p**2 / (omega**2 - 1j * self.gamma * omega)


def permittivity(medium: DrudeMedium, omega):
    """Complex permittivity in F/m."""
    return medium.eps0 * medium._drude_factor(omega)


def permeability(medium: DrudeMedium, omega):
    """Complex permeability in H/m (same Drude law as the permittivity)."""
    return medium.mu0 * medium._drude_factor(omega)


def relative_permittivity(medium: DrudeMedium, omega):
    return medium._drude_factor(omega)


def relative_permeability(medium: DrudeMedium, omega):
    return medium._drude_factor(omega)


def lh_plasma_frequency_for(omega0: float, target: float = -1.0) -> float:
    """Lossless plasma frequency giving relative permittivity ``target`` at ``omega0``."""
    if target >= 1:
        raise ValueError(f"target relative permittivity must be < 1, got {target}")
    return float(omega0 * np.sqrt(1.0 - target))


@dataclass(frozen=True)
class Slab:
    """Planar slab occupying ``[start, start + thickness]`` along ``axis``.

    Infinite in the transverse directions, so it also crosses the side PML.
    """

    start: float
    thickness: float
    axis: int = 1

    @property
    def end(self) -> float:
        return self.start + self.thickness

    def contains(self, positions, tol=1e-9):
        c = np.asarray(positions, dtype=float)[:, self.axis]
        pad = tol * max(self.thickness, 1e-30)
        return (c >= self.start - pad) & (c <= self.end + pad)


@dataclass(frozen=True)
class MaterialMap:
    """Per-node Drude parameters of one lattice; vacuum nodes carry zeros."""

    omega_p: np.ndarray
    gamma: np.ndarray
    in_slab: np.ndarray

    @classmethod
    def vacuum(cls, n):
        return cls(np.zeros(n), np.zeros(n), np.zeros(n, dtype=bool))


def assign_media(lattice: NodeLattice, slab: Slab | None, medium: DrudeMedium | None) -> MaterialMap:
    if slab is None or medium is None:
        return MaterialMap.vacuum(lattice.size)
    mask = slab.contains(lattice.positions)
    return MaterialMap(
        omega_p=np.where(mask, medium.omega_p, 0.0),
        gamma=np.where(mask, medium.gamma, 0.0),
        in_slab=mask,
    )
