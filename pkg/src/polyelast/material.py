"""Per-cell isotropic material parameters and their Voigt-form stiffness.

Symmetric 2D tensors are stored Voigt-style with engineering shear: a strain
(e11, e22, e12) becomes the vector [e11, e22, 2 e12] while a stress keeps its
shear component unscaled, so that the Voigt dot product equals the tensor
contraction sigma : eps.
"""

from __future__ import annotations

import numpy as np

from .errors import MaterialError


class MaterialField:
    """Cell-wise shear modulus mu (> 0) and first Lame parameter lam (>= 0)."""

    def __init__(self, mu, lam):
        self.mu = np.atleast_1d(np.asarray(mu, dtype=float))
        self.lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if self.mu.shape != self.lam.shape:
            raise MaterialError("mu and lambda must have matching shapes")
        if np.any(self.mu <= 0.0):
            raise MaterialError("shear modulus must be positive")
        if np.any(self.lam < 0.0):
            raise MaterialError("lambda must be non-negative")
        self.mu.setflags(write=False)
        self.lam.setflags(write=False)

    def __len__(self):
        return len(self.mu)

    @staticmethod
    def uniform(mu: float, lam: float, num_cells: int) -> "MaterialField":
        return MaterialField(np.full(num_cells, mu), np.full(num_cells, lam))

    def poisson_ratio(self):
        return self.lam / (2.0 * (self.lam + self.mu))

    def stiffest_eigenvalue(self):
        """Largest eigenvalue of the stiffness tensor per cell (2 mu + 2 lam
        in 2D, attained on hydrostatic strains)."""
        return 2.0 * self.mu + 2.0 * self.lam


def from_poisson(mu: float, nu: float, num_cells: int) -> MaterialField:
    """Uniform field from shear modulus and Poisson ratio nu in [0, 0.5)."""
    if not 0.0 <= nu < 0.5:
        raise MaterialError(f"Poisson ratio must lie in [0, 0.5), got {nu}")
    lam = 2.0 * mu * nu / (1.0 - 2.0 * nu)
    return MaterialField.uniform(mu, lam, num_cells)


def voigt_stiffness(mu: float, lam: float) -> np.ndarray:
    """3x3 stiffness acting on [e11, e22, 2 e12]:

        [[2 mu + lam, lam,        0 ],
         [lam,        2 mu + lam, 0 ],
         [0,          0,          mu]]
    """
    return np.array([
        [2.0 * mu + lam, lam, 0.0],
        [lam, 2.0 * mu + lam, 0.0],
        [0.0, 0.0, mu],
    ])


def strain_to_voigt(eps: np.ndarray) -> np.ndarray:
    """Symmetric 2x2 strain tensor -> [e11, e22, 2 e12]."""
    return np.array([eps[0, 0], eps[1, 1], eps[0, 1] + eps[1, 0]])


def stress_to_voigt(sig: np.ndarray) -> np.ndarray:
    """Symmetric 2x2 stress tensor -> [s11, s22, s12]."""
    return np.array([sig[0, 0], sig[1, 1], 0.5 * (sig[0, 1] + sig[1, 0])])


def isotropic_stress(mu: float, lam: float, eps: np.ndarray) -> np.ndarray:
    """sigma = 2 mu eps + lam trace(eps) I for a symmetric 2x2 strain."""
    return 2.0 * mu * eps + lam * np.trace(eps) * np.eye(2)
