"""Displaced-parity Wigner function of a single-mode field state.

Convention: ``W(alpha) = 2 Tr[D(alpha)^-1 rho D(alpha) P]`` with
``alpha = x + i p`` and ``P = exp(i pi a+a)``.  There is no ``1/pi``
prefactor, so ``|W| <= 2`` and the phase-space integral of W is ``pi``.

Displacements are matrix exponentials on a truncated Fock space.  That is
only trustworthy while ``|alpha|^2 <= levels / 4``, so the evaluation
routines pad the field state into a working space large enough for every
requested ``alpha``; the field state itself is never truncated further.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .hilbert import annihilation

IMAG_RESIDUE_TOL = 1e-9


class DisplacementValidityWarning(UserWarning):
    """``|alpha|^2`` exceeds a quarter of the Fock levels the operator acts on."""


def _levels(cutoff) -> int:
    return cutoff.n_max if hasattr(cutoff, "n_max") else int(cutoff)


def displacement(alpha: complex, cutoff) -> np.ndarray:
    """``exp(alpha a+ - alpha* a)`` on ``cutoff`` Fock levels."""
    n = _levels(cutoff)
    if abs(alpha) ** 2 > n / 4:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} exceeds n_max/4 = {n / 4:.3g}; "
            "truncation error may be significant",
            DisplacementValidityWarning,
            stacklevel=2,
        )
    a = annihilation(n)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def parity(cutoff) -> np.ndarray:
    n = _levels(cutoff)
    return np.diag((-1.0) ** np.arange(n)).astype(complex)


def working_levels(n_field: int, alpha_max: float) -> int:
    """Fock levels used to evaluate displacements up to ``|alpha| = alpha_max``."""
    return 2 * n_field + math.ceil(4 * alpha_max**2) + 16


def _as_field_matrix(rho_field) -> np.ndarray:
    rho = np.asarray(rho_field, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"rho_field must be square, got shape {rho.shape}")
    return rho


def wigner_point(rho_field, alpha: complex, return_residue: bool = False):
    """W at a single phase-space point, via a direct matrix exponential."""
    rho = _as_field_matrix(rho_field)
    n = rho.shape[0]
    levels = working_levels(n, abs(alpha))
    D = displacement(alpha, levels)
    B = D[:n, :]
    signs = (-1.0) ** np.arange(levels)
    # Tr[D^+ rho D P] with rho supported on the first n levels
    value = 2 * np.einsum("kj,kl,lj,j->", B.conj(), rho, B, signs)
    if return_residue:
        return float(value.real), float(abs(value.imag))
    return float(value.real)


@dataclass(frozen=True)
class PhaseSpaceGrid:
    x_min: float = -4.0
    x_max: float = 4.0
    p_min: float = -4.0
    p_max: float = 4.0
    n_x: int = 101
    n_p: int = 101

    def __post_init__(self):
        if not self.x_max > self.x_min or not self.p_max > self.p_min:
            raise ValueError("grid extents must be increasing")
        if self.n_x < 2 or self.n_p < 2:
            raise ValueError("grid needs at least two points per axis")

    @classmethod
    def square(cls, extent: float = 4.0, points: int = 101) -> "PhaseSpaceGrid":
        return cls(-extent, extent, -extent, extent, points, points)

    @staticmethod
    def _axis(lo, hi, n):
        # lo + (hi - lo) * k / (n - 1) hits 0 exactly on symmetric odd grids
        return np.array([lo + (hi - lo) * k / (n - 1) for k in range(n)])

    @property
    def xs(self) -> np.ndarray:
        return self._axis(self.x_min, self.x_max, self.n_x)

    @property
    def ps(self) -> np.ndarray:
        return self._axis(self.p_min, self.p_max, self.n_p)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.n_p - 1)

    def alphas(self) -> np.ndarray:
        """Complex points ``x_i + i p_j`` as an ``n_x x n_p`` array."""
        return self.xs[:, None] + 1j * self.ps[None, :]


@dataclass(frozen=True)
class WignerGrid:
    grid: PhaseSpaceGrid
    values: np.ndarray
    max_imag_residue: float = 0.0

    def integral(self) -> float:
        """Riemann sum of W over the grid; close to ``pi`` when the support is enclosed."""
        return float(self.values.sum() * self.grid.dx * self.grid.dp)

    def value_at(self, x: float, p: float) -> float:
        i = int(np.argmin(np.abs(self.grid.xs - x)))
        j = int(np.argmin(np.abs(self.grid.ps - p)))
        return float(self.values[i, j])


def _radial_blocks(n: int, radii: np.ndarray) -> np.ndarray:
    """``[D(r) P D(r)^+]`` restricted to the first ``n`` levels, for each real ``r``.

    ``a+ - a`` is real antisymmetric, so one Hermitian eigendecomposition of
    ``-i (a+ - a)`` gives ``exp(r (a+ - a))`` for every radius.
    """
    levels = working_levels(n, float(radii.max()) if radii.size else 0.0)
    a = annihilation(levels)
    lam, V = np.linalg.eigh(-1j * (a.conj().T - a))
    Vn = V[:n, :]
    signs = (-1.0) ** np.arange(levels)
    # G = V^+ P V, so that D_n P D_n^+ = Vn e^{irL} G e^{-irL} Vn^+
    G = (V.conj().T * signs) @ V
    out = np.empty((radii.size, n, n), dtype=complex)
    for k, r in enumerate(radii):
        phase = np.exp(1j * r * lam)
        left = Vn * phase
        out[k] = left @ G @ left.conj().T
    return out


def wigner_grid(rho_field, grid: PhaseSpaceGrid | None = None) -> WignerGrid:
    """W on every point of ``grid`` (default ``[-4, 4]^2`` with 101 x 101 points).

    Uses ``D(r e^{i phi}) = R(phi) D(r) R(phi)^+`` with ``R(phi) = exp(i phi a+a)``,
    so the exponential is evaluated once per distinct radius.
    """
    grid = grid or PhaseSpaceGrid()
    rho = _as_field_matrix(rho_field)
    n = rho.shape[0]
    alphas = grid.alphas().ravel()
    radii, inverse = np.unique(np.round(np.abs(alphas), 12), return_inverse=True)
    blocks = _radial_blocks(n, radii)
    phi = np.angle(alphas)
    levels = np.arange(n)
    # R_n Q R_n^+ has entries Q_kl exp(i phi (k - l))
    rot = np.exp(1j * phi[:, None, None] * (levels[None, :, None] - levels[None, None, :]))
    values = 2 * np.einsum("lk,pkl->p", rho, blocks[inverse.ravel()] * rot)
    residue = float(np.max(np.abs(values.imag)))
    if residue > IMAG_RESIDUE_TOL:
        warnings.warn(f"Wigner imaginary residue {residue:.3e}; is rho Hermitian?", stacklevel=2)
    return WignerGrid(grid, values.real.reshape(grid.n_x, grid.n_p), residue)
