"""Strong-dephasing adiabatic solver.

When the dephasing rate dominates the hopping (gamma_d >> J) the coherences
relax fast and slave to the local densities, leaving a classical hopping
master equation for the density vector n:

    dn/dt = A n + p,   p = (gamma_g, 0, ..., 0),

with a symmetric tridiagonal generator A built from the effective rates

    alpha1 = 2 J^2 / gamma_d,
    alpha2 = 2 J^2 / (gamma_g / 2 + gamma_d).

The solution from the empty lattice is n(t) = (exp(A t) - I) A^-1 p,
evaluated spectrally (A is symmetric; one tridiagonal eigendecomposition
serves every sample time) with a scaling-and-squaring expm cross-check
path.

A special solver mode fixes gamma_g = alpha1 (and alpha2 -> alpha1), for
which the generator has closed-form sine eigenmodes and the continuum
density profile is 1 - erf(x / sqrt(4 alpha1 t)); the total number then
grows as N(t) = sqrt(8 J^2 t / (pi gamma_d)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from dephfill.special import erf
from dephfill.trajectory import DensityTrajectory


class AdiabaticError(ValueError):
    pass


@dataclass
class AdiabaticGenerator:
    """Classical hopping generator A, source vector p and effective rates."""

    A: np.ndarray
    pvec: np.ndarray
    alpha1: float
    alpha2: float
    gamma_g: float
    gamma_d: float
    J: float
    L: int
    _eig: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @property
    def diffusion_constant(self) -> float:
        """Closed-form D = sqrt(8 J^2 / (pi gamma_d))."""
        return math.sqrt(8.0 * self.J**2 / (math.pi * self.gamma_d))

    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached (eigenvalues, eigenvectors) of the symmetric tridiagonal A."""
        if self._eig is None:
            w, U = sla.eigh_tridiagonal(np.diag(self.A), np.diag(self.A, 1))
            self._eig = (w, U)
        return self._eig


def build_generator(gamma_g: float, gamma_d: float, J: float, L: int) -> AdiabaticGenerator:
    """Assemble the adiabatic generator.

    Rows: (-alpha2 - gamma_g, alpha2, 0, ...), (alpha2, -alpha1 - alpha2,
    alpha1, ...), interior (alpha1, -2 alpha1, alpha1), last (alpha1,
    -alpha1).  Interior and last rows sum to zero (bulk flux conservation);
    row 0 sums to -gamma_g.
    """
    if gamma_d <= 0:
        raise AdiabaticError("adiabatic limit requires gamma_d > 0 (alpha1 diverges)")
    if L < 2:
        raise AdiabaticError(f"need L >= 2, got {L}")
    if gamma_g < 0 or J <= 0:
        raise AdiabaticError("need gamma_g >= 0 and J > 0")
    alpha1 = 2.0 * J**2 / gamma_d
    alpha2 = 2.0 * J**2 / (0.5 * gamma_g + gamma_d)
    A = np.zeros((L, L))
    A[0, 0] = -alpha2 - gamma_g
    A[0, 1] = alpha2
    A[1, 0] = alpha2
    A[1, 1] = -alpha1 - alpha2
    if L > 2:
        A[1, 2] = alpha1
    for i in range(2, L - 1):
        A[i, i - 1] = alpha1
        A[i, i] = -2.0 * alpha1
        A[i, i + 1] = alpha1
    if L > 2:
        A[L - 1, L - 2] = alpha1
    A[L - 1, L - 1] = -alpha1
    pvec = np.zeros(L)
    pvec[0] = gamma_g
    return AdiabaticGenerator(A=A, pvec=pvec, alpha1=alpha1, alpha2=alpha2,
                              gamma_g=gamma_g, gamma_d=gamma_d, J=J, L=L)


def special_case_generator(gamma_d: float, J: float, L: int) -> AdiabaticGenerator:
    """Generator of the solvable mode: gamma_g set to alpha1, alpha2 -> alpha1.

    Every row then carries the uniform rate alpha1; row 0 becomes
    (-2 alpha1, alpha1, ...).  This mode is exposed explicitly and never
    substituted silently for general parameters.
    """
    if gamma_d <= 0:
        raise AdiabaticError("special-case mode requires gamma_d > 0")
    if L < 2:
        raise AdiabaticError(f"need L >= 2, got {L}")
    alpha1 = 2.0 * J**2 / gamma_d
    A = alpha1 * (np.diag(-2.0 * np.ones(L)) + np.diag(np.ones(L - 1), 1)
                  + np.diag(np.ones(L - 1), -1))
    A[L - 1, L - 1] = -alpha1
    pvec = np.zeros(L)
    pvec[0] = alpha1
    return AdiabaticGenerator(A=A, pvec=pvec, alpha1=alpha1, alpha2=alpha1,
                              gamma_g=alpha1, gamma_d=gamma_d, J=J, L=L)


def _check_solvable(gen: AdiabaticGenerator) -> None:
    if gen.gamma_g == 0:
        raise AdiabaticError(
            "A is singular at gamma_g = 0; with no source the density stays "
            "identically zero - use that trivial solution directly"
        )


def solve_adiabatic(gen: AdiabaticGenerator, t) -> np.ndarray:
    """n(t) = (exp(A t) - I) A^-1 p via the eigendecomposition of A.

    ``t`` may be a scalar (returns shape (L,)) or a 1-D array (returns
    shape (n_times, L)).  Uses expm1(w t)/w per mode, which is exact at
    t = 0 and saturates to the filled lattice as t -> infinity.
    """
    _check_solvable(gen)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise AdiabaticError("t must be >= 0")
    w, U = gen.eigensystem()
    q = U.T @ gen.pvec
    # (e^{w t} - 1)/w, stable for w -> 0
    factor = np.expm1(np.outer(t_arr, w)) / w[None, :]
    out = factor * q[None, :] @ U.T
    if np.isscalar(t) or np.ndim(t) == 0:
        return out[0]
    return out


def solve_adiabatic_expm(gen: AdiabaticGenerator, t: float) -> np.ndarray:
    """Cross-check path: scaling-and-squaring matrix exponential."""
    _check_solvable(gen)
    if t < 0:
        raise AdiabaticError("t must be >= 0")
    x = sla.solve(gen.A, gen.pvec)
    return (sla.expm(gen.A * t) - np.eye(gen.L)) @ x


def adiabatic_trajectory(gen: AdiabaticGenerator, t_grid) -> DensityTrajectory:
    dens = solve_adiabatic(gen, np.asarray(t_grid, dtype=float))
    return DensityTrajectory.from_site_density(t_grid, dens)


def special_mode_eigenvalues(alpha1: float, L: int) -> np.ndarray:
    """lam_k = -2 alpha1 (1 - cos((2k-1) pi / (2L+1))), k = 1..L."""
    k = np.arange(1, L + 1)
    return -2.0 * alpha1 * (1.0 - np.cos((2 * k - 1) * np.pi / (2 * L + 1)))


def special_mode_vectors(L: int) -> np.ndarray:
    """Orthonormal sine eigenvectors; column k-1 is u^k."""
    j = np.arange(1, L + 1)[:, None]
    k = np.arange(1, L + 1)[None, :]
    return 2.0 / np.sqrt(2 * L + 1) * np.sin((2 * k - 1) * j * np.pi / (2 * L + 1))


def spectral_density_special(gamma_d: float, J: float, L: int, t: float,
                             sites=None) -> np.ndarray | float:
    """Closed-form density of the special mode (gamma_g = alpha1).

    n_i(t) = 4 gamma_g / (2L+1) * sum_k (e^{lam_k t} - 1)/lam_k
             * sin((2k-1) pi/(2L+1)) * sin((2k-1) i pi/(2L+1)).

    ``sites`` is a 1-based site index or index array; None returns the full
    profile.
    """
    if t < 0:
        raise AdiabaticError("t must be >= 0")
    alpha1 = 2.0 * J**2 / gamma_d
    lam = special_mode_eigenvalues(alpha1, L)
    k = np.arange(1, L + 1)
    weights = np.expm1(lam * t) / lam * np.sin((2 * k - 1) * np.pi / (2 * L + 1))
    scalar = sites is not None and np.ndim(sites) == 0
    if sites is None:
        i_arr = np.arange(1, L + 1)
    else:
        i_arr = np.atleast_1d(np.asarray(sites, dtype=int))
        if np.any(i_arr < 1) or np.any(i_arr > L):
            raise AdiabaticError(f"site index out of range 1..{L}")
    phases = np.sin((2 * k - 1)[None, :] * i_arr[:, None] * np.pi / (2 * L + 1))
    out = 4.0 * alpha1 / (2 * L + 1) * (phases @ weights)
    return float(out[0]) if scalar else out


def continuum_profile(x, t: float, alpha1: float):
    """Self-similar density profile 1 - erf(x / sqrt(4 alpha1 t)), t > 0."""
    if t <= 0:
        raise AdiabaticError(f"continuum profile needs t > 0, got {t}")
    if alpha1 <= 0:
        raise AdiabaticError(f"need alpha1 > 0, got {alpha1}")
    arg = np.asarray(x, dtype=float) / math.sqrt(4.0 * alpha1 * t)
    out = 1.0 - erf(arg)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def asymptotics(gamma_d: float, J: float, t: float) -> tuple[float, float]:
    """Long-time closed forms: N = sqrt(8 J^2 t / (pi gamma_d)), D = N/sqrt(t)."""
    if gamma_d <= 0:
        raise AdiabaticError("need gamma_d > 0")
    if t < 0:
        raise AdiabaticError("t must be >= 0")
    D = math.sqrt(8.0 * J**2 / (math.pi * gamma_d))
    return D * math.sqrt(t), D
