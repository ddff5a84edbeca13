"""Brute-force dense Lindblad evolution on the full Hilbert space.

Ground truth for the correlation-matrix and TEBD engines at small L.  The
density matrix is column-stacked, vec(A rho B) = kron(B.T, A) vec(rho), and
propagated with a one-shot scaling-and-squaring matrix exponential.

Fermion chains are lifted to Fock space with explicit Jordan-Wigner parity
signs, so power-law hopping terms carry their string operators; the source
acts on site 0 and is string-free.  The XXZ kind is built directly from
spin operators.

Dissipators are always the trace-preserving jump form
``D[K] rho = K rho K^dag - {K^dag K, rho}/2`` with K = sqrt(rate) * op.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from dephfill.models import (
    ModelSpec,
    ModelError,
    XXZ,
    SP,
    SZ,
    ID2,
    build_single_particle_hamiltonian,
    build_xxz_terms,
)
from dephfill.trajectory import DensityTrajectory

MAX_ORACLE_SITES = 7


class OracleSizeError(ModelError):
    """Chain too large for the dense oracle."""


def _check_size(L: int) -> None:
    if L > MAX_ORACLE_SITES:
        dim = 4**L
        mem_gb = dim * dim * 16 / 1e9
        raise OracleSizeError(
            f"dense oracle limited to L <= {MAX_ORACLE_SITES}; L={L} would need a "
            f"{dim}x{dim} superoperator (~{mem_gb:.1f} GB)"
        )


# -- Fock-space fermion operators (occupation bit = 1, site 0 most significant)


def fermion_annihilator(L: int, site: int) -> np.ndarray:
    """Dense matrix of c_site including the Jordan-Wigner parity sign."""
    dim = 2**L
    c = np.zeros((dim, dim))
    bit = L - 1 - site  # site 0 occupies the most significant bit
    for n in range(dim):
        if (n >> bit) & 1:
            m = n ^ (1 << bit)
            # parity of occupied sites to the LEFT of `site` (higher bits)
            left_mask = ~((1 << (bit + 1)) - 1)
            sign = -1.0 if bin(n & left_mask).count("1") % 2 else 1.0
            c[m, n] = sign
    return c


def _site_operator(L: int, site: int, op: np.ndarray) -> np.ndarray:
    """kron-lift a single-site spin operator; site 0 is the first factor."""
    mats = [ID2] * L
    mats[site] = op
    out = np.array([[1.0]])
    for m in mats:
        out = np.kron(out, m)
    return out


def build_hamiltonian_dense(spec: ModelSpec) -> np.ndarray:
    """Full many-body Hamiltonian of the model on the 2^L space."""
    _check_size(spec.L)
    L = spec.L
    if spec.kind == XXZ:
        dim = 2**L
        H = np.zeros((dim, dim), dtype=complex)
        blocks = build_xxz_terms(spec)
        for n, block in enumerate(blocks):
            pre = np.eye(2**n)
            post = np.eye(2 ** (L - n - 2))
            H += np.kron(np.kron(pre, block), post)
        return H
    h = build_single_particle_hamiltonian(spec)
    c = [fermion_annihilator(L, i) for i in range(L)]
    cdag = [op.T for op in c]
    dim = 2**L
    H = np.zeros((dim, dim), dtype=complex)
    for i in range(L):
        for j in range(L):
            if h[i, j] != 0.0:
                H += h[i, j] * (cdag[i] @ c[j])
    return H


def build_jump_matrices(spec: ModelSpec) -> list[tuple[np.ndarray, float]]:
    """(operator, rate) pairs: the site-0 source plus one dephaser per site."""
    _check_size(spec.L)
    L = spec.L
    if spec.kind == XXZ:
        source = _site_operator(L, 0, SP)
        dephasers = [_site_operator(L, i, SZ) for i in range(L)]
    else:
        c = [fermion_annihilator(L, i) for i in range(L)]
        source = c[0].T  # c^dag on site 0: no string to its left
        dephasers = [c[i].T @ c[i] for i in range(L)]
    out = [(source, spec.gamma_g)]
    out.extend((d, spec.gamma_d) for d in dephasers)
    return out


@dataclass
class DenseSuperoperator:
    """4^L x 4^L Liouvillian acting on the column-stacked density matrix."""

    Lmat: np.ndarray
    L: int
    kind: str


def liouvillian_matrix(H: np.ndarray, jumps: list[tuple[np.ndarray, float]]) -> np.ndarray:
    """Assemble kron(B.T, A)-convention Liouvillian from H and jump channels."""
    dim = H.shape[0]
    eye = np.eye(dim)
    Lmat = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for op, rate in jumps:
        if rate == 0.0:
            continue
        opd = op.conj().T
        opdop = opd @ op
        Lmat += rate * (
            np.kron(op.conj(), op)
            - 0.5 * np.kron(eye, opdop)
            - 0.5 * np.kron(opdop.T, eye)
        )
    return Lmat


def build_dense_liouvillian(spec: ModelSpec) -> DenseSuperoperator:
    _check_size(spec.L)
    H = build_hamiltonian_dense(spec)
    jumps = build_jump_matrices(spec)
    return DenseSuperoperator(Lmat=liouvillian_matrix(H, jumps), L=spec.L, kind=spec.kind)


def vacuum_density_matrix(spec: ModelSpec) -> np.ndarray:
    """Empty-lattice initial state: Fock vacuum, or all-down for the spin kind."""
    _check_size(spec.L)
    dim = 2**spec.L
    rho = np.zeros((dim, dim), dtype=complex)
    idx = dim - 1 if spec.kind == XXZ else 0  # all-down = last basis state
    rho[idx, idx] = 1.0
    return rho


def evolve_dense(rho0: np.ndarray, sup: DenseSuperoperator, t: float) -> np.ndarray:
    """rho(t) = unvec(expm(Lmat t) vec(rho0)), re-hermitized."""
    if t < 0:
        raise ModelError(f"t must be >= 0, got {t}")
    if t == 0:
        return rho0.copy()
    dim = rho0.shape[0]
    vec = rho0.flatten(order="F")
    prop = sla.expm(sup.Lmat * t)
    out = (prop @ vec).reshape((dim, dim), order="F")
    return 0.5 * (out + out.conj().T)


def dense_observables(rho: np.ndarray, spec: ModelSpec) -> tuple[np.ndarray, float]:
    """Per-site occupation and total particle number.

    Spin kind: n_i = <S^z_i> + 1/2, so the all-down state is the empty
    lattice.
    """
    L = spec.L
    diag = np.real(np.diag(rho))
    n = np.zeros(L)
    for i in range(L):
        bit = L - 1 - i
        for b in range(rho.shape[0]):
            occ = (b >> bit) & 1
            if spec.kind == XXZ:
                # basis index bit 0 = up = occupied
                n[i] += diag[b] * (1 - occ)
            else:
                n[i] += diag[b] * occ
    return n, float(n.sum())


def dense_density_trajectory(spec: ModelSpec, times) -> DensityTrajectory:
    """Oracle densities on a sample grid.

    When the grid spacing is uniform (within round-off) the propagator is
    exponentiated once and applied repeatedly; otherwise one expm per time.
    """
    times = np.asarray(times, dtype=float)
    sup = build_dense_liouvillian(spec)
    rho = vacuum_density_matrix(spec)
    dim = rho.shape[0]
    dens = np.empty((times.size, spec.L))

    gaps = np.diff(times)
    uniform = times.size > 2 and gaps.size > 0 and np.allclose(gaps, gaps[0], rtol=1e-12, atol=0)
    if uniform and times[0] == 0.0 and gaps[0] > 0:
        step = sla.expm(sup.Lmat * gaps[0])
        vec = rho.flatten(order="F")
        for k in range(times.size):
            if k > 0:
                vec = step @ vec
            rho_k = vec.reshape((dim, dim), order="F")
            dens[k], _ = dense_observables(0.5 * (rho_k + rho_k.conj().T), spec)
    else:
        t_prev = 0.0
        rho_k = rho
        for k, t in enumerate(times):
            rho_k = evolve_dense(rho_k, sup, float(t) - t_prev)
            t_prev = float(t)
            dens[k], _ = dense_observables(rho_k, spec)
    return DensityTrajectory.from_site_density(times, dens)


def identity_functional(dim: int) -> np.ndarray:
    """Row vector <I| with <I|vec(rho) = Tr(rho) in the column-stacked layout."""
    return np.eye(dim).flatten(order="F")
