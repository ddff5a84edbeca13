"""Vectorized density-matrix TEBD for the dissipative XXZ chain.

The density matrix is vectorized site by site with physical dimension 4.
Bond superoperators are assembled in the column-stacked basis j = 2*bra +
ket (bra slow, ket fast), where a local map rho -> A rho B is kron(B.T, A).
Internally the engine then rotates every site to the orthonormal Hermitian
operator basis {I, sx, sy, sz}/sqrt(2): GKSL dynamics preserves
Hermiticity, so in that basis the state tensors, gates and boundary
functionals are all real, which roughly halves memory and makes the SVD/QR
sweeps substantially faster.  Expectation values of Hermitian observables
are then real by construction.

The state is a matrix product state of rank-3 tensors (left bond, physical
4, right bond) kept in mixed-canonical form around a moving orthogonality
center, which makes every two-site SVD truncation locally optimal.

The Liouvillian splits into nearest-neighbor bond superoperators: the XXZ
commutator lives naturally on bonds; each site's dephasing generator is
attached half-and-half to its two bonds (full weight at the chain ends) and
the injection term sits entirely on bond 0, so the bond sum reproduces the
full Liouvillian exactly.

Time stepping uses the fourth-order triple-jump splitting

    exp(dt L) ~ U(dt1)^2 U(dt2) U(dt1)^2,   U(tau) = O(tau/2) E(tau) O(tau/2)

with dt1 = dt / (4 - 4**(1/3)) and dt2 = dt - 4*dt1 < 0 (the negative
sub-step is required).  Adjacent odd half-layers are merged, giving 11 gate
layers per step.  Gates are dense 16x16 exponentials, precomputed once per
sub-step size; they are not unitary and nothing in the sweep assumes they
are.  Singular values below the relative floor are discarded without
rescaling the state: the expectation-value ratio <I|O|rho>/<I|rho> absorbs
any trace drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from dephfill.models import ModelSpec, ModelError, XXZ, SX, SY, SZ, SP, ID2
from dephfill.trajectory import DensityTrajectory


class TebdError(RuntimeError):
    pass


# rows of W = vectorized orthonormal Hermitian basis; r = W vec(rho) is real
_PAULIS = [np.eye(2) / np.sqrt(2.0), np.sqrt(2.0) * SX, np.sqrt(2.0) * SY,
           np.sqrt(2.0) * SZ]
W_BASIS = np.array([P.flatten() for P in _PAULIS])  # unitary, W W^dag = I
W_BASIS_2 = np.kron(W_BASIS, W_BASIS)

# local trace functional <I_local| in the Hermitian basis: picks sqrt(2) * r_0
W_IDENTITY = np.array([np.sqrt(2.0), 0.0, 0.0, 0.0])


def observable_weights(op: np.ndarray) -> np.ndarray:
    """Row weights w with w . r_local = Tr(op rho); real for Hermitian op."""
    w = np.asarray(op, dtype=complex).flatten() @ W_BASIS.conj().T
    if np.abs(w.imag).max() < 1e-14:
        return w.real.copy()
    return w


def to_hermitian_basis(sup16: np.ndarray) -> np.ndarray:
    """Rotate a two-site superoperator to the real Hermitian-basis form."""
    out = W_BASIS_2 @ sup16 @ W_BASIS_2.conj().T
    resid = float(np.abs(out.imag).max())
    if resid > 1e-10:
        raise TebdError(f"superoperator is not Hermiticity-preserving ({resid:.2e})")
    return out.real.copy()


def sop(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Local 4x4 superoperator of rho -> A rho B (column-stacked basis)."""
    return np.kron(np.asarray(B).T, np.asarray(A))


def _jump_superop(K: np.ndarray) -> np.ndarray:
    """Trace-preserving dissipator D[K] rho = K rho K^dag - {K^dag K, rho}/2."""
    Kd = K.conj().T
    KdK = Kd @ K
    return sop(K, Kd) - 0.5 * sop(KdK, ID2) - 0.5 * sop(ID2, KdK)


def _site_dephaser(gamma_d: float) -> np.ndarray:
    return gamma_d * _jump_superop(SZ)


def _site_source(gamma_g: float) -> np.ndarray:
    return gamma_g * _jump_superop(SP)


def build_two_site_liouvillians(spec: ModelSpec) -> list[np.ndarray]:
    """The L-1 bond superoperators whose sum is the full Liouvillian.

    Bond n couples sites n and n+1 (0-based).  Single-site dissipators are
    split with weight 1/2 onto each adjacent bond, full weight at the chain
    ends; the source term is attached wholly to bond 0.  Each generator
    annihilates the two-site identity functional (trace preservation),
    which is asserted here.
    """
    if spec.kind != XXZ:
        raise ModelError(f"tebd engine requires kind='xxz', got {spec.kind!r}")
    if spec.L < 2:
        raise ModelError("tebd engine needs L >= 2")
    L, J, delta = spec.L, spec.J, spec.delta
    eye4 = np.eye(4)
    comm = np.zeros((16, 16), dtype=complex)
    for op, coef in ((SX, J), (SY, J), (SZ, J * delta)):
        left = np.kron(sop(op, ID2), sop(op, ID2))
        right = np.kron(sop(ID2, op), sop(ID2, op))
        comm += -1j * coef * (left - right)
    deph = _site_dephaser(spec.gamma_d)
    gain = _site_source(spec.gamma_g)
    w4 = np.eye(2).flatten()  # vec-basis local trace functional
    w16 = np.kron(w4, w4)

    out = []
    for n in range(L - 1):
        w_l = 1.0 if n == 0 else 0.5
        w_r = 1.0 if n == L - 2 else 0.5
        Lb = comm + w_l * np.kron(deph, eye4) + w_r * np.kron(eye4, deph)
        if n == 0:
            Lb = Lb + np.kron(gain, eye4)
        resid = np.abs(w16 @ Lb).max()
        if resid > 1e-12:
            raise TebdError(f"bond {n} generator violates trace preservation ({resid:.2e})")
        out.append(Lb)
    return out


def trotter_substeps(dt: float) -> tuple[float, float]:
    """Triple-jump sub-steps: dt1 = dt/(4 - 4^(1/3)), dt2 = dt - 4 dt1."""
    dt1 = dt / (4.0 - 4.0 ** (1.0 / 3.0))
    return dt1, dt - 4.0 * dt1


@dataclass
class GateSet:
    """Precomputed bond gates for one full fourth-order step."""

    dt: float
    dt1: float
    dt2: float
    # layer plan: (bond parity 0/1, sub-step length) applied in order
    layers: list[tuple[int, float]]
    # gates[tau][bond] = expm(L_bond * tau)
    gates: dict[float, list[np.ndarray]]
    n_sites: int


def build_gate_set(spec: ModelSpec, dt: float) -> GateSet:
    """Exponentiate the bond generators for the 11 merged gate layers.

    Generators are rotated to the real Hermitian basis before
    exponentiation; identical interior bonds share one exponential, only
    the first and last bonds differ (end weights and the source term).
    """
    bond_ops = [to_hermitian_basis(op) for op in build_two_site_liouvillians(spec)]
    dt1, dt2 = trotter_substeps(dt)
    if dt == 0.0:
        layers = [(0, 0.0), (1, 0.0)]
        taus = [0.0]
    else:
        layers = [
            (0, dt1 / 2), (1, dt1), (0, dt1), (1, dt1), (0, (dt1 + dt2) / 2),
            (1, dt2), (0, (dt1 + dt2) / 2), (1, dt1), (0, dt1), (1, dt1),
            (0, dt1 / 2),
        ]
        taus = sorted({tau for _, tau in layers})
    gates: dict[float, list[np.ndarray]] = {}
    for tau in taus:
        per_bond: list[np.ndarray] = []
        cache: dict[int, np.ndarray] = {}
        for n, op in enumerate(bond_ops):
            variant = 0 if n == 0 else (2 if n == len(bond_ops) - 1 else 1)
            if variant not in cache:
                cache[variant] = np.eye(16) if tau == 0.0 else sla.expm(op * tau)
            per_bond.append(cache[variant])
        gates[tau] = per_bond
    return GateSet(dt=dt, dt1=dt1, dt2=dt2, layers=layers, gates=gates,
                   n_sites=spec.L)


@dataclass
class TruncationPolicy:
    """SVD truncation: hard cap chi_max plus a relative singular-value floor."""

    chi_max: int = 200
    sv_floor: float = 1e-12

    def __post_init__(self):
        if self.chi_max < 1:
            raise TebdError(f"chi_max must be >= 1, got {self.chi_max}")
        if self.sv_floor < 0:
            raise TebdError(f"sv_floor must be >= 0, got {self.sv_floor}")


def _svd(mat: np.ndarray):
    try:
        return sla.svd(mat, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return sla.svd(mat, full_matrices=False, lapack_driver="gesvd")


class VectorizedMPS:
    """MPS of the vectorized density matrix, physical dimension 4.

    ``center`` is the orthogonality center: tensors left of it are left
    isometries, tensors right of it right isometries.  Gates must be applied
    at the center; helper methods move it with QR sweeps.
    """

    def __init__(self, tensors: list[np.ndarray], center: int = 0):
        self.tensors = tensors
        self.center = center
        self.truncation_weight = 0.0  # cumulative discarded weight

    @classmethod
    def all_down(cls, L: int) -> "VectorizedMPS":
        """Product state vec(|down><down|) at every site: the empty lattice."""
        if L < 1:
            raise TebdError("need L >= 1")
        # |down><down| = (I - sz)/2 -> (1/sqrt2, 0, 0, -1/sqrt2) in the basis
        local = W_BASIS[:, 3].real  # column of vec index j=3 (bra=ket=down)
        tensors = []
        for _ in range(L):
            T = np.zeros((1, 4, 1))
            T[0, :, 0] = local
            tensors.append(T)
        return cls(tensors, center=0)

    @property
    def L(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [T.shape[2] for T in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def _move_right(self):
        c = self.center
        T = self.tensors[c]
        l, p, r = T.shape
        Q, R = sla.qr(T.reshape(l * p, r), mode="economic")
        k = Q.shape[1]
        self.tensors[c] = Q.reshape(l, p, k)
        self.tensors[c + 1] = np.tensordot(R, self.tensors[c + 1], axes=(1, 0))
        self.center = c + 1

    def _move_left(self):
        c = self.center
        T = self.tensors[c]
        l, p, r = T.shape
        # RQ via QR of the transpose: T = (R^T) (Q^T), rows of Q^T orthonormal
        Q, R = sla.qr(T.reshape(l, p * r).T, mode="economic")
        k = Q.shape[1]
        self.tensors[c] = Q.T.reshape(k, p, r)
        self.tensors[c - 1] = np.tensordot(self.tensors[c - 1], R.T, axes=(2, 0))
        self.center = c - 1

    def move_center_to(self, n: int):
        if not 0 <= n < self.L:
            raise TebdError(f"center {n} out of range")
        while self.center < n:
            self._move_right()
        while self.center > n:
            self._move_left()

    def canonicalize(self, center: int = 0):
        """Full gauge refresh: sweep the center across the whole chain."""
        self.move_center_to(self.L - 1)
        self.move_center_to(0)
        self.move_center_to(center)

    def apply_two_site(self, gate: np.ndarray, n: int, policy: TruncationPolicy,
                       absorb: str = "right"):
        """Apply a 16x16 gate on bond (n, n+1), SVD, truncate.

        Singular values are absorbed into the tensor on the ``absorb`` side,
        where the center ends up.  Discarded weight (relative sum of squared
        singular values) is accumulated on the state.
        """
        if self.center not in (n, n + 1):
            self.move_center_to(n if absorb == "right" else n + 1)
        A, B = self.tensors[n], self.tensors[n + 1]
        l, _, _ = A.shape
        _, _, r = B.shape
        theta = np.tensordot(A, B, axes=(2, 0)).reshape(l, 16, r)
        theta = np.tensordot(gate, theta, axes=(1, 1))  # (16, l, r)
        theta = theta.transpose(1, 0, 2).reshape(l * 4, 4 * r)
        U, s, Vh = _svd(theta)
        total = float(s @ s)
        if total == 0.0:
            raise TebdError(f"state annihilated at bond {n}")
        keep = int(np.sum(s >= policy.sv_floor * s[0]))
        keep = max(1, min(keep, policy.chi_max))
        if keep < s.size:
            self.truncation_weight += float(s[keep:] @ s[keep:]) / total
        U, s, Vh = U[:, :keep], s[:keep], Vh[:keep, :]
        if absorb == "right":
            self.tensors[n] = U.reshape(l, 4, keep)
            self.tensors[n + 1] = (s[:, None] * Vh).reshape(keep, 4, r)
            self.center = n + 1
        else:
            self.tensors[n] = (U * s[None, :]).reshape(l, 4, keep)
            self.tensors[n + 1] = Vh.reshape(keep, 4, r)
            self.center = n

    # -- contractions with the identity functional --

    def _site_matrix(self, n: int, weights: np.ndarray) -> np.ndarray:
        return np.tensordot(weights, self.tensors[n], axes=(0, 1))

    def trace(self) -> float:
        """<I|rho>, the vectorized trace functional."""
        v = np.ones((1,))
        for n in range(self.L):
            v = v @ self._site_matrix(n, W_IDENTITY)
        val = complex(v[0])
        if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
            raise TebdError(f"trace has imaginary residue {val.imag:g}")
        return val.real

    def expectation(self, op: np.ndarray, site: int) -> float:
        """<op_site> = <I| op at site |rho> / <I|rho>.

        Real by construction for Hermitian op (real weights in the
        Hermitian-basis representation); the residue of a complex-weight
        observable is asserted.
        """
        num = np.ones((1,))
        for n in range(self.L):
            w = observable_weights(op) if n == site else W_IDENTITY
            num = num @ self._site_matrix(n, w)
        val = complex(num[0]) / self.trace()
        if abs(val.imag) > 1e-8 * max(1.0, abs(val.real)):
            raise TebdError(f"expectation has imaginary residue {val.imag:g}")
        return float(val.real)

    def sz_profile(self) -> np.ndarray:
        """All <S^z_i> in one O(L chi^2) double sweep."""
        L = self.L
        lefts = [np.ones((1,))]
        for n in range(L - 1):
            lefts.append(lefts[-1] @ self._site_matrix(n, W_IDENTITY))
        right = np.ones((1,))
        w_sz = observable_weights(SZ)
        num = np.empty(L)
        for n in range(L - 1, -1, -1):
            num[n] = lefts[n] @ self._site_matrix(n, w_sz) @ right
            right = self._site_matrix(n, W_IDENTITY) @ right
        denom = float(right[0])  # full identity contraction = trace
        return num / denom

    def density_profile(self) -> np.ndarray:
        """Particle densities n_i = <S^z_i> + 1/2."""
        return self.sz_profile() + 0.5

    def isometry_errors(self) -> tuple[float, float]:
        """(max left, max right) deviation from the isometry conditions."""
        left_err = 0.0
        right_err = 0.0
        for n in range(self.L):
            T = self.tensors[n]
            l, p, r = T.shape
            if n < self.center:
                M = T.reshape(l * p, r)
                left_err = max(left_err, float(np.abs(M.conj().T @ M - np.eye(r)).max()))
            elif n > self.center:
                M = T.reshape(l, p * r)
                right_err = max(right_err, float(np.abs(M @ M.conj().T - np.eye(l)).max()))
        return left_err, right_err


def vectorize_initial_state(L: int) -> VectorizedMPS:
    """Down-polarized product state, the vectorized empty lattice."""
    if L < 2:
        raise TebdError("tebd engine needs L >= 2")
    return VectorizedMPS.all_down(L)


def _apply_layer(state: VectorizedMPS, gates: list[np.ndarray], parity: int,
                 policy: TruncationPolicy):
    bonds = list(range(parity, state.L - 1, 2))
    if not bonds:
        return
    # sweep toward the far end, then gates absorb back toward the start of
    # the next layer; ascending for parity 0, descending for parity 1 keeps
    # center moves short
    if parity == 0:
        for n in bonds:
            state.apply_two_site(gates[n], n, policy, absorb="right")
    else:
        for n in reversed(bonds):
            state.apply_two_site(gates[n], n, policy, absorb="left")


def trotter_step(state: VectorizedMPS, gates: GateSet, policy: TruncationPolicy
                 ) -> VectorizedMPS:
    """One full fourth-order step (11 merged odd/even gate layers), in place."""
    if state.L != gates.n_sites:
        raise TebdError("gate set built for a different chain length")
    for parity, tau in gates.layers:
        _apply_layer(state, gates.gates[tau], parity, policy)
    return state


@dataclass
class TebdDiagnostics:
    """Per-sample engine health: trace, bond growth, truncation budget."""

    times: list[float] = field(default_factory=list)
    trace: list[float] = field(default_factory=list)
    max_bond: list[int] = field(default_factory=list)
    truncation_weight: list[float] = field(default_factory=list)

    def write_csv(self, path):
        lines = ["t,trace,max_bond,truncation_weight"]
        for k in range(len(self.times)):
            lines.append(
                f"{self.times[k]!r},{self.trace[k]!r},{self.max_bond[k]},"
                f"{self.truncation_weight[k]!r}"
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def run_tebd(
    spec: ModelSpec,
    t_max: float,
    dt: float = 0.05,
    policy: TruncationPolicy | None = None,
    sample_times=None,
    recanonicalize_every: int = 50,
) -> tuple[DensityTrajectory, TebdDiagnostics, VectorizedMPS]:
    """Evolve the empty lattice to ``t_max``, sampling densities.

    ``sample_times`` are snapped to multiples of dt (deduplicated; 0 is
    always included).  Returns the trajectory (densities n_i = <S^z_i> +
    1/2), per-sample diagnostics and the final state.
    """
    if policy is None:
        policy = TruncationPolicy()
    if t_max <= 0 or dt <= 0:
        raise TebdError("need t_max > 0 and dt > 0")
    n_steps = int(round(t_max / dt))
    if sample_times is None:
        sample_steps = np.arange(n_steps + 1)
    else:
        sample_steps = np.unique(np.clip(np.rint(np.asarray(sample_times) / dt), 0, n_steps).astype(int))
    gates = build_gate_set(spec, dt)
    state = vectorize_initial_state(spec.L)
    diags = TebdDiagnostics()
    dens = np.zeros((sample_steps.size, spec.L))

    target = 0

    def record(step):
        nonlocal target
        while target < sample_steps.size and sample_steps[target] == step:
            prof = state.density_profile()
            dens[target] = prof
            diags.times.append(step * dt)
            diags.trace.append(float(np.real(state.trace())))
            diags.max_bond.append(state.max_bond)
            diags.truncation_weight.append(state.truncation_weight)
            target += 1

    record(0)
    for step in range(1, n_steps + 1):
        trotter_step(state, gates, policy)
        if recanonicalize_every and step % recanonicalize_every == 0:
            state.canonicalize(state.center)
        record(step)
    traj = DensityTrajectory.from_site_density(sample_steps * dt, dens)
    return traj, diags, state
