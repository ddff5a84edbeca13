"""Model specifications and Hamiltonian / dissipator builders.

Conventions used throughout the package:

* J = 1 sets the unit of energy; times are measured in 1/J and every rate
  is stored in units of J.
* Chains are open; sites are indexed 0 .. L-1 with the particle source
  attached to site 0.
* Spin basis: index 0 = up = occupied, index 1 = down = empty.  Two-spin
  blocks are ordered {uu, ud, du, dd}.
* The interacting model is simulated in its spin form (XXZ chain); the
  equivalent quartic fermion Hamiltonian is related by a Jordan-Wigner
  transformation and is not constructed separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NEAREST_NEIGHBOR = "nn"
POWER_LAW = "powerlaw"
XXZ = "xxz"

KINDS = (NEAREST_NEIGHBOR, POWER_LAW, XXZ)

# spin-1/2 operators, S = sigma / 2
SX = np.array([[0.0, 0.5], [0.5, 0.0]])
SY = np.array([[0.0, -0.5j], [0.5j, 0.0]])
SZ = np.array([[0.5, 0.0], [0.0, -0.5]])
SP = np.array([[0.0, 1.0], [0.0, 0.0]])  # S+ = |up><down|, creates a particle
SM = np.array([[0.0, 0.0], [1.0, 0.0]])
ID2 = np.eye(2)


class ModelError(ValueError):
    """Invalid model specification or incompatible model/operation pair."""


@dataclass(frozen=True)
class ModelSpec:
    """Complete description of a run's physical model.

    Parameters
    ----------
    kind : {"nn", "powerlaw", "xxz"}
        Lattice type: nearest-neighbor hopping, power-law hopping with
        exponent ``alpha``, or the interacting XXZ spin chain.
    L : int
        Number of sites (>= 1).
    J : float
        Hopping amplitude / spin coupling, > 0.
    alpha : float, optional
        Power-law hopping exponent, required and > 1 for kind="powerlaw";
        ignored otherwise.
    delta : float
        XXZ anisotropy (>= 0); ignored unless kind="xxz".
    gamma_g : float
        Injection rate of the particle source at site 0 (>= 0).
    gamma_d : float
        Bulk dephasing rate, applied at every site (>= 0).
    """

    kind: str
    L: int
    J: float = 1.0
    alpha: float | None = None
    delta: float = 0.0
    gamma_g: float = 0.0
    gamma_d: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown lattice kind {self.kind!r}, expected one of {KINDS}")
        if not isinstance(self.L, (int, np.integer)) or self.L < 1:
            raise ModelError(f"L must be a positive integer, got {self.L!r}")
        if not (math.isfinite(self.J) and self.J > 0):
            raise ModelError(f"J must be finite and > 0, got {self.J!r}")
        for name, rate in (("gamma_g", self.gamma_g), ("gamma_d", self.gamma_d)):
            if not (math.isfinite(rate) and rate >= 0):
                raise ModelError(f"{name} must be finite and >= 0, got {rate!r}")
        if self.kind == POWER_LAW:
            if self.alpha is None:
                raise ModelError("powerlaw kind requires alpha")
            if not (math.isfinite(self.alpha) and self.alpha > 1):
                raise ModelError(
                    f"powerlaw exponent must satisfy alpha > 1, got {self.alpha!r}"
                )
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise ModelError(f"delta must be finite and >= 0, got {self.delta!r}")


def build_single_particle_hamiltonian(spec: ModelSpec) -> np.ndarray:
    """L x L real symmetric hopping matrix for the free-fermion kinds.

    Nearest-neighbor: h[i, i+1] = -J.  Power-law: h[i, i+m] = -J / m**alpha
    for every range m >= 1.  Open boundaries, zero diagonal.
    """
    if spec.kind == XXZ:
        raise ModelError("xxz kind has no single-particle hopping matrix")
    L = spec.L
    h = np.zeros((L, L))
    if spec.kind == NEAREST_NEIGHBOR:
        ranges = range(1, 2) if L > 1 else range(0)
    else:
        ranges = range(1, L)
    for m in ranges:
        amp = -spec.J if spec.kind == NEAREST_NEIGHBOR else -spec.J / m**spec.alpha
        idx = np.arange(L - m)
        h[idx, idx + m] = amp
        h[idx + m, idx] = amp
    return h


def build_xxz_terms(spec: ModelSpec) -> list[np.ndarray]:
    """The L-1 two-site bond Hamiltonians of the XXZ chain.

    Each block is the 4 x 4 matrix J*(Sx Sx + Sy Sy + delta * Sz Sz) in the
    ordered two-spin basis {uu, ud, du, dd}.  The chain is uniform, so all
    blocks are identical; a list is returned to keep the per-bond layout
    explicit for the TEBD engine.
    """
    if spec.kind != XXZ:
        raise ModelError(f"build_xxz_terms requires kind='xxz', got {spec.kind!r}")
    block = spec.J * (
        np.kron(SX, SX) + np.kron(SY, SY) + spec.delta * np.kron(SZ, SZ)
    )
    block = np.real_if_close(block)
    return [block.copy() for _ in range(spec.L - 1)]


@dataclass(frozen=True)
class JumpOperator:
    """Descriptor of a single Lindblad jump channel.

    ``operator`` is "create" for the source (fermion c^dag / spin S+) and
    "number" for a dephaser (fermion n / spin S^z); ``site`` is 0-based.
    """

    site: int
    operator: str
    rate: float


@dataclass(frozen=True)
class JumpOperatorSet:
    source: JumpOperator
    dephasers: tuple[JumpOperator, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.source.operator != "create" or self.source.site != 0:
            raise ModelError("source must be a 'create' channel on site 0")
        if any(d.operator != "number" for d in self.dephasers):
            raise ModelError("dephasers must all be 'number' channels")


def build_jump_operators(spec: ModelSpec) -> JumpOperatorSet:
    """One source channel on site 0 plus one dephaser per site.

    Zero-rate channels are kept (they are no-ops downstream) so the set
    shape is independent of the rates.
    """
    source = JumpOperator(site=0, operator="create", rate=spec.gamma_g)
    dephasers = tuple(
        JumpOperator(site=i, operator="number", rate=spec.gamma_d) for i in range(spec.L)
    )
    return JumpOperatorSet(source=source, dephasers=dephasers)
