import numpy as np
import pytest

from dephfill.models import (
    ModelSpec,
    ModelError,
    SZ,
    ID2,
    build_single_particle_hamiltonian,
    build_xxz_terms,
    build_jump_operators,
)


def test_nearest_neighbor_two_sites():
    h = build_single_particle_hamiltonian(ModelSpec("nn", L=2, J=1.0))
    assert np.array_equal(h, [[0, -1], [-1, 0]])


def test_powerlaw_alpha_two():
    spec = ModelSpec("powerlaw", L=3, J=1.0, alpha=2.0)
    h = build_single_particle_hamiltonian(spec)
    assert np.allclose(h, [[0, -1, -0.25], [-1, 0, -1], [-0.25, -1, 0]], atol=0)


def test_powerlaw_large_alpha_matches_nn():
    h_pl = build_single_particle_hamiltonian(ModelSpec("powerlaw", L=3, J=1.0, alpha=50.0))
    h_nn = build_single_particle_hamiltonian(ModelSpec("nn", L=3, J=1.0))
    assert np.abs(h_pl - h_nn).max() < 1e-14


@pytest.mark.parametrize("kind,alpha", [("nn", None), ("powerlaw", 1.3), ("powerlaw", 2.7)])
@pytest.mark.parametrize("L", [1, 2, 5, 17])
def test_hopping_matrix_symmetric_traceless(kind, alpha, L):
    h = build_single_particle_hamiltonian(ModelSpec(kind, L=L, J=0.7, alpha=alpha))
    assert np.array_equal(h, h.T)
    assert np.trace(h) == 0.0
    assert np.all(np.diag(h) == 0.0)


def test_powerlaw_magnitude_decreases_with_range():
    h = build_single_particle_hamiltonian(ModelSpec("powerlaw", L=8, J=1.0, alpha=1.4))
    mags = [abs(h[0, m]) for m in range(1, 8)]
    assert all(a > b for a, b in zip(mags, mags[1:]))


def test_rejects_xxz_hopping_matrix():
    with pytest.raises(ModelError):
        build_single_particle_hamiltonian(ModelSpec("xxz", L=3, delta=1.0))


def test_rejects_alpha_at_or_below_one():
    with pytest.raises(ModelError):
        ModelSpec("powerlaw", L=3, alpha=1.0)
    with pytest.raises(ModelError):
        ModelSpec("powerlaw", L=3, alpha=0.5)


def test_rejects_bad_sizes_and_rates():
    with pytest.raises(ModelError):
        ModelSpec("nn", L=0)
    with pytest.raises(ModelError):
        ModelSpec("nn", L=3, gamma_g=-1.0)
    with pytest.raises(ModelError):
        ModelSpec("nn", L=3, gamma_d=float("nan"))
    with pytest.raises(ModelError):
        ModelSpec("nn", L=3, J=0.0)


def test_xxz_block_xx_point():
    block = build_xxz_terms(ModelSpec("xxz", L=2, J=1.0, delta=0.0))[0]
    expected = np.zeros((4, 4))
    expected[1, 2] = expected[2, 1] = 0.5
    assert np.allclose(block, expected, atol=1e-15)


def test_xxz_block_isotropic_diagonal():
    block = build_xxz_terms(ModelSpec("xxz", L=2, J=1.0, delta=1.0))[0]
    assert np.allclose(np.diag(block), [0.25, -0.25, -0.25, 0.25], atol=1e-15)
    assert block[1, 2] == pytest.approx(0.5)


@pytest.mark.parametrize("J,delta", [(1.0, 0.0), (0.8, 1.0), (2.0, 3.5)])
def test_xxz_block_hermitian_and_conserves_sz(J, delta):
    blocks = build_xxz_terms(ModelSpec("xxz", L=5, J=J, delta=delta))
    assert len(blocks) == 4
    sz_total = np.kron(SZ, ID2) + np.kron(ID2, SZ)
    for block in blocks:
        assert np.allclose(block, block.conj().T, atol=1e-14)
        assert np.abs(block @ sz_total - sz_total @ block).max() < 1e-14


def test_jump_operator_set_shape():
    js = build_jump_operators(ModelSpec("nn", L=3, gamma_g=1.0, gamma_d=10.0))
    assert js.source.site == 0 and js.source.operator == "create"
    assert js.source.rate == 1.0
    assert len(js.dephasers) == 3
    assert [d.site for d in js.dephasers] == [0, 1, 2]
    assert all(d.rate == 10.0 and d.operator == "number" for d in js.dephasers)


def test_jump_operators_zero_rate_kept():
    js = build_jump_operators(ModelSpec("nn", L=4, gamma_g=2.0, gamma_d=0.0))
    assert len(js.dephasers) == 4
    assert all(d.rate == 0.0 for d in js.dephasers)


def test_jump_operators_minimal_chain():
    js = build_jump_operators(ModelSpec("nn", L=1, gamma_g=2.0))
    assert js.source.rate == 2.0
    assert len(js.dephasers) == 1
