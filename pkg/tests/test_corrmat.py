import numpy as np
import pytest

from dephfill import corrmat
from dephfill.corrmat import EngineError
from dephfill.models import ModelSpec, build_single_particle_hamiltonian
from dephfill.oracle import dense_density_trajectory


def nn_h(L, J=1.0):
    return build_single_particle_hamiltonian(ModelSpec("nn", L=L, J=J))


def test_vacuum_is_zero_matrix():
    C = corrmat.init_vacuum(3)
    assert C.shape == (3, 3)
    assert not np.any(C)
    assert corrmat.total_number(C) == 0.0
    assert corrmat.init_vacuum(1).shape == (1, 1)


def test_total_number_values():
    assert corrmat.total_number(np.eye(5, dtype=complex)) == 5.0
    assert corrmat.total_number(np.diag([0.3, 0.7]).astype(complex)) == pytest.approx(1.0)


def test_total_number_rejects_imaginary_trace():
    C = np.diag([0.5 + 1e-3j, 0.5])
    with pytest.raises(EngineError):
        corrmat.total_number(C)


def test_rhs_vacuum_feels_only_source():
    d = corrmat.rhs(corrmat.init_vacuum(4), nn_h(4), 1.0, 7.0)
    expected = np.zeros((4, 4), dtype=complex)
    expected[0, 0] = 1.0
    assert np.array_equal(d, expected)


def test_rhs_filled_lattice_is_stationary():
    d = corrmat.rhs(np.eye(6, dtype=complex), nn_h(6), 1.3, 4.2)
    assert np.abs(d).max() < 1e-14


def test_rhs_single_coherence_decays_at_gamma_d():
    C = np.zeros((3, 3), dtype=complex)
    C[1, 2] = 0.7
    d = corrmat.rhs(C, np.zeros((3, 3)), 0.0, 5.0)
    assert d[1, 2] == pytest.approx(-3.5)
    d.flat[np.abs(d.flat) < 1e-30] = 0  # every other entry exactly zero
    assert np.count_nonzero(d) == 1


def test_rhs_row_column_zero_extra_damping():
    C = np.zeros((3, 3), dtype=complex)
    C[0, 2] = 1.0
    d = corrmat.rhs(C, np.zeros((3, 3)), 2.0, 5.0)
    # gamma_d + gamma_g/2 on a row-0 coherence
    assert d[0, 2] == pytest.approx(-6.0)


def test_rhs_affine_linearity():
    rng = np.random.default_rng(3)
    h = nn_h(5)
    gg, gd = 1.2, 3.4
    C1 = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    C2 = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    a, b = 0.6, -1.7
    lhs = corrmat.rhs(a * C1 + b * C2, h, gg, gd)
    rhs0 = corrmat.rhs(np.zeros((5, 5), dtype=complex), h, gg, gd)
    rhs_exp = (a * corrmat.rhs(C1, h, gg, gd) + b * corrmat.rhs(C2, h, gg, gd)
               + (1 - a - b) * rhs0)
    assert np.abs(lhs - rhs_exp).max() < 1e-12


def test_rhs_shape_mismatch():
    with pytest.raises(EngineError):
        corrmat.rhs(corrmat.init_vacuum(3), nn_h(4), 1.0, 1.0)


def test_default_dt():
    assert corrmat.default_dt(1.0, 0.0, 0.0) == pytest.approx(0.01)
    assert corrmat.default_dt(1.0, 1.0, 100.0) == pytest.approx(1e-3)
    assert corrmat.default_dt(1.0, 50.0, 1.0) == pytest.approx(2e-3)


def test_single_site_exact_filling_law():
    t_grid = np.linspace(0.0, 5.0, 11)
    traj, C = corrmat.evolve(corrmat.init_vacuum(1), np.zeros((1, 1)), 1.0, 3.0,
                             t_grid, dt=0.004)
    exact = 1.0 - np.exp(-traj.times)
    assert np.abs(traj.total_number - exact).max() < 1e-8
    assert C[0, 0].real == pytest.approx(exact[-1], abs=1e-8)


def test_no_source_stays_vacuum():
    t_grid = np.array([0.0, 1.0, 5.0])
    traj, C = corrmat.evolve(corrmat.init_vacuum(6), nn_h(6), 0.0, 2.0, t_grid, dt=0.01)
    assert np.abs(traj.site_density).max() == 0.0
    assert not np.any(C)


def test_evolve_matches_dense_oracle():
    spec = ModelSpec("nn", L=4, J=1.0, gamma_g=1.0, gamma_d=2.0)
    t_grid = np.array([0.0, 0.5, 2.0, 10.0])
    traj_o = dense_density_trajectory(spec, t_grid)
    traj_c, _ = corrmat.evolve(corrmat.init_vacuum(4), nn_h(4), 1.0, 2.0, t_grid,
                               dt=0.002)
    assert np.abs(traj_o.site_density - traj_c.site_density).max() < 1e-6


def test_early_time_law_all_kinds():
    for spec in (ModelSpec("nn", L=6, gamma_g=2.0, gamma_d=1.0),
                 ModelSpec("powerlaw", L=6, alpha=1.5, gamma_g=0.5, gamma_d=3.0)):
        h = build_single_particle_hamiltonian(spec)
        t_star = 0.01 / spec.gamma_g
        t_grid = np.array([0.0, t_star])
        traj, _ = corrmat.evolve(corrmat.init_vacuum(6), h, spec.gamma_g,
                                 spec.gamma_d, t_grid, dt=t_star / 8)
        N = traj.total_number[-1]
        assert abs(N / (spec.gamma_g * traj.times[-1]) - 1.0) < 0.05


@pytest.mark.slow
def test_saturation_at_finite_size():
    # gamma_d-scaled diffusive estimate: t ~ (L / D)^2 with D = sqrt(8/(pi gd))
    spec = ModelSpec("nn", L=10, gamma_g=1.0, gamma_d=4.0)
    T = 700.0
    t_grid = np.array([0.0, T])
    traj, _ = corrmat.evolve(corrmat.init_vacuum(10), nn_h(10), 1.0, 4.0, t_grid,
                             dt=0.02)
    assert traj.total_number[-1] > 0.99 * 10


def test_rk4_halving_convergence():
    t_grid = np.array([0.0, 1.0])
    h = nn_h(4)
    Ns = []
    for dt in (0.02, 0.01, 0.005):
        traj, _ = corrmat.evolve(corrmat.init_vacuum(4), h, 1.0, 2.0, t_grid, dt=dt)
        Ns.append(traj.total_number[-1])
    assert abs(Ns[1] - Ns[2]) < 1e-8
    # classical 4th order: error ratio ~ 16
    ratio = (Ns[0] - Ns[1]) / (Ns[1] - Ns[2])
    assert 10 < ratio < 24


def test_hermiticity_and_occupation_bounds_along_run():
    spec = ModelSpec("nn", L=8, gamma_g=1.5, gamma_d=2.0)
    t_grid = np.array([0.0, 2.0, 8.0])
    traj, C = corrmat.evolve(corrmat.init_vacuum(8), nn_h(8), 1.5, 2.0, t_grid, dt=0.005)
    assert np.abs(C - C.conj().T).max() < 1e-10
    evals = np.linalg.eigvalsh(C)
    assert evals.min() > -1e-8
    assert evals.max() < 1 + 1e-8
    assert np.all(traj.site_density >= -1e-8)
    assert np.all(traj.site_density <= 1 + 1e-8)


def test_total_number_monotone_for_injection_only():
    t_grid = np.linspace(0.0, 10.0, 41)
    traj, _ = corrmat.evolve(corrmat.init_vacuum(6), nn_h(6), 1.0, 3.0, t_grid, dt=0.005)
    assert np.all(np.diff(traj.total_number) > -1e-6)


def test_instability_aborts_with_diagnostic():
    t_grid = np.array([0.0, 50.0])
    with pytest.raises(EngineError, match="reduce dt"):
        corrmat.evolve(corrmat.init_vacuum(4), nn_h(4), 1.0, 40.0, t_grid, dt=0.2)


def test_grid_validation():
    h = nn_h(3)
    with pytest.raises(EngineError):
        corrmat.evolve(corrmat.init_vacuum(3), h, 1.0, 1.0, np.array([1.0, 2.0]))
    with pytest.raises(EngineError):
        corrmat.evolve(corrmat.init_vacuum(3), h, 1.0, 1.0, np.array([0.0, 2.0, 1.0]))


def test_windowed_equals_full_evolution():
    spec = ModelSpec("nn", L=60, gamma_g=1.0, gamma_d=10.0)
    h = nn_h(60)
    t_grid = np.array([0.0, 5.0, 20.0, 50.0])
    tw, Cw = corrmat.evolve(corrmat.init_vacuum(60), h, 1.0, 10.0, t_grid, dt=0.005,
                            window=True)
    tf, Cf = corrmat.evolve(corrmat.init_vacuum(60), h, 1.0, 10.0, t_grid, dt=0.005,
                            window=False)
    assert np.abs(tw.site_density - tf.site_density).max() < 1e-12
    assert np.abs(Cw - Cf).max() < 1e-12


def test_spectral_matches_rk4_nearest_neighbor():
    h = nn_h(24)
    t_grid = np.array([0.0, 1.0, 5.0, 20.0])
    t_rk, _ = corrmat.evolve(corrmat.init_vacuum(24), h, 2.0, 3.0, t_grid, dt=0.002)
    t_sp, _ = corrmat.evolve_spectral(corrmat.init_vacuum(24), h, 2.0, 3.0, t_grid,
                                      tol=1e-10)
    assert np.abs(t_rk.site_density - t_sp.site_density).max() < 1e-7


def test_spectral_matches_rk4_powerlaw():
    spec = ModelSpec("powerlaw", L=16, alpha=1.5, gamma_g=1.0, gamma_d=1.0)
    h = build_single_particle_hamiltonian(spec)
    t_grid = np.array([0.0, 1.0, 5.0, 20.0])
    t_rk, _ = corrmat.evolve(corrmat.init_vacuum(16), h, 1.0, 1.0, t_grid, dt=0.002)
    t_sp, _ = corrmat.evolve_spectral(corrmat.init_vacuum(16), h, 1.0, 1.0, t_grid,
                                      tol=1e-10)
    assert np.abs(t_rk.site_density - t_sp.site_density).max() < 1e-7


def test_spectral_matches_oracle_small_chain():
    spec = ModelSpec("nn", L=4, J=1.0, gamma_g=1.0, gamma_d=2.0)
    t_grid = np.array([0.0, 0.5, 2.0])
    traj_o = dense_density_trajectory(spec, t_grid)
    t_sp, _ = corrmat.evolve_spectral(corrmat.init_vacuum(4), nn_h(4), 1.0, 2.0,
                                      t_grid, tol=1e-10)
    assert np.abs(traj_o.site_density - t_sp.site_density).max() < 1e-7
