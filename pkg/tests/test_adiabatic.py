import math

import numpy as np
import pytest
from scipy.integrate import quad

from dephfill import adiabatic as ad
from dephfill import corrmat
from dephfill.adiabatic import AdiabaticError
from dephfill.models import ModelSpec, build_single_particle_hamiltonian


def test_generator_worked_example():
    gen = ad.build_generator(1.0, 10.0, 1.0, 3)
    assert gen.alpha1 == pytest.approx(0.2)
    assert gen.alpha2 == pytest.approx(2.0 / 10.5)
    expected = np.array([
        [-1.190476, 0.190476, 0.0],
        [0.190476, -0.390476, 0.2],
        [0.0, 0.2, -0.2],
    ])
    assert np.allclose(gen.A, expected, atol=1e-6)
    assert np.array_equal(gen.pvec, [1.0, 0.0, 0.0])


def test_generator_structure():
    gen = ad.build_generator(2.0, 25.0, 1.0, 12)
    A = gen.A
    assert np.array_equal(A, A.T)
    sums = A.sum(axis=1)
    assert sums[0] == pytest.approx(-gen.gamma_g)
    assert np.abs(sums[1:]).max() < 1e-12
    assert np.all(np.diag(A, 1) > 0)
    assert gen.alpha1 >= gen.alpha2 > 0


def test_generator_no_source_limit():
    gen = ad.build_generator(0.0, 10.0, 1.0, 5)
    assert gen.alpha2 == pytest.approx(gen.alpha1)
    assert gen.A[0, 0] == pytest.approx(-gen.alpha2)
    assert not np.any(gen.pvec)


def test_generator_rejects_zero_dephasing():
    with pytest.raises(AdiabaticError):
        ad.build_generator(1.0, 0.0, 1.0, 5)


def test_solve_at_zero_and_infinity():
    gen = ad.build_generator(1.5, 20.0, 1.0, 8)
    assert np.abs(ad.solve_adiabatic(gen, 0.0)).max() == 0.0
    n_inf = ad.solve_adiabatic(gen, 1e9)
    assert np.abs(n_inf - 1.0).max() < 1e-8


def test_solve_rejects_singular_source_free_generator():
    gen = ad.build_generator(0.0, 10.0, 1.0, 5)
    with pytest.raises(AdiabaticError, match="zero"):
        ad.solve_adiabatic(gen, 1.0)


@pytest.mark.parametrize("t", [0.0, 0.3, 4.0, 120.0])
def test_eig_and_expm_paths_agree(t):
    gen = ad.build_generator(5.0, 30.0, 1.0, 40)
    a = ad.solve_adiabatic(gen, t)
    b = ad.solve_adiabatic_expm(gen, t)
    assert np.abs(a - b).max() < 1e-10


def test_special_mode_eigenvalues_l2():
    lam = ad.special_mode_eigenvalues(1.0, 2)
    ref = np.linalg.eigvalsh(np.array([[-2.0, 1.0], [1.0, -1.0]]))
    assert np.allclose(np.sort(lam), np.sort(ref), atol=1e-12)
    assert lam[0] == pytest.approx(-0.381966, abs=1e-6)
    assert lam[1] == pytest.approx(-2.618034, abs=1e-6)


@pytest.mark.parametrize("L", [2, 5, 20])
def test_special_mode_vectors_orthonormal_complete(L):
    U = ad.special_mode_vectors(L)
    assert np.abs(U.T @ U - np.eye(L)).max() < 1e-10
    assert np.abs(U @ U.T - np.eye(L)).max() < 1e-10


def test_special_mode_diagonalizes_generator():
    L = 7
    gen = ad.special_case_generator(10.0, 1.0, L)
    U = ad.special_mode_vectors(L)
    lam = ad.special_mode_eigenvalues(gen.alpha1, L)
    assert np.abs(U.T @ gen.A @ U - np.diag(lam)).max() < 1e-12


def test_spectral_formula_matches_solver():
    # same simplified generator, two independent evaluation paths
    n_formula = ad.spectral_density_special(10.0, 1.0, 50, 100.0)
    gen = ad.special_case_generator(10.0, 1.0, 50)
    n_solve = ad.solve_adiabatic(gen, 100.0)
    assert np.abs(n_formula - n_solve).max() < 1e-10


def test_spectral_formula_early_time_fills_first_site_only():
    t = 1e-6
    n = ad.spectral_density_special(10.0, 1.0, 30, t)
    alpha1 = 0.2
    assert n[0] == pytest.approx(alpha1 * t, rel=1e-3)
    assert np.abs(n[1:]).max() < alpha1 * t * 1e-2


def test_spectral_formula_single_site_and_validation():
    val = ad.spectral_density_special(10.0, 1.0, 20, 5.0, sites=1)
    full = ad.spectral_density_special(10.0, 1.0, 20, 5.0)
    assert val == pytest.approx(full[0])
    with pytest.raises(AdiabaticError):
        ad.spectral_density_special(10.0, 1.0, 20, 5.0, sites=21)


def test_continuum_profile_values():
    assert ad.continuum_profile(0.0, 2.0, 0.2) == 1.0
    x_star = math.sqrt(4 * 0.2 * 3.0)
    assert ad.continuum_profile(x_star, 3.0, 0.2) == pytest.approx(0.157299, abs=1e-6)
    assert ad.continuum_profile(1e4, 1.0, 0.2) == 0.0
    xs = np.linspace(0, 10, 50)
    prof = ad.continuum_profile(xs, 5.0, 0.3)
    assert np.all(np.diff(prof) <= 0)


def test_asymptotics_values():
    N, D = ad.asymptotics(10.0, 1.0, 1.0)
    assert D == pytest.approx(0.504627, abs=1e-6)
    assert N == pytest.approx(D)
    _, D100 = ad.asymptotics(100.0, 1.0, 7.0)
    assert D100 == pytest.approx(0.159577, abs=1e-6)
    N0, _ = ad.asymptotics(10.0, 1.0, 0.0)
    assert N0 == 0.0
    # N = D sqrt(t) identically
    for t in (0.5, 3.0, 888.0):
        N_t, D_t = ad.asymptotics(17.0, 1.0, t)
        assert N_t == pytest.approx(D_t * math.sqrt(t), rel=1e-14)


@pytest.mark.parametrize("alpha1,t", [(0.2, 10.0), (0.02, 400.0), (1.0, 3.0)])
def test_profile_integral_matches_sqrt_law(alpha1, t):
    # integral of the profile = sqrt(4 alpha1 t / pi), quadrature oracle
    val, _ = quad(lambda x: ad.continuum_profile(x, t, alpha1), 0.0, np.inf,
                  epsabs=1e-12, epsrel=1e-10)
    assert val == pytest.approx(math.sqrt(4.0 * alpha1 * t / math.pi), rel=1e-6)


@pytest.mark.slow
def test_adiabatic_tracks_exact_engine_as_dephasing_grows():
    # relative N(t) error decreases monotonically with gamma_d at fixed t
    t_check = 30.0
    errs = []
    for gd in (10.0, 30.0, 100.0):
        spec = ModelSpec("nn", L=40, gamma_g=1.0, gamma_d=gd)
        h = build_single_particle_hamiltonian(spec)
        t_grid = np.array([0.0, t_check])
        traj, _ = corrmat.evolve(corrmat.init_vacuum(40), h, 1.0, gd, t_grid,
                                 dt=min(0.01, 0.05 / gd))
        gen = ad.build_generator(1.0, gd, 1.0, 40)
        N_ad = ad.solve_adiabatic(gen, t_check).sum()
        errs.append(abs(N_ad - traj.total_number[-1]) / traj.total_number[-1])
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.slow
def test_diffusion_constant_independent_of_gamma_g():
    # fitted D at L=1000, gamma_d=50 agrees pairwise within 3% across gamma_g
    from dephfill.analysis import fit_diffusion_constant
    from dephfill.trajectory import make_time_grid

    Ds = []
    for gg in (1.0, 10.0, 100.0):
        gen = ad.build_generator(gg, 50.0, 1.0, 1000)
        t_grid = make_time_grid(2e4, 160, "log", t_min=1.0)
        traj = ad.adiabatic_trajectory(gen, t_grid)
        fit = fit_diffusion_constant(traj, L=1000)
        assert fit.ok
        Ds.append(fit.prefactor)
    for a in Ds:
        for b in Ds:
            assert abs(a - b) / max(a, b) < 0.03
