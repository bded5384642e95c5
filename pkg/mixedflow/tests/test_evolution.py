import numpy as np
from django.test import SimpleTestCase

from mixedflow.evolution import (DataPair, SpectralField, TimeGrid, apply_S, expand_data, modal_data,
                                 phi_functions, random_data, solve_mode_ode, solve_stokes_evolution,
                                 trajectory_rows, uniqueness_defect, verify_energy_inequalities)
from mixedflow.exceptions import ConfigError, DimensionError
from mixedflow.fem_assembly import assemble
from mixedflow.mesh import build_channel_mesh
from mixedflow.stokes_basis import EigenBasis, compute_eigenbasis


def synthetic_basis(lambdas=(1.0, 4.0, 9.0, 16.0, 25.0, 40.0)):
    lambdas = np.asarray(lambdas)
    return EigenBasis(lambdas=lambdas, modes=np.eye(len(lambdas)), spaces=None)


class TimeGridTest(SimpleTestCase):
    def test_shapes(self):
        grid = TimeGrid(2.0, 4, 3)
        self.assertEqual(grid.times.shape, (4, 3))
        self.assertAlmostEqual(grid.tau, 0.5)
        self.assertAlmostEqual(float(grid.weights.sum()), 2.0, places=14)
        self.assertAlmostEqual(float(grid.fine_weights.sum()), 2.0, places=14)
        self.assertEqual(grid.halved().intervals, 8)

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            TimeGrid(0.0, 4)


class PhiFunctionTest(SimpleTestCase):
    def test_closed_forms(self):
        x = np.array([-30.0, -5.0, -2.0, -0.5, 0.0, 0.5, 3.0])
        phi = phi_functions(x, 2)
        np.testing.assert_allclose(phi[0], np.exp(x), rtol=1e-14)
        nonzero = x != 0
        np.testing.assert_allclose(phi[1][nonzero], np.expm1(x[nonzero]) / x[nonzero], rtol=1e-13)
        self.assertAlmostEqual(phi[1][4], 1.0)
        self.assertAlmostEqual(phi[2][4], 0.5)

    def test_continuous_across_series_switch(self):
        phi = phi_functions(np.array([-2.0, -2.0 - 1e-12]), 4)
        np.testing.assert_allclose(phi[:, 0], phi[:, 1], rtol=1e-9)


class ModeOdeTest(SimpleTestCase):
    def test_constant_forcing(self):
        trajectory = solve_mode_ode(1.0, 1.0, 0.0, TimeGrid(1.0, 64))
        self.assertAlmostEqual(trajectory.theta_nodes[-1], 1 - np.exp(-1.0), delta=1e-10)

    def test_linear_forcing_with_initial_value(self):
        lam, a = 2.0, 1.0
        grid = TimeGrid(1.0, 8)
        trajectory = solve_mode_ode(lam, lambda t: t, a, grid)
        t = grid.nodes
        exact = t / lam - 1 / lam ** 2 + (a + 1 / lam ** 2) * np.exp(-lam * t)
        np.testing.assert_allclose(trajectory.theta_nodes, exact, atol=1e-12)
        exact_prime = 1 / lam - lam * (a + 1 / lam ** 2) * np.exp(-lam * grid.times)
        np.testing.assert_allclose(trajectory.theta_prime, exact_prime, atol=1e-12)

    def test_free_decay(self):
        grid = TimeGrid(1.0, 4)
        trajectory = solve_mode_ode(3.0, 0.0, 2.0, grid)
        np.testing.assert_allclose(trajectory.theta_nodes, 2.0 * np.exp(-3.0 * grid.nodes), rtol=1e-13)

    def test_rejects_nonpositive_lambda(self):
        with self.assertRaises(DimensionError):
            solve_mode_ode(0.0, 1.0, 0.0, TimeGrid())

    def test_rejects_bad_samples(self):
        with self.assertRaises(DimensionError):
            solve_mode_ode(1.0, np.zeros(3), 0.0, TimeGrid(1.0, 4))


class StokesEvolutionTest(SimpleTestCase):
    def setUp(self):
        self.basis = synthetic_basis()
        self.grid = TimeGrid(1.0, 32)
        self.rng = np.random.default_rng(7)

    def test_energy_inequalities_for_random_data(self):
        for _ in range(20):
            data = random_data(self.basis, self.grid, self.rng)
            u = solve_stokes_evolution(data)
            report = verify_energy_inequalities(u, data)
            self.assertTrue(report['passed'], report['checks'])
            self.assertLessEqual(report['max_modewise_defect'], 1e-9)

    def test_derivative_integrates_to_the_node_increments(self):
        u = solve_stokes_evolution(random_data(self.basis, self.grid, self.rng))
        _, prime = u.fine
        integrals = np.sum(self.grid.fine_weights * prime, axis=2)
        np.testing.assert_allclose(integrals, np.diff(u.theta_nodes, axis=1), atol=1e-10)

    def test_homogeneous_data(self):
        data = DataPair.zeros(self.basis, self.grid)
        u = solve_stokes_evolution(data)
        self.assertEqual(u.norm_X(), 0.0)
        self.assertTrue(verify_energy_inequalities(u, data)['passed'])

    def test_roundtrip(self):
        data = random_data(self.basis, self.grid, self.rng)
        back = apply_S(solve_stokes_evolution(data))
        self.assertLessEqual((back - data).norm_Y(), 1e-9)

    def test_linearity(self):
        d1 = random_data(self.basis, self.grid, self.rng)
        d2 = random_data(self.basis, self.grid, self.rng)
        combined = solve_stokes_evolution(d1 + 2.0 * d2)
        parts = solve_stokes_evolution(d1) + 2.0 * solve_stokes_evolution(d2)
        self.assertLessEqual((combined - parts).norm_X(), 1e-12)
        self.assertEqual(uniqueness_defect(combined, combined), 0.0)

    def test_halving_keeps_the_norm_for_cubic_forcing(self):
        coef = self.rng.standard_normal(self.basis.n_modes)

        def mu(t):
            return coef[:, None, None] * (1.0 + t - 2.0 * t ** 3)[None]

        a = self.rng.standard_normal(self.basis.n_modes)
        coarse = solve_stokes_evolution(modal_data(self.basis, self.grid, mu, a))
        fine_grid = self.grid.halved()
        fine = solve_stokes_evolution(modal_data(self.basis, fine_grid, mu, a))
        self.assertLess(abs(coarse.norm_X() - fine.norm_X()), 1e-8)
        np.testing.assert_allclose(coarse.theta_nodes[:, -1], fine.theta_nodes[:, -1], atol=1e-12)

    def test_sup_norm_bounds_initial_energy(self):
        data = random_data(self.basis, self.grid, self.rng)
        u = solve_stokes_evolution(data)
        self.assertGreaterEqual(u.sup_V() + 1e-14, data.initial_norm())

    def test_data_shape_validation(self):
        with self.assertRaises(DimensionError):
            DataPair(mu=np.zeros((2, 2, 2)), a=np.zeros(6), basis=self.basis, grid=self.grid)
        with self.assertRaises(DimensionError):
            DataPair(mu=np.zeros((6, 32, 4)), a=np.zeros(5), basis=self.basis, grid=self.grid)

    def test_trajectory_rows(self):
        u = SpectralField.zeros(self.basis, self.grid)
        header, rows = trajectory_rows(u)
        self.assertEqual(len(header), 1 + 2 * self.basis.n_modes)
        self.assertEqual(len(rows), self.grid.intervals * self.grid.gauss_points)


class ExpandDataTest(SimpleTestCase):
    def test_mode_forcing_expands_to_a_unit_vector(self):
        spaces = assemble(build_channel_mesh(3.0, 1.0, 6, 2))
        basis = compute_eigenbasis(spaces, 3)
        grid = TimeGrid(1.0, 4)
        data = expand_data(basis.modes[1], basis.modes[0], basis, grid)
        np.testing.assert_allclose(data.mu[:, 0, 0], [0.0, 1.0, 0.0], atol=1e-10)
        np.testing.assert_allclose(data.a, [1.0, 0.0, 0.0], atol=1e-10)
        timed = expand_data(lambda t: t * basis.modes[2], None, basis, grid)
        np.testing.assert_allclose(timed.mu[2], grid.times, atol=1e-10)

    def test_bessel_inequality(self):
        spaces = assemble(build_channel_mesh(3.0, 1.0, 6, 2))
        basis = compute_eigenbasis(spaces, 5)
        grid = TimeGrid(2.0, 4)
        rng = np.random.default_rng(9)
        f, u0 = rng.standard_normal(spaces.ndof_v), rng.standard_normal(spaces.ndof_v)
        data = expand_data(f, u0, basis, grid)
        self.assertLessEqual(data.forcing_norm() ** 2, grid.t_end * float(f @ (spaces.M @ f)) * (1 + 1e-12))
        self.assertLessEqual(float(np.sum(data.a ** 2)), float(u0 @ (spaces.M @ u0)) * (1 + 1e-12))
