import tempfile

import numpy as np
from django.test import SimpleTestCase

from mixedflow.exceptions import DimensionError, EigenSolveError
from mixedflow.fem_assembly import (assemble, evaluate_at, inner_V, interpolate, interpolate_pressure,
                                    pressure_norm)
from mixedflow.mesh import DIRICHLET, build_channel_mesh, refine
from mixedflow.stokes_basis import (compute_eigenbasis, divergence_free_basis, load_basis, norm_D, norm_L2,
                                    norm_V, orthogonality_report, project, reconstruct, save_basis,
                                    solve_steady_stokes)


class EigenBasisTest(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.spaces = assemble(build_channel_mesh(3.0, 1.0, 12, 4))
        cls.basis = compute_eigenbasis(cls.spaces, 6)

    def test_orthogonality_report_passes(self):
        report = orthogonality_report(self.basis)
        self.assertTrue(report['passed'], report['checks'])
        self.assertEqual(report['n_modes'], 6)
        self.assertLessEqual(report['max_l2_defect'], 1e-8)

    def test_first_eigenvalue_is_the_wall_profile(self):
        # (sin πy, 0) with zero pressure satisfies walls and the do-nothing ends
        self.assertAlmostEqual(self.basis.lambdas[0], np.pi ** 2, delta=1e-2)
        self.assertTrue(np.all(np.diff(self.basis.lambdas) >= 0))

    def test_single_mode(self):
        basis = compute_eigenbasis(self.spaces, 1)
        self.assertEqual(basis.n_modes, 1)
        self.assertGreater(basis.lambdas[0], 0)

    def test_too_many_modes(self):
        dim = divergence_free_basis(self.spaces).shape[1]
        with self.assertRaises(EigenSolveError):
            compute_eigenbasis(self.spaces, dim + 1)
        with self.assertRaises(EigenSolveError):
            compute_eigenbasis(self.spaces, 0)

    def test_modal_norms(self):
        a = np.array([1.0, -0.5, 0.25, 0.0, 0.1, 2.0])
        u = reconstruct(self.basis, a)
        np.testing.assert_allclose(project(self.basis, u), a, atol=1e-10)
        self.assertAlmostEqual(norm_V(a, self.basis), np.sqrt(inner_V(self.spaces, u, u)), places=6)
        self.assertAlmostEqual(norm_L2(a, self.basis), np.linalg.norm(a), places=12)
        self.assertAlmostEqual(norm_D(a, self.basis), np.linalg.norm(self.basis.lambdas * a), places=10)
        with self.assertRaises(DimensionError):
            norm_V(np.ones(3), self.basis)

    def test_eigenvalues_settle_under_refinement(self):
        fine = compute_eigenbasis(assemble(refine(self.spaces.mesh)), 5)
        change = np.abs(fine.lambdas - self.basis.lambdas[:5]) / self.basis.lambdas[:5]
        self.assertLess(change.max(), 0.02)

    def test_full_basis_reproduces_divergence_free_fields(self):
        spaces = assemble(build_channel_mesh(3.0, 1.0, 6, 2))
        Z = divergence_free_basis(spaces)
        basis = compute_eigenbasis(spaces, Z.shape[1])
        u = Z @ np.random.default_rng(5).standard_normal(Z.shape[1])
        np.testing.assert_allclose(reconstruct(basis, project(basis, u)), u, atol=1e-10 * np.abs(u).max())

    def test_save_and_load(self):
        with tempfile.TemporaryDirectory() as tmp:
            save_basis(self.basis, tmp)
            loaded = load_basis(tmp, self.spaces)
            np.testing.assert_array_equal(loaded.lambdas, self.basis.lambdas)
            np.testing.assert_array_equal(loaded.modes, self.basis.modes)
            with self.assertRaises(DimensionError):
                load_basis(tmp, assemble(build_channel_mesh(1.0, 1.0, 2, 2)))


class SteadyStokesTest(SimpleTestCase):
    def test_wall_profile_is_recovered(self):
        spaces = assemble(build_channel_mesh(3.0, 1.0, 12, 4))
        sigma = interpolate(spaces, lambda x, y: (np.pi ** 2 * np.sin(np.pi * y), 0.0 * x))
        solution = solve_steady_stokes(spaces, sigma)
        self.assertLessEqual(solution.residual, 1e-8)
        points = np.array([[1.5, 0.5], [0.1, 0.25], [2.9, 0.8]])
        velocity, pressure = evaluate_at(spaces, solution.velocity, solution.pressure, points)
        np.testing.assert_allclose(velocity[:, 0], np.sin(np.pi * points[:, 1]), atol=2e-2)
        np.testing.assert_allclose(velocity[:, 1], 0.0, atol=2e-2)
        np.testing.assert_allclose(pressure, 0.0, atol=0.1)

    def test_zero_forcing(self):
        spaces = assemble(build_channel_mesh(3.0, 1.0, 6, 2))
        solution = solve_steady_stokes(spaces, np.zeros(spaces.ndof_v))
        self.assertEqual(np.abs(solution.velocity).max(), 0.0)
        self.assertEqual(solution.stability_ratio, 0.0)

    def test_enclosed_cavity_fixes_the_pressure_mean(self):
        mesh = build_channel_mesh(1.0, 1.0, 4, 4, gamma_spec={'left': DIRICHLET, 'right': DIRICHLET})
        spaces = assemble(mesh)
        sigma = interpolate(spaces, lambda x, y: (y - 0.5, 0.0 * x))
        solution = solve_steady_stokes(spaces, sigma)
        self.assertLessEqual(solution.residual, 1e-8)
        self.assertAlmostEqual(float(np.ones(spaces.ndof_p) @ (spaces.Mp @ solution.pressure)), 0.0, places=10)

    def test_wrong_forcing_shape(self):
        spaces = assemble(build_channel_mesh(3.0, 1.0, 6, 2))
        with self.assertRaises(DimensionError):
            solve_steady_stokes(spaces, np.zeros(5))

    def test_gradient_forcing_goes_into_the_pressure(self):
        # ψ vanishes on the open ends, so (0, ψ) solves the continuous problem
        def psi(x, y):
            return np.sin(np.pi * x / 3) * np.cos(np.pi * y)

        def grad_psi(x, y):
            return (np.pi / 3 * np.cos(np.pi * x / 3) * np.cos(np.pi * y),
                    -np.pi * np.sin(np.pi * x / 3) * np.sin(np.pi * y))

        mesh = build_channel_mesh(3.0, 1.0, 12, 4)
        velocities, pressures = [], []
        for candidate in (mesh, refine(mesh)):
            spaces = assemble(candidate)
            solution = solve_steady_stokes(spaces, interpolate(spaces, grad_psi))
            velocities.append(np.abs(solution.velocity).max())
            pressures.append(pressure_norm(spaces, solution.pressure - interpolate_pressure(spaces, psi)))
        self.assertLessEqual(velocities[0], 2e-3)
        self.assertLessEqual(pressures[0], 2e-2)
        self.assertLess(velocities[1], velocities[0])
        self.assertLess(pressures[1], pressures[0])

    def test_self_convergence_in_energy(self):
        coef = np.random.default_rng(11).standard_normal((2, 3))

        def forcing(x, y):
            modes = np.stack([np.ones_like(x), np.cos(np.pi * x / 3), np.sin(np.pi * y)])
            return tuple(np.tensordot(coef[c], modes, axes=1) for c in range(2))

        meshes = [build_channel_mesh(3.0, 1.0, 12, 4)]
        meshes += [refine(meshes[-1]), refine(refine(meshes[-1]))]
        levels = []
        for mesh in meshes:
            spaces = assemble(mesh)
            levels.append((spaces, solve_steady_stokes(spaces, interpolate(spaces, forcing))))
        differences = []
        for (coarse, rough), (fine, smooth) in zip(levels, levels[1:]):
            prolonged, _ = evaluate_at(coarse, rough.velocity, rough.pressure, fine.node_coords)
            w = np.concatenate([prolonged[:, 0], prolonged[:, 1]]) - smooth.velocity
            differences.append(np.sqrt(inner_V(fine, w, w)))
        self.assertGreater(differences[0], 0.0)
        self.assertGreater(differences[0] / differences[1], 1.5)

    def test_stability_ratio_is_mesh_independent(self):
        rng = np.random.default_rng(13)
        mesh = build_channel_mesh(3.0, 1.0, 6, 2)
        worst = []
        for candidate in (mesh, refine(mesh)):
            spaces = assemble(candidate)
            ratios = [solve_steady_stokes(spaces, rng.standard_normal(spaces.ndof_v)).stability_ratio
                      for _ in range(20)]
            self.assertTrue(np.all(np.isfinite(ratios)))
            worst.append(max(ratios))
        self.assertGreater(min(worst), 0.0)
        self.assertLessEqual(max(worst) / min(worst), 2.0)
