import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import yaml
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from mixedflow.exceptions import RootFindingError

TINY_RUN = {
    'geometry': {'nx': 6, 'ny': 2},
    'n_modes': 4,
    'time': {'intervals': 4},
    'experiment': {'scales': [1e-3, 1e-2], 'trials': 2},
    'corner': {'n_contour': 100, 'grid_re': 9, 'grid_im': 5},
}


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.root = Path(tmp.name)
        self.config = self.root / 'run.yaml'
        self.config.write_text(yaml.safe_dump(TINY_RUN))

    def call(self, name, out='run', config=None, **options):
        stdout = StringIO()
        call_command(name, config=str(config or self.config), out=str(self.root / out),
                     stdout=stdout, stderr=StringIO(), **options)
        return stdout.getvalue()

    def report(self, out, name):
        return json.loads((self.root / out / name).read_text())

    def variant(self, **sections):
        run = {key: dict(value) if isinstance(value, dict) else value for key, value in TINY_RUN.items()}
        for key, value in sections.items():
            run[key] = {**run.get(key, {}), **value} if isinstance(value, dict) else value
        path = self.root / f'variant{len(list(self.root.glob("variant*")))}.yaml'
        path.write_text(yaml.safe_dump(run))
        return path


class DefaultsCommandTest(CommandTestCase):
    def test_prints_yaml(self):
        stdout = StringIO()
        call_command('defaults', stdout=stdout)
        data = yaml.safe_load(stdout.getvalue())
        self.assertEqual(data['n_modes'], 24)
        self.assertEqual(data['corner']['re_min'], -20.0)


class MeshAndEigCommandTest(CommandTestCase):
    def test_mesh(self):
        output = self.call('mesh')
        self.assertIn('all checks passed', output)
        report = self.report('run', 'mesh_report.json')
        self.assertEqual(report['schema'], 'mixedflow.mesh_report/1')
        self.assertEqual(len(report['corner_points']), 4)
        self.assertTrue((self.root / 'run' / 'mesh.vtk').exists())
        self.assertTrue((self.root / 'run' / 'config.yaml').exists())

    def test_eig(self):
        self.call('eig', matrices=True, vtk_modes=2, pdf=True)
        report = self.report('run', 'eig_report.json')
        self.assertTrue(report['passed'])
        self.assertEqual(len(report['lambdas']), 4)
        for name in ('basis.json', 'modes.csv', 'M.mtx', 'modes.vtk', 'summary.pdf'):
            self.assertTrue((self.root / 'run' / name).exists(), name)

    def test_single_mode(self):
        self.call('eig', config=self.variant(n_modes=1))
        report = self.report('run', 'eig_report.json')
        self.assertEqual(report['n_modes'], 1)
        self.assertGreater(report['lambdas'][0], 0)

    def test_invalid_geometry_exits_with_config_code(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('eig', config=self.variant(geometry={'nx': 0}))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_steady(self):
        self.call('steady', inf_sup=True, refine=1)
        report = self.report('run', 'steady_report.json')
        self.assertTrue(report['passed'])
        self.assertGreater(report['inf_sup_constant'], 0)


class EvolutionCommandTest(CommandTestCase):
    def test_homogeneous_forcing_with_halving(self):
        self.call('stokes', config=self.variant(experiment={'forcing': 'zero'}), dt_halving=True)
        report = self.report('run', 'stokes_report.json')
        self.assertTrue(report['passed'])
        self.assertTrue(report['checks']['roundtrip'])
        self.assertLessEqual(report['roundtrip_defect'], 1e-9)
        self.assertLess(report['dt_halving']['change'], 1e-8)
        self.assertTrue((self.root / 'run' / 'trajectories.csv').exists())

    def test_reports_are_deterministic(self):
        self.call('stokes', out='first', seed=7)
        self.call('stokes', out='second', seed=7)
        first = (self.root / 'first' / 'stokes_report.json').read_bytes()
        second = (self.root / 'second' / 'stokes_report.json').read_bytes()
        self.assertEqual(first, second)
        self.assertTrue(json.loads(first)['passed'])

    def test_manufactured_preset(self):
        self.call('ns', preset='manufactured')
        report = self.report('run', 'ns_report.json')
        self.assertTrue(report['passed'])
        self.assertLessEqual(report['error_X'], 1e-8)

    def test_absurd_preset_fails_gracefully(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('ns', preset='absurd')
        self.assertEqual(ctx.exception.returncode, 1)
        report = self.report('run', 'ns_report.json')
        self.assertFalse(report['newton']['converged'])

    def test_perturb(self):
        self.call('perturb')
        report = self.report('run', 'perturb_report.json')
        self.assertTrue(report['passed'], report['checks'])
        self.assertEqual(len(report['trials']), 4)
        self.assertTrue((self.root / 'run' / 'perturb_trials.csv').exists())


class CornerCommandTest(CommandTestCase):
    def test_default_window(self):
        output = self.call('corner', no_fit=True)
        self.assertIn('Winding count 1', output)
        roots = self.report('run', 'roots.json')
        self.assertEqual(roots['winding_count'], 1)
        self.assertAlmostEqual(roots['roots'][0]['im'], -1.0, delta=1e-10)
        report = self.report('run', 'corner_report.json')
        self.assertTrue(report['passed'], report['checks'])
        self.assertAlmostEqual(report['outside_strip_root']['im'], -2.0, delta=1e-10)
        self.assertTrue(report['checks']['outside_strip_root'])
        self.assertTrue((self.root / 'run' / 'determinant_grid.csv').exists())

    def test_missing_outside_strip_root_fails_the_run(self):
        with mock.patch('mixedflow.management.commands.corner.find_root',
                        side_effect=RootFindingError('no convergence')):
            with self.assertRaises(CommandError) as ctx:
                self.call('corner', no_fit=True)
        self.assertEqual(ctx.exception.returncode, 1)
        report = self.report('run', 'corner_report.json')
        self.assertFalse(report['checks']['outside_strip_root'])

    def test_root_free_window(self):
        self.call('corner', config=self.variant(corner={'im_min': -0.9, 'im_max': -0.1}), no_fit=True)
        self.assertEqual(self.report('run', 'roots.json')['winding_count'], 0)

    def test_window_through_a_root_suggests_a_nudge(self):
        variant = self.variant(corner={'re_min': -1.0, 're_max': 1.0, 'im_min': -1.0, 'im_max': -0.5,
                                       'n_contour': 401})
        with self.assertRaises(CommandError) as ctx:
            self.call('corner', config=variant, no_fit=True)
        self.assertIn('corner.im_min', str(ctx.exception))

    def test_singular_fit(self):
        self.call('corner')
        fit = self.report('run', 'singular_fit.json')
        self.assertEqual(len(fit['c']), 4)
