import tempfile
from pathlib import Path

import yaml
from django.conf import settings
from django.test import SimpleTestCase

from mixedflow.config import deep_merge, dump_yaml, load_run_config, read_run_file
from mixedflow.exceptions import ConfigError


class RunConfigTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, text):
        path = Path(self.tmp.name) / 'run.yaml'
        path.write_text(text)
        return path

    def test_defaults(self):
        config = load_run_config()
        self.assertEqual(config.n_modes, 24)
        self.assertEqual((config.geometry.nx, config.geometry.ny), (48, 16))
        self.assertEqual(config.experiment.scales, (1e-3, 1e-2))
        self.assertEqual(config.corner.im_max, -0.005)
        self.assertEqual(config.as_dict(), settings.MIXEDFLOW_DEFAULTS)

    def test_run_file_then_overrides(self):
        path = self.write("geometry:\n  nx: 12\nseed: 3\n")
        config = load_run_config(path, {'seed': 5})
        self.assertEqual(config.geometry.nx, 12)
        self.assertEqual(config.geometry.ny, 16)
        self.assertEqual(config.seed, 5)

    def test_dumped_config_reloads(self):
        config = load_run_config(overrides={'n_modes': 6})
        path = self.write(dump_yaml(config.as_dict()))
        self.assertEqual(load_run_config(path), config)

    def test_empty_run_file(self):
        self.assertEqual(read_run_file(self.write('')), {})

    def test_invalid_values(self):
        for overrides in ({'geometry': {'nx': 0}}, {'n_modes': 0}, {'newton': {'damping': 1.5}},
                          {'experiment': {'preset': 'huge'}}, {'experiment': {'scales': []}},
                          {'corner': {'im_min': 0.0, 'im_max': -1.0}}, {'seed': True},
                          {'time': {'intervals': 2.5}}):
            with self.subTest(overrides=overrides):
                with self.assertRaises(ConfigError):
                    load_run_config(overrides=overrides)

    def test_unknown_key(self):
        with self.assertRaises(ConfigError):
            deep_merge({'a': {'b': 1}}, {'a': {'c': 2}})
        with self.assertRaises(ConfigError):
            deep_merge({'a': {'b': 1}}, {'a': 3})

    def test_unreadable_files(self):
        with self.assertRaises(ConfigError):
            read_run_file(Path(self.tmp.name) / 'missing.yaml')
        with self.assertRaises(ConfigError):
            read_run_file(self.write("geometry: [1, 2\n"))
        with self.assertRaises(ConfigError):
            read_run_file(self.write("- 1\n- 2\n"))

    def test_config_error_exit_code(self):
        self.assertEqual(ConfigError('x').exit_code, 2)
        self.assertIsInstance(yaml.safe_load(dump_yaml(settings.MIXEDFLOW_DEFAULTS)), dict)
