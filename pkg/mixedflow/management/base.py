import logging

import numpy as np
from django.core.management.base import BaseCommand, CommandError

from ..config import dump_yaml, load_run_config
from ..evolution import TimeGrid
from ..exceptions import MixedFlowError
from ..exports import write_atomic
from ..fem_assembly import assemble
from ..mesh import build_channel_mesh, refine_times
from ..stokes_basis import compute_eigenbasis
from ..utils.pdf import generate_run_pdf

logger = logging.getLogger(__name__)


class RunCommand(BaseCommand):
    """Common flags, configuration loading and error mapping for the run
    commands. Subclasses implement ``run(config, out, options)`` returning
    ``(passed, summary)``."""

    title = "mixedflow run"

    def add_arguments(self, parser):
        parser.add_argument('--config', help="YAML run file merged over the defaults")
        parser.add_argument('--out', help="Run directory (default: the configured output)")
        parser.add_argument('--seed', type=int, help="Random seed")
        parser.add_argument('--refine', type=int, help="Uniform mesh refinement levels")
        parser.add_argument('--pdf', action='store_true', help="Also write summary.pdf")
        self.add_run_arguments(parser)

    def add_run_arguments(self, parser):
        pass

    def overrides(self, options):
        data = {}
        if options.get('seed') is not None:
            data['seed'] = options['seed']
        if options.get('out'):
            data['output'] = options['out']
        if options.get('refine') is not None:
            data['geometry'] = {'refine': options['refine']}
        return data

    def handle(self, *args, **options):
        try:
            config = load_run_config(options.get('config'), self.overrides(options))
            out = config.output_dir
            out.mkdir(parents=True, exist_ok=True)
            write_atomic(out / 'config.yaml', dump_yaml(config.as_dict()))
            passed, summary = self.run(config, out, options)
        except MixedFlowError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code) from exc
        except OSError as exc:
            raise CommandError(f"I/O failure: {exc}", returncode=1) from exc

        if options.get('pdf'):
            generate_run_pdf(out / 'summary.pdf', self.title, summary)
        if not passed:
            raise CommandError(f"{self.title}: checks failed, see {out}", returncode=1)
        self.stdout.write(self.style.SUCCESS(f"{self.title}: all checks passed ({out})"))

    def run(self, config, out, options):
        raise NotImplementedError

    # Shared construction steps.

    def build_mesh(self, config):
        g = config.geometry
        mesh = build_channel_mesh(g.length, g.height, g.nx, g.ny, grading=g.grading)
        return refine_times(mesh, g.refine)

    def build_spaces(self, config):
        return assemble(self.build_mesh(config))

    def build_basis(self, config, spaces=None):
        spaces = spaces or self.build_spaces(config)
        return compute_eigenbasis(spaces, config.n_modes)

    def time_grid(self, config):
        t = config.time
        return TimeGrid(t.t_end, t.intervals, t.gauss_points)

    def rng(self, config):
        return np.random.default_rng(config.seed)

    def say(self, message):
        self.stdout.write(message)

    def warn(self, message):
        self.stderr.write(self.style.WARNING(message))
