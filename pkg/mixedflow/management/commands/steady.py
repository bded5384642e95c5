import numpy as np

from ...exports import write_json, write_vtk
from ...fem_assembly import inf_sup_constant
from ...stokes_basis import solve_steady_stokes
from ..base import RunCommand

RESIDUAL_LIMIT = 1e-8


class Command(RunCommand):
    help = "Solve the steady Stokes problem for a seeded random forcing"
    title = "steady"

    def add_run_arguments(self, parser):
        parser.add_argument('--inf-sup', action='store_true', help="Also compute the discrete inf-sup constant")

    def run(self, config, out, options):
        spaces = self.build_spaces(config)
        sigma = config.experiment.amplitude * self.rng(config).standard_normal(spaces.ndof_v)
        solution = solve_steady_stokes(spaces, sigma)
        report = {
            'residual': solution.residual,
            'stability_ratio': solution.stability_ratio,
            'checks': {'residual': solution.residual <= RESIDUAL_LIMIT},
        }
        if options.get('inf_sup'):
            report['inf_sup_constant'] = inf_sup_constant(spaces)
        report['passed'] = all(report['checks'].values())
        write_json(out / 'steady_report.json', report, schema='mixedflow.steady/1')

        nv, nn = spaces.mesh.num_vertices, spaces.n_nodes
        velocity = solution.velocity.reshape(2, nn)[:, :nv].T
        write_vtk(out / 'steady.vtk', spaces.mesh,
                  {'velocity': velocity, 'pressure': solution.pressure}, title='mixedflow steady Stokes')
        self.say(f"Steady Stokes: residual {solution.residual:.3e}, "
                 f"stability ratio {solution.stability_ratio:.4g}, max |u| {np.abs(velocity).max():.4g}")
        return report['passed'], {'steady Stokes': report}
