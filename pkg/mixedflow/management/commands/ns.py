from ...evolution import random_data
from ...exports import write_csv, write_json
from ...navier_stokes import (ConvectionTensor, NewtonOptions, manufactured_problem,
                              scale_to_stokes_norm, solve_navier_stokes)
from ..base import RunCommand

MANUFACTURED_LIMIT = 1e-8
ABSURD_AMPLITUDE = 1e6


def newton_options(config):
    n = config.newton
    return NewtonOptions(max_iters=n.max_iters, abs_tol=n.abs_tol, damping=n.damping, linear_tol=n.linear_tol)


class Command(RunCommand):
    help = "Solve the modal Navier-Stokes system by Newton's method"
    title = "ns"

    def add_run_arguments(self, parser):
        parser.add_argument('--preset', choices=['manufactured', 'small', 'absurd'],
                            help="manufactured: recover a known solution; small: data with "
                                 "‖S⁻¹d‖_X = target_norm; absurd: forcing amplitude 1e6")

    def overrides(self, options):
        data = super().overrides(options)
        if options.get('preset'):
            data['experiment'] = {'preset': options['preset']}
        return data

    def run(self, config, out, options):
        basis = self.build_basis(config)
        grid = self.time_grid(config)
        tensor = ConvectionTensor(basis)
        rng = self.rng(config)
        preset = config.experiment.preset
        exact = None
        if preset == 'manufactured':
            exact, data = manufactured_problem(basis, grid, tensor, rng, config.experiment.target_norm)
        elif preset == 'small':
            data = scale_to_stokes_norm(random_data(basis, grid, rng), config.experiment.target_norm)
        else:
            data = random_data(basis, grid, rng) * (ABSURD_AMPLITUDE * config.experiment.amplitude)

        u, newton = solve_navier_stokes(data, tensor, newton_options(config))
        report = {
            'preset': preset,
            'newton': newton.as_dict(),
            'norm_X': u.norm_X(),
            'data_norm_Y': data.norm_Y(),
            'checks': {'converged': newton.converged},
        }
        if exact is not None:
            report['error_X'] = (u - exact).norm_X()
            report['checks']['manufactured_error'] = report['error_X'] <= MANUFACTURED_LIMIT
        report['passed'] = all(report['checks'].values())

        rows = [[k, r, newton.step_lengths[k - 1] if k else 1.0,
                 newton.quadratic_ratios[k - 1] if k else 0.0]
                for k, r in enumerate(newton.residuals)]
        write_csv(out / 'newton_history.csv', ['iteration', 'residual', 'step', 'quadratic_ratio'], rows)
        write_json(out / 'ns_report.json', report, schema='mixedflow.ns/1')
        self.say(f"Newton ({preset}): {newton.reason} after {newton.iterations} iterations, "
                 f"residual {newton.final_residual:.3e}")
        summary = {key: report[key] for key in report if key != 'newton'}
        summary['iterations'] = newton.iterations
        return report['passed'], {'Navier-Stokes': summary}
