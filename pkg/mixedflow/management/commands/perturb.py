import numpy as np

from ...evolution import random_data
from ...exports import write_csv, write_json
from ...navier_stokes import (ConvectionTensor, perturbation_experiment, scale_to_stokes_norm,
                              solve_navier_stokes, summarize_experiment)
from ..base import RunCommand
from .ns import newton_options

SHIFT_RATIO_SPREAD = 1.2


class Command(RunCommand):
    help = "Perturb the data of a solved Navier-Stokes problem and record the solution shifts"
    title = "perturb"

    def run(self, config, out, options):
        basis = self.build_basis(config)
        grid = self.time_grid(config)
        tensor = ConvectionTensor(basis)
        exp = config.experiment
        opts = newton_options(config)
        data = scale_to_stokes_norm(random_data(basis, grid, self.rng(config)), exp.target_norm)
        base = solve_navier_stokes(data, tensor, opts)
        reports = perturbation_experiment(data, tensor, exp.scales, exp.trials, config.seed + 1, opts, base)

        spreads = []
        for trial in range(exp.trials):
            ratios = [r.shift_ratio for r in reports if r.trial == trial and r.scale > 0 and r.converged]
            if len(ratios) > 1:
                spreads.append(max(ratios) / min(ratios) if min(ratios) > 0 else np.inf)
        checks = {
            'base_converged': base[1].converged,
            'all_converged': all(r.converged for r in reports),
            'linear_shift_scaling': all(s <= SHIFT_RATIO_SPREAD for s in spreads),
        }
        summary = summarize_experiment(reports)
        report = {
            'base': base[1].as_dict(),
            'summary': summary,
            'trials': [r.as_dict() for r in reports],
            'max_shift_ratio_spread': max(spreads) if spreads else None,
            'checks': checks,
            'passed': all(checks.values()),
        }
        write_json(out / 'perturb_report.json', report, schema='mixedflow.perturb/1')
        write_csv(out / 'perturb_trials.csv',
                  ['trial', 'scale', 'perturbation_norm', 'solution_shift', 'shift_ratio',
                   'linear_prediction', 'newton_iterations', 'converged'],
                  [[r.trial, r.scale, r.perturbation_norm, r.solution_shift, r.shift_ratio,
                    r.linear_prediction, r.newton_iterations, int(r.converged)] for r in reports])
        write_csv(out / 'newton_history.csv', ['trial', 'scale', 'iteration', 'residual'],
                  [[r.trial, r.scale, k, res] for r in reports for k, res in enumerate(r.residual_history)])
        for row in summary:
            self.say(f"scale {row['scale']:.1e}: {row['trials']} trials, mean shift ratio "
                     f"{row['mean_shift_ratio']}, failures {row['failures']}")
        return report['passed'], {'perturbation experiment': {'checks': checks, 'summary': summary}}
