import numpy as np

from ...evolution import (modal_data, random_modal_forcing, solve_stokes_evolution,
                          verify_energy_inequalities, write_trajectories)
from ...exports import write_json
from ..base import RunCommand

HALVING_LIMIT = 1e-8
ROUNDTRIP_LIMIT = 1e-9


def stokes_data(basis, grid, config, rng):
    """Modal data for the configured forcing; returns the forcing function
    too so a refined time grid samples the same data."""
    mu, a = random_modal_forcing(basis, rng, grid.t_end)
    amplitude = config.experiment.amplitude
    if config.experiment.forcing == 'zero':
        def mu(t):
            return np.zeros((basis.n_modes,) + np.shape(t))
    return (lambda t: amplitude * mu(t)), amplitude * a


class Command(RunCommand):
    help = "Exact Stokes evolution in the eigenbasis with energy-inequality checks"
    title = "stokes"

    def add_run_arguments(self, parser):
        parser.add_argument('--dt-halving', action='store_true',
                            help="Re-solve on the halved time grid and compare ‖u‖_X")

    def run(self, config, out, options):
        basis = self.build_basis(config)
        grid = self.time_grid(config)
        mu, a = stokes_data(basis, grid, config, self.rng(config))
        data = modal_data(basis, grid, mu, a)
        u = solve_stokes_evolution(data)
        report = verify_energy_inequalities(u, data)
        roundtrip = (u.forcing - data.mu, u.theta_nodes[:, 0] - data.a)
        report['roundtrip_defect'] = float(max(np.abs(roundtrip[0]).max(), np.abs(roundtrip[1]).max()))
        scale = max(1.0, float(np.abs(data.mu).max()), float(np.abs(data.a).max()))
        report['checks']['roundtrip'] = report['roundtrip_defect'] <= ROUNDTRIP_LIMIT * scale

        if options.get('dt_halving'):
            fine = grid.halved()
            u_fine = solve_stokes_evolution(modal_data(basis, fine, mu, a))
            change = abs(u_fine.norm_X() - u.norm_X())
            report['dt_halving'] = {'norm_X': u.norm_X(), 'norm_X_halved': u_fine.norm_X(), 'change': change}
            report['checks']['dt_halving'] = change < HALVING_LIMIT
        report['passed'] = all(report['checks'].values())

        write_trajectories(u, out / 'trajectories.csv')
        write_json(out / 'stokes_report.json', report, schema='mixedflow.stokes/1')
        self.say(f"‖u‖_X = {report['norm_X']:.6g}, ‖d‖_Y = {report['norm_Y']:.6g}, "
                 f"ratio {report['apriori_ratio']:.4g}")
        for name, ok in report['checks'].items():
            if not ok:
                self.warn(f"check {name} failed")
        summary = {key: report[key] for key in ('checks', 'norm_X', 'norm_Y', 'apriori_ratio',
                                                'max_modewise_defect')}
        return report['passed'], {'Stokes evolution': summary}
