from ...exports import write_json, write_vtk
from ...fem_assembly import export_matrices
from ...stokes_basis import orthogonality_report, save_basis
from ..base import RunCommand


class Command(RunCommand):
    help = "Compute the Stokes eigenbasis and check its orthogonality"
    title = "eig"

    def add_run_arguments(self, parser):
        parser.add_argument('--matrices', action='store_true',
                            help="Also write M, K, B and the pressure mass in Matrix Market format")
        parser.add_argument('--vtk-modes', type=int, default=0,
                            help="Write the first N modes as VTK point data")

    def run(self, config, out, options):
        spaces = self.build_spaces(config)
        basis = self.build_basis(config, spaces)
        save_basis(basis, out)
        report = orthogonality_report(basis)
        write_json(out / 'eig_report.json', report, schema='mixedflow.eig_report/1')
        if options.get('matrices'):
            export_matrices(spaces, out)
        n_vtk = min(options.get('vtk_modes') or 0, basis.n_modes)
        if n_vtk:
            nv, nn = spaces.mesh.num_vertices, spaces.n_nodes
            data = {f'phi_{k + 1}': basis.modes[k].reshape(2, nn)[:, :nv].T for k in range(n_vtk)}
            write_vtk(out / 'modes.vtk', spaces.mesh, data, title='mixedflow Stokes modes')
        self.say(f"{basis}; orthogonality {'ok' if report['passed'] else 'FAILED'}")
        summary = {key: report[key] for key in ('n_modes', 'max_l2_defect', 'max_v_defect_relative',
                                                 'max_eigen_residual', 'checks')}
        return report['passed'], {'eigenbasis': summary}
