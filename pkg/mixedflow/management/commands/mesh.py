from ...exports import write_json, write_mesh
from ...mesh import DIRICHLET, NEUMANN
from ..base import RunCommand


class Command(RunCommand):
    help = "Build the channel mesh and write mesh.json / mesh.vtk"
    title = "mesh"

    def run(self, config, out, options):
        mesh = self.build_mesh(config)
        write_mesh(out, mesh)
        report = {
            'num_vertices': mesh.num_vertices,
            'num_triangles': mesh.num_triangles,
            'h': mesh.h,
            'area': mesh.area,
            'corner_points': [mesh.vertices[c].tolist() for c in mesh.corner_points],
            'boundary_length': {tag: mesh.boundary_length(tag) for tag in (DIRICHLET, NEUMANN)},
        }
        write_json(out / 'mesh_report.json', report, schema='mixedflow.mesh_report/1')
        self.say(f"{mesh}; corners at {report['corner_points']}")
        return True, {'mesh': report}
