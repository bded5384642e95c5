import numpy as np
from django.core.management.base import CommandError

from ...corner_spectra import (PencilSample, Rect, determinant_grid, find_root, fit_singular_expansion,
                               locate_roots, sample_near_corner, strip_certificate)
from ...exceptions import ContourError, FitError, RootFindingError
from ...exports import write_csv, write_json
from ...stokes_basis import solve_steady_stokes
from ..base import RunCommand

RATIO_SPREAD_LIMIT = 1e-8
OUTSIDE_STRIP_GUESS = -1.9j
OUTSIDE_STRIP_ROOT = -2j
ROOT_TOL = 1e-10


def ratio_samples(rng, count=50):
    """det pencil / reduced characteristic at random points with moderate
    real part, away from the roots."""
    samples = []
    while len(samples) < count:
        lam = complex(rng.uniform(-5, 5), rng.uniform(-3, 3))
        if lam == 0:
            continue
        sample = PencilSample.at(lam)
        if abs(sample.det_reduced) > 1e-3:
            samples.append(sample)
    ratios = np.array([s.ratio for s in samples])
    mean = ratios.mean()
    return mean, float(np.abs(ratios - mean).max() / abs(mean))


class Command(RunCommand):
    help = "Corner pencil analysis: determinant grid, root count and singular-expansion fit"
    title = "corner"

    def add_run_arguments(self, parser):
        parser.add_argument('--no-fit', action='store_true', help="Skip the finite element singular fit")

    def run(self, config, out, options):
        c = config.corner
        rect = Rect(c.re_min, c.re_max, c.im_min, c.im_max)
        re, im, reduced, full = determinant_grid(rect, c.grid_re, c.grid_im)
        rows = [[re[i], im[j], reduced[j, i], full[j, i]] for j in range(len(im)) for i in range(len(re))]
        write_csv(out / 'determinant_grid.csv', ['re', 'im', 'abs_reduced', 'abs_det'], rows)

        try:
            roots = locate_roots(rect, c.n_contour)
        except ContourError as exc:
            if exc.suggestion is None:
                raise
            side, value = exc.suggestion
            raise CommandError(f"{exc}; try corner.{side} = {value:g}", returncode=exc.exit_code) from exc
        write_json(out / 'roots.json', roots.as_dict())

        mean, spread = ratio_samples(self.rng(config))
        report = {
            'winding_count': roots.winding_count,
            'roots': [r.as_dict() for r in roots.roots],
            'determinant_ratio': {'mean': mean, 'relative_spread': spread},
            'checks': {
                'roots_match_winding': roots.consistent,
                'determinant_proportional': spread <= RATIO_SPREAD_LIMIT,
            },
        }
        try:
            outside = find_root(OUTSIDE_STRIP_GUESS)
            report['outside_strip_root'] = outside.as_dict()
            report['checks']['outside_strip_root'] = abs(outside.root - OUTSIDE_STRIP_ROOT) <= ROOT_TOL
        except RootFindingError as exc:
            self.warn(str(exc))
            report['checks']['outside_strip_root'] = False
        if c.im_min < -1 < c.im_max < 0:
            certificate = strip_certificate(eps=-1 - c.im_min, K=max(-c.re_min, c.re_max),
                                            eta=-c.im_max, n_contour=c.n_contour)
            report['strip_certificate'] = certificate['checks']
            report['checks']['strip_certificate'] = certificate['passed']

        if not options.get('no_fit'):
            report['singular_fit'] = self.singular_fit(config, out)
        report['passed'] = all(report['checks'].values())
        write_json(out / 'corner_report.json', report, schema='mixedflow.corner/1')
        self.say(f"Winding count {roots.winding_count} over {rect.as_dict()}; roots "
                 + ", ".join(f"{r.root:.10g}" for r in roots.roots))
        return report['passed'], {'corner spectrum': {k: v for k, v in report.items() if k != 'roots'}}

    def singular_fit(self, config, out):
        spaces = self.build_spaces(config)
        if not len(spaces.mesh.corner_points):
            return None
        sigma = self.rng(config).standard_normal(spaces.ndof_v)
        solution = solve_steady_stokes(spaces, sigma)
        corner = int(spaces.mesh.corner_points[0])
        samples = sample_near_corner(spaces, solution.velocity, solution.pressure, corner,
                                     config.corner.fit_delta)
        try:
            fit = fit_singular_expansion(samples)
        except FitError as exc:
            self.warn(str(exc))
            return None
        write_json(out / 'singular_fit.json', fit.as_dict())
        return fit.as_dict()
