"""
Nonlinear operator 𝒩, its linearization and the Newton solver.

The convection term is collocated at the Gauss times of every interval:
𝒩(u) = [ϑ' + λϑ + (b(u(t_i), u(t_i), φ_k))_k ; u(0)]. The modal tensor
T[k, l, m] = b(φ_l, φ_m, φ_k) is exact (the integrand is a polynomial of
degree 5 per triangle), so convection of modal fields is a tensor
contraction.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from . import elements
from .evolution import (DataPair, apply_S, propagator_for, random_data,
                        solve_stokes_evolution)
from .exceptions import ConfigError, DimensionError, LinearSolveError
from .fem_assembly import check_vectors, evaluate

logger = logging.getLogger(__name__)

TRILINEAR_DEGREE = 6
STEP_CONDITION_LIMIT = 1e13


@dataclass(frozen=True)
class NewtonOptions:
    max_iters: int = 8
    abs_tol: float = 1e-11
    damping: float = 1.0
    linear_tol: float = 1e-10
    min_step: float = 1.0 / 64

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if not (self.abs_tol > 0 and self.linear_tol > 0):
            raise ConfigError("tolerances must be positive")
        if not 0 < self.damping <= 1:
            raise ConfigError(f"damping must lie in (0, 1], got {self.damping}")


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    residuals: list
    quadratic_ratios: list
    step_lengths: list
    reason: str

    @property
    def final_residual(self):
        return self.residuals[-1]

    def as_dict(self):
        return asdict(self)


@dataclass
class ContinuationReport:
    scale: float
    trial: int
    base_residual: float
    perturbation_norm: float
    solution_shift: float
    newton_iterations: int
    converged: bool
    quadratic_ratios: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    linear_prediction: float = 0.0

    @property
    def shift_ratio(self):
        return self.solution_shift / self.perturbation_norm if self.perturbation_norm > 0 else 0.0

    def as_dict(self):
        data = asdict(self)
        data['shift_ratio'] = self.shift_ratio
        return data


def trilinear_b(spaces, theta, psi, phi, degree=TRILINEAR_DEGREE):
    """b(θ, ψ, φ) = ∫ θ_j ∂ψ_i/∂x_j φ_i over the mesh."""
    check_vectors(spaces, theta, psi, phi)
    points, weights = elements.triangle_quadrature(degree)
    u, _ = evaluate(spaces, theta, points)
    _, grad = evaluate(spaces, psi, points)
    w, _ = evaluate(spaces, phi, points)
    wdet = spaces.det[:, None] * weights[None, :]
    return float(np.einsum('tq,tqj,tqij,tqi->', wdet, u, grad, w))


class ConvectionTensor:
    """T[k, l, m] = b(φ_l, φ_m, φ_k) for the modes of ``basis``."""

    def __init__(self, basis, degree=TRILINEAR_DEGREE):
        self.basis = basis
        spaces = basis.spaces
        points, weights = elements.triangle_quadrature(degree)
        wdet = spaces.det[:, None] * weights[None, :]
        values, grads = zip(*(evaluate(spaces, mode, points) for mode in basis.modes))
        values = np.stack(values)
        grads = np.stack(grads)
        n = basis.n_modes
        tensor = np.empty((n, n, n))
        for l in range(n):
            advected = np.einsum('tqj,mtqij->mtqi', values[l], grads)
            tensor[:, l, :] = np.einsum('tq,ktqi,mtqi->km', wdet, values, advected)
        self.values = tensor
        logger.info("Convection tensor for %d modes (max |T| = %.3e)", n, np.abs(tensor).max())

    def linearization(self, theta_u):
        """L[..., k, m] = Σ_l ϑ^u_l (T[k,l,m] + T[k,m,l]) for amplitudes (..., l)."""
        sym = self.values + self.values.transpose(0, 2, 1)
        return np.einsum('...l,klm->...km', theta_u, sym)


def _same_space(*fields):
    first = fields[0]
    for other in fields[1:]:
        if other.basis is not first.basis or other.grid != first.grid:
            raise DimensionError("Fields live on different bases or time grids")


def convection_data(u, w, tensor):
    """(b(u(t), w(t), φ_k))_k at every Gauss time, shape (k, N, G)."""
    _same_space(u, w)
    return np.einsum('klm,lng,mng->kng', tensor.values, u.theta, w.theta)


def apply_N(u, tensor):
    stokes = apply_S(u)
    return DataPair(mu=stokes.mu + convection_data(u, u, tensor), a=stokes.a,
                    basis=u.basis, grid=u.grid)


def apply_B_u(u, w, tensor):
    mu = convection_data(u, w, tensor) + convection_data(w, u, tensor)
    return DataPair(mu=mu, a=np.zeros(u.basis.n_modes), basis=u.basis, grid=u.grid)


def apply_G_u(u, w, tensor):
    return apply_S(w) + apply_B_u(u, w, tensor)


def solve_linearized(u, rhs, tensor, linear_tol=None):
    """
    Solve 𝒢_u(w) = 𝒮w + ℬ_u w = rhs.

    On every interval the unknowns are the Gauss samples g of w' + λw; with
    w(t_i) = e^{-λτσ_i} w_n + Σ_j P_ij g_j from the exact propagator, the
    collocated equations g_i + L_i w(t_i) = rhs_i form one dense system of
    size k·G per interval.
    """
    basis, grid = u.basis, u.grid
    prop = propagator_for(basis, grid)
    k, N, G = basis.n_modes, grid.intervals, grid.gauss_points
    gauss_decay = prop.decay[:, :G]  # (k, G)
    end_decay = prop.decay[:, G]
    gauss_part = prop.particular[:, :G, :]  # (k, i, j)
    end_part = prop.particular[:, G, :]  # (k, j)

    lin = tensor.linearization(np.moveaxis(u.theta, 0, -1))  # (N, G, k, k)
    g = np.empty((k, N, G))
    start = np.asarray(rhs.a, dtype=float).copy()
    eye = np.eye(k)
    for n in range(N):
        system = np.zeros((G, k, G, k))
        for i in range(G):
            for j in range(G):
                system[i, :, j, :] = lin[n, i] * gauss_part[:, i, j][None, :]
            system[i, :, i, :] += eye
        system = system.reshape(G * k, G * k)
        b = rhs.mu[:, n, :].T - np.einsum('ikm,mi->ik', lin[n], gauss_decay * start[:, None])
        try:
            cond = np.linalg.cond(system)
            if not np.isfinite(cond) or cond > STEP_CONDITION_LIMIT:
                raise LinearSolveError(
                    f"Step matrix of interval {n} is near-singular (condition {cond:.3e})", step=n)
            sol = scipy.linalg.solve(system, b.ravel()).reshape(G, k)
        except np.linalg.LinAlgError as exc:
            raise LinearSolveError(f"Step matrix of interval {n} broke down: {exc}", step=n) from exc
        g[:, n, :] = sol.T
        start = end_decay * start + np.einsum('kj,jk->k', end_part, sol)

    w = solve_stokes_evolution(DataPair(mu=g, a=np.asarray(rhs.a, dtype=float), basis=basis, grid=grid))
    if linear_tol is not None:
        residual = (apply_G_u(u, w, tensor) - rhs).norm_Y()
        scale = max(rhs.norm_Y(), 1.0)
        logger.debug("Linearized solve residual %.3e", residual)
        if residual > linear_tol * scale:
            raise LinearSolveError(f"Linearized residual {residual:.3e} above tolerance {linear_tol:.1e}")
    return w


def _residual(u, data, tensor):
    defect = apply_N(u, tensor) - data
    return defect, defect.norm_Y()


def solve_navier_stokes(data, tensor, opts=None, initial_guess=None):
    """Damped Newton iteration for 𝒩(u) = data. Returns (u, NewtonReport);
    non-convergence is reported, and the best iterate returned."""
    opts = opts or NewtonOptions()
    u = initial_guess if initial_guess is not None else solve_stokes_evolution(data)
    defect, res = _residual(u, data, tensor)
    residuals = [res]
    steps = []
    best = (res, u)
    reason = 'max_iters'
    converged = res <= opts.abs_tol
    iterations = 0
    if converged:
        reason = 'initial_guess'
    while not converged and iterations < opts.max_iters:
        iterations += 1
        try:
            delta = solve_linearized(u, -defect, tensor, opts.linear_tol)
        except LinearSolveError as exc:
            logger.warning("Newton iteration %d: %s", iterations, exc)
            reason = 'linear_solve_failed'
            break
        alpha = opts.damping
        while True:
            trial = u + alpha * delta
            trial_defect, trial_res = _residual(trial, data, tensor)
            if np.isfinite(trial_res) and (trial_res <= (1.0 - 1e-4 * alpha) * res or alpha <= opts.min_step):
                break
            if not np.isfinite(trial_res) and alpha <= opts.min_step:
                break
            alpha *= 0.5
        u, defect, res = trial, trial_defect, trial_res
        residuals.append(res)
        steps.append(alpha)
        logger.debug("Newton iteration %d: residual %.3e (step %.3g)", iterations, res, alpha)
        if not np.isfinite(res):
            reason = 'non_finite'
            break
        if res < best[0]:
            best = (res, u)
        if res <= opts.abs_tol:
            converged = True
            reason = 'converged'
    ratios = [r1 / r0 ** 2 if r0 > 0 else 0.0 for r0, r1 in zip(residuals, residuals[1:])]
    report = NewtonReport(converged=converged, iterations=iterations, residuals=residuals,
                          quadratic_ratios=ratios, step_lengths=steps, reason=reason)
    if converged:
        logger.info("Newton converged in %d iterations (residual %.3e)", iterations, residuals[-1])
    else:
        logger.warning("Newton stopped without convergence after %d iterations (%s, residual %.3e)",
                       iterations, reason, residuals[-1])
    return (u if converged else best[1]), report


def scale_to_stokes_norm(data, target):
    """Rescale ``data`` so that its Stokes solution has ‖u‖_X = target."""
    norm = solve_stokes_evolution(data).norm_X()
    if norm == 0:
        return data
    return data * (target / norm)


def random_perturbation(basis, grid, rng):
    """Unit-‖·‖_Y data with mode weights λ_k⁻¹."""
    p = random_data(basis, grid, rng, decay=1.0)
    norm = p.norm_Y()
    return p * (1.0 / norm) if norm > 0 else p


def perturbation_experiment(base_data, tensor, scales, trials, seed, opts=None, base=None):
    """Re-solve 𝒩(ũ) = d + εp for random unit perturbations p, starting from
    the base solution; one perturbation per trial is reused for every scale."""
    opts = opts or NewtonOptions()
    if base is None:
        base = solve_navier_stokes(base_data, tensor, opts)
    u, base_report = base
    basis, grid = base_data.basis, base_data.grid
    rng = np.random.default_rng(seed)
    reports = []
    for trial in range(trials):
        p = random_perturbation(basis, grid, rng)
        prediction = solve_linearized(u, p, tensor).norm_X()
        for scale in scales:
            perturbed = base_data + scale * p
            u_tilde, report = solve_navier_stokes(perturbed, tensor, opts, initial_guess=u)
            reports.append(ContinuationReport(
                scale=float(scale),
                trial=trial,
                base_residual=float(base_report.final_residual),
                perturbation_norm=float((perturbed - base_data).norm_Y()),
                solution_shift=(u_tilde - u).norm_X(),
                newton_iterations=report.iterations,
                converged=report.converged,
                quadratic_ratios=report.quadratic_ratios,
                residual_history=report.residuals,
                linear_prediction=prediction,
            ))
        logger.debug("Perturbation trial %d done", trial)
    return reports


def summarize_experiment(reports):
    """Per-scale summary {scale, trials, mean_shift_ratio, max_iterations, failures}."""
    summary = []
    for scale in sorted({r.scale for r in reports}):
        group = [r for r in reports if r.scale == scale]
        ok = [r for r in group if r.converged]
        summary.append({
            'scale': scale,
            'trials': len(group),
            'mean_shift_ratio': float(np.mean([r.shift_ratio for r in ok])) if ok else None,
            'mean_linear_prediction': float(np.mean([r.linear_prediction for r in ok])) if ok else None,
            'max_iterations': max(r.newton_iterations for r in group),
            'failures': len(group) - len(ok),
        })
    return summary


def measure_convection_constant(basis, grid, tensor, samples, rng):
    """max ‖b(u, w, ·)‖_{L²(0,T;L²)} / (‖u‖_X ‖w‖_X) over random Stokes
    solutions u, w."""
    ratios = []
    for _ in range(samples):
        u = solve_stokes_evolution(random_data(basis, grid, rng))
        w = solve_stokes_evolution(random_data(basis, grid, rng))
        conv = DataPair(mu=convection_data(u, w, tensor), a=np.zeros(basis.n_modes),
                        basis=basis, grid=grid)
        denom = u.norm_X() * w.norm_X()
        if denom > 0:
            ratios.append(conv.forcing_norm() / denom)
    return float(max(ratios)) if ratios else 0.0


def manufactured_problem(basis, grid, tensor, rng, target_norm):
    """A known field ū (the Stokes solution of random data, scaled to
    ‖ū‖_X = target_norm) and the data d = 𝒩(ū) it solves exactly."""
    data = scale_to_stokes_norm(random_data(basis, grid, rng), target_norm)
    exact = solve_stokes_evolution(data)
    return exact, apply_N(exact, tensor)
