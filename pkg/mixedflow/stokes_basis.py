"""
Steady Stokes solves and the Stokes eigenbasis.

The eigenpairs satisfy ((φ_k, v)) = λ_k (φ_k, v) for every discretely
divergence-free v vanishing on Γ_D; the modes are L²-orthonormal and
V-orthogonal. The constraint is handled by an explicit (dense) nullspace
basis of B on the free dofs.
"""

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import DimensionError, EigenSolveError, InfSupError
from .exports import write_csv, write_json
from .fem_assembly import pressure_norm

logger = logging.getLogger(__name__)

EIGEN_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class SteadySolution:
    velocity: np.ndarray
    pressure: np.ndarray
    residual: float
    stability_ratio: float


@dataclass(frozen=True, eq=False)
class EigenBasis:
    lambdas: np.ndarray
    modes: np.ndarray
    spaces: object
    residuals: np.ndarray = field(default=None)

    def __str__(self):
        return (f"EigenBasis({self.n_modes} modes, "
                f"λ in [{self.lambdas[0]:.6g}, {self.lambdas[-1]:.6g}])")

    @property
    def n_modes(self):
        return len(self.lambdas)

    def gram_L2(self):
        return self.modes @ (self.spaces.M @ self.modes.T)

    def gram_V(self):
        return self.modes @ (self.spaces.K @ self.modes.T)


def _forcing_vector(spaces, sigma):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (spaces.ndof_v,):
        raise DimensionError(f"Forcing must have {spaces.ndof_v} coefficients, got shape {sigma.shape}")
    return sigma


def solve_steady_stokes(spaces, sigma):
    """
    Solve −Δϑ + ∇q = σ, div ϑ = 0, ϑ = 0 on Γ_D, −q n + ∂ϑ/∂n = 0 on Γ_N.

    ``sigma`` is a velocity coefficient vector; the right-hand side is M σ.
    Without Neumann edges the pressure is fixed by a zero-mean constraint.
    """
    sigma = _forcing_vector(spaces, sigma)
    Kf, _, Bf = spaces.free_blocks
    f = spaces.free_dofs
    rhs_v = (spaces.M @ sigma)[f]
    n_v, n_p = len(f), spaces.ndof_p

    blocks = [[Kf, Bf.T], [Bf, None]]
    rhs = np.concatenate([rhs_v, np.zeros(n_p)])
    if not spaces.has_neumann:
        mean = sp.csr_matrix(np.asarray(spaces.Mp.sum(axis=0)))
        blocks = [[Kf, Bf.T, None], [Bf, None, mean.T], [None, mean, None]]
        rhs = np.concatenate([rhs, [0.0]])
    saddle = sp.bmat(blocks, format='csc')

    try:
        solution = spla.splu(saddle).solve(rhs)
    except RuntimeError as exc:
        raise InfSupError(f"Singular Stokes saddle-point system: {exc}") from exc
    if not np.all(np.isfinite(solution)):
        raise InfSupError("Stokes saddle-point solve produced non-finite values")

    residual = float(np.linalg.norm(saddle @ solution - rhs) / max(np.linalg.norm(rhs), 1.0))
    velocity = spaces.embed(solution[:n_v])
    pressure = solution[n_v:n_v + n_p]

    sigma_norm = np.sqrt(max(sigma @ (spaces.M @ sigma), 0.0))
    v_norm = np.sqrt(max(velocity @ (spaces.K @ velocity), 0.0))
    ratio = (v_norm + pressure_norm(spaces, pressure)) / sigma_norm if sigma_norm > 0 else 0.0
    logger.info("Steady Stokes: residual %.3e, stability ratio %.4g", residual, ratio)
    return SteadySolution(velocity=velocity, pressure=pressure, residual=residual,
                          stability_ratio=float(ratio))


def divergence_free_basis(spaces):
    """Orthonormal (Euclidean) basis of ker B on the free dofs, as full
    velocity vectors (columns)."""
    _, _, Bf = spaces.free_blocks
    Z = scipy.linalg.null_space(Bf.toarray())
    return spaces.embed(Z.T).T


def compute_eigenbasis(spaces, n_modes):
    started = time.perf_counter()
    Kf, Mf, Bf = spaces.free_blocks
    Z = scipy.linalg.null_space(Bf.toarray())
    dim = Z.shape[1]
    if n_modes < 1 or n_modes > dim:
        raise EigenSolveError(
            f"n_modes={n_modes} outside [1, {dim}] (dimension of the divergence-free space)")

    KZ = Kf @ Z
    MZ = Mf @ Z
    Kz = Z.T @ KZ
    Mz = Z.T @ MZ
    Kz = 0.5 * (Kz + Kz.T)
    Mz = 0.5 * (Mz + Mz.T)
    try:
        lambdas, Y = scipy.linalg.eigh(Kz, Mz, subset_by_index=[0, n_modes - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolveError(f"Constrained eigenproblem failed: {exc}") from exc

    # Re-orthonormalize in the mass inner product.
    gram = Y.T @ Mz @ Y
    chol = scipy.linalg.cholesky(0.5 * (gram + gram.T), lower=True)
    Y = scipy.linalg.solve_triangular(chol, Y.T, lower=True).T

    residual_vectors = Kz @ Y - Mz @ Y * lambdas
    Mz_inv_r = scipy.linalg.cho_solve(scipy.linalg.cho_factor(Mz), residual_vectors)
    residuals = np.sqrt(np.abs(np.sum(residual_vectors * Mz_inv_r, axis=0))) / np.abs(lambdas)
    if np.any(lambdas <= 0):
        raise EigenSolveError(f"Non-positive Stokes eigenvalue {lambdas.min():.3e}")
    if np.any(residuals > 1e3 * EIGEN_TOLERANCE):
        raise EigenSolveError(f"Eigen-relation residual {residuals.max():.3e} above tolerance")

    modes = spaces.embed((Z @ Y).T)
    basis = EigenBasis(lambdas=lambdas, modes=modes, spaces=spaces, residuals=residuals)
    logger.info("Computed %s in %.2fs (max relative residual %.2e)",
                basis, time.perf_counter() - started, residuals.max())
    return basis


def project(basis, u):
    """Modal amplitudes a_k = (u, φ_k)."""
    return basis.modes @ (basis.spaces.M @ u)


def reconstruct(basis, a):
    return np.asarray(a) @ basis.modes


def _amplitudes(coeffs, basis):
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != basis.n_modes:
        raise DimensionError(f"Expected {basis.n_modes} amplitudes, got shape {coeffs.shape}")
    return coeffs


def norm_D(coeffs, basis):
    a = _amplitudes(coeffs, basis)
    return float(np.sqrt(np.sum(basis.lambdas ** 2 * a ** 2)))


def norm_V(coeffs, basis):
    a = _amplitudes(coeffs, basis)
    return float(np.sqrt(np.sum(basis.lambdas * a ** 2)))


def norm_L2(coeffs, basis):
    a = _amplitudes(coeffs, basis)
    return float(np.sqrt(np.sum(a ** 2)))


def orthogonality_report(basis):
    n = basis.n_modes
    l2 = basis.gram_L2() - np.eye(n)
    v = basis.gram_V() - np.diag(basis.lambdas)
    div = np.linalg.norm(basis.modes @ basis.spaces.B.T, axis=1)
    mode_norms = np.linalg.norm(basis.modes, axis=1)
    checks = {
        'l2_orthonormal': float(np.abs(l2).max()) <= 1e-8,
        'v_orthogonal': bool(np.all(np.abs(v) <= 1e-6 * basis.lambdas[None, :])),
        'positive_nondecreasing': bool(np.all(basis.lambdas > 0) and np.all(np.diff(basis.lambdas) >= 0)),
        'divergence_free': bool(np.all(div <= 1e-8 * mode_norms)),
    }
    return {
        'n_modes': n,
        'lambdas': basis.lambdas.tolist(),
        'max_l2_defect': float(np.abs(l2).max()),
        'max_v_defect_relative': float((np.abs(v) / basis.lambdas[None, :]).max()),
        'max_eigen_residual': float(basis.residuals.max()) if basis.residuals is not None else None,
        'max_divergence_relative': float((div / mode_norms).max()),
        'checks': checks,
        'passed': all(checks.values()),
    }


def save_basis(basis, directory):
    directory = Path(directory)
    meta = {
        'n_modes': basis.n_modes,
        'ndof_v': basis.spaces.ndof_v,
        'lambdas': basis.lambdas.tolist(),
        'residuals': basis.residuals.tolist() if basis.residuals is not None else None,
    }
    write_json(directory / 'basis.json', meta, schema='mixedflow.basis/1')
    write_csv(directory / 'modes.csv', [f'phi_{k + 1}' for k in range(basis.n_modes)], basis.modes.T.tolist())
    return directory


def load_basis(directory, spaces):
    directory = Path(directory)
    meta = json.loads((directory / 'basis.json').read_text())
    if meta['ndof_v'] != spaces.ndof_v:
        raise DimensionError(f"Stored basis has {meta['ndof_v']} dofs, spaces have {spaces.ndof_v}")
    with open(directory / 'modes.csv', newline='') as handle:
        rows = list(csv.reader(handle))[1:]
    modes = np.array(rows, dtype=float).T
    residuals = meta.get('residuals')
    return EigenBasis(lambdas=np.asarray(meta['lambdas']), modes=modes, spaces=spaces,
                      residuals=np.asarray(residuals) if residuals is not None else None)
