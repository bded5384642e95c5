"""
Operator pencil of the steady Stokes problem at a Dirichlet/do-nothing
corner of opening π/2.

In the strip variables ξ = ln r, ω ∈ (0, π/2) the Fourier-transformed
homogeneous system has a four-column fundamental system; substituting it
into the boundary conditions (∂ω ê₁ = 0 and ∂ω ê₂ − ê_q = 0 at ω = 0,
ê₁ = ê₂ = 0 at ω = π/2) gives a 4×4 matrix whose determinant vanishes
exactly at the pencil eigenvalues, the roots of

    (iλ)² − 4cos²(iλπ/2) − sin²(iλπ/2) = (iλ)² − 5/2 − (3/2)cos(iλπ).

Throughout, z = iλ.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

from .exceptions import ConfigError, ContourError, FitError, MeshError, PencilError, RootFindingError, WindingError
from .fem_assembly import evaluate_at
from .mesh import DIRICHLET, NEUMANN

logger = logging.getLogger(__name__)

HALF_PI = 0.5 * np.pi
_SIN, _COS = 0.0, HALF_PI

# Pencil matrix = diag(2/z, 2/z, 1, 1) · boundary_matrix · COLUMN_TRANSFORM.
COLUMN_TRANSFORM = np.array([
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [1, 0, 1, 0],
    [0, -1, 0, 1],
], dtype=complex)
DETERMINANT_FACTOR = -4.0

MIN_MODULUS = 1e-6
WINDING_DEFECT = 0.01
SIMPLE_THRESHOLD = 1e-6


def _columns(lam):
    """Fundamental system as terms (coef, frequency, phase): each component
    is Σ coef·sin(frequency·ω + phase); frequency None marks coef·ω."""
    if lam == 0:
        return (
            ([(1, 2, _COS)], [(1, 2, _SIN), (-2, None, 0)], [(4, 1, _COS)]),
            ([(-1, 2, _SIN), (-2, None, 0)], [(1, 2, _COS)], [(-4, 1, _SIN)]),
            ([(1, 0, _COS)], [], []),
            ([], [(1, 0, _COS)], []),
        )
    z = 1j * complex(lam)
    h = 0.5 * z
    return (
        ([(1, z, _COS)], [(-1, z, _SIN)], []),
        ([(1, z, _SIN)], [(1, z, _COS)], []),
        ([(-h, z - 2, _COS)], [(1, z, _SIN), (h, z - 2, _SIN)], [(-2 * z, z - 1, _COS)]),
        ([(h, z - 2, _SIN)], [(1, z, _COS), (h, z - 2, _COS)], [(2 * z, z - 1, _SIN)]),
    )


def _term(coef, freq, phase, omega, order):
    if freq is None:
        return coef * (omega if order == 0 else np.ones_like(omega)) if order < 2 else np.zeros_like(omega)
    return coef * complex(freq) ** order * np.sin(freq * omega + phase + order * HALF_PI)


def fundamental_matrix(lam, omega, order=0):
    """(3, 4) + shape(omega) array: ``order``-th ω-derivative of the four
    fundamental columns (rows ê₁, ê₂, ê_q)."""
    omega = np.asarray(omega, dtype=complex)
    out = np.zeros((3, 4) + omega.shape, dtype=complex)
    for col, components in enumerate(_columns(lam)):
        for row, terms in enumerate(components):
            for coef, freq, phase in terms:
                out[row, col] += _term(coef, freq, phase, omega, order)
    return out


def general_solution(lam, C, omega, order=0):
    """(ê₁, ê₂, ê_q) = Σ C_j · column_j at ω; the λ = 0 system is used
    exactly when λ == 0."""
    C = np.asarray(C, dtype=complex)
    return np.einsum('rc...,c->r...', fundamental_matrix(lam, omega, order), C)


def system_residual(lam, C, omega):
    """Residual of the homogeneous transformed system at ω, using the
    analytic ω-derivatives of the general solution."""
    z = 1j * complex(lam)
    e1, e2, q = general_solution(lam, C, omega)
    d1, d2, dq = general_solution(lam, C, omega, order=1)
    s1, s2, _ = general_solution(lam, C, omega, order=2)
    c, s = np.cos(omega), np.sin(omega)
    return np.array([
        -s1 - z ** 2 * e1 + (z - 1) * q * c - dq * s,
        -s2 - z ** 2 * e2 + (z - 1) * q * s + dq * c,
        z * e1 * c - d1 * s + z * e2 * s + d2 * c,
    ])


def boundary_matrix(lam):
    """Boundary operators applied to the four fundamental columns: rows
    ∂ω ê₁(0), ∂ω ê₂(0) − ê_q(0), ê₁(π/2), ê₂(π/2)."""
    at0 = fundamental_matrix(lam, 0.0)
    d_at0 = fundamental_matrix(lam, 0.0, order=1)
    at_wall = fundamental_matrix(lam, HALF_PI)
    return np.array([d_at0[0], d_at0[1] - at0[2], at_wall[0], at_wall[1]])


def pencil_matrix(lam):
    """The 4×4 characteristic matrix with the printed entries: two constant
    rows from the do-nothing side and the trigonometric d_3j, d_4j."""
    if lam == 0:
        raise PencilError("The pencil matrix encodes the λ ≠ 0 fundamental system; λ = 0 given")
    z = 1j * complex(lam)
    h = 0.5 * z
    c = np.cos(z * HALF_PI)
    s = np.sin(z * HALF_PI)
    c2 = np.cos((z - 2) * HALF_PI)
    s2 = np.sin((z - 2) * HALF_PI)
    return np.array([
        [0, 4 - z, 0, -2 + z],
        [2 + z, 0, 4 + z, 0],
        [c - h * c2, s - h * s2, -h * c2, h * s2],
        [h * s2, -h * c2, s + h * s2, c + h * c2],
    ], dtype=complex)


def pencil_from_boundary(lam):
    if lam == 0:
        raise PencilError("λ = 0 given to the λ ≠ 0 pencil")
    z = 1j * complex(lam)
    scale = np.diag([2 / z, 2 / z, 1, 1])
    return scale @ boundary_matrix(lam) @ COLUMN_TRANSFORM


def characteristic_determinant(lam):
    return complex(np.linalg.det(pencil_matrix(lam)))


def reduced_characteristic(lam):
    z = 1j * np.asarray(lam, dtype=complex)
    value = z * z - 2.5 - 1.5 * np.cos(np.pi * z)
    return complex(value) if value.ndim == 0 else value


def reduced_characteristic_derivative(lam):
    """d/dλ of the reduced characteristic."""
    z = 1j * np.asarray(lam, dtype=complex)
    value = 1j * (2 * z + 1.5 * np.pi * np.sin(np.pi * z))
    return complex(value) if value.ndim == 0 else value


def real_imag_system(a, b):
    """Real and imaginary parts of the reduced characteristic at λ = a + ib."""
    ep, em = np.exp(np.pi * a), np.exp(-np.pi * a)
    first = (b ** 2 - a ** 2) - 2.5 - 0.75 * np.cos(np.pi * b) * (ep + em)
    second = -2 * a * b - 0.75 * np.sin(np.pi * b) * (ep - em)
    return first, second


def imaginary_axis_profile(b):
    """Reduced characteristic at λ = ib: b² − 1 − 3cos²(πb/2)."""
    b = np.asarray(b, dtype=float)
    return b ** 2 - 1 - 3 * np.cos(0.5 * np.pi * b) ** 2


@dataclass(frozen=True)
class PencilSample:
    lam: complex
    det_full: complex
    det_reduced: complex

    @property
    def ratio(self):
        return self.det_full / self.det_reduced if self.det_reduced != 0 else complex('nan')

    @classmethod
    def at(cls, lam):
        return cls(lam=complex(lam), det_full=characteristic_determinant(lam),
                   det_reduced=reduced_characteristic(lam))


@dataclass(frozen=True)
class Rect:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ConfigError(f"Degenerate rectangle {self}")

    @property
    def corners(self):
        return (complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max))

    def contains(self, lam):
        return self.re_min < lam.real < self.re_max and self.im_min < lam.imag < self.im_max

    def as_dict(self):
        return {'re': [self.re_min, self.re_max], 'im': [self.im_min, self.im_max]}


@dataclass(frozen=True)
class RootResult:
    root: complex
    residual: float
    derivative: float
    simple: bool
    iterations: int

    def as_dict(self):
        return {'re': self.root.real, 'im': self.root.imag, 'residual': self.residual,
                'derivative_modulus': self.derivative, 'simple': self.simple,
                'iterations': self.iterations}


@dataclass
class RootReport:
    strip: Rect
    winding_count: int
    winding_defect: float
    roots: list = field(default_factory=list)

    @property
    def consistent(self):
        return self.winding_count == len(self.roots)

    def as_dict(self):
        return {
            'schema': 'mixedflow.roots/1',
            'strip': self.strip.as_dict(),
            'winding_count': self.winding_count,
            'winding_defect': self.winding_defect,
            'roots': [r.as_dict() for r in self.roots],
            'consistent': self.consistent,
            'simplicity_is_proxy': True,
        }


_SIDE_NAMES = ('im_min', 're_max', 'im_max', 're_min')


def count_roots(rect, n_contour=400, func=reduced_characteristic, derivative=reduced_characteristic_derivative):
    """Number of zeros of ``func`` inside ``rect`` by the argument principle:
    (1/2πi)∮ f'/f dλ, each side integrated adaptively. Returns (count, defect)."""
    corners = rect.corners
    total = 0j
    for side, (p, q) in enumerate(zip(corners, corners[1:] + corners[:1])):
        t = np.linspace(0.0, 1.0, n_contour)
        samples = np.abs(func(p + (q - p) * t))
        k = int(np.argmin(samples))
        if samples[k] < MIN_MODULUS:
            name = _SIDE_NAMES[side]
            outward = -1 if name.endswith('min') else 1
            suggestion = (name, getattr(rect, name) + outward * 1e-2)
            raise ContourError(
                f"Contour side {name} passes within |f| = {samples[k]:.2e} of a root near "
                f"{p + (q - p) * t[k]:.6g}", suggestion=suggestion)
        interior = (samples[1:-1] < samples[:-2]) & (samples[1:-1] < samples[2:])
        hints = t[1:-1][interior].tolist() or None

        def integrand(s, part):
            lam = p + (q - p) * s
            value = derivative(lam) / func(lam) * (q - p)
            return value.real if part == 0 else value.imag

        re, _ = scipy.integrate.quad(integrand, 0.0, 1.0, args=(0,), points=hints, limit=400)
        im, _ = scipy.integrate.quad(integrand, 0.0, 1.0, args=(1,), points=hints, limit=400)
        total += complex(re, im)
    winding = total / (2j * np.pi)
    count = int(round(winding.real))
    defect = abs(winding - count)
    logger.debug("Winding over %s: %.6g%+.2gi", rect, winding.real, winding.imag)
    if defect > WINDING_DEFECT:
        raise WindingError(f"Winding number {winding:.6g} is not an integer (defect {defect:.3g})")
    return count, float(defect)


def find_root(guess, max_iter=50, tol=1e-12, func=reduced_characteristic,
              derivative=reduced_characteristic_derivative):
    """Complex Newton iteration on the reduced characteristic."""
    lam = complex(guess)
    for iteration in range(1, max_iter + 1):
        value = func(lam)
        slope = derivative(lam)
        if not (np.isfinite(value) and np.isfinite(slope)) or slope == 0:
            break
        lam = lam - value / slope
        residual = abs(func(lam))
        if residual <= tol:
            d = abs(derivative(lam))
            return RootResult(root=lam, residual=float(residual), derivative=float(d),
                              simple=bool(d > SIMPLE_THRESHOLD), iterations=iteration)
    raise RootFindingError(f"Newton from {complex(guess):.6g} did not converge in {max_iter} iterations")


def determinant_grid(rect, n_re, n_im):
    """|reduced characteristic| and |det pencil_matrix| on a uniform grid.
    Returns (re, im, abs_reduced, abs_full) with shapes (n_im, n_re)."""
    re = np.linspace(rect.re_min, rect.re_max, n_re)
    im = np.linspace(rect.im_min, rect.im_max, n_im)
    lam = re[None, :] + 1j * im[:, None]
    reduced = np.abs(reduced_characteristic(lam))
    full = np.full(lam.shape, np.nan)
    for index, value in np.ndenumerate(lam):
        if value != 0:
            full[index] = abs(characteristic_determinant(value))
    return re, im, reduced, full


def locate_roots(rect, n_contour=400, seeds=(21, 11)):
    """Winding count plus Newton-located roots inside ``rect``."""
    count, defect = count_roots(rect, n_contour)
    roots = []
    if count:
        re, im, reduced, _ = _seed_grid(rect, *seeds)
        order = np.argsort(reduced, axis=None)
        for flat in order[:8 * seeds[0]]:
            j, i = np.unravel_index(flat, reduced.shape)
            try:
                result = find_root(complex(re[i], im[j]))
            except RootFindingError:
                continue
            if rect.contains(result.root) and all(abs(result.root - r.root) > 1e-8 for r in roots):
                roots.append(result)
            if len(roots) >= count:
                break
    report = RootReport(strip=rect, winding_count=count, winding_defect=defect,
                        roots=sorted(roots, key=lambda r: (r.root.imag, r.root.real)))
    if not report.consistent:
        logger.warning("Located %d roots but the winding count is %d", len(report.roots), count)
    return report


def _seed_grid(rect, n_re, n_im):
    re = np.linspace(rect.re_min, rect.re_max, n_re + 2)[1:-1]
    im = np.linspace(rect.im_min, rect.im_max, n_im + 2)[1:-1]
    lam = re[None, :] + 1j * im[:, None]
    return re, im, np.abs(reduced_characteristic(lam)), None


def strip_certificate(eps=0.05, K=20.0, eta=0.005, n=401, n_contour=400):
    """Numerical check that Im λ ∈ [−1−ε, −η] holds no root but −i."""
    b_axis = np.linspace(-1.0, 0.0, n)[1:-1]
    axis_ok = bool(np.all(imaginary_axis_profile(b_axis) < 0))

    a = np.concatenate([np.linspace(-K, -1e-3, n), np.linspace(1e-3, K, n)])
    b = np.linspace(-1.0, 0.0, n)[:-1]
    aa, bb = np.meshgrid(a, b)
    _, second = real_imag_system(aa, bb)
    sign_ok = bool(np.all(np.sign(aa) * second > 0))

    a_far = np.linspace(K, 4 * K, n)
    b_band = np.linspace(-1.0 - eps, -1.0, n)[1:-1]
    af, bf = np.meshgrid(a_far, b_band)
    lhs = np.abs((bf ** 2 - af ** 2 - 2.5) / (np.exp(np.pi * af) + np.exp(-np.pi * af)))
    far_ok = bool(np.all(lhs < 0.75 * np.abs(np.cos(np.pi * bf))))

    report = locate_roots(Rect(-K, K, -1.0 - eps, -eta), n_contour)
    only_minus_i = report.winding_count == 1 and bool(report.roots) \
        and abs(report.roots[0].root + 1j) < 1e-10
    checks = {
        'imaginary_axis': axis_ok,
        'off_axis_sign': sign_ok,
        'large_real_part': far_ok,
        'bounded_part_single_root': only_minus_i,
    }
    return {'eps': eps, 'K': K, 'eta': eta, 'checks': checks, 'passed': all(checks.values()),
            'roots': report.as_dict()}


def singular_basis(r, omega):
    """The four corner fields (u₁, u₂, q) with x = r cos ω, y = r sin ω:
    (x, −y, 0), (y, x, 0), (−x, y, −4), (−y, 3x, 0). Shape (4, 3) + shape."""
    r, omega = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(omega, dtype=float))
    x = r * np.cos(omega)
    y = r * np.sin(omega)
    zero = np.zeros_like(x)
    return np.array([
        [x, -y, zero],
        [y, x, zero],
        [-x, y, np.full_like(x, -4.0)],
        [-y, 3 * x, zero],
    ])


@dataclass(frozen=True, eq=False)
class CornerSamples:
    """Samples in the corner frame: ω = 0 along Γ_N, ω = π/2 along Γ_D."""
    r: np.ndarray
    omega: np.ndarray
    velocity: np.ndarray
    pressure: np.ndarray
    delta: float

    @property
    def x(self):
        return self.r * np.cos(self.omega)

    @property
    def y(self):
        return self.r * np.sin(self.omega)


@dataclass(frozen=True, eq=False)
class SingularExpansion:
    c: np.ndarray
    fit_residual: float
    regular_residual: float
    n_samples: int
    degree: int
    delta: float

    def as_dict(self):
        return {
            'schema': 'mixedflow.singular_fit/1',
            'c': self.c.tolist(),
            'fit_residual': self.fit_residual,
            'regular_residual': self.regular_residual,
            'n_samples': self.n_samples,
            'degree': self.degree,
            'delta': self.delta,
        }


def _monomials(lo, hi):
    return [(p, d - p) for d in range(lo, hi + 1) for p in range(d + 1)]


def fit_singular_expansion(samples, degree=3):
    """Least-squares fit of the samples by Σ c_j·(singular field j) plus a
    regular part: velocity monomials of degree 2..degree, pressure
    monomials of degree 1..degree−1 (lower degrees belong to the singular
    fields)."""
    n = len(samples.r)
    x, y = samples.x, samples.y
    singular = singular_basis(samples.r, samples.omega)  # (4, 3, n)
    columns = [singular[j].reshape(-1) for j in range(4)]
    for p, q in _monomials(2, degree):
        for comp in range(2):
            col = np.zeros((3, n))
            col[comp] = x ** p * y ** q
            columns.append(col.reshape(-1))
    for p, q in _monomials(1, degree - 1):
        col = np.zeros((3, n))
        col[2] = x ** p * y ** q
        columns.append(col.reshape(-1))
    A = np.column_stack(columns)
    rhs = np.concatenate([samples.velocity[:, 0], samples.velocity[:, 1], samples.pressure])

    rank = np.linalg.matrix_rank(A)
    if A.shape[0] < A.shape[1] or rank < A.shape[1]:
        raise FitError(f"Singular fit system is rank deficient ({rank} < {A.shape[1]} unknowns, "
                       f"{n} samples)")
    coef, *_ = scipy.linalg.lstsq(A, rhs)
    c = coef[:4]
    fit_residual = float(np.linalg.norm(A @ coef - rhs) / np.sqrt(len(rhs)))
    regular = rhs - A[:, :4] @ c
    regular_residual = float(np.linalg.norm(regular) / np.sqrt(len(rhs)))
    logger.info("Singular fit: c = %s, residual %.3e", np.array2string(c, precision=4), fit_residual)
    return SingularExpansion(c=c, fit_residual=fit_residual, regular_residual=regular_residual,
                             n_samples=n, degree=degree, delta=samples.delta)


def corner_frame(mesh, corner):
    """Origin and unit vectors (e₁ along Γ_N, e₂ along Γ_D) at the corner
    vertex ``corner`` (an entry of mesh.corner_points)."""
    directions = {}
    origin = mesh.vertices[corner]
    for (p, q), tag in mesh.tagged_edges:
        if corner in (p, q):
            other = q if p == corner else p
            d = mesh.vertices[other] - origin
            directions[tag] = d / np.linalg.norm(d)
    if set(directions) != {DIRICHLET, NEUMANN}:
        raise MeshError(f"Vertex {corner} is not a Dirichlet/Neumann corner")
    return origin, directions[NEUMANN], directions[DIRICHLET]


def sample_near_corner(spaces, velocity, pressure, corner, delta, n_r=8, n_omega=9):
    """Velocity (in the corner frame) and pressure of a finite element
    solution on a polar grid r ∈ (δ/4, δ), ω ∈ (0, π/2)."""
    origin, e1, e2 = corner_frame(spaces.mesh, corner)
    r = delta / 4 + 0.75 * delta * (np.arange(n_r) + 0.5) / n_r
    omega = HALF_PI * (np.arange(n_omega) + 0.5) / n_omega
    rr, ww = (a.ravel() for a in np.meshgrid(r, omega))
    points = origin + (rr * np.cos(ww))[:, None] * e1 + (rr * np.sin(ww))[:, None] * e2
    vel, pres = evaluate_at(spaces, velocity, pressure, points)
    local = np.column_stack([vel @ e1, vel @ e2])
    return CornerSamples(r=rr, omega=ww, velocity=local, pressure=pres, delta=float(delta))
