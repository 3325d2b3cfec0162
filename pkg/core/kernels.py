"""
Fundamental solutions, Green functions and Poisson kernels.

Three Poisson kernel constructions are available:

- the closed-form harmonic kernel P(x') = (2/omega) (1 + |x'|^2)^(-n/2);
- radial reflection, P = 2 (d_n E)(x', 1) A_nn for a radial fundamental
  solution E;
- the symbol method, which solves the boundary pencil frequency by frequency
  and inverts the FFT.

Every construction yields a PoissonConstruction whose ``slice(t)`` is the
torus kernel used for convolution on the boundary grid.
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sp_fft
from scipy import linalg, special

from core.errors import (
    CoincidentPoints,
    GridMismatch,
    IllConditionedBasis,
    NotLegendreHadamard,
    NotRadial,
    NotStronglyElliptic,
    SingularSymbol,
    SpecViolation,
    SplittingFailure,
)
from core.grid import DEFAULT_IMAGES, inner_mask, integrate_kernel, periodize
from core.systems import laplacian, legendre_hadamard, pencil, symbol, weak_ellipticity
from data.models import (
    BoundaryGrid,
    Construction,
    EllipticSystem,
    FundamentalSolution,
    KernelMatrix,
    KernelMethod,
    PoissonConstruction,
)


logger = logging.getLogger(__name__)

SPLIT_TOL = 1e-10
MAX_BASIS_CONDITION = 1e8
SINGULAR_SYMBOL_TOL = 1e-12
NORMAL_FD_STEP = 1e-4
DEFAULT_QUAD_POINTS = {2: 512, 3: 590}
DEFAULT_FD_STEP = 1e-2
RADIAL_TOL = 1e-6
# Points per batch in sphere quadrature (bounds the (points, nodes, M, M) temporaries).
_QUADRATURE_BATCH = 256


def sphere_area(n: int) -> float:
    """Surface measure omega_{n-1} of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / special.gamma(n / 2.0)


# ---------------------------------------------------------------------------
# Harmonic kernel
# ---------------------------------------------------------------------------

def harmonic_profile(n: int, t: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized x' -> P^Delta_t(x') = (2/omega) t / (t^2 + |x'|^2)^(n/2)."""
    scale = 2.0 / sphere_area(n)

    def evaluate(x: np.ndarray) -> np.ndarray:
        return scale * t / (t * t + np.sum(x * x, axis=-1)) ** (n / 2.0)

    return evaluate


def harmonic_poisson(n: int, grid: BoundaryGrid, M: int = 1, images: int = DEFAULT_IMAGES) -> PoissonConstruction:
    """Closed-form harmonic Poisson kernel (times I_M).

    The profile holds the unwrapped samples of P_1; slices are wrapped onto
    the torus by lattice-shift summation.

    Raises:
        GridMismatch: If the grid is not (n-1)-dimensional
    """
    _check_grid(n, grid)
    identity = np.eye(M)

    def builder(t: float) -> KernelMatrix:
        values = periodize(grid, harmonic_profile(n, t), images)
        return KernelMatrix(grid, t, values[..., np.newaxis, np.newaxis] * identity)

    profile = harmonic_profile(n)(grid.nodes)[..., np.newaxis, np.newaxis] * identity
    return PoissonConstruction(
        system=laplacian(n, M),
        method=KernelMethod.HARMONIC_EXPLICIT,
        profile=KernelMatrix(grid, 1.0, profile),
        metadata={"grid": grid.to_dict(), "images": images, "construction": "closed form"},
        builder=_memoize(builder),
    )


# ---------------------------------------------------------------------------
# Fundamental solutions
# ---------------------------------------------------------------------------

def scalar_fundamental_solution(A: np.ndarray) -> FundamentalSolution:
    """Closed-form fundamental solution of div(A grad) for a strongly elliptic A.

    With A_sym = (A + A^T)/2 and q(x) = (A_sym^{-1} x) . x,
    E = -q^{(2-n)/2} / ((n-2) omega sqrt(det A_sym)) for n >= 3 and
    E = log q / (4 pi sqrt(det A_sym)) for n = 2 (principal branches).

    Raises:
        NotStronglyElliptic: If Re(A_sym) is not positive definite
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    a_sym = 0.5 * (A + A.T)
    lowest = float(np.linalg.eigvalsh(np.real(a_sym))[0])
    if lowest <= 0:
        raise NotStronglyElliptic(f"Re(A_sym) has smallest eigenvalue {lowest:.3g}")
    inverse = np.linalg.inv(a_sym)
    root_det = np.sqrt(np.linalg.det(a_sym) + 0j)
    omega = sphere_area(n)

    def quadratic(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ax = np.einsum("rs,...s->...r", inverse, x)
        return np.sum(ax * x, axis=-1), ax

    if n == 2:
        def evaluator(x: np.ndarray) -> np.ndarray:
            q, _ = quadratic(x)
            return (np.log(q + 0j) / (4.0 * math.pi * root_det))[..., np.newaxis, np.newaxis]

        def normal(x: np.ndarray) -> np.ndarray:
            q, ax = quadratic(x)
            return (2.0 * ax[..., -1] / q / (4.0 * math.pi * root_det))[..., np.newaxis, np.newaxis]
    else:
        c = -1.0 / ((n - 2) * omega * root_det)

        def evaluator(x: np.ndarray) -> np.ndarray:
            q, _ = quadratic(x)
            return (c * (q + 0j) ** ((2.0 - n) / 2.0))[..., np.newaxis, np.newaxis]

        def normal(x: np.ndarray) -> np.ndarray:
            q, ax = quadratic(x)
            return (c * (2.0 - n) * (q + 0j) ** (-n / 2.0) * ax[..., -1])[..., np.newaxis, np.newaxis]

    coeff = A[np.newaxis, np.newaxis]
    system = EllipticSystem(n=n, M=1, coeff=coeff, label=f"scalar(n={n})")
    construction = (
        Construction.HARMONIC_CLOSED_FORM if np.allclose(A, np.eye(n)) else Construction.SCALAR_CLOSED_FORM
    )
    solution = FundamentalSolution(system, evaluator, construction, normal_derivative=normal)
    return _with_radial_flag(solution)


def harmonic_fundamental_solution(n: int, M: int = 1) -> FundamentalSolution:
    """Closed-form fundamental solution of the componentwise Laplacian."""
    scalar = scalar_fundamental_solution(np.eye(n))
    identity = np.eye(M)

    def evaluator(x: np.ndarray) -> np.ndarray:
        return scalar.evaluator(x) * identity

    def normal(x: np.ndarray) -> np.ndarray:
        return scalar.normal_derivative(x) * identity

    return FundamentalSolution(
        laplacian(n, M), evaluator, Construction.HARMONIC_CLOSED_FORM, radial=True, normal_derivative=normal
    )


def _sphere_rule(n: int, quad_points: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadrature on S^{n-1} in coordinates aligned with a pole.

    Returns:
        (axial, transverse, weights): axial is the cosine with the pole,
        transverse the coordinates in the orthogonal frame, shape (Q, n-1)
    """
    if n == 2:
        phi = 0.5 * math.pi + 2.0 * math.pi * np.arange(quad_points) / quad_points
        weights = np.full(quad_points, 2.0 * math.pi / quad_points)
        return np.cos(phi), np.sin(phi)[:, np.newaxis], weights
    n_u = max(1, int(round(math.sqrt(quad_points / 4.0))))
    n_phi = max(1, quad_points // (2 * n_u))
    nodes, gl_weights = special.roots_legendre(n_u)
    upper = 0.5 * (nodes + 1.0)
    u = np.concatenate((-upper[::-1], upper))
    w_u = np.concatenate((gl_weights[::-1], gl_weights)) * 0.5
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    uu, pp = np.meshgrid(u, phi, indexing="ij")
    ww = np.broadcast_to(w_u[:, np.newaxis] * (2.0 * math.pi / n_phi), uu.shape)
    ring = np.sqrt(1.0 - uu ** 2)
    transverse = np.stack((ring * np.cos(pp), ring * np.sin(pp)), axis=-1)
    return uu.ravel(), transverse.reshape(-1, 2), ww.ravel()


def _frames(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Radius, unit vector and an orthonormal completion for each row of x."""
    r = np.linalg.norm(x, axis=-1)
    unit = x / r[:, np.newaxis]
    if x.shape[-1] == 2:
        perp = np.stack((-unit[:, 1], unit[:, 0]), axis=-1)
        return r, unit, perp[:, np.newaxis, :]
    reference = np.where(np.abs(unit[:, 2:3]) > 0.9, np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]))
    first = np.cross(unit, reference)
    first /= np.linalg.norm(first, axis=-1, keepdims=True)
    second = np.cross(unit, first)
    return r, unit, np.stack((first, second), axis=1)


def sphere_quadrature_fundamental_solution(
    sys: EllipticSystem,
    n: Optional[int] = None,
    quad_points: Optional[int] = None,
    fd_step: float = DEFAULT_FD_STEP,
) -> FundamentalSolution:
    """Fundamental solution from the sphere-integral representation.

    F(x) = int_{S^{n-1}} g(x . xi) symbol(xi)^{-1} dsigma(xi) with
    g(s) = s^2 log|s| (n = 2) or |s| (n = 3), then E = c Delta F with
    c = 1/(8 pi^2) (n = 2) or -1/(16 pi^2) (n = 3). The quadrature is
    aligned with x so the kink of g falls on a node or panel boundary; the
    Laplacian is a central difference along (x/|x|, completion) with step
    fd_step |x|. For n = 2 the result is defined up to an additive constant.

    Args:
        sys: Weakly elliptic system
        n: Space dimension (defaults to sys.n)
        quad_points: Quadrature nodes (512 for n = 2, about 590 for n = 3)
        fd_step: Relative step of the outer Laplacian

    Returns:
        FundamentalSolution with construction SPHERE_QUADRATURE

    Raises:
        SingularSymbol: If det symbol(xi) nearly vanishes at a node
    """
    n = sys.n if n is None else n
    if n != sys.n:
        raise GridMismatch(f"System has n={sys.n}, requested n={n}")
    if not weak_ellipticity(sys):
        raise SingularSymbol(f"{sys.label} is not weakly elliptic")
    quad_points = DEFAULT_QUAD_POINTS[n] if quad_points is None else int(quad_points)
    axial, transverse, weights = _sphere_rule(n, quad_points)
    prefactor = 1.0 / (8.0 * math.pi ** 2) if n == 2 else -1.0 / (16.0 * math.pi ** 2)

    def kernel_g(s: np.ndarray) -> np.ndarray:
        if n == 2:
            safe = np.where(s == 0, 1.0, np.abs(s))
            return np.where(s == 0, 0.0, s * s * np.log(safe))
        return np.abs(s)

    def sphere_integral(y: np.ndarray) -> np.ndarray:
        r, unit, perp = _frames(y)
        xi = axial[np.newaxis, :, np.newaxis] * unit[:, np.newaxis, :]
        xi = xi + np.einsum("qj,pjr->pqr", transverse, perp)
        inverse_symbol = symbol(sys, xi)
        det = np.abs(np.linalg.det(inverse_symbol))
        if np.min(det) < SINGULAR_SYMBOL_TOL:
            raise SingularSymbol(f"|det symbol| = {np.min(det):.3e} at a quadrature node")
        inverse_symbol = np.linalg.inv(inverse_symbol)
        g = kernel_g(r[:, np.newaxis] * axial[np.newaxis, :]) * weights
        return np.einsum("pq,pqab->pab", g, inverse_symbol)

    def evaluate_batch(x: np.ndarray) -> np.ndarray:
        r, unit, perp = _frames(x)
        delta = fd_step * r
        directions = np.concatenate((unit[:, np.newaxis, :], perp), axis=1)
        stencil = [x]
        for j in range(n):
            step = delta[:, np.newaxis] * directions[:, j, :]
            stencil.extend((x + step, x - step))
        values = sphere_integral(np.concatenate(stencil, axis=0)).reshape((2 * n + 1, x.shape[0]) + (sys.M, sys.M))
        centre = values[0]
        laplace = sum(values[1 + 2 * j] + values[2 + 2 * j] - 2.0 * centre for j in range(n))
        return prefactor * laplace / (delta ** 2)[:, np.newaxis, np.newaxis]

    def evaluator(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, n)
        out = np.empty((flat.shape[0], sys.M, sys.M), dtype=complex)
        for start in range(0, flat.shape[0], _QUADRATURE_BATCH):
            out[start:start + _QUADRATURE_BATCH] = evaluate_batch(flat[start:start + _QUADRATURE_BATCH])
        return out.reshape(x.shape[:-1] + (sys.M, sys.M))

    solution = FundamentalSolution(sys, evaluator, Construction.SPHERE_QUADRATURE)
    logger.debug(f"{sys.label}: sphere quadrature with {weights.size} nodes, fd_step {fd_step}")
    return _with_radial_flag(solution)


def fundamental_solution(sys: EllipticSystem) -> FundamentalSolution:
    """Closed form when one exists, sphere quadrature otherwise."""
    if np.allclose(sys.coeff, laplacian(sys.n, sys.M).coeff):
        return harmonic_fundamental_solution(sys.n, sys.M)
    if sys.M == 1:
        try:
            return scalar_fundamental_solution(sys.coeff[0, 0])
        except NotStronglyElliptic:
            logger.info(f"{sys.label}: no scalar closed form, using sphere quadrature")
    return sphere_quadrature_fundamental_solution(sys)


def is_radial(E: FundamentalSolution, samples: int = 16, seed: int = 0) -> bool:
    """Whether E(x) = E(y) within 1e-6 relative on random pairs with |x| = |y|."""
    n = E.system.n
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((2, samples, n))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    radii = rng.uniform(0.5, 4.0, size=samples)[:, np.newaxis]
    first = E(radii * directions[0])
    second = E(radii * directions[1])
    gap = np.max(np.abs(first - second), axis=(-2, -1))
    scale = np.maximum(np.max(np.abs(first), axis=(-2, -1)), np.max(np.abs(second), axis=(-2, -1)))
    return bool(np.all(gap <= RADIAL_TOL * np.maximum(scale, 1e-300)))


def _with_radial_flag(solution: FundamentalSolution) -> FundamentalSolution:
    return FundamentalSolution(
        solution.system,
        solution.evaluator,
        solution.construction,
        radial=is_radial(solution),
        normal_derivative=solution.normal_derivative,
    )


def green_reflection(E: FundamentalSolution, x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    """Reflection Green function G(x, y) = E(x - y) - E(x - ybar), ybar = (y', -y_n).

    Raises:
        NotRadial: If E is not radial
        CoincidentPoints: If x == y
    """
    if not E.radial:
        raise NotRadial(f"Green reflection needs a radial fundamental solution ({E.system.label})")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.array_equal(x, y):
        raise CoincidentPoints(f"Green function is singular at x = y = {tuple(x)}")
    mirrored = y.copy()
    mirrored[-1] = -mirrored[-1]
    return E(x - y) - E(x - mirrored)


# ---------------------------------------------------------------------------
# Radial reflection kernel
# ---------------------------------------------------------------------------

def poisson_from_green_radial(
    E: FundamentalSolution,
    sys: EllipticSystem,
    grid: BoundaryGrid,
    images: int = DEFAULT_IMAGES,
) -> PoissonConstruction:
    """Poisson kernel P(z') = 2 (d_n E)(z', 1) A_nn of a radial fundamental solution.

    d_n E is analytic when E provides it, else a central difference with
    step 1e-4. Slices are P_t(x') = t^{1-n} P(x'/t), wrapped onto the torus.

    Raises:
        NotRadial: If E is not radial
    """
    if not E.radial:
        raise NotRadial(f"{sys.label}: fundamental solution is not radial")
    _check_grid(sys.n, grid)
    a_nn = sys.coeff[:, :, -1, -1]
    analytic = E.normal_derivative is not None

    def normal_derivative(points: np.ndarray) -> np.ndarray:
        if analytic:
            return E.normal_derivative(points)
        offset = np.zeros(sys.n)
        offset[-1] = NORMAL_FD_STEP
        return (E(points + offset) - E(points - offset)) / (2.0 * NORMAL_FD_STEP)

    def profile_fn(x: np.ndarray) -> np.ndarray:
        points = np.concatenate((x, np.ones(x.shape[:-1] + (1,))), axis=-1)
        return 2.0 * np.einsum("...gb,ba->...ga", normal_derivative(points), a_nn)

    def builder(t: float) -> KernelMatrix:
        values = periodize(grid, lambda x: t ** (1 - sys.n) * profile_fn(x / t), images)
        return KernelMatrix(grid, t, values)

    return PoissonConstruction(
        system=sys,
        method=KernelMethod.RADIAL_REFLECTION,
        profile=KernelMatrix(grid, 1.0, profile_fn(grid.nodes)),
        metadata={
            "grid": grid.to_dict(),
            "images": images,
            "construction": E.construction.value,
            "normal_derivative": "analytic" if analytic else f"central difference {NORMAL_FD_STEP:g}",
        },
        builder=_memoize(builder),
    )


# ---------------------------------------------------------------------------
# Symbol method
# ---------------------------------------------------------------------------

def dual_frequencies(grid: BoundaryGrid) -> np.ndarray:
    """Angular frequencies of the grid's dual lattice in FFT order, shape shape + (dim,)."""
    axis = 2.0 * math.pi * sp_fft.fftfreq(grid.N, d=grid.h)
    return np.stack(np.meshgrid(*([axis] * grid.dim), indexing="ij"), axis=-1)


def stable_splitting(
    a_nn: np.ndarray, b: np.ndarray, c: np.ndarray, xi_norm: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decaying invariant subspace of the companion matrix of A tau^2 + i B tau - C.

    Returns:
        (U1, T11, tau): displacement block of the ordered Schur basis, the
        leading triangular block and the decaying roots

    Raises:
        SplittingFailure: If the stable dimension is not M or a root is
            too close to the imaginary axis
        IllConditionedBasis: If cond(U1) > 1e8
    """
    M = a_nn.shape[0]
    a_inv = np.linalg.inv(a_nn)
    companion = np.block([[np.zeros((M, M)), np.eye(M)], [a_inv @ c, -1j * a_inv @ b]])
    threshold = -SPLIT_TOL * xi_norm
    T, Z, sdim = linalg.schur(companion, output="complex", sort=lambda tau: tau.real < threshold)
    roots = np.diag(T)
    if sdim != M:
        raise SplittingFailure(f"{sdim} decaying roots instead of {M} at |xi'| = {xi_norm:.4g}")
    if np.any(np.abs(roots.real) <= SPLIT_TOL * xi_norm):
        raise SplittingFailure(f"Root on the imaginary axis at |xi'| = {xi_norm:.4g}")
    u1 = Z[:M, :M]
    condition = np.linalg.cond(u1)
    if condition > MAX_BASIS_CONDITION:
        raise IllConditionedBasis(f"cond(U1) = {condition:.3e} at |xi'| = {xi_norm:.4g}")
    return u1, T[:M, :M], roots[:M]


def fourier_symbol_poisson(
    sys: EllipticSystem, grid: BoundaryGrid, t_list: Sequence[float] = ()
) -> Tuple[PoissonConstruction, List[KernelMatrix]]:
    """Poisson kernel from the boundary pencil at each dual frequency.

    K_hat(xi', t) = U1 expm(T11 t) U1^{-1} with (U1, T11) from the ordered
    Schur form of the companion matrix; K_hat(0, t) = I. Slices are
    fftshift(ifftn(K_hat)) / h^dim.

    Raises:
        NotLegendreHadamard: If the Legendre-Hadamard constant is not positive
        SplittingFailure: See stable_splitting
        IllConditionedBasis: See stable_splitting
    """
    _check_grid(sys.n, grid)
    report = legendre_hadamard(sys)
    if report.kappa_o <= 0:
        raise NotLegendreHadamard(f"{sys.label}: Legendre-Hadamard min ratio {report.min_ratio:.4g}")
    M = sys.M
    freqs = dual_frequencies(grid).reshape(-1, grid.dim)
    a_nn, b_all, c_all = pencil(sys, freqs)
    count = freqs.shape[0]
    basis = np.zeros((count, M, M), dtype=complex)
    blocks = np.zeros((count, M, M), dtype=complex)
    inverses = np.zeros((count, M, M), dtype=complex)
    worst_condition = 1.0
    zero_mode = None
    for k in range(count):
        xi_norm = float(np.linalg.norm(freqs[k]))
        if xi_norm == 0:
            zero_mode = k
            continue
        u1, t11, _ = stable_splitting(a_nn, b_all[k], c_all[k], xi_norm)
        basis[k], blocks[k], inverses[k] = u1, t11, np.linalg.inv(u1)
        worst_condition = max(worst_condition, float(np.linalg.cond(u1)))
    axes = tuple(range(grid.dim))

    def symbol_at(t: float) -> np.ndarray:
        if M == 1:
            hat = np.exp(blocks[:, 0, 0] * t)[:, np.newaxis, np.newaxis].astype(complex)
        else:
            exps = np.stack([linalg.expm(blocks[k] * t) for k in range(count)])
            hat = basis @ exps @ inverses
        if zero_mode is not None:
            hat[zero_mode] = np.eye(M)
        return hat.reshape(grid.shape + (M, M))

    def builder(t: float) -> KernelMatrix:
        samples = sp_fft.fftshift(sp_fft.ifftn(symbol_at(t), axes=axes), axes=axes) / grid.cell_volume
        return KernelMatrix(grid, t, samples)

    builder = _memoize(builder)
    construction = PoissonConstruction(
        system=sys,
        method=KernelMethod.FOURIER_SYMBOL,
        profile=builder(1.0),
        metadata={
            "grid": grid.to_dict(),
            "construction": "ordered Schur splitting",
            "split_tol": SPLIT_TOL,
            "max_basis_condition": worst_condition,
            "kappa_o": report.kappa_o,
        },
        builder=builder,
    )
    logger.info(f"{sys.label}: symbol kernel on {count} frequencies, max cond(U1) {worst_condition:.3g}")
    return construction, [builder(float(t)) for t in t_list]


# ---------------------------------------------------------------------------
# Dispatch and verification
# ---------------------------------------------------------------------------

def build_poisson(
    sys: EllipticSystem,
    grid: BoundaryGrid,
    method: KernelMethod = KernelMethod.FOURIER_SYMBOL,
    images: int = DEFAULT_IMAGES,
) -> PoissonConstruction:
    """Build a Poisson kernel with the requested construction.

    Raises:
        SpecViolation: Explicit kernel requested for a non-Laplacian system
        NotRadial: Radial reflection requested for a non-radial system
    """
    method = KernelMethod(method)
    _check_grid(sys.n, grid)
    if method == KernelMethod.HARMONIC_EXPLICIT:
        if not np.allclose(sys.coeff, laplacian(sys.n, sys.M).coeff):
            raise SpecViolation(f"Explicit harmonic kernel requested for {sys.label}")
        construction = harmonic_poisson(sys.n, grid, sys.M, images)
    elif method == KernelMethod.RADIAL_REFLECTION:
        construction = poisson_from_green_radial(fundamental_solution(sys), sys, grid, images)
    else:
        construction = fourier_symbol_poisson(sys, grid)[0]
    logger.info(f"Built {method.value} Poisson kernel for {sys.label} on N={grid.N}, R={grid.R:g}")
    return construction


def kernel_symbol(kernel: KernelMatrix) -> np.ndarray:
    """Discrete Fourier symbol h^dim fftn(ifftshift(P_t)) in FFT order (inverse of the slice builder)."""
    axes = tuple(range(kernel.grid.dim))
    return kernel.grid.cell_volume * sp_fft.fftn(sp_fft.ifftshift(kernel.values, axes=axes), axes=axes)


def kernel_transpose(kernel: KernelMatrix) -> KernelMatrix:
    return KernelMatrix(kernel.grid, kernel.t, np.swapaxes(kernel.values, -1, -2))


def verify_poisson_properties(
    pc: PoissonConstruction,
    sys: Optional[EllipticSystem] = None,
    extended: bool = False,
    t0: Optional[float] = None,
) -> Dict[str, object]:
    """Report the defining properties of a Poisson kernel.

    - decay_constant: sup over |x'|_inf <= R/2 of |P(x')|_2 (1 + |x'|^2)^(n/2)
    - normalization_error: max entry of |int P - I|
    - fd_residual: max over |x'| <= R/4 of |L K| at height t0, with
      central differences of step delta in (x', t), for delta = 2h and 4h;
      fd_order is log2 of their ratio
    - homogeneity_error: max |K(2y', 2) - 2^{1-n} K(y', 1)| relative to
      max |2^{1-n} K(., 1)| over |y'| <= R/4

    With ``extended`` and the harmonic n = 3 kernel, also the Green
    function cross-check E(x - ybar) = (P_t * E(. - y)|boundary)(x').

    t0 defaults to max(1, 8h), the lowest height whose stencil stays 4h
    above the boundary.

    Raises:
        GridMismatch: If t0 - 4h <= 0
    """
    sys = pc.system if sys is None else sys
    grid = pc.grid
    t0 = max(1.0, 8.0 * grid.h) if t0 is None else float(t0)
    if t0 - 4.0 * grid.h <= 0:
        raise GridMismatch(f"Harmonicity stencil at t0 = {t0:g} reaches t <= 0 on a grid with h = {grid.h:g}")
    n = grid.n
    profile = pc.profile.values
    inner = inner_mask(grid, 0.5)
    spectral = np.linalg.norm(profile, ord=2, axis=(-2, -1))
    decay = float(np.max(spectral[inner] * (1.0 + grid.radius[inner] ** 2) ** (n / 2.0)))
    integral = integrate_kernel(pc.profile)
    normalization_error = float(np.max(np.abs(integral - np.eye(sys.M))))

    residuals = {}
    for multiple in (2, 4):
        residuals[multiple] = _harmonicity_residual(pc, sys, t0, multiple)
    fd_residual = residuals[2]
    order = math.log2(residuals[4] / residuals[2]) if residuals[2] > 0 and residuals[4] > 0 else math.nan

    report = {
        "decay_constant": decay,
        "integral": integral.real.tolist(),
        "normalization_error": normalization_error,
        "fd_height": t0,
        "fd_residual": fd_residual,
        "fd_residual_coarse": residuals[4],
        "fd_order": order,
        "homogeneity_error": _homogeneity_error(pc),
    }
    if extended and pc.method == KernelMethod.HARMONIC_EXPLICIT and n == 3:
        report["green_crosscheck_error"] = _green_crosscheck(grid)
    logger.info(
        f"{sys.label} [{pc.method.value}]: decay {decay:.4g}, normalization {normalization_error:.3e}, "
        f"fd order {order:.3g}"
    )
    return report


def _harmonicity_residual(pc: PoissonConstruction, sys: EllipticSystem, t0: float, multiple: int) -> float:
    grid = pc.grid
    delta = multiple * grid.h
    below = pc.slice(t0 - delta).values
    centre = pc.slice(t0).values
    above = pc.slice(t0 + delta).values
    dim = grid.dim

    def shift(values: np.ndarray, axis: int, k: int) -> np.ndarray:
        return np.roll(values, -k * multiple, axis=axis)

    def second(r: int, s: int) -> np.ndarray:
        if r == dim and s == dim:
            return (above - 2.0 * centre + below) / delta ** 2
        if r == dim or s == dim:
            axis = s if r == dim else r
            top = shift(above, axis, 1) - shift(above, axis, -1)
            bottom = shift(below, axis, 1) - shift(below, axis, -1)
            return (top - bottom) / (4.0 * delta ** 2)
        if r == s:
            return (shift(centre, r, 1) - 2.0 * centre + shift(centre, r, -1)) / delta ** 2
        plus = shift(shift(centre, r, 1), s, 1) + shift(shift(centre, r, -1), s, -1)
        minus = shift(shift(centre, r, 1), s, -1) + shift(shift(centre, r, -1), s, 1)
        return (plus - minus) / (4.0 * delta ** 2)

    total = np.zeros_like(centre)
    for r in range(sys.n):
        for s in range(sys.n):
            total = total + np.einsum("gb,...ba->...ga", sys.coeff[:, :, r, s], second(r, s))
    probes = inner_mask(grid, 0.25)
    return float(np.max(np.abs(total[probes])))


def _homogeneity_error(pc: PoissonConstruction) -> float:
    grid = pc.grid
    n = grid.n
    first = pc.slice(1.0).values
    second = pc.slice(2.0).values
    quarter = inner_mask(grid, 0.25)
    # y' = (k - N/2) h maps to 2y' at index 2k - N/2.
    index = np.nonzero(quarter)
    doubled = tuple(2 * k - grid.N // 2 for k in index)
    scaled = 2.0 ** (1 - n) * first[index]
    scale = float(np.max(np.abs(scaled)))
    return float(np.max(np.abs(second[doubled] - scaled))) / scale if scale > 0 else 0.0


def _green_crosscheck(grid: BoundaryGrid) -> float:
    """max |E(x - ybar) - (P_{x_n} * E(. - y))(x')| for y = (0', 1) and a few x."""
    E = harmonic_fundamental_solution(3)
    source = np.array([0.0, 0.0, 1.0])
    nodes = grid.nodes
    trace = np.real(E(np.concatenate((nodes, np.zeros(grid.shape + (1,))), axis=-1) - source)[..., 0, 0])
    worst = 0.0
    for target in ([0.0, 0.0, 0.5], [1.0, 0.0, 0.5], [0.0, 0.0, 2.0], [1.0, -1.0, 2.0]):
        x = np.asarray(target)
        kernel = harmonic_profile(3, x[-1])(x[:2] - nodes)
        convolved = grid.cell_volume * float(np.sum(kernel * trace))
        mirrored = source * np.array([1.0, 1.0, -1.0])
        reflected = float(np.real(E(x - mirrored)[0, 0]))
        worst = max(worst, abs(convolved - reflected))
    return worst


def _memoize(builder: Callable[[float], KernelMatrix]) -> Callable[[float], KernelMatrix]:
    cache: Dict[float, KernelMatrix] = {}

    def cached(t: float) -> KernelMatrix:
        key = float(t)
        if key not in cache:
            cache[key] = builder(key)
        return cache[key]

    return cached


def _check_grid(n: int, grid: BoundaryGrid) -> None:
    if grid.n != n:
        raise GridMismatch(f"Grid is {grid.dim}-dimensional but the system lives in R^{n}")
