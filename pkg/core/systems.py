"""
Elliptic systems: coefficient tensors, symbols and ellipticity checks.

An EllipticSystem stores a[alpha, beta, r, s] (0-based here, 1-based in the
JSON format) for the operator (L u)_alpha = d_r (a[alpha, beta, r, s] d_s u_beta).
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy import optimize, special
from scipy.stats import qmc

from core.errors import InvalidGrid
from data.models import EllipticityReport, EllipticSystem


logger = logging.getLogger(__name__)

# Threshold on min |det symbol| over the unit sphere.
WEAK_ELLIPTICITY_TOL = 1e-9


def laplacian(n: int, M: int = 1) -> EllipticSystem:
    """Componentwise Laplacian, a = delta_{alpha beta} delta_{rs}."""
    _check_dimension(n)
    coeff = np.einsum("ab,rs->abrs", np.eye(M), np.eye(n)).astype(complex)
    return EllipticSystem(n=n, M=M, coeff=coeff, label=f"laplacian(n={n},M={M})")


def lame(n: int, mu: float, lam: float) -> EllipticSystem:
    """Lame system mu Laplacian + (lambda + mu) grad div.

    Uses the writing a = mu d_rs d_ab + (lambda + mu) d_ra d_sb, whose symbol
    is mu |xi|^2 I + (lambda + mu) xi xi^T. Ellipticity is not enforced.
    """
    _check_dimension(n)
    identity = np.eye(n)
    coeff = mu * np.einsum("rs,ab->abrs", identity, identity)
    coeff = coeff + (lam + mu) * np.einsum("ra,sb->abrs", identity, identity)
    return EllipticSystem(n=n, M=n, coeff=coeff.astype(complex), label=f"lame(n={n},mu={mu},lambda={lam})")


def from_coefficients(coeff: np.ndarray, label: str = "system") -> EllipticSystem:
    coeff = np.asarray(coeff, dtype=complex)
    if coeff.ndim != 4 or coeff.shape[0] != coeff.shape[1] or coeff.shape[2] != coeff.shape[3]:
        raise InvalidGrid(f"Coefficient tensor must have shape (M, M, n, n), got {coeff.shape}")
    if not np.all(np.isfinite(coeff)):
        raise InvalidGrid("Coefficient tensor has non-finite entries")
    _check_dimension(coeff.shape[2])
    return EllipticSystem(n=coeff.shape[2], M=coeff.shape[0], coeff=coeff, label=label)


def symbol(sys: EllipticSystem, xi: np.ndarray) -> np.ndarray:
    """Symbol sum_{r,s} a[:, :, r, s] xi_r xi_s, vectorized over leading axes of xi."""
    xi = np.asarray(xi, dtype=float)
    return np.einsum("abrs,...r,...s->...ab", sys.coeff, xi, xi)


def pencil(sys: EllipticSystem, xi_tangential: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients of Q(tau) = A tau^2 + i B tau - C for the boundary frequency xi'.

    Returns:
        (A_nn, B, C) with B and C vectorized over leading axes of xi'
    """
    xi = np.asarray(xi_tangential, dtype=float)
    a = sys.coeff
    last = sys.n - 1
    a_nn = a[:, :, last, last]
    mixed = a[:, :, :last, last] + a[:, :, last, :last]
    b = np.einsum("abr,...r->...ab", mixed, xi)
    c = np.einsum("abrs,...r,...s->...ab", a[:, :, :last, :last], xi, xi)
    return a_nn, b, c


def transpose(sys: EllipticSystem) -> EllipticSystem:
    """Transposed system, a^T[alpha, beta, r, s] = a[beta, alpha, s, r]."""
    return EllipticSystem(
        n=sys.n, M=sys.M, coeff=sys.coeff.transpose(1, 0, 3, 2), label=f"transpose({sys.label})"
    )


def unit_sphere_samples(n: int, samples: int, seed: int = 0) -> np.ndarray:
    """Low-discrepancy points on S^{n-1} (scrambled Sobol, Gaussianized)."""
    m = max(1, math.ceil(math.log2(max(samples, 2))))
    points = qmc.Sobol(d=n, scramble=True, seed=seed).random_base2(m=m)[:samples]
    gauss = special.ndtri(np.clip(points, 1e-12, 1.0 - 1e-12))
    return gauss / np.linalg.norm(gauss, axis=-1, keepdims=True)


def weak_ellipticity(sys: EllipticSystem, samples: int = 4096, seed: int = 0) -> bool:
    """Whether det symbol(xi) stays away from zero on sampled unit xi."""
    xi = unit_sphere_samples(sys.n, samples, seed)
    smallest = float(np.min(np.abs(np.linalg.det(symbol(sys, xi)))))
    logger.debug(f"{sys.label}: min |det symbol| on sphere = {smallest:.3e}")
    return smallest > WEAK_ELLIPTICITY_TOL


def legendre_hadamard(
    sys: EllipticSystem, samples: int = 4096, refine_iters: int = 3, seed: int = 0
) -> EllipticityReport:
    """Estimate the Legendre-Hadamard constant.

    For fixed xi the minimum over unit eta of Re[conj(eta) symbol(xi) eta] is
    the smallest eigenvalue of the Hermitian part of the symbol, so only xi is
    sampled (Sobol points) and then refined with Nelder-Mead.

    Args:
        sys: System to check
        samples: Number of sampled directions xi
        refine_iters: Nelder-Mead restarts from the current best direction
        seed: Scrambling seed

    Returns:
        EllipticityReport with kappa_o = max(0, min_ratio)
    """
    xi = unit_sphere_samples(sys.n, samples, seed)
    lowest = _hermitian_min(sys, xi)
    best = int(np.argmin(lowest))
    best_xi, best_value = xi[best], float(lowest[best])

    def objective(v: np.ndarray) -> float:
        norm = np.linalg.norm(v)
        if norm == 0:
            return math.inf
        return float(_hermitian_min(sys, (v / norm)[np.newaxis])[0])

    for _ in range(refine_iters):
        result = optimize.minimize(
            objective, best_xi, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13}
        )
        if result.fun < best_value:
            best_value = float(result.fun)
            best_xi = result.x / np.linalg.norm(result.x)

    eta = _hermitian_argmin(sys, best_xi)
    report = EllipticityReport(
        kappa_o=max(0.0, best_value),
        min_ratio=best_value,
        argmin_xi=best_xi,
        argmin_eta=eta,
        weakly_elliptic=weak_ellipticity(sys, samples, seed),
    )
    logger.info(f"{sys.label}: Legendre-Hadamard min ratio {best_value:.6g}")
    return report


def strong_ellipticity(sys: EllipticSystem, samples: int = 4096, seed: int = 0) -> float:
    """Smallest sampled value of Re[a[a,b,r,s] zeta_{r a} conj(zeta_{s b})] over unit zeta.

    This is the Legendre condition over all M x n complex matrices; it
    implies the Legendre-Hadamard condition, which only tests rank one.
    """
    dim = sys.n * sys.M
    form = sys.coeff.transpose(2, 0, 3, 1).reshape(dim, dim)
    hermitian = 0.5 * (form + form.conj().T)
    value = float(np.linalg.eigvalsh(hermitian)[0])
    logger.debug(f"{sys.label}: Legendre (strong) constant {value:.6g}")
    return value


def _hermitian_min(sys: EllipticSystem, xi: np.ndarray) -> np.ndarray:
    s = symbol(sys, xi)
    hermitian = 0.5 * (s + np.conj(np.swapaxes(s, -1, -2)))
    return np.linalg.eigvalsh(hermitian)[..., 0]


def _hermitian_argmin(sys: EllipticSystem, xi: np.ndarray) -> np.ndarray:
    s = symbol(sys, xi)
    hermitian = 0.5 * (s + s.conj().T)
    _, vectors = np.linalg.eigh(hermitian)
    eta = vectors[:, 0]
    return eta / np.linalg.norm(eta)


def _check_dimension(n: int) -> None:
    if n not in (2, 3):
        raise InvalidGrid(f"Space dimension must be 2 or 3, got {n}")


def describe(sys: EllipticSystem, report: Optional[EllipticityReport] = None) -> dict:
    """Summary dictionary used in reports."""
    summary = {"label": sys.label, "n": sys.n, "M": sys.M}
    if report is not None:
        summary["kappa_o"] = report.kappa_o
        summary["min_ratio"] = report.min_ratio
        summary["weakly_elliptic"] = report.weakly_elliptic
    return summary
