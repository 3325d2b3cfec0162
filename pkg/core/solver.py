"""
Dirichlet solves u(., t) = P_t * f and the checks built on them.

Every check returns a plain dictionary of scalar metrics (plus series under
descriptive keys) that core.verification compares against committed
envelopes.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from core.errors import EmptyHeights, GridMismatch, InvalidHeights, SpecViolation
from core.grid import band_limited_field, convolve_kernels, delta_kernel, fft_convolve, inner_mask, make_grid, sample
from core.kernels import build_poisson
from core.maxop import hl_maximal, nontangential_max
from core.spaces import beurling_norm, maximal_screen, norm, spec_label, validate_atom
from core.systems import laplacian
from data.models import (
    AtomFlavor,
    BoundaryField,
    BoundaryGrid,
    ConeSpec,
    DirichletProblem,
    EllipticSystem,
    HalfSpaceField,
    KernelMethod,
    NormSpec,
    PoissonConstruction,
)


logger = logging.getLogger(__name__)

# Nodes with M f below this fraction of max M f are left out of ratios.
RATIO_FLOOR = 1e-14
MIN_TRIALS = 10
JUMP_FRACTION = 0.1
JUMP_EXCLUSION = 4


def default_heights(grid: BoundaryGrid, ratio: float = 2.0) -> Tuple[float, ...]:
    """Geometric heights 2h * ratio^k capped at R/8."""
    if ratio <= 1:
        raise InvalidHeights(f"Height ratio must exceed 1, got {ratio}")
    heights = []
    t = 2.0 * grid.h
    while t <= grid.R / 8.0 * (1 + 1e-12):
        heights.append(t)
        t *= ratio
    return tuple(heights)


def auto_method(sys: EllipticSystem) -> KernelMethod:
    """Explicit kernel for the Laplacian, symbol method otherwise."""
    if np.allclose(sys.coeff, laplacian(sys.n, sys.M).coeff):
        return KernelMethod.HARMONIC_EXPLICIT
    return KernelMethod.FOURIER_SYMBOL


def check_heights(grid: BoundaryGrid, heights: Sequence[float]) -> Tuple[float, ...]:
    """Sorted, de-duplicated heights, each at least 2h.

    Raises:
        EmptyHeights: If no height is given
        InvalidHeights: If a height is below 2h or not finite
    """
    if len(heights) == 0:
        raise EmptyHeights("At least one height is required")
    floor = 2.0 * grid.h * (1 - 1e-12)
    bad = [t for t in heights if not math.isfinite(t) or t < floor]
    if bad:
        raise InvalidHeights(f"Heights must be >= 2h = {2 * grid.h:g}; got {bad}")
    return tuple(sorted(set(float(t) for t in heights)))


def solve(prob: DirichletProblem, pc: Optional[PoissonConstruction] = None) -> HalfSpaceField:
    """Per-height FFT convolution u(., t) = P_t * f.

    Args:
        prob: Dirichlet problem
        pc: Prebuilt kernel for prob.system on the datum's grid

    Raises:
        GridMismatch: If the datum and kernel disagree in grid or channels
        InvalidHeights: If a height is below 2h
    """
    grid = prob.datum.grid
    heights = check_heights(grid, prob.heights)
    if prob.datum.channels != prob.system.M:
        raise GridMismatch(f"Datum has {prob.datum.channels} channels, system has M={prob.system.M}")
    if pc is None:
        pc = build_poisson(prob.system, grid, prob.kernel_method)
    elif pc.grid != grid:
        raise GridMismatch("Kernel and datum live on different grids")
    slices = []
    for t in heights:
        slices.append(fft_convolve(pc.slice(t), prob.datum).values)
        logger.debug(f"Solved height t={t:g}")
    return HalfSpaceField(grid, heights, np.stack(slices))


# ---------------------------------------------------------------------------
# Boundary behaviour
# ---------------------------------------------------------------------------

def jump_mask(f: BoundaryField, fraction: float = JUMP_FRACTION, reach: int = JUMP_EXCLUSION) -> np.ndarray:
    """Nodes within reach * h of a jump (neighbour difference above fraction * max |f|)."""
    grid = f.grid
    scale = float(np.max(f.modulus))
    jumps = np.zeros(grid.shape, dtype=bool)
    if scale == 0:
        return jumps
    for axis in range(grid.dim):
        step = np.linalg.norm(np.diff(f.values, axis=axis), axis=-1) > fraction * scale
        pad = [(0, 0)] * grid.dim
        pad[axis] = (0, 1)
        jumps |= np.pad(step, pad)
        pad[axis] = (1, 0)
        jumps |= np.pad(step, pad)
    return ndimage.binary_dilation(jumps, structure=np.ones((2 * reach + 1,) * grid.dim, dtype=bool))


def _cone_offsets(grid: BoundaryGrid, radius: float) -> List[Tuple[int, ...]]:
    k = max(0, math.ceil(radius / grid.h) - 1)
    offsets = []
    for shift in np.ndindex(*((2 * k + 1,) * grid.dim)):
        d = np.array(shift) - k
        if grid.h * float(np.linalg.norm(d)) < radius:
            offsets.append(tuple(int(v) for v in d))
    return offsets


def trace_convergence(
    u: HalfSpaceField, f: BoundaryField, cone: ConeSpec = ConeSpec(), tail: int = 4
) -> Dict[str, object]:
    """How fast u approaches f at Lebesgue points as t decreases.

    Probes are nodes with |x'|_inf <= R/2 at least 4h from a jump of f. For
    each of the ``tail`` lowest heights, the vertical deviation is
    max |u(x', t) - f(x')| and the cone deviation is
    max over |y' - x'| < kappa t of |u(y', t) - f(x')|. The rate is the
    least-squares slope of log cone deviation against log t.
    """
    grid = u.grid
    probes = inner_mask(grid, 0.5) & ~jump_mask(f)
    heights = u.heights[:tail]
    vertical, conical = [], []
    for t in heights:
        values = u.at(t).values
        vertical.append(float(np.max(np.linalg.norm(values - f.values, axis=-1)[probes])))
        worst = 0.0
        for offset in _cone_offsets(grid, cone.kappa * t):
            moved = values
            for axis, k in enumerate(offset):
                moved = np.roll(moved, -k, axis=axis)
            worst = max(worst, float(np.max(np.linalg.norm(moved - f.values, axis=-1)[probes])))
        conical.append(worst)
    positive = [(t, d) for t, d in zip(heights, conical) if d > 0]
    if len(positive) >= 2:
        rate = float(np.polyfit(np.log([t for t, _ in positive]), np.log([d for _, d in positive]), 1)[0])
    else:
        rate = math.nan
    return {
        "heights": list(heights),
        "vertical_deviation": vertical,
        "cone_deviation": conical,
        "deviation_at_min_height": vertical[0] if vertical else math.nan,
        "rate": rate,
        "probe_count": int(np.count_nonzero(probes)),
    }


def nt_domination(
    prob: DirichletProblem,
    cone: ConeSpec = ConeSpec(),
    trials: int = 20,
    seed: int = 0,
    data: Optional[Sequence[BoundaryField]] = None,
    pc: Optional[PoissonConstruction] = None,
) -> Dict[str, object]:
    """Pointwise ratio N u / M f over random data.

    The datum of prob fixes the grid; with ``data`` the given fields are used
    instead of seeded band-limited nonnegative draws.

    Raises:
        SpecViolation: If fewer than 10 random trials are requested
    """
    grid = prob.datum.grid
    if data is None:
        if trials < MIN_TRIALS:
            raise SpecViolation(f"nt_domination needs at least {MIN_TRIALS} trials, got {trials}")
        rng = np.random.default_rng(seed)
        data = [band_limited_field(grid, prob.system.M, rng, nonnegative=True) for _ in range(trials)]
    if pc is None:
        pc = build_poisson(prob.system, grid, prob.kernel_method)
    per_trial = []
    for f in data:
        u = solve(DirichletProblem(prob.system, f, prob.heights, prob.kernel_method), pc)
        nu = np.real(nontangential_max(u, cone).values[..., 0])
        mf = np.real(hl_maximal(f).values[..., 0])
        keep = mf > RATIO_FLOOR * float(mf.max(initial=0.0))
        per_trial.append(float(np.max(nu[keep] / mf[keep])) if np.any(keep) else 0.0)
    logger.info(f"N u / M f over {len(per_trial)} data: max {max(per_trial):.4g}")
    return {"per_trial_max": per_trial, "max_ratio": max(per_trial), "trials": len(per_trial)}


# ---------------------------------------------------------------------------
# Semigroup and reconstruction
# ---------------------------------------------------------------------------

def semigroup_check(pc: PoissonConstruction, t1: float, t2: float) -> Dict[str, float]:
    """Residuals of P_{t1} * P_{t2} = P_{t1+t2} and of commutativity.

    Raises:
        InvalidHeights: If t1, t2 or t1 + t2 lies outside [2h, R/8]
    """
    grid = pc.grid
    for t in (t1, t2, t1 + t2):
        if t < 2.0 * grid.h * (1 - 1e-12) or t > grid.R / 8.0 * (1 + 1e-12):
            raise InvalidHeights(f"Semigroup heights must lie in [2h, R/8], got {t:g}")
    first, second, total = pc.slice(t1), pc.slice(t2), pc.slice(t1 + t2)
    product = convolve_kernels(first, second)
    reverse = convolve_kernels(second, first)
    identity = convolve_kernels(first, delta_kernel(grid, first.M))
    residual = float(np.max(np.abs(product.values - total.values)))
    scale = float(np.max(np.abs(total.values)))
    report = {
        "t1": float(t1),
        "t2": float(t2),
        "residual": residual,
        "normalized_residual": residual / scale if scale > 0 else 0.0,
        "commutator": float(np.max(np.abs(product.values - reverse.values))),
        "delta_identity": float(np.max(np.abs(identity.values - first.values))),
    }
    logger.info(f"Semigroup t1={t1:g}, t2={t2:g}: residual {residual:.3e}")
    return report


def semigroup_refinement(
    sys: EllipticSystem, method: KernelMethod, dim: int, R: float, N: int, t1: float = 1.0, t2: float = 1.0
) -> Dict[str, float]:
    """Semigroup residual on (R, N) and on (2R, 2N), same spacing, larger box."""
    coarse = semigroup_check(build_poisson(sys, make_grid(dim, R, N), method), t1, t2)["residual"]
    fine = semigroup_check(build_poisson(sys, make_grid(dim, 2 * R, 2 * N), method), t1, t2)["residual"]
    return {"coarse_residual": coarse, "fine_residual": fine, "improved": fine <= coarse * 1.1 + 1e-12}


def fatou_reconstruction(
    u: HalfSpaceField, pc: PoissonConstruction, t_small: float, t_big: float
) -> Dict[str, float]:
    """max |u(., t_big) - P_{t_big - t_small} * u(., t_small)|.

    Raises:
        InvalidHeights: If t_small >= t_big or either height is not stored
    """
    if not t_small < t_big:
        raise InvalidHeights(f"Need t_small < t_big, got {t_small:g} and {t_big:g}")
    try:
        lower, upper = u.at(t_small), u.at(t_big)
    except KeyError as e:
        raise InvalidHeights(str(e)) from e
    rebuilt = fft_convolve(pc.slice(t_big - t_small), lower)
    residual = float(np.max(np.abs(rebuilt.values - upper.values)))
    return {"t_small": float(t_small), "t_big": float(t_big), "residual": residual}


# ---------------------------------------------------------------------------
# Atoms
# ---------------------------------------------------------------------------

def atom_decay(
    prob: DirichletProblem,
    cube: Tuple[Sequence[float], float],
    flavor: AtomFlavor = AtomFlavor.H1,
    exponent: float = 2.0,
    cone: ConeSpec = ConeSpec(),
    pc: Optional[PoissonConstruction] = None,
) -> Dict[str, float]:
    """Decay of N u for an atomic datum.

    Reports the off-cube constant sup N u |x' - x_Q|^n / l(Q) over nodes with
    |x' - x_Q|_inf > sqrt(n) l(Q) and |x'| <= R/2, the L^1 mass of N u, the
    fitted decay exponent of N u on sqrt(n) l(Q) * 2 <= |x' - x_Q| <= R/8,
    and for central atoms the Beurling norm of N u.

    Raises:
        InvalidAtom: If the datum is not an atom of the given flavor
    """
    atom = validate_atom(prob.datum, cube, flavor, exponent)
    grid = prob.datum.grid
    n = grid.n
    side = atom.side
    u = solve(prob, pc)
    nu = np.real(nontangential_max(u, cone).values[..., 0])
    offset = grid.nodes - np.asarray(atom.center)
    distance = np.linalg.norm(offset, axis=-1)
    far = (np.max(np.abs(offset), axis=-1) > math.sqrt(n) * side) & (grid.radius <= grid.R / 2.0)
    constant = float(np.max(nu[far] * distance[far] ** n / side)) if np.any(far) else 0.0
    annulus = (distance >= 2.0 * math.sqrt(n) * side) & (distance <= grid.R / 8.0) & (nu > 0)
    if np.count_nonzero(annulus) >= 2:
        slope = np.polyfit(np.log(distance[annulus]), np.log(nu[annulus]), 1)[0]
        exponent_fit = float(-slope)
    else:
        exponent_fit = math.nan
    report = {
        "off_cube_constant": constant,
        "nu_mass": grid.cell_volume * float(np.sum(nu)),
        "decay_exponent": exponent_fit,
    }
    if flavor == AtomFlavor.BEURLING_CENTRAL:
        report["nu_beurling_norm"] = beurling_norm(BoundaryField(grid, nu[..., np.newaxis]), exponent)
    logger.debug(f"Atom side {side:g}: off-cube constant {constant:.4g}, decay exponent {exponent_fit:.3g}")
    return report


# ---------------------------------------------------------------------------
# Norm tables
# ---------------------------------------------------------------------------

def wellposedness_table(
    systems: Sequence[EllipticSystem],
    specs: Sequence[NormSpec],
    grid: BoundaryGrid,
    trials: int = 20,
    seed: int = 0,
    heights: Optional[Sequence[float]] = None,
    cone: ConeSpec = ConeSpec(),
) -> List[Dict[str, object]]:
    """Max over random data of ||N u||_X / ||f||_X for each (system, spec).

    Raises:
        SpecScreenFailed: If a spec fails its maximal-operator screen
    """
    screens = {index: maximal_screen(spec, grid, seed) for index, spec in enumerate(specs)}
    heights = default_heights(grid) if heights is None else heights
    rows = []
    for sys in systems:
        pc = build_poisson(sys, grid, auto_method(sys))
        rng = np.random.default_rng(seed)
        data = [band_limited_field(grid, sys.M, rng) for _ in range(trials)]
        maxima = [
            np.real(nontangential_max(solve(DirichletProblem(sys, f, heights), pc), cone).values[..., 0])
            for f in data
        ]
        for index, spec in enumerate(specs):
            ratios = []
            for f, nu in zip(data, maxima):
                denominator = norm(f, spec)
                if denominator > 0:
                    ratios.append(norm(BoundaryField(grid, nu[..., np.newaxis]), spec) / denominator)
            rows.append(
                {
                    "system": sys.label,
                    "spec": spec_label(spec),
                    "max_ratio": max(ratios) if ratios else math.nan,
                    "trials": len(ratios),
                    "screen": screens[index],
                }
            )
            logger.info(f"{sys.label} / {spec_label(spec)}: max ||N u|| / ||f|| = {rows[-1]['max_ratio']:.4g}")
    return rows


def semigroup_operator_bound(
    pc: PoissonConstruction,
    spec: NormSpec,
    t_list: Sequence[float] = (1.0, 2.0, 4.0),
    trials: int = 10,
    seed: int = 0,
    data: Optional[Sequence[BoundaryField]] = None,
) -> Dict[str, object]:
    """Max over t and data of ||P_t * f||_X / ||f||_X, skipping f = 0.

    Raises:
        SpecScreenFailed: If spec fails its maximal-operator screen
    """
    grid = pc.grid
    maximal_screen(spec, grid, seed)
    if data is None:
        rng = np.random.default_rng(seed)
        data = [band_limited_field(grid, pc.system.M, rng, nonnegative=True) for _ in range(trials)]
    per_height = {}
    for t in t_list:
        ratios = []
        for f in data:
            denominator = norm(f, spec)
            if denominator == 0:
                continue
            ratios.append(norm(fft_convolve(pc.slice(t), f), spec) / denominator)
        per_height[float(t)] = max(ratios) if ratios else math.nan
    finite = [v for v in per_height.values() if math.isfinite(v)]
    return {
        "per_height_max": {f"{t:g}": v for t, v in per_height.items()},
        "max_ratio": max(finite) if finite else math.nan,
        "flatness": max(finite) / min(finite) if finite and min(finite) > 0 else math.nan,
    }


def scaling_check(
    f_fn, grid: BoundaryGrid, heights: Sequence[float], lam: int = 2
) -> Dict[str, float]:
    """Harmonic dilation consistency u_lam(x', t) = u(lam x', lam t).

    u solves with datum f and u_lam with datum f(lam .) on the same grid
    (explicit harmonic kernel); compared at |x'|_inf <= R/(2 lam) and at
    heights t with lam t also in ``heights``.

    Raises:
        SpecViolation: If lam is not an integer >= 2
    """
    if int(lam) != lam or lam < 2:
        raise SpecViolation(f"Dilation factor must be an integer >= 2, got {lam}")
    lam = int(lam)
    sys = laplacian(grid.n)
    pc = build_poisson(sys, grid, KernelMethod.HARMONIC_EXPLICIT)
    heights = check_heights(grid, heights)
    u = solve(DirichletProblem(sys, sample(grid, 1, f_fn), heights), pc)
    u_lam = solve(DirichletProblem(sys, sample(grid, 1, lambda x: f_fn(lam * x)), heights), pc)
    mask = inner_mask(grid, 0.5 / lam)
    index = np.nonzero(mask)
    scaled = tuple(lam * k - (lam - 1) * (grid.N // 2) for k in index)
    worst, compared = 0.0, 0
    for t in heights:
        target = lam * t
        if not any(math.isclose(target, s, rel_tol=1e-12) for s in heights):
            continue
        left = u_lam.at(t).values[index]
        right = u.at(target).values[scaled]
        worst = max(worst, float(np.max(np.abs(left - right))))
        compared += 1
    return {"lambda": float(lam), "max_error": worst, "heights_compared": compared}
