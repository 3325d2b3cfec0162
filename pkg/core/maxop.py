"""
Maximal operators and Muckenhoupt weights on boundary grids.

Cube families are finite: a cube is a block of m^dim consecutive nodes lying
inside the grid and has side m h. Averages over every block of a given side
come from prefix sums; the max over blocks containing a node is a sliding
maximum (scipy.ndimage) over the array of block averages.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from core.errors import EmptyHeights, NonPositiveWeight, SpecViolation
from core.grid import indicator_ball, make_grid
from core.young import luxemburg_rows, zygmund_young
from data.models import (
    ApReport,
    BoundaryField,
    BoundaryGrid,
    ConeSpec,
    CubeFamily,
    HalfSpaceField,
    Weight,
)


logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Cube family helpers
# ---------------------------------------------------------------------------

def cube_sides(N: int, family: CubeFamily = CubeFamily.ALL) -> List[int]:
    """Block sizes (in nodes) of a cube family on an N-point axis."""
    if family == CubeFamily.DYADIC:
        return [2 ** j for j in range(int(math.log2(N)) + 1)]
    return list(range(1, N + 1))


def block_averages(values: np.ndarray, m: int) -> np.ndarray:
    """Averages over every m^dim block, shape (N - m + 1,)*dim.

    Block k covers nodes k..k+m-1 along each axis.
    """
    if m == 1:
        return np.array(values, dtype=float)
    sums = np.asarray(values, dtype=float)
    for axis in range(sums.ndim):
        prefix = np.cumsum(sums, axis=axis)
        pad = [(0, 0)] * sums.ndim
        pad[axis] = (1, 0)
        prefix = np.pad(prefix, pad)
        upper = [slice(None)] * sums.ndim
        lower = [slice(None)] * sums.ndim
        upper[axis] = slice(m, None)
        lower[axis] = slice(None, -m)
        sums = prefix[tuple(upper)] - prefix[tuple(lower)]
    return sums / m ** sums.ndim


def block_minima(values: np.ndarray, m: int) -> np.ndarray:
    """Minimum over every m^dim block, shape (N - m + 1,)*dim."""
    filtered = ndimage.minimum_filter(values, size=m, mode="nearest")
    count = values.shape[0] - m + 1
    crop = tuple(slice(m // 2, m // 2 + count) for _ in range(values.ndim))
    return filtered[crop]


def spread_max(block_values: np.ndarray, m: int, N: int) -> np.ndarray:
    """For every node, the max of block_values over blocks containing it."""
    dim = block_values.ndim
    padded = np.full((N + m - 1,) * dim, -np.inf)
    padded[tuple(slice(m - 1, N) for _ in range(dim))] = block_values
    if m == 1:
        return padded
    filtered = ndimage.maximum_filter(padded, size=m, mode="constant", cval=-np.inf)
    return filtered[tuple(slice(m // 2, m // 2 + N) for _ in range(dim))]


# ---------------------------------------------------------------------------
# Hardy-Littlewood maximal operator
# ---------------------------------------------------------------------------

def hl_maximal(f: BoundaryField, family: CubeFamily = CubeFamily.ALL) -> BoundaryField:
    """Maximal function: at each node the largest average of |f| over family cubes containing it."""
    modulus = f.modulus
    N = f.grid.N
    out = np.zeros(f.grid.shape)
    for m in cube_sides(N, family):
        out = np.maximum(out, spread_max(block_averages(modulus, m), m, N))
    return BoundaryField(f.grid, out[..., np.newaxis])


def iterated_maximal(f: BoundaryField, family: CubeFamily = CubeFamily.ALL) -> BoundaryField:
    """M applied twice."""
    return hl_maximal(hl_maximal(f, family), family)


def weak_type_ratio(f: BoundaryField, lam: float, family: CubeFamily = CubeFamily.ALL) -> float:
    """lambda |{M f > lambda}| / ||f||_1, the weak (1,1) quotient at level lambda."""
    maximal = np.real(hl_maximal(f, family).values[..., 0])
    level_set = f.grid.cell_volume * np.count_nonzero(maximal > lam)
    mass = f.grid.cell_volume * float(np.sum(f.modulus))
    if mass == 0:
        return 0.0
    return lam * level_set / mass


def llogl_maximal(f: BoundaryField, stride_fraction: int = 4) -> BoundaryField:
    """Local L log L maximal function with Phi(t) = t log(e + t).

    Cubes have power-of-two sides m and start at multiples of
    max(1, m // stride_fraction). Each cube contributes the normalized
    Luxemburg norm inf{lam : avg_Q Phi(|f| / lam) <= 1}.
    """
    young = zygmund_young(1.0, 1.0)
    modulus = f.modulus
    grid = f.grid
    N = grid.N
    # Singletons: Phi(|f| / lam) = 1.
    out = luxemburg_rows(modulus.reshape(-1, 1), young).reshape(grid.shape)
    for m in cube_sides(N, CubeFamily.DYADIC)[1:]:
        step = max(1, m // stride_fraction)
        windows = sliding_window_view(modulus, (m,) * grid.dim)
        windows = windows[tuple(slice(None, None, step) for _ in range(grid.dim))]
        starts_shape = windows.shape[: grid.dim]
        norms = luxemburg_rows(windows.reshape(-1, m ** grid.dim), young).reshape(starts_shape)
        for start in np.ndindex(*starts_shape):
            block = tuple(slice(k * step, k * step + m) for k in start)
            out[block] = np.maximum(out[block], norms[start])
    return BoundaryField(grid, out[..., np.newaxis])


def m_ball_profile(
    dim: int, R: float, N: int, family: CubeFamily = CubeFamily.ALL
) -> Dict[str, float]:
    """Profile of M(1_B) and M^2(1_B) for the unit ball against the predicted decay.

    Returns:
        min/max over |x'| <= R/2 of M(1_B)(1+|x'|^dim) and of
        M^2(1_B)(1+|x'|^dim)/(1 + log+ |x'|), their spreads, and the value
        of the first ratio at the origin
    """
    grid = make_grid(dim, R, N)
    ball = indicator_ball(grid, radius=1.0)
    first = np.real(hl_maximal(ball, family).values[..., 0])
    second = np.real(iterated_maximal(ball, family).values[..., 0])
    r = grid.radius
    decay = 1.0 + r ** dim
    log_plus = 1.0 + np.log(np.maximum(r, 1.0))
    ratio_m = first * decay
    ratio_m2 = second * decay / log_plus
    mask = r <= R / 2
    report = {
        "m_ratio_min": float(ratio_m[mask].min()),
        "m_ratio_max": float(ratio_m[mask].max()),
        "m2_ratio_min": float(ratio_m2[mask].min()),
        "m2_ratio_max": float(ratio_m2[mask].max()),
        "m_ratio_at_origin": float(ratio_m[grid.origin_index]),
    }
    report["m_spread"] = report["m_ratio_max"] / report["m_ratio_min"]
    report["m2_spread"] = report["m2_ratio_max"] / report["m2_ratio_min"]
    logger.info(f"M(1_B) profile on dim={dim}, R={R}, N={N}: spread {report['m_spread']:.4g}")
    return report


# ---------------------------------------------------------------------------
# Nontangential maximal function
# ---------------------------------------------------------------------------

def cone_footprint(grid: BoundaryGrid, radius: float) -> np.ndarray:
    """Boolean footprint of the offsets d with |d| h < radius."""
    k = max(0, math.ceil(radius / grid.h) - 1)
    offsets = np.arange(-k, k + 1) * grid.h
    mesh = np.meshgrid(*([offsets] * grid.dim), indexing="ij")
    distance = np.sqrt(sum(axis ** 2 for axis in mesh))
    return distance < radius


def nontangential_max(u: HalfSpaceField, cone: ConeSpec) -> BoundaryField:
    """N u(x') = max over stored heights t and nodes |x' - y'| < kappa t of |u(y', t)|.

    Heights at or above cone.eps are ignored when eps is set. Cone nodes
    outside the grid do not exist (no periodic wrap).

    Raises:
        EmptyHeights: If u has no stored heights
    """
    if len(u.heights) == 0:
        raise EmptyHeights("Half-space field has no heights")
    grid = u.grid
    out = np.zeros(grid.shape)
    for index, t in enumerate(u.heights):
        if cone.eps is not None and t >= cone.eps:
            continue
        modulus = np.linalg.norm(u.values[index], axis=-1)
        footprint = cone_footprint(grid, cone.kappa * t)
        if footprint.size == 1:
            local = modulus
        else:
            local = ndimage.maximum_filter(modulus, footprint=footprint, mode="constant", cval=0.0)
        out = np.maximum(out, local)
    return BoundaryField(grid, out[..., np.newaxis])


def cone_aperture_comparison(
    u: HalfSpaceField,
    kappas: Sequence[float],
    p: float = 2.0,
    w: Optional[Weight] = None,
) -> Dict[str, object]:
    """Compare ||N_kappa u||_{L^p(w)} across apertures.

    Returns:
        Dictionary with the apertures, the norms, every ratio
        norm(larger kappa)/norm(smaller kappa) and the largest ratio
    """
    if not p > 0:
        raise SpecViolation(f"Exponent must be positive, got {p}")
    grid = u.grid
    weights = np.ones(grid.shape) if w is None else w.values
    ordered = sorted(float(k) for k in kappas)
    norms = []
    for kappa in ordered:
        values = np.real(nontangential_max(u, ConeSpec(kappa=kappa)).values[..., 0])
        norms.append(float((grid.cell_volume * np.sum(values ** p * weights)) ** (1.0 / p)))
    ratios = {}
    for i in range(len(ordered)):
        for j in range(i):
            key = f"{ordered[i]:g}/{ordered[j]:g}"
            ratios[key] = norms[i] / norms[j] if norms[j] > 0 else (1.0 if norms[i] == 0 else math.inf)
    return {
        "kappas": ordered,
        "norms": norms,
        "ratios": ratios,
        "max_ratio": max(ratios.values()) if ratios else 1.0,
        "min_ratio": min(ratios.values()) if ratios else 1.0,
    }


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------

def make_weight(field: BoundaryField, label: str = "w") -> Weight:
    """Validate a positive weight.

    Raises:
        NonPositiveWeight: If any value is not real, positive and finite
    """
    values = field.values[..., 0]
    real = np.real(values)
    if np.any(np.abs(np.imag(values)) > 0) or not np.all(np.isfinite(real)) or np.any(real <= 0):
        raise NonPositiveWeight(f"Weight {label} must be real, positive and finite at every node")
    return Weight(field=field, label=label)


def power_weight(grid: BoundaryGrid, gamma: float) -> Weight:
    """|x'|^gamma with |x'| floored at h/2 so the origin node stays finite."""
    r = np.maximum(grid.radius, grid.h / 2.0)
    return make_weight(BoundaryField(grid, (r ** gamma)[..., np.newaxis]), label=f"|x|^{gamma:g}")


def ap_constant(w: Weight, p: float, family: CubeFamily = CubeFamily.ALL) -> ApReport:
    """Muckenhoupt A_p constant over the finite cube family.

    For p > 1 the supremum of (avg w)(avg w^{1-p'})^{p-1}; for p = 1 the
    supremum of (avg w)/(min w) over each cube.

    Raises:
        NonPositiveWeight: If w has a nonpositive or non-finite value
        SpecViolation: If p < 1
    """
    if p < 1:
        raise SpecViolation(f"A_p needs p >= 1, got {p}")
    values = w.values
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise NonPositiveWeight(f"Weight {w.label} has nonpositive or non-finite values")
    grid = w.grid
    dual = values ** (-1.0 / (p - 1.0)) if p > 1 else None
    best, best_cube = -math.inf, ((0.0,) * grid.dim, grid.h)
    for m in cube_sides(grid.N, family):
        mean_w = block_averages(values, m)
        if p > 1:
            quantity = mean_w * block_averages(dual, m) ** (p - 1.0)
        else:
            quantity = mean_w / block_minima(values, m)
        index = np.unravel_index(int(np.argmax(quantity)), quantity.shape)
        if quantity[index] > best:
            best = float(quantity[index])
            center = tuple(float(grid.axis[k] + 0.5 * (m - 1) * grid.h) for k in index)
            best_cube = (center, m * grid.h)
    # Jensen gives >= 1 cube by cube; only rounding can go below.
    constant = max(1.0, best)
    logger.debug(f"[{w.label}]_A_{p:g} = {constant:.6g} at cube {best_cube}")
    return ApReport(p=float(p), constant=constant, argmax_cube=best_cube)


def cube_cover(grid: BoundaryGrid, center: Tuple[float, ...], side: float) -> Tuple[slice, ...]:
    """Index block of the nodes of a family cube given by (center, side)."""
    m = int(round(side / grid.h))
    starts = [int(round((c - 0.5 * (m - 1) * grid.h + grid.R) / grid.h)) for c in center]
    return tuple(slice(s, s + m) for s in starts)
