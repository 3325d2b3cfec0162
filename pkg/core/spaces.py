"""
Function norms on boundary grids.

Lebesgue, weighted Lebesgue, Lorentz, Orlicz (Luxemburg), Zygmund and
variable-exponent norms, decreasing rearrangements (plain and weighted),
Boyd index estimates, Hoelder pairings, atoms and the Beurling norm.

Rearrangement-invariant norms are evaluated on the step-function
rearrangement, so the same code serves unweighted fields, weighted
rearrangements and the synthetic probes used for Boyd indices.
"""

import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import (
    GridMismatch,
    MeanNotZero,
    NoDualImplemented,
    SizeViolation,
    SpecScreenFailed,
    SpecViolation,
    SupportViolation,
)
from core.grid import band_limited_field, indicator_ball
from core.maxop import ap_constant, hl_maximal, iterated_maximal
from core.young import BISECTION_ITERATIONS, BISECTION_SPAN, check_young, luxemburg_rows, zygmund_young
from data.models import (
    REARRANGEMENT_INVARIANT,
    Atom,
    AtomFlavor,
    BoundaryField,
    BoundaryGrid,
    Lebesgue,
    Lorentz,
    NormSpec,
    Orlicz,
    Rearrangement,
    VariableExponent,
    Weight,
    WeightedLebesgue,
    WeightedRI,
    YoungFunction,
    Zygmund,
)


logger = logging.getLogger(__name__)

# Default dilation grid 2^{k/4}, k = -24..24, k != 0.
DEFAULT_T_GRID = tuple(2.0 ** (k / 4.0) for k in range(-24, 25) if k != 0)
# Screens: A_p constants above this count as infinite.
AP_SCREEN_LIMIT = 1e6
BOYD_SCREEN_MARGIN = 1.05
MAXIMAL_SCREEN_LIMIT = 100.0


# ---------------------------------------------------------------------------
# Young functions and spec validation
# ---------------------------------------------------------------------------

def intersection_space(p: float, q: float) -> Orlicz:
    """L^p intersected with L^q as the Orlicz space of max(t^p, t^q)."""
    return Orlicz(YoungFunction(lambda t: np.maximum(t ** p, t ** q), label=f"L^{p:g} cap L^{q:g}"))


def sum_space(p: float, q: float) -> Orlicz:
    """L^p + L^q as an Orlicz space.

    Phi(t) = t^b on [0, 1] and (b/a)(t^a - 1) + 1 beyond, with a = min(p, q),
    b = max(p, q): a convex function equivalent to min(t^p, t^q).
    """
    a, b = min(p, q), max(p, q)

    def phi(t: np.ndarray) -> np.ndarray:
        return np.where(t <= 1.0, t ** b, (b / a) * (t ** a - 1.0) + 1.0)

    return Orlicz(YoungFunction(phi, label=f"L^{p:g} + L^{q:g}"))


def validate_spec(spec: NormSpec) -> None:
    """Check the parameter invariants of a NormSpec.

    Raises:
        SpecViolation: On any violated invariant
    """
    if isinstance(spec, (Lebesgue, WeightedLebesgue)):
        if not 1.0 <= spec.p < math.inf:
            raise SpecViolation(f"Lebesgue exponent must lie in [1, inf), got {spec.p}")
    elif isinstance(spec, Lorentz):
        if not 1.0 <= spec.p < math.inf or not spec.q >= 1.0:
            raise SpecViolation(f"Lorentz exponents out of range: p={spec.p}, q={spec.q}")
    elif isinstance(spec, Zygmund):
        if not 1.0 <= spec.p < math.inf or not math.isfinite(spec.alpha):
            raise SpecViolation(f"Zygmund parameters out of range: p={spec.p}, alpha={spec.alpha}")
    elif isinstance(spec, Orlicz):
        check_young(spec.young)
    elif isinstance(spec, VariableExponent):
        exponent = np.real(spec.pfun.values[..., 0])
        if not np.all(np.isfinite(exponent)) or np.any(exponent <= 1.0):
            raise SpecViolation("Variable exponent must take values in (1, inf)")
    elif isinstance(spec, WeightedRI):
        if not isinstance(spec.base, REARRANGEMENT_INVARIANT):
            raise SpecViolation(f"Weighted r.i. base must be rearrangement invariant, got {spec.base.kind}")
        validate_spec(spec.base)
    else:
        raise SpecViolation(f"Unknown norm spec {spec!r}")


def is_rearrangement_invariant(spec: NormSpec) -> bool:
    return isinstance(spec, REARRANGEMENT_INVARIANT)


def spec_label(spec: NormSpec) -> str:
    if isinstance(spec, Lebesgue):
        return f"L^{spec.p:g}"
    if isinstance(spec, WeightedLebesgue):
        return f"L^{spec.p:g}({spec.weight.label})"
    if isinstance(spec, Lorentz):
        return f"L^({spec.p:g},{spec.q:g})"
    if isinstance(spec, Zygmund):
        return f"L^{spec.p:g}(log L)^{spec.alpha:g}"
    if isinstance(spec, Orlicz):
        return f"L^Phi[{spec.young.label}]"
    if isinstance(spec, VariableExponent):
        return "L^p(.)"
    return f"{spec_label(spec.base)}({spec.weight.label})"


# ---------------------------------------------------------------------------
# Rearrangements
# ---------------------------------------------------------------------------

def decreasing_rearrangement(f: BoundaryField, w: Optional[Weight] = None) -> Rearrangement:
    """Step-function decreasing rearrangement of |f|.

    Node values are sorted in decreasing order and the cell masses h^dim
    (or w h^dim for the weighted rearrangement) are accumulated into
    breakpoints. Zero values are dropped: f* vanishes past the support.
    """
    grid = f.grid
    modulus = f.modulus.ravel()
    masses = np.full(modulus.shape, grid.cell_volume)
    if w is not None:
        if w.grid != grid:
            raise GridMismatch("Weight and field live on different grids")
        masses = masses * w.values.ravel()
    order = np.argsort(-modulus, kind="stable")
    values = modulus[order]
    keep = values > 0
    return Rearrangement(np.cumsum(masses[order][keep]), values[keep])


def distribution_function(f: BoundaryField, level: float) -> float:
    """|{|f| > level}| on the grid."""
    return f.grid.cell_volume * float(np.count_nonzero(f.modulus > level))


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def norm(f: BoundaryField, spec: NormSpec) -> float:
    """Function norm of |f| for any NormSpec.

    Raises:
        SpecViolation: If the spec is invalid or lives on another grid
    """
    validate_spec(spec)
    grid = f.grid
    modulus = f.modulus
    if isinstance(spec, Lebesgue):
        return float((grid.cell_volume * np.sum(modulus ** spec.p)) ** (1.0 / spec.p))
    if isinstance(spec, WeightedLebesgue):
        _check_weight_grid(spec.weight, grid)
        total = grid.cell_volume * np.sum(modulus ** spec.p * spec.weight.values)
        return float(total ** (1.0 / spec.p))
    if isinstance(spec, VariableExponent):
        if spec.pfun.grid != grid:
            raise SpecViolation("Variable exponent lives on another grid")
        exponent = np.real(spec.pfun.values[..., 0])
        flat, powers = modulus.ravel(), exponent.ravel()

        def modular(lam: float) -> float:
            return grid.cell_volume * float(np.sum((flat / lam) ** powers))

        return _luxemburg(modular, float(flat.max(initial=0.0)), "variable exponent")
    if isinstance(spec, WeightedRI):
        _check_weight_grid(spec.weight, grid)
        return rearrangement_norm(decreasing_rearrangement(f, spec.weight), spec.base)
    return rearrangement_norm(decreasing_rearrangement(f), spec)


def rearrangement_norm(rearrangement: Rearrangement, spec: NormSpec) -> float:
    """Norm of a decreasing step function for a rearrangement-invariant spec."""
    v, widths = rearrangement.values, rearrangement.widths
    if v.size == 0:
        return 0.0
    if isinstance(spec, Lebesgue):
        return float(np.sum(v ** spec.p * widths) ** (1.0 / spec.p))
    if isinstance(spec, Lorentz):
        return _lorentz(rearrangement, spec.p, spec.q)
    if isinstance(spec, (Orlicz, Zygmund)):
        young = spec.young if isinstance(spec, Orlicz) else zygmund_young(spec.p, spec.alpha)

        def modular(lam: float) -> float:
            return float(np.sum(young(v / lam) * widths))

        return _luxemburg(modular, float(v.max()), young.label)
    raise SpecViolation(f"{spec_label(spec)} is not rearrangement invariant")


def _lorentz(rearrangement: Rearrangement, p: float, q: float) -> float:
    v = rearrangement.values
    right = rearrangement.breakpoints
    if math.isinf(q):
        return float(np.max(v * right ** (1.0 / p)))
    left = rearrangement.left
    # integral of s^{q/p - 1} over each step
    pieces = (p / q) * (right ** (q / p) - left ** (q / p))
    return float(np.sum(v ** q * pieces) ** (1.0 / q))


def _luxemburg(modular, max_modulus: float, label: str) -> float:
    """inf{lam > 0 : modular(lam) <= 1} by bisection in log space."""
    if max_modulus == 0:
        return 0.0
    lo = math.log(max_modulus / BISECTION_SPAN)
    hi = math.log(max_modulus * BISECTION_SPAN)
    with np.errstate(over="ignore"):
        if modular(math.exp(hi)) > 1.0:
            logger.warning(f"Luxemburg bisection for {label} did not bracket; returning inf")
            return math.inf
        for _ in range(BISECTION_ITERATIONS):
            mid = 0.5 * (lo + hi)
            if modular(math.exp(mid)) <= 1.0:
                hi = mid
            else:
                lo = mid
    return math.exp(hi)


def llogl_local_norm(f: BoundaryField, center: Sequence[float], side: float) -> float:
    """Averaged L log L Luxemburg norm of f over the open cube (center, side)."""
    grid = f.grid
    inside = np.all(np.abs(grid.nodes - np.asarray(center, dtype=float)) < side / 2.0, axis=-1)
    row = f.modulus[inside]
    if row.size == 0:
        return 0.0
    return float(luxemburg_rows(row[np.newaxis], zygmund_young(1.0, 1.0))[0])


# ---------------------------------------------------------------------------
# Duality
# ---------------------------------------------------------------------------

def conjugate_exponent(p: float) -> float:
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def dual_spec(spec: NormSpec) -> NormSpec:
    """Koethe dual for the pairs with a closed form.

    Raises:
        NoDualImplemented: For every other spec, and for L^1
    """
    if isinstance(spec, Lebesgue) and spec.p > 1:
        return Lebesgue(conjugate_exponent(spec.p))
    if isinstance(spec, Lorentz) and spec.p > 1:
        return Lorentz(conjugate_exponent(spec.p), conjugate_exponent(spec.q))
    if isinstance(spec, WeightedLebesgue) and spec.p > 1:
        p_dual = conjugate_exponent(spec.p)
        field = BoundaryField(
            spec.weight.grid, (spec.weight.values ** (1.0 - p_dual))[..., np.newaxis]
        )
        return WeightedLebesgue(p_dual, Weight(field, label=f"{spec.weight.label}^(1-p')"))
    raise NoDualImplemented(f"No closed-form dual for {spec_label(spec)}")


def holder_pairing(f: BoundaryField, g: BoundaryField, spec: NormSpec) -> Tuple[float, float]:
    """Both sides of int |f g| <= ||f||_X ||g||_X'.

    Raises:
        NoDualImplemented: If spec has no closed-form dual
    """
    dual = dual_spec(spec)
    if f.grid != g.grid:
        raise GridMismatch("Hoelder pairing needs fields on the same grid")
    lhs = f.grid.cell_volume * float(np.sum(f.modulus * g.modulus))
    return lhs, norm(f, spec) * norm(g, dual)


# ---------------------------------------------------------------------------
# Boyd indices
# ---------------------------------------------------------------------------

def boyd_probes() -> List[Rearrangement]:
    """Indicators 1_[0,2^k) for k = 8..20 and truncated powers s^-gamma on [0, 2^20)."""
    probes = [Rearrangement(np.array([2.0 ** k]), np.array([1.0])) for k in range(8, 21)]
    right = 2.0 ** (8.0 + np.arange(0, 97) / 8.0)
    left = np.concatenate(([0.0], right[:-1]))
    for gamma in (0.1, 0.2, 0.3, 0.4):
        values = np.maximum(left, right[0]) ** (-gamma)
        probes.append(Rearrangement(right, values))
    return probes


def dilation_norm(spec: NormSpec, t: float, probes: Optional[List[Rearrangement]] = None) -> float:
    """h_X(t): sup over the probe family of ||D_t f|| / ||f||, a lower bound on the true norm."""
    probes = boyd_probes() if probes is None else probes
    ratios = [rearrangement_norm(p.dilate(t), spec) / rearrangement_norm(p, spec) for p in probes]
    return float(max(ratios))


def boyd_indices(spec: NormSpec, t_grid: Iterable[float] = DEFAULT_T_GRID) -> Tuple[float, float]:
    """Estimated lower and upper Boyd indices.

    p_X = sup over t > 1 of log t / log h_X(t) and q_X = inf over t < 1 of
    the same quotient.

    Raises:
        SpecViolation: If spec is not rearrangement invariant
    """
    validate_spec(spec)
    if not is_rearrangement_invariant(spec):
        raise SpecViolation(f"Boyd indices need a rearrangement-invariant spec, got {spec_label(spec)}")
    probes = boyd_probes()
    lower, upper = -math.inf, math.inf
    for t in t_grid:
        growth = dilation_norm(spec, t, probes)
        if t > 1 and growth > 1:
            lower = max(lower, math.log(t) / math.log(growth))
        elif t < 1 and 0 < growth < 1:
            upper = min(upper, math.log(t) / math.log(growth))
    logger.debug(f"Boyd indices of {spec_label(spec)}: p_X={lower:.4g}, q_X={upper:.4g}")
    return lower, upper


# ---------------------------------------------------------------------------
# Maximal-operator screens
# ---------------------------------------------------------------------------

def variable_exponent_screen(pfun: BoundaryField) -> Dict[str, float]:
    """p-, p+, p_inf and the local and decay log-Hoelder constants of an exponent.

    p_inf is the mean over the outer shell |x'| >= 0.9 R.
    """
    grid = pfun.grid
    p = np.real(pfun.values[..., 0])
    r = grid.radius
    p_inf = float(np.mean(p[r >= 0.9 * grid.R])) if np.any(r >= 0.9 * grid.R) else float(p.mean())
    reach = int(math.floor(0.5 / grid.h))
    local = 0.0
    for offset in np.ndindex(*((2 * reach + 1,) * grid.dim)):
        shift = np.array(offset) - reach
        distance = grid.h * float(np.linalg.norm(shift))
        if distance == 0 or distance > 0.5:
            continue
        moved = p
        for axis, k in enumerate(shift):
            moved = np.roll(moved, -int(k), axis=axis)
        valid = np.ones(grid.shape, dtype=bool)
        for axis, k in enumerate(shift):
            index = [slice(None)] * grid.dim
            index[axis] = slice(grid.N - int(k), None) if k > 0 else slice(None, -int(k) if k < 0 else None)
            if k != 0:
                valid[tuple(index)] = False
        gap = np.abs(moved - p)[valid]
        local = max(local, float(gap.max(initial=0.0)) * -math.log(distance))
    decay = float(np.max(np.abs(p - p_inf) * np.log(np.e + r)))
    return {
        "p_minus": float(p.min()),
        "p_plus": float(p.max()),
        "p_inf": p_inf,
        "log_holder_local": local,
        "log_holder_decay": decay,
    }


def maximal_bound_screen(spec: NormSpec, grid: BoundaryGrid, trials: int = 10, seed: int = 0) -> float:
    """Largest sampled ||M f|| / ||f|| over seeded random data."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        f = band_limited_field(grid, 1, rng, nonnegative=True)
        denominator = norm(f, spec)
        if denominator > 0:
            worst = max(worst, norm(hl_maximal(f), spec) / denominator)
    return worst


def maximal_screen(spec: NormSpec, grid: BoundaryGrid, seed: int = 0) -> Dict[str, float]:
    """Evidence that the maximal operator is bounded on spec.

    Raises:
        SpecScreenFailed: If the screen does not pass
    """
    validate_spec(spec)
    label = spec_label(spec)
    if isinstance(spec, Lebesgue):
        if spec.p <= 1:
            raise SpecScreenFailed(f"M is unbounded on {label}")
        return {"p_X": spec.p}
    if isinstance(spec, WeightedLebesgue):
        if spec.p <= 1:
            raise SpecScreenFailed(f"M is unbounded on {label}")
        constant = ap_constant(spec.weight, spec.p).constant
        if not constant < AP_SCREEN_LIMIT:
            raise SpecScreenFailed(f"Weight {spec.weight.label} fails the A_{spec.p:g} screen ({constant:.3g})")
        return {"ap_constant": constant}
    if isinstance(spec, VariableExponent):
        summary = variable_exponent_screen(spec.pfun)
        if summary["p_minus"] <= 1:
            raise SpecScreenFailed(f"p- = {summary['p_minus']:.3g} <= 1 for {label}")
        ratio = maximal_bound_screen(spec, grid, seed=seed)
        if not ratio < MAXIMAL_SCREEN_LIMIT:
            raise SpecScreenFailed(f"Sampled ||M f|| / ||f|| = {ratio:.3g} on {label}")
        summary["maximal_ratio"] = ratio
        return summary
    base = spec.base if isinstance(spec, WeightedRI) else spec
    p_x, q_x = boyd_indices(base)
    if not p_x > BOYD_SCREEN_MARGIN:
        raise SpecScreenFailed(f"Lower Boyd index {p_x:.3g} of {spec_label(base)} is not above 1")
    summary = {"p_X": p_x, "q_X": q_x}
    if isinstance(spec, WeightedRI):
        constant = ap_constant(spec.weight, p_x).constant
        if not constant < AP_SCREEN_LIMIT:
            raise SpecScreenFailed(f"Weight {spec.weight.label} fails the A_{p_x:.3g} screen")
        summary["ap_constant"] = constant
    return summary


def xw_decay_check(spec: WeightedRI, h: BoundaryField, radius: float = 1.0) -> Tuple[float, float]:
    """Both sides of int |h| M^2(1_B) <= C ||1_B||_{X(w)}^{-1} ||h||_{X(w)}.

    Raises:
        SpecViolation: If the base is not r.i., its lower Boyd index is not
            above 1, or the weight is not in A_{p_X}
    """
    if not isinstance(spec, WeightedRI):
        raise SpecViolation("xw_decay_check needs a weighted rearrangement-invariant spec")
    try:
        maximal_screen(spec, h.grid)
    except SpecScreenFailed as e:
        raise SpecViolation(str(e)) from e
    ball = indicator_ball(h.grid, radius=radius)
    m2 = np.real(iterated_maximal(ball).values[..., 0])
    lhs = h.grid.cell_volume * float(np.sum(h.modulus * m2))
    rhs = norm(h, spec) / norm(ball, spec)
    return lhs, rhs


# ---------------------------------------------------------------------------
# Atoms and the Beurling norm
# ---------------------------------------------------------------------------

def validate_atom(
    candidate: BoundaryField,
    cube: Tuple[Sequence[float], float],
    flavor: AtomFlavor,
    exponent: float = 2.0,
) -> Atom:
    """Check support, size and cancellation of an atom candidate.

    Args:
        candidate: Sampled function
        cube: (center, side) of the supporting cube
        flavor: H1 for (1,q)-atoms, BEURLING_CENTRAL for central (1,p)-atoms
        exponent: q (H1) or p (Beurling), > 1

    Returns:
        Validated Atom

    Raises:
        SizeViolation: Beurling side below 1, or the L^q size bound fails
        SupportViolation: Values outside the cube (one-cell slack), or a
            Beurling cube not centered at the origin
        MeanNotZero: |int a| > h ||a||_1
    """
    grid = candidate.grid
    center = np.asarray(cube[0], dtype=float).reshape(grid.dim)
    side = float(cube[1])
    if flavor == AtomFlavor.BEURLING_CENTRAL:
        if side < 1.0:
            raise SizeViolation(f"Central atoms need side >= 1, got {side}")
        if np.any(center != 0):
            raise SupportViolation(f"Central atoms are centered at the origin, got {tuple(center)}")
    modulus = candidate.modulus
    outside = np.any(np.abs(grid.nodes - center) > side / 2.0 + grid.h, axis=-1)
    if np.any(modulus[outside] > 0):
        raise SupportViolation(f"Atom has {int(np.count_nonzero(modulus[outside]))} nodes outside its cube")
    measure = side ** grid.dim
    size = (grid.cell_volume * float(np.sum(modulus ** exponent))) ** (1.0 / exponent)
    bound = measure ** (1.0 / exponent - 1.0)
    if size > bound * (1.0 + 1e-9):
        raise SizeViolation(f"||a||_{exponent:g} = {size:.6g} exceeds |Q|^(1/{exponent:g}-1) = {bound:.6g}")
    total = np.linalg.norm(grid.cell_volume * np.sum(candidate.values, axis=tuple(range(grid.dim))))
    l1 = grid.cell_volume * float(np.sum(modulus))
    if total > grid.h * l1:
        raise MeanNotZero(f"|int a| = {total:.3e} exceeds h ||a||_1 = {grid.h * l1:.3e}")
    return Atom(field=candidate, center=tuple(center), side=side, flavor=flavor, exponent=exponent)


def beurling_norm(f: BoundaryField, p: float) -> float:
    """sum_k 2^{k dim / p'} ||f 1_{C_k}||_p over C_0 = B(0,1), C_k = {2^{k-1} <= |x'| < 2^k}.

    The shells are half-open so every grid node lies in exactly one of them.

    Raises:
        SpecViolation: If p is not in (1, inf)
    """
    if not 1.0 < p < math.inf:
        raise SpecViolation(f"Beurling exponent must lie in (1, inf), got {p}")
    grid = f.grid
    r = grid.radius
    power = f.modulus ** p
    p_dual = conjugate_exponent(p)
    total = 0.0
    k = 0
    while True:
        outer = 2.0 ** k
        inner = 0.0 if k == 0 else 2.0 ** (k - 1)
        shell = (r < outer) if k == 0 else (r >= inner) & (r < outer)
        mass = grid.cell_volume * float(np.sum(power[shell]))
        total += 2.0 ** (k * grid.dim / p_dual) * mass ** (1.0 / p)
        if outer > float(r.max()):
            break
        k += 1
    return total


def _check_weight_grid(weight: Weight, grid: BoundaryGrid) -> None:
    if weight.grid != grid:
        raise SpecViolation(f"Weight {weight.label} lives on another grid")
