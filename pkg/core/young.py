"""
Young functions and row-wise Luxemburg averages.

Shared by the Orlicz and Zygmund norms in core.spaces and the local
L log L maximal function in core.maxop.
"""

import numpy as np

from core.errors import SpecViolation
from data.models import YoungFunction


BISECTION_ITERATIONS = 60
BISECTION_SPAN = 1e12


def power_young(p: float) -> YoungFunction:
    return YoungFunction(lambda t: t ** p, label=f"t^{p:g}")


def zygmund_young(p: float, alpha: float) -> YoungFunction:
    return YoungFunction(
        lambda t: t ** p * np.log(np.e + t) ** alpha, label=f"t^{p:g} log(e+t)^{alpha:g}"
    )


def check_young(young: YoungFunction, samples: int = 200) -> None:
    """Spot-check Phi(0) = 0, monotonicity and midpoint convexity on a log grid.

    Raises:
        SpecViolation: If a check fails
    """
    if abs(float(young(0.0))) > 0:
        raise SpecViolation(f"Young function {young.label} has Phi(0) != 0")
    t = np.logspace(-6, 6, samples)
    values = young(t)
    if not np.all(np.diff(values) > 0):
        raise SpecViolation(f"Young function {young.label} is not strictly increasing")
    midpoint = young(0.5 * (t[:-1] + t[1:]))
    if np.any(midpoint > 0.5 * (values[:-1] + values[1:]) * (1 + 1e-9)):
        raise SpecViolation(f"Young function {young.label} failed the convexity spot check")


def luxemburg_rows(rows: np.ndarray, young: YoungFunction) -> np.ndarray:
    """Averaged Luxemburg norm of each row: inf{lam : mean Phi(row/lam) <= 1}."""
    rows = np.asarray(rows, dtype=float)
    peak = rows.max(axis=1)
    positive = peak > 0
    out = np.zeros(rows.shape[0])
    if not np.any(positive):
        return out
    data = rows[positive]
    lo = np.log(peak[positive] / BISECTION_SPAN)
    hi = np.log(peak[positive] * BISECTION_SPAN)
    with np.errstate(over="ignore"):
        for _ in range(BISECTION_ITERATIONS):
            mid = 0.5 * (lo + hi)
            inside = young(data / np.exp(mid)[:, np.newaxis]).mean(axis=1) <= 1.0
            hi = np.where(inside, mid, hi)
            lo = np.where(inside, lo, mid)
    out[positive] = np.exp(hi)
    return out
