"""
Data models and enums for halfspace-kernels.

This module defines the value types shared by every numeric module: grids and
sampled fields on the boundary hyperplane, kernel slices, coefficient tensors
of elliptic systems, function-space descriptors, atoms, kernel constructions,
problems, experiment reports and the run configuration.

Array-carrying types are frozen and hold read-only copies of their arrays.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np


def _readonly(values: Any, dtype: Any = None) -> np.ndarray:
    """Return a read-only copy of ``values``."""
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class KernelMethod(str, Enum):
    """Poisson kernel constructions.

    - HARMONIC_EXPLICIT: closed-form harmonic kernel (times I_M)
    - RADIAL_REFLECTION: normal derivative of a radial fundamental solution
    - FOURIER_SYMBOL: per-frequency stable subspace of the boundary pencil
    """
    HARMONIC_EXPLICIT = "explicit"
    RADIAL_REFLECTION = "radial"
    FOURIER_SYMBOL = "symbol"


class Construction(str, Enum):
    """How a fundamental solution is evaluated."""
    HARMONIC_CLOSED_FORM = "harmonic_closed_form"
    SCALAR_CLOSED_FORM = "scalar_closed_form"
    SPHERE_QUADRATURE = "sphere_quadrature"


class CubeFamily(str, Enum):
    """Finite cube families used for maximal averages.

    - ALL: every grid-aligned cube (all sides, all positions)
    - DYADIC: power-of-two sides, all positions
    """
    ALL = "all"
    DYADIC = "dyadic"


class AtomFlavor(str, Enum):
    """Atom normalizations."""
    H1 = "h1"
    BEURLING_CENTRAL = "beurling_central"


class Verdict(str, Enum):
    """Outcome of an experiment."""
    PASS = "PASS"
    FAIL = "FAIL"
    SKIPPED = "SKIPPED"


class EnvelopeKind(str, Enum):
    """Direction in which a committed envelope bounds a metric."""
    MAX = "max"
    MIN = "min"


class Provenance(str, Enum):
    """Where a committed constant comes from."""
    PAPER = "PAPER"
    DERIVED = "DERIVED"
    TRIVIAL = "TRIVIAL"


# ---------------------------------------------------------------------------
# Grids and sampled fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryGrid:
    """Uniform grid on [-R, R)^dim with N points per axis.

    Attributes:
        dim: Boundary dimension n - 1 (1 or 2)
        R: Half width of the periodic box
        N: Points per axis (power of two)
    """
    dim: int
    R: float
    N: int

    @property
    def h(self) -> float:
        return 2.0 * self.R / self.N

    @property
    def n(self) -> int:
        """Dimension of the ambient half-space."""
        return self.dim + 1

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def size(self) -> int:
        return self.N ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def origin_index(self) -> Tuple[int, ...]:
        """Index of the node x' = 0."""
        return (self.N // 2,) * self.dim

    @property
    def axis(self) -> np.ndarray:
        """One-dimensional node coordinates -R + k h."""
        return -self.R + self.h * np.arange(self.N)

    @property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (dim,)``."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    @property
    def radius(self) -> np.ndarray:
        """Euclidean norm of each node, shape ``shape``."""
        return np.linalg.norm(self.nodes, axis=-1)

    def to_dict(self) -> Dict[str, Any]:
        return {"dim": self.dim, "R": self.R, "N": self.N}


@dataclass(frozen=True, eq=False)
class BoundaryField:
    """C^M-valued samples on a boundary grid.

    Attributes:
        grid: Grid the samples live on
        values: Array of shape ``grid.shape + (M,)``
    """
    grid: BoundaryGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))

    @property
    def channels(self) -> int:
        return self.values.shape[-1]

    @property
    def modulus(self) -> np.ndarray:
        """Euclidean modulus over channels, shape ``grid.shape``."""
        return np.linalg.norm(self.values, axis=-1)


@dataclass(frozen=True, eq=False)
class HalfSpaceField:
    """Samples of a function on horizontal slices of the upper half-space.

    Attributes:
        grid: Boundary grid shared by all slices
        heights: Strictly increasing positive heights
        values: Array of shape ``(len(heights),) + grid.shape + (M,)``
    """
    grid: BoundaryGrid
    heights: Tuple[float, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "heights", tuple(float(t) for t in self.heights))
        object.__setattr__(self, "values", _readonly(self.values))

    @property
    def channels(self) -> int:
        return self.values.shape[-1]

    def at(self, t: float) -> BoundaryField:
        """Return the slice stored at height ``t``."""
        index = self.height_index(t)
        return BoundaryField(self.grid, self.values[index])

    def height_index(self, t: float) -> int:
        for index, height in enumerate(self.heights):
            if math.isclose(height, t, rel_tol=1e-12, abs_tol=1e-15):
                return index
        raise KeyError(f"Height {t} is not stored (heights: {self.heights})")


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Sampled C^(MxM) kernel slice P_t on a boundary grid.

    Attributes:
        grid: Boundary grid
        t: Height of the slice (1.0 for the profile)
        values: Array of shape ``grid.shape + (M, M)``
    """
    grid: BoundaryGrid
    t: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values, dtype=complex))

    @property
    def M(self) -> int:
        return self.values.shape[-1]


# ---------------------------------------------------------------------------
# Elliptic systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EllipticSystem:
    """Constant-coefficient second-order system L u = div(A grad u).

    Attributes:
        n: Space dimension
        M: Number of unknowns
        coeff: Complex array a[alpha, beta, r, s] of shape (M, M, n, n)
        label: Human readable name
    """
    n: int
    M: int
    coeff: np.ndarray
    label: str = "system"

    def __post_init__(self):
        object.__setattr__(self, "coeff", _readonly(self.coeff, dtype=complex))


@dataclass(frozen=True, eq=False)
class EllipticityReport:
    """Result of a Legendre-Hadamard minimization.

    Attributes:
        kappa_o: max(0, min_ratio)
        min_ratio: Smallest sampled value of Re[a xi xi conj(eta) eta]
        argmin_xi: Unit real vector attaining min_ratio
        argmin_eta: Unit complex vector attaining min_ratio
        weakly_elliptic: Whether det symbol stays away from zero on the sphere
    """
    kappa_o: float
    min_ratio: float
    argmin_xi: np.ndarray
    argmin_eta: np.ndarray
    weakly_elliptic: bool


# ---------------------------------------------------------------------------
# Maximal operators and weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeSpec:
    """Nontangential approach cone {|x' - y'| < kappa t}, optionally t < eps."""
    kappa: float = 1.0
    eps: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Weight:
    """Positive weight sampled on a boundary grid."""
    field: BoundaryField
    label: str = "w"

    @property
    def grid(self) -> BoundaryGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        """Real weight values, shape ``grid.shape``."""
        return np.real(self.field.values[..., 0])


@dataclass(frozen=True)
class ApReport:
    """Muckenhoupt constant over a finite cube family.

    Attributes:
        p: Exponent (p >= 1)
        constant: Supremum of the A_p quantity
        argmax_cube: (center, side) of the maximizing cube
    """
    p: float
    constant: float
    argmax_cube: Tuple[Tuple[float, ...], float]


# ---------------------------------------------------------------------------
# Function spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class YoungFunction:
    """Convex increasing Phi with Phi(0) = 0.

    Attributes:
        evaluator: Vectorized t -> Phi(t) on t >= 0
        label: Human readable name
    """
    evaluator: Callable[[np.ndarray], np.ndarray]
    label: str = "Phi"

    def __call__(self, t: Any) -> np.ndarray:
        return self.evaluator(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class Lebesgue:
    p: float
    kind = "lebesgue"


@dataclass(frozen=True, eq=False)
class WeightedLebesgue:
    p: float
    weight: Weight
    kind = "weighted_lebesgue"


@dataclass(frozen=True)
class Lorentz:
    p: float
    q: float
    kind = "lorentz"


@dataclass(frozen=True, eq=False)
class Orlicz:
    young: YoungFunction
    kind = "orlicz"


@dataclass(frozen=True)
class Zygmund:
    """L^p (log L)^alpha, Phi(t) = t^p log(e + t)^alpha."""
    p: float
    alpha: float
    kind = "zygmund"


@dataclass(frozen=True, eq=False)
class VariableExponent:
    pfun: BoundaryField
    kind = "variable_exponent"


@dataclass(frozen=True, eq=False)
class WeightedRI:
    base: "NormSpec"
    weight: Weight
    kind = "weighted_ri"


NormSpec = Union[
    Lebesgue, WeightedLebesgue, Lorentz, Orlicz, Zygmund, VariableExponent, WeightedRI
]

REARRANGEMENT_INVARIANT = (Lebesgue, Lorentz, Orlicz, Zygmund)


@dataclass(frozen=True, eq=False)
class Rearrangement:
    """Decreasing step function on [0, inf).

    The value ``values[k]`` holds on ``[breakpoints[k-1], breakpoints[k])``
    with ``breakpoints[-1]`` implicitly 0; beyond the last breakpoint the
    function vanishes.
    """
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", _readonly(self.breakpoints, dtype=float))
        object.__setattr__(self, "values", _readonly(self.values, dtype=float))

    @property
    def left(self) -> np.ndarray:
        return np.concatenate(([0.0], self.breakpoints[:-1]))

    @property
    def widths(self) -> np.ndarray:
        return self.breakpoints - self.left

    @property
    def support_measure(self) -> float:
        return float(self.breakpoints[-1]) if self.breakpoints.size else 0.0

    def __call__(self, s: Any) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        index = np.searchsorted(self.breakpoints, s, side="right")
        padded = np.concatenate((self.values, [0.0]))
        return padded[np.minimum(index, self.values.size)]

    def dilate(self, t: float) -> "Rearrangement":
        """Rearrangement of D_t f, i.e. s -> f*(s / t)."""
        return Rearrangement(self.breakpoints * t, self.values)


@dataclass(frozen=True, eq=False)
class Atom:
    """Validated atom supported in an axis-aligned cube.

    Attributes:
        field: Sampled atom
        center: Cube center
        side: Cube side length
        flavor: H1 (1,q)-atom or central Beurling (1,p)-atom
        exponent: q for H1 atoms, p for Beurling atoms
    """
    field: BoundaryField
    center: Tuple[float, ...]
    side: float
    flavor: AtomFlavor
    exponent: float


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class FundamentalSolution:
    """Fundamental solution E with L E = delta I.

    Attributes:
        system: Operator the solution belongs to
        evaluator: Maps points of shape (..., n) to matrices (..., M, M)
        construction: How the evaluator computes E
        radial: Whether E was detected to depend on |x| only
        normal_derivative: Optional analytic d/dx_n E with the same signature
    """
    system: EllipticSystem
    evaluator: Evaluator
    construction: Construction
    radial: bool = False
    normal_derivative: Optional[Evaluator] = None

    def __call__(self, x: Any) -> np.ndarray:
        return self.evaluator(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class PoissonConstruction:
    """A Poisson kernel together with the machinery to slice it.

    Attributes:
        system: Operator the kernel belongs to
        method: Construction used
        profile: Pointwise samples of P on the grid (t = 1)
        metadata: Grid, truncation and construction details
        builder: Maps a height t to the torus kernel P_t used for convolution
    """
    system: EllipticSystem
    method: KernelMethod
    profile: KernelMatrix
    metadata: Dict[str, Any]
    builder: Callable[[float], KernelMatrix] = field(repr=False)

    @property
    def grid(self) -> BoundaryGrid:
        return self.profile.grid

    def slice(self, t: float) -> KernelMatrix:
        return self.builder(float(t))


# ---------------------------------------------------------------------------
# Problems, experiments and configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """Dirichlet problem L u = 0 in the half-space, u = f on the boundary."""
    system: EllipticSystem
    datum: BoundaryField
    heights: Tuple[float, ...]
    kernel_method: KernelMethod = KernelMethod.FOURIER_SYMBOL

    def __post_init__(self):
        object.__setattr__(self, "heights", tuple(float(t) for t in self.heights))


@dataclass
class Envelope:
    """Committed bound for one metric.

    Attributes:
        name: Metric name
        value: Bound
        kind: MAX when the metric must stay below value, MIN when above
        provenance: Where the constant comes from
        note: Free text
    """
    name: str
    value: float
    kind: EnvelopeKind = EnvelopeKind.MAX
    provenance: Provenance = Provenance.DERIVED
    note: str = ""

    def admits(self, metric: float) -> bool:
        if not math.isfinite(metric):
            return False
        if self.kind == EnvelopeKind.MAX:
            return metric <= self.value
        return metric >= self.value


@dataclass
class ExperimentReport:
    """Result of one experiment run.

    Attributes:
        name: Experiment name
        inputs_digest: SHA-256 of the canonical JSON of the inputs
        metrics: Scalar metrics (finite unless a violation is recorded)
        verdict: PASS, FAIL or SKIPPED
        violations: Names of envelopes the metrics violated
        details: Non-scalar results (tables, series)
    """
    name: str
    inputs_digest: str
    metrics: Dict[str, float] = field(default_factory=dict)
    verdict: Verdict = Verdict.PASS
    violations: List[str] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS


@dataclass
class ExperimentConfig:
    """One entry of a run's experiment list."""
    name: str
    params: Dict[str, Any] = field(default_factory=dict)


# Run configurations may defer the kernel construction to the system.
AUTO_METHOD = "auto"


@dataclass
class RunConfig:
    """Configuration of a verification run.

    Attributes:
        dim: Boundary dimension
        R: Grid half width
        N: Points per axis
        system: Inline system descriptor (see data.field_store) or a path
        kernel_method: Poisson kernel construction, or "auto" (explicit for
            the Laplacian, symbol method otherwise)
        experiments: Experiments to run, in order
        output_dir: Directory for reports
        seed: Seed for every random draw
        jobs: Number of experiments run concurrently
    """
    dim: int = 1
    R: float = 64.0
    N: int = 4096
    system: Union[Dict[str, Any], str] = field(
        default_factory=lambda: {"kind": "laplacian", "n": 2, "M": 1}
    )
    kernel_method: Union[KernelMethod, str] = AUTO_METHOD
    experiments: List[ExperimentConfig] = field(default_factory=list)
    output_dir: str = "output"
    seed: int = 20240101
    jobs: int = 1
