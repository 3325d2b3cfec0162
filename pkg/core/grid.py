"""
Uniform boundary grids, sampling, quadrature and torus convolution.

Every numeric module works on a BoundaryGrid: N points per axis on the box
[-R, R)^dim, node k at -R + k h, the origin at index N/2. Kernels are stored
centered (value for offset 0 at the origin node) and moved to index 0 only
inside the FFT routines.
"""

import logging
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import fft as sp_fft
from scipy import signal

from core.errors import GridMismatch, InvalidGrid, NonFiniteSample, NonPowerOfTwo
from data.models import BoundaryField, BoundaryGrid, KernelMatrix


logger = logging.getLogger(__name__)

# Lattice images per axis when wrapping algebraically decaying kernels.
DEFAULT_IMAGES = 3


def make_grid(dim: int, R: float, N: int) -> BoundaryGrid:
    """Create a validated boundary grid.

    Args:
        dim: Boundary dimension (1 or 2)
        R: Half width, > 0
        N: Points per axis, a power of two >= 8

    Returns:
        BoundaryGrid with spacing 2R/N

    Raises:
        NonPowerOfTwo: If N is not a power of two or is below 8
        InvalidGrid: If dim is unsupported or R is not positive
    """
    if dim not in (1, 2):
        raise InvalidGrid(f"Unsupported boundary dimension {dim}; expected 1 or 2")
    if not np.isfinite(R) or R <= 0:
        raise InvalidGrid(f"Half width must be positive, got {R}")
    N = int(N)
    if N < 8 or N & (N - 1) != 0:
        raise NonPowerOfTwo(f"Points per axis must be a power of two >= 8, got {N}")
    return BoundaryGrid(dim=dim, R=float(R), N=N)


def check_same_grid(first: BoundaryGrid, second: BoundaryGrid) -> None:
    if first != second:
        raise GridMismatch(f"Grid mismatch: {first} vs {second}")


def sample(grid: BoundaryGrid, M: int, fn: Callable[[np.ndarray], np.ndarray]) -> BoundaryField:
    """Sample a function on every node.

    ``fn`` is vectorized: it receives the node array of shape
    ``grid.shape + (dim,)`` and returns ``grid.shape + (M,)`` (or
    ``grid.shape`` when M == 1).

    Raises:
        NonFiniteSample: If any sample is NaN or infinite
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        values = np.asarray(fn(grid.nodes), dtype=complex)
    if values.shape == grid.shape and M == 1:
        values = values[..., np.newaxis]
    values = np.broadcast_to(values, grid.shape + (M,))
    if not np.all(np.isfinite(values)):
        bad = int(np.count_nonzero(~np.isfinite(values)))
        raise NonFiniteSample(f"Sampled function is not finite at {bad} node values")
    return BoundaryField(grid, values)


def constant_field(grid: BoundaryGrid, value: Sequence[complex]) -> BoundaryField:
    value = np.atleast_1d(np.asarray(value, dtype=complex))
    return BoundaryField(grid, np.broadcast_to(value, grid.shape + value.shape))


def indicator_ball(grid: BoundaryGrid, center: Sequence[float] = (), radius: float = 1.0) -> BoundaryField:
    """Indicator of the open ball B(center, radius)."""
    center = _point(grid, center)
    inside = np.linalg.norm(grid.nodes - center, axis=-1) < radius
    return BoundaryField(grid, inside[..., np.newaxis].astype(complex))


def indicator_cube(grid: BoundaryGrid, center: Sequence[float] = (), side: float = 2.0) -> BoundaryField:
    """Indicator of the open axis-aligned cube with given center and side."""
    center = _point(grid, center)
    inside = np.all(np.abs(grid.nodes - center) < side / 2.0, axis=-1)
    return BoundaryField(grid, inside[..., np.newaxis].astype(complex))


def indicator_interval(grid: BoundaryGrid, a: float, b: float) -> BoundaryField:
    """Indicator of the half-open interval [a, b) on a one-dimensional grid."""
    if grid.dim != 1:
        raise InvalidGrid("indicator_interval needs a one-dimensional grid")
    x = grid.axis
    inside = (x >= a) & (x < b)
    return BoundaryField(grid, inside[:, np.newaxis].astype(complex))


def delta_kernel(grid: BoundaryGrid, M: int = 1, t: float = 0.0) -> KernelMatrix:
    """Discrete delta: 1/h^dim times I_M at the origin node."""
    values = np.zeros(grid.shape + (M, M), dtype=complex)
    values[grid.origin_index] = np.eye(M) / grid.cell_volume
    return KernelMatrix(grid, t, values)


def integrate(field: BoundaryField) -> np.ndarray:
    """Left-endpoint Riemann sum h^dim * sum of values, one entry per channel."""
    axes = tuple(range(field.grid.dim))
    return field.grid.cell_volume * np.sum(field.values, axis=axes)


def integrate_kernel(kernel: KernelMatrix) -> np.ndarray:
    """Riemann sum of a kernel slice, an M x M matrix."""
    axes = tuple(range(kernel.grid.dim))
    return kernel.grid.cell_volume * np.sum(kernel.values, axis=axes)


def fft_convolve(kernel: KernelMatrix, f: BoundaryField) -> BoundaryField:
    """Circular convolution of a matrix kernel with vector data on the torus.

    Raises:
        GridMismatch: If grids differ or kernel size and channels disagree
    """
    check_same_grid(kernel.grid, f.grid)
    if kernel.M != f.channels:
        raise GridMismatch(f"Kernel is {kernel.M}x{kernel.M} but field has {f.channels} channels")
    grid = f.grid
    axes = tuple(range(grid.dim))
    kernel_hat = sp_fft.fftn(sp_fft.ifftshift(kernel.values, axes=axes), axes=axes)
    data_hat = sp_fft.fftn(f.values, axes=axes)
    product = np.einsum("...ab,...b->...a", kernel_hat, data_hat)
    return BoundaryField(grid, grid.cell_volume * sp_fft.ifftn(product, axes=axes))


def direct_convolve(kernel: KernelMatrix, f: BoundaryField) -> BoundaryField:
    """Truncated (non-periodic) convolution sum, the O(N^2) oracle for fft_convolve."""
    check_same_grid(kernel.grid, f.grid)
    if kernel.M != f.channels:
        raise GridMismatch(f"Kernel is {kernel.M}x{kernel.M} but field has {f.channels} channels")
    grid = f.grid
    crop = tuple(slice(grid.N // 2, grid.N // 2 + grid.N) for _ in range(grid.dim))
    out = np.zeros(grid.shape + (f.channels,), dtype=complex)
    for a in range(kernel.M):
        for b in range(kernel.M):
            full = signal.convolve(
                kernel.values[..., a, b], f.values[..., b], mode="full", method="direct"
            )
            out[..., a] += full[crop]
    return BoundaryField(grid, grid.cell_volume * out)


def convolve_kernels(first: KernelMatrix, second: KernelMatrix) -> KernelMatrix:
    """Torus convolution of two centered matrix kernels, first * second."""
    check_same_grid(first.grid, second.grid)
    grid = first.grid
    axes = tuple(range(grid.dim))
    first_hat = sp_fft.fftn(sp_fft.ifftshift(first.values, axes=axes), axes=axes)
    second_hat = sp_fft.fftn(sp_fft.ifftshift(second.values, axes=axes), axes=axes)
    product = sp_fft.ifftn(first_hat @ second_hat, axes=axes)
    values = grid.cell_volume * sp_fft.fftshift(product, axes=axes)
    return KernelMatrix(grid, first.t + second.t, values)


def periodize(
    grid: BoundaryGrid,
    fn: Callable[[np.ndarray], np.ndarray],
    images: int = DEFAULT_IMAGES,
) -> np.ndarray:
    """Wrap a decaying function onto the torus by lattice-shift summation.

    Args:
        grid: Target grid
        fn: Vectorized function of points of shape (..., dim)
        images: Shifts per axis on each side

    Returns:
        Sum of fn(x' + 2R j) over j in [-images, images]^dim
    """
    nodes = grid.nodes
    period = 2.0 * grid.R
    shifts = np.stack(
        np.meshgrid(*([np.arange(-images, images + 1)] * grid.dim), indexing="ij"), axis=-1
    ).reshape(-1, grid.dim)
    total = None
    for shift in shifts:
        term = fn(nodes + period * shift)
        total = term if total is None else total + term
    return total


def inner_mask(grid: BoundaryGrid, fraction: float = 0.5) -> np.ndarray:
    """Nodes with |x'|_inf <= fraction * R."""
    return np.all(np.abs(grid.nodes) <= fraction * grid.R + 1e-12, axis=-1)


def band_limited_field(
    grid: BoundaryGrid,
    M: int,
    rng: np.random.Generator,
    cutoff: float = 1.0,
    support_fraction: float = 0.25,
    nonnegative: bool = False,
) -> BoundaryField:
    """Seeded random field with Gaussian low-pass spectrum and compact support.

    White noise is filtered by exp(-(|xi|/cutoff)^2), multiplied by a cosine
    window supported in |x'| <= support_fraction * R and scaled to max 1.

    Args:
        grid: Grid to sample on
        M: Channels
        rng: Random generator (fixes the draw)
        cutoff: Angular frequency scale of the filter
        support_fraction: Support radius as a fraction of R
        nonnegative: Take the modulus of the result

    Returns:
        Real-valued BoundaryField
    """
    axes = tuple(range(grid.dim))
    noise = rng.standard_normal(grid.shape + (M,))
    freqs = [2.0 * np.pi * sp_fft.fftfreq(grid.N, d=grid.h)] * grid.dim
    xi = np.linalg.norm(np.stack(np.meshgrid(*freqs, indexing="ij"), axis=-1), axis=-1)
    filtered = sp_fft.ifftn(
        sp_fft.fftn(noise, axes=axes) * np.exp(-((xi / cutoff) ** 2))[..., np.newaxis], axes=axes
    ).real
    rho = support_fraction * grid.R
    r = grid.radius
    window = np.where(r < rho, np.cos(0.5 * np.pi * r / rho) ** 2, 0.0)
    values = filtered * window[..., np.newaxis]
    scale = np.max(np.abs(values))
    if scale > 0:
        values = values / scale
    if nonnegative:
        values = np.abs(values)
    return BoundaryField(grid, values.astype(complex))


def _point(grid: BoundaryGrid, center: Optional[Sequence[float]]) -> np.ndarray:
    if center is None or len(center) == 0:
        return np.zeros(grid.dim)
    point = np.asarray(center, dtype=float)
    if point.shape != (grid.dim,):
        raise InvalidGrid(f"Point {tuple(point)} does not have dimension {grid.dim}")
    return point
