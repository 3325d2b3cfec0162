"""
Static SVG plots of kernel profiles, solution slices and experiment series.

Only the non-interactive Agg backend is used; every function writes one SVG
file and returns its path.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from data.models import ExperimentReport, HalfSpaceField, KernelMatrix  # noqa: E402


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _save(fig, path: PathLike) -> Path:
    path = Path(path).with_suffix(".svg")
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg")
    plt.close(fig)
    logger.debug(f"Wrote plot {path}")
    return path


def _central_line(values: np.ndarray, dim: int) -> np.ndarray:
    """1D cut through the origin along the first axis."""
    if dim == 1:
        return values
    return values[:, values.shape[1] // 2]


def plot_kernel_profile(kernel: KernelMatrix, path: PathLike, log_scale: bool = True) -> Path:
    """Entry moduli of P along the first axis, one curve per matrix entry."""
    grid = kernel.grid
    x = grid.axis
    _, ax = plt.subplots(1, 1)
    for a in range(kernel.M):
        for b in range(kernel.M):
            line = np.abs(_central_line(kernel.values[..., a, b], grid.dim))
            if np.any(line > 0):
                ax.plot(x, line, label=f"|P[{a + 1},{b + 1}]|")
    if log_scale:
        ax.set_yscale("log")
    ax.set_xlabel("x1")
    ax.set_title(f"Poisson kernel profile, t = {kernel.t:g}")
    ax.legend(fontsize="small")
    return _save(ax.figure, path)


def plot_slices(u: HalfSpaceField, path: PathLike, channel: int = 0, max_slices: int = 6) -> Path:
    """Real part of one channel of u along the first axis at several heights."""
    grid = u.grid
    step = max(1, len(u.heights) // max_slices)
    _, ax = plt.subplots(1, 1)
    for index in range(0, len(u.heights), step):
        line = np.real(_central_line(u.values[index][..., channel], grid.dim))
        ax.plot(grid.axis, line, label=f"t = {u.heights[index]:.3g}")
    ax.set_xlabel("x1")
    ax.set_ylabel(f"Re u_{channel + 1}")
    ax.legend(fontsize="small")
    return _save(ax.figure, path)


def plot_series(
    series: Dict[str, Sequence[float]],
    path: PathLike,
    x: Optional[Sequence[float]] = None,
    title: str = "",
    ylabel: str = "",
    log_y: bool = False,
) -> Path:
    """One line per named series, against x or the trial index."""
    _, ax = plt.subplots(1, 1)
    for label, values in series.items():
        values = np.asarray(values, dtype=float)
        abscissa = np.arange(values.size) if x is None else np.asarray(x, dtype=float)
        ax.plot(abscissa, values, marker="o", markersize=3, label=label)
    if log_y:
        ax.set_yscale("log")
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend(fontsize="small")
    return _save(ax.figure, path)


def numeric_series(details: Dict[str, object]) -> Dict[str, List[float]]:
    """Flat lists of numbers among an experiment's details."""
    series = {}
    for key, value in details.items():
        if (
            isinstance(value, (list, tuple))
            and len(value) > 1
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        ):
            series[key] = [float(v) for v in value]
    return series


def plot_reports(reports: Sequence[ExperimentReport], output_dir: PathLike) -> List[Path]:
    """Ratio curves for every report that carries a numeric series."""
    paths = []
    for report in reports:
        for key, values in numeric_series(report.details).items():
            paths.append(
                plot_series({key: values}, Path(output_dir) / f"{report.name}_{key}", title=report.name, ylabel=key)
            )
    return paths
