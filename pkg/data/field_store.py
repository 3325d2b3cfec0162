"""
Persistence for halfspace-kernels.

Fields and kernels are written as CSV (one row per node, 17 significant
digits) with a JSON sidecar describing the grid; systems and norm specs are
JSON documents; reports are JSON with sorted keys so equal runs produce
identical files.
"""

import json
import logging
import math
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from core.errors import ConfigError, InvalidGrid, MissingFile, SpecViolation
from core.grid import make_grid
from core.maxop import make_weight, power_weight
from core.spaces import intersection_space, sum_space, validate_spec
from core.systems import from_coefficients, lame, laplacian
from core.young import power_young, zygmund_young
from data.models import (
    BoundaryField,
    BoundaryGrid,
    EllipticSystem,
    ExperimentReport,
    HalfSpaceField,
    KernelMatrix,
    Lebesgue,
    Lorentz,
    NormSpec,
    Orlicz,
    VariableExponent,
    Weight,
    WeightedLebesgue,
    WeightedRI,
    Zygmund,
)


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Coefficients below this modulus are omitted from system files.
ENTRY_TOL = 0.0


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays, enums, dataclasses and tuples to JSON types.

    Non-finite floats become the strings "inf", "-inf" and "nan" so the
    output stays strict JSON.
    """
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(float(value.real)), to_jsonable(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(asdict(value))
    return value


def write_json(path: PathLike, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(payload), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: PathLike) -> Any:
    """Read a JSON document.

    Raises:
        MissingFile: If the file does not exist
        ConfigError: If it is not valid JSON
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"File {path} does not exist")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"File {path} is not valid JSON: {e}") from e


# ---------------------------------------------------------------------------
# Fields and kernels
# ---------------------------------------------------------------------------

def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def _coordinate_columns(grid: BoundaryGrid) -> np.ndarray:
    return grid.nodes.reshape(grid.size, grid.dim)


def _complex_columns(values: np.ndarray) -> np.ndarray:
    """Interleave real and imaginary parts: (rows, k) -> (rows, 2k)."""
    out = np.empty(values.shape[:-1] + (2 * values.shape[-1],))
    out[..., 0::2] = np.real(values)
    out[..., 1::2] = np.imag(values)
    return out


def _write_csv(path: Path, header: List[str], table: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, table, delimiter=",", header=",".join(header), comments="", fmt="%.17g")


def save_field(path: PathLike, field: BoundaryField) -> Path:
    """Write a boundary field as ``x1[,x2],re_1,im_1,...`` plus its sidecar."""
    path = Path(path)
    grid = field.grid
    coords = [f"x{i + 1}" for i in range(grid.dim)]
    channels = [c for k in range(field.channels) for c in (f"re_{k + 1}", f"im_{k + 1}")]
    table = np.hstack(
        [_coordinate_columns(grid), _complex_columns(field.values.reshape(grid.size, field.channels))]
    )
    _write_csv(path, coords + channels, table)
    write_json(_sidecar(path), {"kind": "field", **grid.to_dict(), "channels": field.channels, "heights": []})
    logger.info(f"Saved field to {path}")
    return path


def save_halfspace(path: PathLike, u: HalfSpaceField) -> Path:
    """Write every stored slice of u, one block of rows per height."""
    path = Path(path)
    grid = u.grid
    coords = _coordinate_columns(grid)
    blocks = []
    for index, t in enumerate(u.heights):
        values = u.values[index].reshape(grid.size, u.channels)
        blocks.append(np.hstack([coords, np.full((grid.size, 1), t), _complex_columns(values)]))
    header = [f"x{i + 1}" for i in range(grid.dim)] + ["t"]
    header += [c for k in range(u.channels) for c in (f"re_{k + 1}", f"im_{k + 1}")]
    _write_csv(path, header, np.vstack(blocks))
    write_json(
        _sidecar(path),
        {"kind": "halfspace", **grid.to_dict(), "channels": u.channels, "heights": list(u.heights)},
    )
    logger.info(f"Saved {len(u.heights)} slices to {path}")
    return path


def save_kernel(path: PathLike, kernel: KernelMatrix) -> Path:
    """Write a kernel slice with channel blocks ``re_a_b,im_a_b``."""
    path = Path(path)
    grid, M = kernel.grid, kernel.M
    header = [f"x{i + 1}" for i in range(grid.dim)]
    header += [c for a in range(M) for b in range(M) for c in (f"re_{a + 1}_{b + 1}", f"im_{a + 1}_{b + 1}")]
    values = kernel.values.reshape(grid.size, M * M)
    _write_csv(path, header, np.hstack([_coordinate_columns(grid), _complex_columns(values)]))
    write_json(_sidecar(path), {"kind": "kernel", **grid.to_dict(), "channels": M, "heights": [kernel.t]})
    logger.info(f"Saved kernel slice t={kernel.t:g} to {path}")
    return path


def load_field(path: PathLike) -> BoundaryField:
    """Read a boundary field written by save_field.

    The grid comes from the sidecar when present; otherwise it is inferred
    from the coordinate columns.

    Raises:
        MissingFile: If the CSV does not exist
        InvalidGrid: If the rows do not form a full grid
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"Field file {path} does not exist")
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
    dim = sum(1 for name in header if name.startswith("x"))
    channels = (len(header) - dim) // 2
    if dim not in (1, 2) or channels < 1 or len(header) != dim + 2 * channels:
        raise InvalidGrid(f"Unrecognized field header in {path}: {header}")
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)

    sidecar = _sidecar(path)
    if sidecar.exists():
        meta = read_json(sidecar)
        grid = make_grid(int(meta["dim"]), float(meta["R"]), int(meta["N"]))
    else:
        axis = np.unique(table[:, 0])
        grid = make_grid(dim, float(-axis[0]), int(axis.size))
    if grid.dim != dim or table.shape[0] != grid.size:
        raise InvalidGrid(f"{path} holds {table.shape[0]} rows, expected {grid.size} for {grid}")

    values = table[:, dim::2] + 1j * table[:, dim + 1::2]
    return BoundaryField(grid, values.reshape(grid.shape + (channels,)))


def save_series_csv(path: PathLike, columns: Dict[str, Sequence[float]]) -> Path:
    """Write equally long named columns (per-trial or per-node series)."""
    path = Path(path)
    names = list(columns)
    table = np.column_stack([np.asarray(columns[name], dtype=float) for name in names])
    _write_csv(path, names, table)
    return path


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------

def system_to_dict(sys: EllipticSystem) -> Dict[str, Any]:
    """Entry list with 1-based indices; zero coefficients are omitted."""
    entries = []
    for index in zip(*np.nonzero(np.abs(sys.coeff) > ENTRY_TOL)):
        value = complex(sys.coeff[index])
        entries.append([int(i) + 1 for i in index] + [value.real, value.imag])
    return {"kind": "entries", "n": sys.n, "M": sys.M, "label": sys.label, "entries": entries}


def system_from_dict(data: Dict[str, Any]) -> EllipticSystem:
    """Build a system from ``laplacian``, ``lame`` or ``entries`` descriptors.

    Raises:
        ConfigError: On an unknown kind or a malformed entry
    """
    kind = data.get("kind", "entries")
    try:
        if kind == "laplacian":
            return laplacian(int(data["n"]), int(data.get("M", 1)))
        if kind == "lame":
            return lame(int(data["n"]), float(data["mu"]), float(data["lambda"]))
        if kind == "entries":
            n, M = int(data["n"]), int(data["M"])
            coeff = np.zeros((M, M, n, n), dtype=complex)
            for entry in data["entries"]:
                alpha, beta, r, s = (int(i) - 1 for i in entry[:4])
                if min(alpha, beta, r, s) < 0:
                    raise ConfigError(f"System entries are 1-based, got {entry}")
                coeff[alpha, beta, r, s] = complex(float(entry[4]), float(entry[5]) if len(entry) > 5 else 0.0)
            return from_coefficients(coeff, label=str(data.get("label", "system")))
    except (KeyError, TypeError, IndexError) as e:
        raise ConfigError(f"Malformed {kind} system descriptor: {e!r}") from e
    raise ConfigError(f"Unknown system kind '{kind}'")


def save_system(path: PathLike, sys: EllipticSystem) -> Path:
    return write_json(path, system_to_dict(sys))


def load_system(path: PathLike) -> EllipticSystem:
    return system_from_dict(read_json(path))


def system_from_descriptor(descriptor: Union[Dict[str, Any], str], base_dir: PathLike = ".") -> EllipticSystem:
    """Resolve an inline descriptor or a path relative to base_dir."""
    if isinstance(descriptor, dict):
        return system_from_dict(descriptor)
    path = Path(descriptor)
    if not path.is_absolute():
        path = Path(base_dir) / path
    return load_system(path)


# ---------------------------------------------------------------------------
# Norm specs
# ---------------------------------------------------------------------------

def _resolve(path: str, base_dir: PathLike) -> Path:
    candidate = Path(path)
    return candidate if candidate.is_absolute() else Path(base_dir) / candidate


def weight_from_dict(data: Dict[str, Any], grid: BoundaryGrid, base_dir: PathLike = ".") -> Weight:
    kind = data.get("kind")
    if kind == "power":
        return power_weight(grid, float(data["gamma"]))
    if kind == "file":
        field = load_field(_resolve(data["path"], base_dir))
        if field.grid != grid:
            raise SpecViolation(f"Weight file {data['path']} lives on another grid")
        return make_weight(field, label=str(data.get("label", Path(data["path"]).stem)))
    raise ConfigError(f"Unknown weight kind '{kind}'")


def _young_from_dict(data: Dict[str, Any]):
    kind = data.get("kind", "power")
    if kind == "power":
        return power_young(float(data["p"]))
    if kind == "zygmund":
        return zygmund_young(float(data["p"]), float(data["alpha"]))
    if kind == "sum":
        return sum_space(float(data["p"]), float(data["q"])).young
    if kind == "intersection":
        return intersection_space(float(data["p"]), float(data["q"])).young
    raise ConfigError(f"Unknown Young function kind '{kind}'")


def variable_exponent_field(grid: BoundaryGrid, p_inner: float, p_outer: float, scale: float = 1.0) -> BoundaryField:
    """p(x) = p_outer + (p_inner - p_outer) / (1 + |x|^2 / scale^2), log-Hoelder by construction."""
    r = grid.radius
    values = p_outer + (p_inner - p_outer) / (1.0 + (r / scale) ** 2)
    return BoundaryField(grid, values[..., np.newaxis])


def spec_from_dict(data: Dict[str, Any], grid: BoundaryGrid, base_dir: PathLike = ".") -> NormSpec:
    """Decode a JSON tagged union into a validated NormSpec.

    Raises:
        ConfigError: On an unknown kind or missing parameter
        SpecViolation: On parameters outside their ranges
    """
    kind = data.get("kind")
    try:
        if kind == "lebesgue":
            spec = Lebesgue(float(data["p"]))
        elif kind == "weighted_lebesgue":
            spec = WeightedLebesgue(float(data["p"]), weight_from_dict(data["weight"], grid, base_dir))
        elif kind == "lorentz":
            spec = Lorentz(float(data["p"]), float(data["q"]))
        elif kind == "zygmund":
            spec = Zygmund(float(data["p"]), float(data["alpha"]))
        elif kind == "orlicz":
            spec = Orlicz(_young_from_dict(data["young"]))
        elif kind == "variable_exponent":
            if "path" in data:
                pfun = load_field(_resolve(data["path"], base_dir))
            else:
                pfun = variable_exponent_field(
                    grid, float(data["p_inner"]), float(data["p_outer"]), float(data.get("scale", 1.0))
                )
            spec = VariableExponent(pfun)
        elif kind == "weighted_ri":
            base = spec_from_dict(data["base"], grid, base_dir)
            spec = WeightedRI(base, weight_from_dict(data["weight"], grid, base_dir))
        else:
            raise ConfigError(f"Unknown norm spec kind '{kind}'")
    except (KeyError, TypeError) as e:
        raise ConfigError(f"Malformed {kind} norm spec: {e!r}") from e
    validate_spec(spec)
    return spec


def spec_to_dict(spec: NormSpec) -> Dict[str, Any]:
    """Descriptive JSON for reports; weights and Young functions appear by label."""
    if isinstance(spec, Lebesgue):
        return {"kind": spec.kind, "p": spec.p}
    if isinstance(spec, WeightedLebesgue):
        return {"kind": spec.kind, "p": spec.p, "weight": spec.weight.label}
    if isinstance(spec, Lorentz):
        return {"kind": spec.kind, "p": spec.p, "q": spec.q}
    if isinstance(spec, Zygmund):
        return {"kind": spec.kind, "p": spec.p, "alpha": spec.alpha}
    if isinstance(spec, Orlicz):
        return {"kind": spec.kind, "young": spec.young.label}
    if isinstance(spec, VariableExponent):
        exponent = np.real(spec.pfun.values[..., 0])
        return {"kind": spec.kind, "p_min": float(exponent.min()), "p_max": float(exponent.max())}
    return {"kind": spec.kind, "base": spec_to_dict(spec.base), "weight": spec.weight.label}


# ---------------------------------------------------------------------------
# Atoms
# ---------------------------------------------------------------------------

def atom_field(grid: BoundaryGrid, center: Sequence[float], side: float) -> BoundaryField:
    """(1 on the lower half, -1 on the upper half of the open cube) / side^dim.

    Halves split along the first axis; nodes on the splitting plane are 0,
    so the discrete mean vanishes exactly when center is a node.
    """
    center = np.asarray(center, dtype=float).reshape(grid.dim)
    offset = grid.nodes - center
    inside = np.all(np.abs(offset) < side / 2.0, axis=-1)
    sign = np.sign(offset[..., 0])
    values = np.where(inside, -sign, 0.0) / side ** grid.dim
    return BoundaryField(grid, values[..., np.newaxis])


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def report_to_dict(report: ExperimentReport) -> Dict[str, Any]:
    return {
        "name": report.name,
        "inputs_digest": report.inputs_digest,
        "verdict": report.verdict.value,
        "metrics": report.metrics,
        "violations": report.violations,
        "details": report.details,
    }


def save_reports(
    output_dir: PathLike, reports: Sequence[ExperimentReport], summary: Optional[Dict[str, Any]] = None
) -> Path:
    """Write one JSON per experiment and ``summary.json``; returns the summary path."""
    output_dir = Path(output_dir)
    for report in reports:
        write_json(output_dir / f"{report.name}.json", report_to_dict(report))
    return write_json(output_dir / "summary.json", summary if summary is not None else {})
