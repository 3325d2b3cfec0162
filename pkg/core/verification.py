"""
Experiment suite runner.

Each experiment maps a RunContext and its parameters to scalar metrics and
JSON-safe details. Metrics named ``<experiment>.<metric>`` in the envelope
registry are checked; a violated or non-finite enveloped metric fails the
experiment. Kernel-dependent experiments are skipped when the system fails
the Legendre-Hadamard gate.
"""

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from core.errors import SpecViolation
from core.grid import band_limited_field, make_grid
from core.kernels import build_poisson, verify_poisson_properties
from core.maxop import cone_aperture_comparison, m_ball_profile, power_weight
from core.solver import (
    atom_decay,
    auto_method,
    default_heights,
    fatou_reconstruction,
    nt_domination,
    semigroup_check,
    semigroup_refinement,
    solve,
    wellposedness_table,
)
from core.spaces import boyd_indices, xw_decay_check
from core.systems import legendre_hadamard
from data.config_manager import EnvelopeRegistry
from data.field_store import atom_field, spec_from_dict, system_from_descriptor, to_jsonable
from data.models import (
    AUTO_METHOD,
    AtomFlavor,
    BoundaryGrid,
    ConeSpec,
    DirichletProblem,
    EllipticityReport,
    EllipticSystem,
    ExperimentConfig,
    ExperimentReport,
    KernelMethod,
    Lebesgue,
    Lorentz,
    PoissonConstruction,
    RunConfig,
    Verdict,
    WeightedRI,
    Zygmund,
)


logger = logging.getLogger(__name__)

DEFAULT_SUITE = (
    "legendre_hadamard",
    "kernel_properties",
    "semigroup",
    "nt_domination",
    "fatou",
    "atom_decay",
    "wellposedness_table",
    "m_ball_profile",
    "cone_aperture_comparison",
    "boyd",
    "xw_decay",
)

KERNEL_DEPENDENT = frozenset(
    {
        "kernel_properties",
        "semigroup",
        "nt_domination",
        "fatou",
        "atom_decay",
        "wellposedness_table",
        "cone_aperture_comparison",
    }
)


@dataclass
class RunContext:
    """Shared state of one verification run.

    The kernel and the ellipticity report are built at most once, under a
    lock, so experiments may run on worker threads.
    """
    config: RunConfig
    grid: BoundaryGrid
    system: EllipticSystem
    system_descriptor: Any
    base_dir: str = "."
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _kernel: Optional[PoissonConstruction] = field(default=None, repr=False)
    _ellipticity: Optional[EllipticityReport] = field(default=None, repr=False)

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def method(self) -> KernelMethod:
        if self.config.kernel_method == AUTO_METHOD:
            return auto_method(self.system)
        return KernelMethod(self.config.kernel_method)

    def ellipticity(self) -> EllipticityReport:
        with self._lock:
            if self._ellipticity is None:
                self._ellipticity = legendre_hadamard(self.system, seed=self.seed)
            return self._ellipticity

    def kernel(self) -> PoissonConstruction:
        with self._lock:
            if self._kernel is None:
                self._kernel = build_poisson(self.system, self.grid, self.method)
            return self._kernel

    def heights(self, ratio: float = 2.0) -> Tuple[float, ...]:
        return default_heights(self.grid, ratio)


Metrics = Dict[str, float]
Details = Dict[str, Any]
Experiment = Callable[[RunContext, Dict[str, Any]], Tuple[Metrics, Details]]


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _legendre_hadamard(ctx: RunContext, params: Dict[str, Any]) -> Tuple[Metrics, Details]:
    report = ctx.ellipticity()
    metrics = {
        "kappa_o": report.kappa_o,
        "min_ratio": report.min_ratio,
        "weakly_elliptic": 1.0 if report.weakly_elliptic else 0.0,
    }
    return metrics, {"argmin_xi": report.argmin_xi.tolist()}


def _kernel_properties(ctx: RunContext, params: Dict[str, Any]) -> Tuple[Metrics, Details]:
    report = verify_poisson_properties(
        ctx.kernel(), ctx.system, extended=bool(params.get("extended", False)), t0=params.get("t0")
    )
    metrics = {key: float(value) for key, value in report.items() if isinstance(value, float)}
    return metrics, {"integral": report["integral"]}


def _semigroup(ctx: RunContext, params: Dict[str, Any]) -> Tuple[Metrics, Details]:
    t1, t2 = float(params.get("t1", 1.0)), float(params.get("t2", 1.0))
    report = semigroup_check(ctx.kernel(), t1, t2)
    metrics = {key: report[key] for key in ("residual", "normalized_residual", "commutator", "delta_identity")}
    if params.get("refine", False):
        grid = ctx.grid
        refined = semigroup_refinement(ctx.system, ctx.method, grid.dim, grid.R, grid.N, t1, t2)
        metrics["refined_residual"] = refined["fine_residual"]
        metrics["refinement_improved"] = 1.0 if refined["improved"] else 0.0
    return metrics, {}


def _nt_domination(ctx: RunContext, params: Dict[str, Any]) -> Tuple[Metrics, Details]:
    datum = band_limited_field(ctx.grid, ctx.system.M, np.random.default_rng(ctx.seed), nonnegative=True)
    prob = DirichletProblem(ctx.system, datum, ctx.heights(), ctx.method)
    report = nt_domination(
        prob,
        ConeSpec(kappa=float(params.get("kappa", 1.0))),
        trials=int(params.get("trials", 20)),
        seed=ctx.seed,
        pc=ctx.kernel(),
    )
    return {"max_ratio": report["max_ratio"]}, {"per_trial_max": report["per_trial_max"]}


def _fatou(ctx: RunContext, params: Dict[str, Any]) -> Tuple[Metrics, Details]:
    heights = ctx.heights()
    datum = band_limited_field(ctx.grid, ctx.system.M, np.random.default_rng(ctx.seed))
    u = solve(DirichletProblem(ctx.system, datum, heights, ctx.method), ctx.kernel())
    t_small = float(params.get("t_small", heights[min(1, len(heights) - 1)]))
    t_big = float(params.get("t_big", heights[-1]))
    report = fatou_reconstruction(u, ctx.kernel(), t_small, t_big)
    return {"residual": report["residual"]}, {"t_small": t_small, "t_big": t_big}


def _atom_decay(ctx: RunContext, params: Dict[str, Any]) -> Tuple[Metrics, Details]:
    if ctx.system.M != 1:
        raise SpecViolation("atom_decay runs on scalar systems")
    grid = ctx.grid
    rng = np.random.default_rng(ctx.seed)
    heights = ctx.heights(ratio=2.0 ** 0.25)
    rows = []
    for _ in range(int(params.get("trials", 10))):
        side = 2.0 * grid.h * int(rng.integers(4, 17))
        center = tuple(grid.h * float(k) for k in rng.integers(-64, 65, size=grid.dim))
        datum = atom_field(grid, center, side)
        prob = DirichletProblem(ctx.system, datum, heights, ctx.method)
        rows.append(atom_decay(prob, (center, side), AtomFlavor.H1, 2.0, pc=ctx.kernel()))
    metrics = {
        "max_nu_mass": max(r["nu_mass"] for r in rows),
        "max_off_cube_constant": max(r["off_cube_constant"] for r in rows),
        "min_decay_exponent": min(r["decay_exponent"] for r in rows),
    }
    metrics["max_decay_deficit"] = grid.n - metrics["min_decay_exponent"]
    return metrics, {"atoms": rows}


def _wellposedness_table(ctx: RunContext, params: Dict[str, Any]) -> Tuple[Metrics, Details]:
    descriptors = params.get(
        "specs",
        [{"kind": "lebesgue", "p": 2}, {"kind": "lorentz", "p": 2, "q": 1}, {"kind": "zygmund", "p": 2, "alpha": 1}],
    )
    specs = [spec_from_dict(d, ctx.grid, ctx.base_dir) for d in descriptors]
    rows = wellposedness_table(
        [ctx.system], specs, ctx.grid, trials=int(params.get("trials", 20)), seed=ctx.seed, heights=ctx.heights()
    )
    return {"max_ratio": max(r["max_ratio"] for r in rows)}, {"rows": rows}


def _m_ball_profile(ctx: RunContext, params: Dict[str, Any]) -> Tuple[Metrics, Details]:
    report = m_ball_profile(ctx.grid.dim, ctx.grid.R, ctx.grid.N)
    return dict(report), {}


def _cone_aperture_comparison(ctx: RunContext, params: Dict[str, Any]) -> Tuple[Metrics, Details]:
    datum = band_limited_field(ctx.grid, ctx.system.M, np.random.default_rng(ctx.seed))
    u = solve(DirichletProblem(ctx.system, datum, ctx.heights(), ctx.method), ctx.kernel())
    report = cone_aperture_comparison(u, params.get("kappas", [0.5, 1.0, 2.0]), p=float(params.get("p", 2.0)))
    return {"max_ratio": report["max_ratio"], "min_ratio": report["min_ratio"]}, {
        "norms": report["norms"],
        "ratios": report["ratios"],
    }


def _boyd(ctx: RunContext, params: Dict[str, Any]) -> Tuple[Metrics, Details]:
    cases = [(Lebesgue(2.0), 2.0), (Lorentz(3.0, 1.0), 3.0), (Zygmund(2.0, 1.0), 2.0)]
    worst, table = 0.0, []
    for spec, expected in cases:
        p_x, q_x = boyd_indices(spec)
        worst = max(worst, abs(p_x - expected), abs(q_x - expected))
        table.append({"spec": spec.kind, "p_X": p_x, "q_X": q_x, "expected": expected})
    return {"max_error": worst}, {"indices": table}


def _xw_decay(ctx: RunContext, params: Dict[str, Any]) -> Tuple[Metrics, Details]:
    gamma = float(params.get("gamma", 0.5))
    spec = WeightedRI(Lebesgue(float(params.get("p", 2.0))), power_weight(ctx.grid, gamma))
    rng = np.random.default_rng(ctx.seed)
    worst = 0.0
    for _ in range(int(params.get("trials", 5))):
        lhs, rhs = xw_decay_check(spec, band_limited_field(ctx.grid, 1, rng))
        if rhs > 0:
            worst = max(worst, lhs / rhs)
    return {"max_ratio": worst}, {"gamma": gamma}


EXPERIMENTS: Dict[str, Experiment] = {
    "legendre_hadamard": _legendre_hadamard,
    "kernel_properties": _kernel_properties,
    "semigroup": _semigroup,
    "nt_domination": _nt_domination,
    "fatou": _fatou,
    "atom_decay": _atom_decay,
    "wellposedness_table": _wellposedness_table,
    "m_ball_profile": _m_ball_profile,
    "cone_aperture_comparison": _cone_aperture_comparison,
    "boyd": _boyd,
    "xw_decay": _xw_decay,
}


# ---------------------------------------------------------------------------
# Running and aggregation
# ---------------------------------------------------------------------------

def inputs_digest(payload: Dict[str, Any]) -> str:
    """SHA-256 of the canonical (sorted, compact) JSON of payload."""
    text = json.dumps(to_jsonable(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def check_envelopes(name: str, metrics: Metrics, registry: EnvelopeRegistry) -> List[str]:
    """Names of the enveloped metrics that are violated or not finite."""
    violations = []
    for metric, value in sorted(metrics.items()):
        envelope = registry.get(f"{name}.{metric}")
        if envelope is not None and not envelope.admits(value):
            violations.append(envelope.name)
    return violations


def run_experiment(ctx: RunContext, experiment: ExperimentConfig, registry: EnvelopeRegistry) -> ExperimentReport:
    """Run one experiment and judge it against the registry.

    Raises:
        SpecViolation: If the experiment name is unknown
    """
    if experiment.name not in EXPERIMENTS:
        raise SpecViolation(f"Unknown experiment '{experiment.name}'; known: {sorted(EXPERIMENTS)}")
    digest = inputs_digest(
        {
            "experiment": experiment.name,
            "params": experiment.params,
            "grid": ctx.grid.to_dict(),
            "system": ctx.system_descriptor,
            "kernel_method": ctx.method.value,
            "seed": ctx.seed,
        }
    )
    report = ExperimentReport(name=experiment.name, inputs_digest=digest)
    if experiment.name in KERNEL_DEPENDENT and ctx.ellipticity().kappa_o <= 0:
        logger.warning(f"Skipping {experiment.name}: {ctx.system.label} fails the Legendre-Hadamard gate")
        report.verdict = Verdict.SKIPPED
        report.details = {"reason": "Legendre-Hadamard gate failed"}
        return report
    metrics, details = EXPERIMENTS[experiment.name](ctx, experiment.params)
    report.metrics = {key: float(value) for key, value in metrics.items()}
    report.details = details
    report.violations = check_envelopes(experiment.name, report.metrics, registry)
    report.verdict = Verdict.FAIL if report.violations else Verdict.PASS
    logger.info(f"Experiment {experiment.name}: {report.verdict.value}")
    return report


def build_context(config: RunConfig, base_dir: str = ".") -> RunContext:
    grid = make_grid(config.dim, config.R, config.N)
    system = system_from_descriptor(config.system, base_dir)
    if system.n != grid.n:
        raise SpecViolation(f"System lives in R^{system.n} but the grid is {grid.dim}-dimensional")
    return RunContext(config=config, grid=grid, system=system, system_descriptor=config.system, base_dir=base_dir)


def run_suite(
    config: RunConfig, registry: EnvelopeRegistry, base_dir: str = "."
) -> Tuple[List[ExperimentReport], Dict[str, Any]]:
    """Run every experiment of config, in order, on config.jobs threads.

    Returns:
        (reports, summary) with the summary free of timestamps so equal
        configs give byte-identical JSON

    Raises:
        HalfSpaceError: For invalid configs or failing constructions
    """
    if not config.experiments:
        return [], summarize([])
    ctx = build_context(config, base_dir)
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            reports = list(pool.map(lambda e: run_experiment(ctx, e, registry), config.experiments))
    else:
        reports = [run_experiment(ctx, e, registry) for e in config.experiments]
    summary = summarize(reports)
    summary["system"] = ctx.system.label
    summary["grid"] = ctx.grid.to_dict()
    summary["kernel_method"] = ctx.method.value
    return reports, summary


def summarize(reports: List[ExperimentReport]) -> Dict[str, Any]:
    counts = {verdict.value: 0 for verdict in Verdict}
    for report in reports:
        counts[report.verdict.value] += 1
    return {
        "experiments": [
            {
                "name": r.name,
                "inputs_digest": r.inputs_digest,
                "verdict": r.verdict.value,
                "metrics": r.metrics,
                "violations": r.violations,
            }
            for r in reports
        ],
        "counts": counts,
        "passed": all(r.passed for r in reports),
    }


def default_experiments() -> List[ExperimentConfig]:
    return [ExperimentConfig(name) for name in DEFAULT_SUITE]

