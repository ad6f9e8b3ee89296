"""
Batch experiment runner behind ``main.py run`` and ``main.py compare``.

A run config is a JSON document merged over the YAML defaults; each
solve writes its own directory with trace CSV, certificate and summary.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, TextIO, Tuple

import pandas as pd

from ..problems.generators import VIEWS, ProblemInstance, generate, load_problem
from ..problems.models import ProblemSpec
from ..solvers.accel import AadmmSolver, ApdhgSolver
from ..solvers.admm import AdmmSolver
from ..solvers.certify import (
    GuessCheckConfig,
    GuessCheckResult,
    guess_and_check_admm,
    guess_and_check_pdhg,
)
from ..solvers.common import FIRST_REPORT, PrimalDualSolver, SolveReport, StoppingRule
from ..solvers.pdhg import PdhgSolver
from ..solvers.scheduler import SchedulerConfig
from ..storage.data_manager import RunStorage
from ..utils.config import (
    RUN_SCHEMA_VERSION,
    load_config,
    load_run_config,
    merge_config,
    validate_config,
)
from ..utils.errors import ConfigError
from ..utils.logger import get_logger
from ..utils.performance import RunProfiler

logger = get_logger("cli")

OUTPUT_ENV = "ACPD_OUTPUT_DIR"

# algorithm -> (problem view, solver class or guess-check driver)
ALGORITHMS = {
    "ac-pdhg": ("saddle", PdhgSolver),
    "ac-apdhg": ("smooth_saddle", ApdhgSolver),
    "ac-admm": ("two_block", AdmmSolver),
    "ac-aadmm": ("smooth_two_block", AadmmSolver),
    "guess-check-pdhg": ("saddle", guess_and_check_pdhg),
    "guess-check-admm": ("two_block", guess_and_check_admm),
}

COMPARE_COLUMNS = [
    "algorithm",
    "iterations_to_target",
    "final_k",
    "gap_bound",
    "violation",
    "E1",
    "E2",
    "L_hat",
]

MERGED_SECTIONS = ("scheduler", "stop", "trace", "guess_check", "storage")


@dataclass
class RunConfig:
    """One validated run: problem source, algorithms and merged solver settings."""

    algorithms: List[str]
    problem: Optional[ProblemSpec]
    problem_file: Optional[str]
    settings: Dict[str, Any]
    output_dir: Path
    name: str = "run"
    smooth: bool = False
    probe_seed: int = 0
    batch: List[Dict[str, Any]] = field(default_factory=list)

    @classmethod
    def from_dict(
        cls,
        document: Dict[str, Any],
        defaults: Dict[str, Any],
        out: Optional[str] = None,
        seed: Optional[int] = None,
        max_iters: Optional[int] = None,
    ) -> "RunConfig":
        """
        Merge a run document over the application defaults and validate it.

        Precedence for the output directory: ``out`` flag, then the
        ``ACPD_OUTPUT_DIR`` environment variable, then the document, then
        ``storage.output_dir``.

        Raises:
            ConfigError: On missing fields, unknown algorithms or bad ranges
        """
        overrides = {k: document[k] for k in MERGED_SECTIONS if k in document}
        settings = merge_config(defaults, overrides)
        if max_iters is not None:
            settings["stop"]["max_iters"] = max_iters
        validate_config(settings)

        if "algorithms" in document:
            algorithms = list(document["algorithms"])
        elif "algorithm" in document:
            algorithms = [document["algorithm"]]
        else:
            raise ConfigError("run config needs 'algorithm' or 'algorithms'")
        unknown = [a for a in algorithms if a not in ALGORITHMS]
        if unknown or not algorithms:
            raise ConfigError(f"unknown algorithm(s) {unknown} (known: {sorted(ALGORITHMS)})")

        problem, problem_file = None, document.get("problem_file")
        if problem_file is None:
            if "problem" not in document:
                raise ConfigError("run config needs 'problem' or 'problem_file'")
            data = dict(document["problem"])
            if seed is not None:
                data["seed"] = seed
            try:
                problem = ProblemSpec.from_dict(data)
            except (KeyError, TypeError, ValueError) as e:
                raise ConfigError(f"Invalid problem description: {e}")

        output_dir = (
            out
            or os.environ.get(OUTPUT_ENV)
            or document.get("output_dir")
            or settings["storage"].get("output_dir", "runs")
        )
        return cls(
            algorithms=algorithms,
            problem=problem,
            problem_file=problem_file,
            settings=settings,
            output_dir=Path(output_dir),
            name=str(document.get("name", "run")),
            smooth=bool(document.get("smooth", False)),
            probe_seed=int(document.get("probe_seed", 0)),
            batch=list(document.get("batch", [])),
        )

    def scheduler_config(self, mu_default: Optional[float] = None) -> SchedulerConfig:
        scheduler = dict(self.settings["scheduler"])
        if scheduler.get("mu_d") is None and mu_default is not None:
            scheduler["mu_d"] = mu_default
        return SchedulerConfig.from_dict(scheduler)

    def stopping_rule(self) -> StoppingRule:
        stop = dict(self.settings["stop"])
        trace = self.settings["trace"]
        stop.setdefault("trace_stride", trace.get("stride"))
        stop.setdefault("record_wall_clock", trace.get("record_wall_clock", False))
        try:
            return StoppingRule.from_dict(stop)
        except ValueError as e:
            raise ConfigError(str(e))

    def guess_check_config(self, D_X_default: Optional[float] = None) -> GuessCheckConfig:
        """Guess-check section, with eps and D_X falling back to ``stop`` then the problem."""
        gc = dict(self.settings["guess_check"])
        stop = self.settings["stop"]
        for key in ("eps1", "eps2", "D_X"):
            if gc.get(key) is None:
                gc[key] = stop.get(key)
        if gc["D_X"] is None:
            gc["D_X"] = D_X_default
        missing = [k for k in ("D_hat0", "eps1", "eps2", "D_X") if gc.get(k) is None]
        if missing:
            raise ConfigError(f"guess_check needs {missing}")
        if gc.get("trace_stride") is None:
            gc["trace_stride"] = self.settings["trace"].get("stride")
        return GuessCheckConfig.from_dict(gc)

    def provenance(self) -> Dict[str, Any]:
        return {
            "schema_version": RUN_SCHEMA_VERSION,
            "name": self.name,
            "problem": None if self.problem is None else self.problem.to_dict(),
            "problem_file": self.problem_file,
            "probe_seed": self.probe_seed,
            "scheduler": self.settings["scheduler"],
            "stop": self.settings["stop"],
        }


def load_instance(config: RunConfig) -> ProblemInstance:
    if config.problem_file is not None:
        return load_problem(config.problem_file)
    return generate(config.problem)


def problem_view(instance: ProblemInstance, algorithm: str, smooth: bool = False) -> Any:
    """
    The problem object an algorithm consumes.

    Guess-and-check drivers take the smooth view when asked to, or when it
    is the family's only form.

    Raises:
        ConfigError: If the family has no form the algorithm accepts
    """
    view, _ = ALGORITHMS[algorithm]
    if algorithm.startswith("guess-check"):
        if smooth or view not in VIEWS[instance.family]:
            view = f"smooth_{view}"
    return getattr(instance, view)()


@dataclass
class RunOutcome:
    """What one algorithm produced on one problem."""

    algorithm: str
    report: SolveReport
    output_dir: Path
    guess_check: Optional[GuessCheckResult] = None
    summary: Dict[str, Any] = field(default_factory=dict)


def _constrained_block(solver: PrimalDualSolver, instance: ProblemInstance) -> Optional[Dict]:
    if solver.t < FIRST_REPORT or solver.constraint_residual() is None:
        return None
    truth = instance.truth
    return solver.constrained_report(truth.x_star, truth.y_star, truth.f_star).to_dict()


def _summary(report: SolveReport, profiler: RunProfiler) -> Dict[str, Any]:
    cert = report.certificate
    return {
        "algorithm": report.algorithm,
        "status": report.status,
        "iterations": report.iterations,
        "gap_bound": cert.gap_bound,
        "violation": cert.violation,
        "E1": cert.E1,
        "E2": cert.E2,
        "L_hat": cert.L_hat,
        "eta1": cert.eta1,
        "grad_calls": report.grad_calls,
        "profile": profiler.stats(),
    }


def run_algorithm(
    config: RunConfig, instance: ProblemInstance, algorithm: str, output_dir: Path
) -> RunOutcome:
    """
    Solve ``instance`` with one algorithm and write its files.

    Raises:
        ConfigError: If the algorithm does not fit the problem family
        SolverError: On solver failures (divergence, exhausted budgets)
    """
    problem = problem_view(instance, algorithm, config.smooth)
    _, runner = ALGORITHMS[algorithm]
    storage = RunStorage(config.settings, output_dir, run_id=f"{config.name}-{algorithm}")
    perf = config.settings.get("performance", {})
    provenance = dict(config.provenance(), algorithm=algorithm)

    if algorithm.startswith("guess-check"):
        gc = config.guess_check_config(problem.X.radius_from(problem.x0))
        # each outer loop replaces mu_d; the placeholder only satisfies validation
        sched = config.scheduler_config(mu_default=gc.eps2 / (4.0 * gc.D_hat0))
        with RunProfiler(f"{config.name}/{algorithm}", perf) as profiler:
            result = runner(problem, gc, sched, config.probe_seed)
        for i, round_report in enumerate(result.reports):
            storage.save_trace(round_report.trace, suffix=f"round{i}")
            storage.archive(round_report.trace, {"algorithm": algorithm}, group=f"round{i}")
        report = result.report
        certificate = dict(report.certificate.to_dict(), provenance=provenance)
        storage.save_certificate(certificate)
        summary = dict(_summary(report, profiler), **result.to_dict())
        storage.finish(algorithm, report.iterations, report.status)
        storage.save_summary(summary)
        return RunOutcome(algorithm, report, output_dir, result, summary)

    solver = runner(problem, config.scheduler_config(), config.probe_seed)
    with RunProfiler(f"{config.name}/{algorithm}", perf) as profiler:
        report = solver.solve(config.stopping_rule())
    storage.save_trace(report.trace)
    storage.archive(report.trace, {"algorithm": algorithm, "status": report.status})
    certificate = dict(report.certificate.to_dict(), provenance=provenance)
    constrained = _constrained_block(solver, instance)
    if constrained is not None:
        certificate["constrained"] = constrained
    storage.save_certificate(certificate)
    summary = _summary(report, profiler)
    storage.finish(algorithm, report.iterations, report.status)
    storage.save_summary(summary)
    return RunOutcome(algorithm, report, output_dir, None, summary)


def _run_dir(config: RunConfig, algorithm: str) -> Path:
    return config.output_dir / config.name / algorithm


def print_summary(summary: Dict[str, Any], stream: Optional[TextIO] = None) -> None:
    """Key/value lines; floats use repr so they round-trip exactly."""
    for key in (
        "algorithm",
        "status",
        "iterations",
        "gap_bound",
        "violation",
        "E1",
        "E2",
        "L_hat",
        "D_hat_Y",
        "outer_count",
    ):
        if key in summary:
            print(f"{key:>12}: {summary[key]!r}", file=stream)


def _batch_configs(
    config: RunConfig, document: Dict[str, Any], defaults: Dict[str, Any], **flags: Any
) -> List[RunConfig]:
    configs = []
    for i, entry in enumerate(config.batch):
        merged = merge_config({k: v for k, v in document.items() if k != "batch"}, entry)
        if "name" not in entry:
            merged["name"] = f"{config.name}_{i}"
        configs.append(RunConfig.from_dict(merged, defaults, **flags))
    return configs


def _execute(config: RunConfig, algorithms: List[str]) -> List[RunOutcome]:
    instance = load_instance(config)
    for algorithm in algorithms:
        # fail on incompatible pairs before any solve starts
        problem_view(instance, algorithm, config.smooth)
    return [
        run_algorithm(config, instance, algorithm, _run_dir(config, algorithm))
        for algorithm in algorithms
    ]


def _fan_out(configs: List[RunConfig], workers: int, compare: bool) -> List[RunOutcome]:
    def job(cfg: RunConfig) -> List[RunOutcome]:
        return _execute(cfg, cfg.algorithms if compare else cfg.algorithms[:1])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(job, configs))
    return [outcome for group in results for outcome in group]


def _prepare(
    config_path: str,
    defaults_path: str,
    out: Optional[str],
    seed: Optional[int],
    max_iters: Optional[int],
) -> Tuple[RunConfig, List[RunConfig]]:
    defaults = load_config(defaults_path)
    document = load_run_config(config_path)
    flags = {"out": out, "seed": seed, "max_iters": max_iters}
    config = RunConfig.from_dict(document, defaults, **flags)
    return config, _batch_configs(config, document, defaults, **flags)


def run(
    config_path: str,
    defaults_path: str = "config/default.yaml",
    out: Optional[str] = None,
    seed: Optional[int] = None,
    max_iters: Optional[int] = None,
    stream: Optional[TextIO] = None,
) -> List[RunOutcome]:
    """
    Execute a run config: one solve, or one per batch entry.

    Raises:
        ConfigError: On invalid or incompatible configuration
        SolverError: On solver failures
    """
    config, batch = _prepare(config_path, defaults_path, out, seed, max_iters)
    if len(config.algorithms) > 1:
        logger.warning(f"run uses only the first algorithm of {config.algorithms}")
    if batch:
        workers = config.settings.get("performance", {}).get("max_workers", 4)
        outcomes = _fan_out(batch, workers, compare=False)
    else:
        outcomes = _execute(config, config.algorithms[:1])
    for outcome in outcomes:
        print_summary(outcome.summary, stream)
    return outcomes


def iterations_to_target(report: SolveReport) -> Optional[int]:
    if report.status in ("gap_target", "eps_targets"):
        return report.iterations
    return None


def compare_table(outcomes: List[RunOutcome]) -> pd.DataFrame:
    rows = []
    for outcome in outcomes:
        cert = outcome.report.certificate
        rows.append(
            {
                "algorithm": outcome.algorithm,
                "iterations_to_target": iterations_to_target(outcome.report),
                "final_k": outcome.report.iterations,
                "gap_bound": cert.gap_bound,
                "violation": cert.violation,
                "E1": cert.E1,
                "E2": cert.E2,
                "L_hat": cert.L_hat,
            }
        )
    frame = pd.DataFrame(rows, columns=COMPARE_COLUMNS)
    frame["iterations_to_target"] = frame["iterations_to_target"].astype("Int64")
    return frame


def compare(
    config_path: str,
    defaults_path: str = "config/default.yaml",
    out: Optional[str] = None,
    seed: Optional[int] = None,
    max_iters: Optional[int] = None,
    stream: Optional[TextIO] = None,
) -> pd.DataFrame:
    """
    Run every listed algorithm on the same problem and tabulate the results.

    Writes ``compare.csv`` next to the per-algorithm directories and
    prints the aligned table.
    """
    config, batch = _prepare(config_path, defaults_path, out, seed, max_iters)
    if batch:
        workers = config.settings.get("performance", {}).get("max_workers", 4)
        outcomes = _fan_out(batch, workers, compare=True)
    else:
        outcomes = _execute(config, config.algorithms)
    table = compare_table(outcomes)
    storage = RunStorage(config.settings, config.output_dir / config.name, run_id=config.name)
    path = storage.save_compare_table(table)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.6g}"), file=stream)
    logger.info(f"wrote comparison of {len(outcomes)} solves to {path}")
    return table
