"""Campaign-level orchestration: system runs, sweeps and comparisons.

A "system run" executes one synthetic system through the engine in one of
four modes and returns its free-energy estimate plus the execution
artifacts.  ``REFERENCE`` and ``NONADAPTIVE`` force dense (65) and
standard (13) uniform window schedules; the two adaptive modes attach the
corresponding evaluator.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace
from enum import Enum

from .adaptive import (
    AdaptiveQuadratureEvaluator,
    AdaptiveRunResult,
    AdaptiveTerminationEvaluator,
    SyntheticSampler,
    samples_per_substage,
)
from .engine import (
    CampaignOutcome,
    DurationModel,
    OverheadModel,
    PilotConfig,
    run_campaign,
)
from .errors import ValidationError
from .protocols import (
    MD_TIMESTEP_PS,
    AdaptiveConfig,
    LambdaSchedule,
    ProtocolKind,
    ProtocolSpec,
    ScheduleMode,
    StageKind,
    compile_protocol,
    esmacs_protocol,
    merge_graphs,
    ties_protocol,
    timesteps_to_ns,
)
from .quadrature import FreeEnergyEstimate, integrate_with_error
from .stats import DEFAULT_DISCARD_FRACTION, bootstrap_delta_g_stderr, replica_means, window_estimate
from .synth import SyntheticSystem

#: Window counts forced by the two non-adaptive modes.
REFERENCE_WINDOWS = 65
NONADAPTIVE_WINDOWS = 13
#: Production horizon of the termination experiments (ns).
TERMINATION_HORIZON_NS = 6.0
#: Floor for the adaptive error budget when the measured error is ~0.
EPSILON_FLOOR = 1e-9


class CampaignMode(str, Enum):
    REFERENCE = "REFERENCE"
    NONADAPTIVE = "NONADAPTIVE"
    ADAPTIVE_QUADRATURE = "ADAPTIVE_QUADRATURE"
    ADAPTIVE_TERMINATION = "ADAPTIVE_TERMINATION"


_MODE_ORDINAL = {m: i for i, m in enumerate(CampaignMode)}


def data_seed(campaign_seed: int, system_label: str, mode: CampaignMode) -> int:
    """Deterministic per-(system, mode) seed for data and engine streams."""
    h = zlib.crc32(system_label.encode("utf-8"))
    return (campaign_seed * 1_000_003 + h * 31 + _MODE_ORDINAL[mode]) % (2**31)


@dataclass(frozen=True)
class RunOptions:
    """Everything a single system run needs besides the system itself."""

    pilot: PilotConfig
    adaptive: AdaptiveConfig
    seed: int = 42
    replicas: int = 5
    dt_ps: float = 1.0
    cores_per_task: int = 32
    discard_fraction: float = DEFAULT_DISCARD_FRACTION
    duration_model: DurationModel | None = None
    overhead_model: OverheadModel | None = None
    schedule_mode: ScheduleMode = ScheduleMode.PRODUCTION


@dataclass(frozen=True)
class SystemRunResult:
    system: SyntheticSystem
    mode: CampaignMode
    estimate: FreeEnergyEstimate
    windows: tuple[float, ...]
    simulated_ns: float
    outcome: CampaignOutcome
    terminated_ns: float | None = None
    checkpoint_values: tuple[float, ...] = ()

    @property
    def n_windows(self) -> int:
        return len(self.windows)


def _protocol_for_mode(
    system: SyntheticSystem, mode: CampaignMode, opts: RunOptions
) -> ProtocolSpec:
    name = f"{_slug(system.label)}-{mode.value.lower()}"
    if mode is CampaignMode.REFERENCE:
        return ties_protocol(
            name=name, physical_system=system.label,
            lambda_schedule=LambdaSchedule.uniform(REFERENCE_WINDOWS),
            replicas=opts.replicas, mode=opts.schedule_mode,
        )
    if mode is CampaignMode.NONADAPTIVE:
        return ties_protocol(
            name=name, physical_system=system.label,
            lambda_schedule=LambdaSchedule.uniform(NONADAPTIVE_WINDOWS),
            replicas=opts.replicas, mode=opts.schedule_mode,
        )
    if mode is CampaignMode.ADAPTIVE_QUADRATURE:
        return ties_protocol(
            name=name, physical_system=system.label,
            replicas=opts.replicas, mode=opts.schedule_mode,
            adaptive=opts.adaptive,
        )
    if mode is CampaignMode.ADAPTIVE_TERMINATION:
        tau = opts.adaptive.termination_tau_ns
        n_sub = TERMINATION_HORIZON_NS / tau
        if abs(n_sub - round(n_sub)) > 1e-9:
            raise ValidationError(
                f"adaptive.termination_tau_ns {tau} does not divide the "
                f"{TERMINATION_HORIZON_NS} ns production horizon"
            )
        adaptive = replace(
            opts.adaptive,
            initial_lambdas=LambdaSchedule.uniform(NONADAPTIVE_WINDOWS),
            production_substages=int(round(n_sub)),
            substage_timesteps=int(round(tau * 1000.0 / MD_TIMESTEP_PS)),
            max_total_windows=max(opts.adaptive.max_total_windows, NONADAPTIVE_WINDOWS),
        )
        return ties_protocol(
            name=name, physical_system=system.label,
            replicas=opts.replicas, mode=opts.schedule_mode,
            adaptive=adaptive,
        )
    raise ValidationError(f"unknown campaign mode {mode!r}")


def _slug(label: str) -> str:
    return "".join(c.lower() if c.isalnum() else "-" for c in label).strip("-")


def _static_estimate(
    system: SyntheticSystem, spec: ProtocolSpec, seed: int, opts: RunOptions
) -> tuple[FreeEnergyEstimate, float]:
    """Estimate for a fixed-schedule run: full production at every window."""
    prod = [s for s in spec.sim_stages if s.kind is StageKind.PRODUCTION][0]
    n_samples = samples_per_substage(prod.timesteps, opts.dt_ps)
    sampler = SyntheticSampler(system, seed, opts.dt_ps, n_samples)
    points = []
    means = {}
    for lam in spec.windows:
        series = [sampler.series(lam, r, n_samples) for r in range(opts.replicas)]
        points.append(window_estimate(series, opts.discard_fraction))
        means[lam] = replica_means(series, opts.discard_fraction)
    boot = bootstrap_delta_g_stderr(means, seed=seed)
    return integrate_with_error(points, bootstrap_stderr=boot), timesteps_to_ns(prod.timesteps)


def run_system(
    system: SyntheticSystem, mode: CampaignMode, opts: RunOptions
) -> SystemRunResult:
    """Run one system through the engine in the given mode."""
    spec = _protocol_for_mode(system, mode, opts)
    graph = compile_protocol(spec, cores_per_task=opts.cores_per_task)
    seed = data_seed(opts.seed, system.label, mode)

    evaluator = None
    if mode is CampaignMode.ADAPTIVE_QUADRATURE:
        evaluator = AdaptiveQuadratureEvaluator(
            system, spec.adaptive, seed, replicas=opts.replicas, dt_ps=opts.dt_ps,
            cores_per_task=opts.cores_per_task, discard_fraction=opts.discard_fraction,
        )
    elif mode is CampaignMode.ADAPTIVE_TERMINATION:
        evaluator = AdaptiveTerminationEvaluator(
            system, spec.adaptive, seed, replicas=opts.replicas, dt_ps=opts.dt_ps,
            cores_per_task=opts.cores_per_task, discard_fraction=opts.discard_fraction,
        )

    outcome = run_campaign(
        graph, opts.pilot,
        duration_model=opts.duration_model or DurationModel(),
        evaluator=evaluator, seed=seed,
        overhead_model=opts.overhead_model or OverheadModel(),
    )

    if evaluator is None:
        estimate, simulated_ns = _static_estimate(system, spec, seed, opts)
        return SystemRunResult(
            system=system, mode=mode, estimate=estimate,
            windows=spec.windows, simulated_ns=simulated_ns, outcome=outcome,
        )

    result: AdaptiveRunResult = evaluator.results[spec.name]
    history = result.history
    return SystemRunResult(
        system=system, mode=mode, estimate=result.estimate,
        windows=result.windows, simulated_ns=result.simulated_ns,
        outcome=outcome, terminated_ns=result.terminated_ns,
        checkpoint_values=tuple(history.values) if history is not None else (),
    )


@dataclass(frozen=True)
class SystemComparison:
    """REFERENCE / NONADAPTIVE / ADAPTIVE_QUADRATURE triplet for one system."""

    system: SyntheticSystem
    reference: SystemRunResult
    nonadaptive: SystemRunResult
    adaptive: SystemRunResult
    epsilon: float

    @property
    def nonadaptive_error(self) -> float:
        return abs(self.nonadaptive.estimate.delta_g - self.reference.estimate.delta_g)

    @property
    def adaptive_error(self) -> float:
        return abs(self.adaptive.estimate.delta_g - self.reference.estimate.delta_g)


def compare_system(system: SyntheticSystem, opts: RunOptions) -> SystemComparison:
    """The adaptive-vs-uniform experiment for one system.

    The adaptive error budget is set to the non-adaptive run's measured
    deviation from the dense reference (floored just above zero so the
    budget stays a valid threshold when the two coincide).
    """
    reference = run_system(system, CampaignMode.REFERENCE, opts)
    nonadaptive = run_system(system, CampaignMode.NONADAPTIVE, opts)
    epsilon = max(
        abs(nonadaptive.estimate.delta_g - reference.estimate.delta_g), EPSILON_FLOOR
    )
    adaptive_opts = replace(
        opts, adaptive=replace(opts.adaptive, error_threshold_epsilon=epsilon)
    )
    adaptive = run_system(system, CampaignMode.ADAPTIVE_QUADRATURE, adaptive_opts)
    return SystemComparison(
        system=system, reference=reference, nonadaptive=nonadaptive,
        adaptive=adaptive, epsilon=epsilon,
    )


@dataclass(frozen=True)
class SweepRung:
    n_protocols: int
    total_cores: int


@dataclass(frozen=True)
class SweepRunResult:
    run_id: str
    kind: str
    n_protocols: int
    total_cores: int
    outcome: CampaignOutcome


def _sweep_protocol(template_kind: ProtocolKind, physical_system: str, replicas: int | None, index: int) -> ProtocolSpec:
    if template_kind is ProtocolKind.ESMACS:
        return esmacs_protocol(
            name=f"esmacs-{index}", physical_system=physical_system,
            replicas=replicas or 25, mode=ScheduleMode.SCALING, include_analysis=False,
        )
    return ties_protocol(
        name=f"ties-{index}", physical_system=physical_system,
        replicas=replicas or 5, mode=ScheduleMode.SCALING, include_analysis=False,
    )


def run_sweep(
    kind: str,
    rungs: list[SweepRung],
    protocol_kind: ProtocolKind,
    physical_system: str,
    pilot_defaults: PilotConfig,
    seed: int,
    replicas: int | None = None,
    duration_model: DurationModel | None = None,
    overhead_model: OverheadModel | None = None,
) -> list[SweepRunResult]:
    """Run a scaling ladder; each rung is an independent campaign."""
    results = []
    for i, rung in enumerate(rungs):
        graphs = [
            compile_protocol(
                _sweep_protocol(protocol_kind, physical_system, replicas, p),
                protocol_id=f"{kind.lower()}-{i}-p{p}",
                cores_per_task=pilot_defaults.cores_per_task,
            )
            for p in range(rung.n_protocols)
        ]
        pilot = replace(pilot_defaults, total_cores=rung.total_cores)
        outcome = run_campaign(
            merge_graphs(graphs), pilot,
            duration_model=duration_model or DurationModel(),
            seed=seed + i,
            overhead_model=overhead_model or OverheadModel(),
        )
        results.append(
            SweepRunResult(
                run_id=f"{kind.lower()}-{i}-P{rung.n_protocols}-C{rung.total_cores}",
                kind=kind, n_protocols=rung.n_protocols,
                total_cores=rung.total_cores, outcome=outcome,
            )
        )
    return results


@dataclass(frozen=True)
class TerminationRunResult:
    system: SyntheticSystem
    nonadaptive_ns: float
    adaptive_ns: float
    decrease_pct: float
    result: SystemRunResult


def run_termination(system: SyntheticSystem, opts: RunOptions) -> TerminationRunResult:
    """Adaptive-termination run against the fixed 6.0 ns baseline."""
    res = run_system(system, CampaignMode.ADAPTIVE_TERMINATION, opts)
    adaptive_ns = res.terminated_ns if res.terminated_ns is not None else TERMINATION_HORIZON_NS
    decrease = 100.0 * (TERMINATION_HORIZON_NS - adaptive_ns) / TERMINATION_HORIZON_NS
    return TerminationRunResult(
        system=system, nonadaptive_ns=TERMINATION_HORIZON_NS,
        adaptive_ns=adaptive_ns, decrease_pct=decrease, result=res,
    )
