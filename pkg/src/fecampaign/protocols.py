"""Ensemble protocol definitions and their compilation to task graphs.

A protocol describes one binding-affinity calculation: an ordered chain of
simulation stages, each fanning out into concurrent tasks (one per replica,
or one per lambda window and replica), followed by analysis stages.
``compile_protocol`` turns a spec into a pipeline of stages of tasks;
stages run strictly in order, tasks within a stage run concurrently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import ValidationError
from .quadrature import canonical_lambda

#: MD integration timestep assumed when converting timesteps to simulated time.
MD_TIMESTEP_PS = 0.002


def timesteps_to_ns(timesteps: int) -> float:
    return timesteps * MD_TIMESTEP_PS / 1000.0


class ProtocolKind(str, Enum):
    ESMACS = "ESMACS"
    TIES = "TIES"
    CUSTOM = "CUSTOM"


class StageKind(str, Enum):
    MINIMIZATION = "MINIMIZATION"
    EQUILIBRATION = "EQUILIBRATION"
    PRODUCTION = "PRODUCTION"
    ANALYSIS = "ANALYSIS"
    GLOBAL_ANALYSIS = "GLOBAL_ANALYSIS"


SIMULATION_KINDS = frozenset(
    {StageKind.MINIMIZATION, StageKind.EQUILIBRATION, StageKind.PRODUCTION}
)
ANALYSIS_KINDS = frozenset({StageKind.ANALYSIS, StageKind.GLOBAL_ANALYSIS})


class TaskState(str, Enum):
    PENDING = "PENDING"
    RUNNING = "RUNNING"
    DONE = "DONE"
    FAILED = "FAILED"


class ScheduleMode(str, Enum):
    SCALING = "SCALING"
    PRODUCTION = "PRODUCTION"


_SCALING_TIMESTEPS = {"S1": 1_000, "S2": 5_000, "S3": 5_000, "S4": 50_000}
_PRODUCTION_TIMESTEPS = {"S1": 3_000, "S2": 50_000, "S3": 50_000, "S4": 2_000_000}


def default_timestep_schedule(mode: ScheduleMode) -> dict[str, int]:
    """Per-stage timestep counts for the two bundled workload shapes."""
    if mode is ScheduleMode.SCALING:
        return dict(_SCALING_TIMESTEPS)
    if mode is ScheduleMode.PRODUCTION:
        return dict(_PRODUCTION_TIMESTEPS)
    raise ValidationError(f"unknown schedule mode {mode!r}")


@dataclass(frozen=True)
class LambdaSchedule:
    """Sorted distinct lambda windows spanning [0, 1], 3-decimal canonical."""

    lambdas: tuple[float, ...]

    def __post_init__(self):
        canon = tuple(canonical_lambda(l) for l in self.lambdas)
        if len(canon) < 2:
            raise ValidationError("lambda_schedule needs at least two windows")
        for a, b in zip(canon, canon[1:]):
            if not a < b:
                raise ValidationError("lambda_schedule must be strictly increasing after rounding")
        if canon[0] != 0.0 or canon[-1] != 1.0:
            raise ValidationError("lambda_schedule must start at 0 and end at 1")
        object.__setattr__(self, "lambdas", canon)

    @classmethod
    def uniform(cls, n_windows: int) -> "LambdaSchedule":
        if n_windows < 2:
            raise ValidationError("uniform schedule needs at least two windows")
        return cls(tuple(i / (n_windows - 1) for i in range(n_windows)))

    def __len__(self) -> int:
        return len(self.lambdas)


@dataclass(frozen=True)
class AdaptiveConfig:
    """Knobs for adaptive window placement and adaptive termination."""

    error_threshold_epsilon: float = 0.05
    initial_lambdas: LambdaSchedule = field(
        default_factory=lambda: LambdaSchedule((0.0, 0.5, 1.0))
    )
    production_substages: int = 4
    substage_timesteps: int = 500_000
    termination_tau_ns: float = 0.5
    termination_threshold: float = 0.01
    min_checkpoints_before_termination: int = 2
    max_total_windows: int = 21

    def __post_init__(self):
        if not self.error_threshold_epsilon > 0.0:
            raise ValidationError("adaptive.error_threshold_epsilon must be > 0")
        if self.production_substages < 1:
            raise ValidationError("adaptive.production_substages must be >= 1")
        if self.substage_timesteps < 1:
            raise ValidationError("adaptive.substage_timesteps must be >= 1")
        if not self.termination_tau_ns > 0.0:
            raise ValidationError("adaptive.termination_tau_ns must be > 0")
        if self.termination_threshold < 0.0:
            raise ValidationError("adaptive.termination_threshold must be >= 0")
        if self.min_checkpoints_before_termination < 2:
            raise ValidationError("adaptive.min_checkpoints_before_termination must be >= 2")
        if self.max_total_windows < len(self.initial_lambdas):
            raise ValidationError("adaptive.max_total_windows smaller than initial window count")


@dataclass(frozen=True)
class StageSpec:
    """One stage of a protocol: a label, a task kind and a workload size.

    ``task_width`` is derived from the protocol for simulation stages and
    must be explicit for analysis stages.
    """

    label: str
    kind: StageKind
    timesteps: int = 0
    task_width: int | None = None

    def __post_init__(self):
        if not self.label:
            raise ValidationError("stage label must be non-empty")
        if self.kind in SIMULATION_KINDS:
            if self.timesteps < 1:
                raise ValidationError(f"stage {self.label}: simulation stages need timesteps >= 1")
        else:
            if self.timesteps != 0:
                raise ValidationError(f"stage {self.label}: analysis stages must have timesteps == 0")
            if self.task_width is None or self.task_width < 1:
                raise ValidationError(f"stage {self.label}: analysis stages need an explicit task_width")
            if self.kind is StageKind.GLOBAL_ANALYSIS and self.task_width != 1:
                raise ValidationError(f"stage {self.label}: global analysis width must be 1")


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    kind: ProtocolKind
    physical_system: str
    sim_stages: tuple[StageSpec, ...]
    analysis_stages: tuple[StageSpec, ...] = ()
    replicas_per_member: int = 0
    lambda_schedule: LambdaSchedule | None = None
    adaptive: AdaptiveConfig | None = None

    def __post_init__(self):
        if not self.name:
            raise ValidationError("protocol name must be non-empty")
        if self.replicas_per_member < 1:
            raise ValidationError(f"protocol {self.name}: replicas_per_member must be >= 1")
        if not self.sim_stages:
            raise ValidationError(f"protocol {self.name}: at least one simulation stage required")
        for s in self.sim_stages:
            if s.kind not in SIMULATION_KINDS:
                raise ValidationError(f"protocol {self.name}: stage {s.label} is not a simulation kind")
        for s in self.analysis_stages:
            if s.kind not in ANALYSIS_KINDS:
                raise ValidationError(f"protocol {self.name}: stage {s.label} is not an analysis kind")
        if self.kind is ProtocolKind.TIES and self.lambda_schedule is None and self.adaptive is None:
            raise ValidationError(
                f"protocol {self.name}: TIES requires a lambda_schedule (or an adaptive config)"
            )
        if self.kind is ProtocolKind.ESMACS and self.lambda_schedule is not None:
            raise ValidationError(f"protocol {self.name}: ESMACS must not define a lambda_schedule")
        if self.adaptive is not None and self.kind is not ProtocolKind.TIES:
            raise ValidationError(f"protocol {self.name}: adaptive execution requires a TIES protocol")

    @property
    def windows(self) -> tuple[float, ...]:
        """Lambda windows the protocol starts with (adaptive overrides static)."""
        if self.adaptive is not None:
            return self.adaptive.initial_lambdas.lambdas
        if self.lambda_schedule is not None:
            return self.lambda_schedule.lambdas
        return ()


@dataclass(frozen=True)
class Task:
    """One schedulable unit of work."""

    id: str
    protocol_id: str
    stage_label: str
    kind: StageKind
    lam: float | None
    replica_index: int
    cores: int
    timesteps: int
    state: TaskState = TaskState.PENDING


@dataclass(frozen=True)
class Stage:
    label: str
    kind: StageKind
    tasks: tuple[Task, ...]

    def __post_init__(self):
        if not self.tasks:
            raise ValidationError(f"stage {self.label} compiled with no tasks")


@dataclass(frozen=True)
class Pipeline:
    id: str
    spec: ProtocolSpec
    stages: tuple[Stage, ...]


@dataclass(frozen=True)
class WorkflowGraph:
    pipelines: tuple[Pipeline, ...]

    def __post_init__(self):
        ids = [p.id for p in self.pipelines]
        if len(set(ids)) != len(ids):
            raise ValidationError("pipeline ids must be unique within a workflow graph")
        task_ids = [t.id for p in self.pipelines for s in p.stages for t in s.tasks]
        if len(set(task_ids)) != len(task_ids):
            raise ValidationError("task ids must be unique within a workflow graph")

    @property
    def n_tasks(self) -> int:
        return sum(len(s.tasks) for p in self.pipelines for s in p.stages)


def simulation_stage(
    protocol_id: str,
    label: str,
    kind: StageKind,
    timesteps: int,
    replicas: int,
    lam_values: Sequence[float] | None,
    cores_per_task: int = 32,
) -> Stage:
    """Build one simulation stage's task fan-out.

    With ``lam_values`` the fan-out is (window x replica); without it the
    fan-out is one task per replica (lambda-free ensembles).
    """
    tasks = []
    if lam_values is None:
        for r in range(replicas):
            tasks.append(
                Task(
                    id=f"{protocol_id}/{label}/r{r}",
                    protocol_id=protocol_id,
                    stage_label=label,
                    kind=kind,
                    lam=None,
                    replica_index=r,
                    cores=cores_per_task,
                    timesteps=timesteps,
                )
            )
    else:
        for lam in lam_values:
            lam = canonical_lambda(lam)
            for r in range(replicas):
                tasks.append(
                    Task(
                        id=f"{protocol_id}/{label}/l{lam:.3f}/r{r}",
                        protocol_id=protocol_id,
                        stage_label=label,
                        kind=kind,
                        lam=lam,
                        replica_index=r,
                        cores=cores_per_task,
                        timesteps=timesteps,
                    )
                )
    return Stage(label=label, kind=kind, tasks=tuple(tasks))


def _analysis_stage(protocol_id: str, spec: StageSpec, cores_per_task: int) -> Stage:
    tasks = tuple(
        Task(
            id=f"{protocol_id}/{spec.label}/a{i}",
            protocol_id=protocol_id,
            stage_label=spec.label,
            kind=spec.kind,
            lam=None,
            replica_index=i,
            cores=cores_per_task,
            timesteps=0,
        )
        for i in range(spec.task_width or 1)
    )
    return Stage(label=spec.label, kind=spec.kind, tasks=tasks)


def compile_protocol(
    spec: ProtocolSpec, protocol_id: str | None = None, cores_per_task: int = 32
) -> WorkflowGraph:
    """Compile a protocol spec into a single-pipeline workflow graph.

    Simulation stages fan out to one task per replica (lambda-free) or per
    (window, replica) pair.  For adaptive protocols the production stage is
    compiled as its first sub-stage only (labelled ``<label>.1``); later
    sub-stages are appended at run time by the evaluator.  Analysis stages
    follow the simulation stages.  Compilation is deterministic.
    """
    pid = protocol_id or spec.name
    lam_values: Sequence[float] | None
    if spec.kind is ProtocolKind.TIES:
        lam_values = spec.windows
    else:
        lam_values = None
    stages: list[Stage] = []
    for st in spec.sim_stages:
        if spec.adaptive is not None and st.kind is StageKind.PRODUCTION:
            stages.append(
                simulation_stage(
                    pid, f"{st.label}.1", st.kind,
                    spec.adaptive.substage_timesteps, spec.replicas_per_member,
                    lam_values, cores_per_task,
                )
            )
        elif st.kind in SIMULATION_KINDS and st.task_width is not None and spec.kind is ProtocolKind.CUSTOM:
            # CUSTOM protocols size their own stages.
            stages.append(
                simulation_stage(
                    pid, st.label, st.kind, st.timesteps, st.task_width, None, cores_per_task
                )
            )
        else:
            stages.append(
                simulation_stage(
                    pid, st.label, st.kind, st.timesteps,
                    spec.replicas_per_member, lam_values, cores_per_task,
                )
            )
    for st in spec.analysis_stages:
        stages.append(_analysis_stage(pid, st, cores_per_task))
    return WorkflowGraph(pipelines=(Pipeline(id=pid, spec=spec, stages=tuple(stages)),))


def merge_graphs(graphs: Iterable[WorkflowGraph]) -> WorkflowGraph:
    """Combine single-protocol graphs into one multi-pipeline campaign graph."""
    pipelines = tuple(itertools.chain.from_iterable(g.pipelines for g in graphs))
    return WorkflowGraph(pipelines=pipelines)


def _sim_stage_specs(schedule: dict[str, int]) -> tuple[StageSpec, ...]:
    return (
        StageSpec("S1", StageKind.MINIMIZATION, schedule["S1"]),
        StageSpec("S2", StageKind.EQUILIBRATION, schedule["S2"]),
        StageSpec("S3", StageKind.EQUILIBRATION, schedule["S3"]),
        StageSpec("S4", StageKind.PRODUCTION, schedule["S4"]),
    )


def ties_protocol(
    name: str = "ties",
    physical_system: str = "synthetic",
    lambda_schedule: LambdaSchedule | None = None,
    replicas: int = 5,
    mode: ScheduleMode = ScheduleMode.PRODUCTION,
    timesteps: dict[str, int] | None = None,
    adaptive: AdaptiveConfig | None = None,
    include_analysis: bool = True,
) -> ProtocolSpec:
    """A TIES protocol: four simulation stages, per-window analysis, global analysis."""
    schedule = timesteps or default_timestep_schedule(mode)
    if lambda_schedule is None and adaptive is None:
        lambda_schedule = LambdaSchedule.uniform(13)
    analysis = (
        (
            StageSpec("S5", StageKind.ANALYSIS, task_width=replicas),
            StageSpec("S6", StageKind.GLOBAL_ANALYSIS, task_width=1),
        )
        if include_analysis
        else ()
    )
    return ProtocolSpec(
        name=name,
        kind=ProtocolKind.TIES,
        physical_system=physical_system,
        sim_stages=_sim_stage_specs(schedule),
        analysis_stages=analysis,
        replicas_per_member=replicas,
        lambda_schedule=lambda_schedule if adaptive is None else None,
        adaptive=adaptive,
    )


def esmacs_protocol(
    name: str = "esmacs",
    physical_system: str = "synthetic",
    replicas: int = 25,
    mode: ScheduleMode = ScheduleMode.SCALING,
    timesteps: dict[str, int] | None = None,
    include_analysis: bool = True,
) -> ProtocolSpec:
    """An ESMACS protocol: four simulation stages and one aggregate analysis."""
    schedule = timesteps or default_timestep_schedule(mode)
    analysis = (StageSpec("S5", StageKind.ANALYSIS, task_width=1),) if include_analysis else ()
    return ProtocolSpec(
        name=name,
        kind=ProtocolKind.ESMACS,
        physical_system=physical_system,
        sim_stages=_sim_stage_specs(schedule),
        analysis_stages=analysis,
        replicas_per_member=replicas,
    )
