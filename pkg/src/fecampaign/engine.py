"""Discrete-event execution of campaign workflows on a simulated pilot.

The engine runs every pipeline's current stage concurrently, in
generations: a generation is one wave of at most ``slots(pilot)`` tasks
drawn from all ready stages.  Stages are barriers within their pipeline.
When a generation is wider than the pilot's launcher concurrency cap,
every task in it independently fails at launch with a configured
probability; failed tasks are retried exactly once, in a dedicated
retry generation, with an added launch delay.

Virtual-time accounting mirrors the four-way overhead split used in the
reports:

* framework: workflow compilation plus evaluator bookkeeping, modeled as
  ``c1 * P + c2 * P^2`` for ``P`` protocol instances, charged up front;
* runtime: per-task scheduling cost, ``c3`` per launched attempt;
* launch: a fixed delay per launched attempt, plus all retry costs (the
  added delay and the retry generation's execution window -- relaunch
  cost is launcher overhead, not task execution);
* task execution: the execution windows of regular generations, i.e. the
  critical path through successful first-attempt waves.

Total time to completion is the exact sum of the four categories, and
equals the virtual clock at the final event.
"""

from __future__ import annotations

import csv
import math
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .errors import CampaignError, ContractError, PlanRejectedError, ValidationError
from .protocols import (
    ANALYSIS_KINDS,
    Stage,
    StageKind,
    Task,
    WorkflowGraph,
    canonical_lambda,
)

TIMELINE_COLUMNS = ("event_time_s", "event", "task_id", "pipeline_id", "stage_label", "generation")
OVERHEAD_COLUMNS = (
    "run_id", "n_protocols", "total_cores",
    "ttx_s", "framework_s", "runtime_s", "launch_s", "ttc_s",
)


@dataclass(frozen=True)
class PilotConfig:
    """Resource slice the campaign runs on."""

    total_cores: int
    cores_per_task: int = 32
    concurrency_cap: int = 450
    launch_delay_per_task: float = 0.005
    failure_probability_over_cap: float = 0.1346
    walltime_s: float = 172_800.0

    def __post_init__(self):
        if self.cores_per_task < 1:
            raise ValidationError("pilot.cores_per_task must be >= 1")
        if self.total_cores < self.cores_per_task:
            raise ValidationError("pilot.total_cores must fit at least one task")
        if self.concurrency_cap < 1:
            raise ValidationError("pilot.concurrency_cap must be >= 1")
        if self.launch_delay_per_task < 0.0:
            raise ValidationError("pilot.launch_delay_per_task must be >= 0")
        if not 0.0 <= self.failure_probability_over_cap <= 1.0:
            raise ValidationError("pilot.failure_probability_over_cap must lie in [0, 1]")
        if not self.walltime_s > 0.0:
            raise ValidationError("pilot.walltime_s must be > 0")


@dataclass(frozen=True)
class OverheadModel:
    """Coefficients of the modeled framework and runtime overheads."""

    framework_per_protocol: float = 0.15
    framework_quadratic: float = 0.015
    runtime_per_task: float = 0.012

    def framework_seconds(self, n_protocols: int) -> float:
        return self.framework_per_protocol * n_protocols + self.framework_quadratic * n_protocols ** 2


@dataclass(frozen=True)
class DurationModel:
    """Maps a task to its modeled execution time.

    Simulation tasks take ``timesteps * seconds_per_timestep_core / cores``
    seconds; analysis tasks take a fixed time.  The default constant of
    0.032 s*core/timestep gives 1 ms per timestep on a 32-core task.
    """

    seconds_per_timestep_core: float = 0.032
    analysis_seconds: float = 10.0

    def __call__(self, task: Task) -> float:
        if task.kind in ANALYSIS_KINDS:
            return self.analysis_seconds
        return task.timesteps * self.seconds_per_timestep_core / task.cores


def slots(pilot: PilotConfig) -> int:
    """Concurrent task capacity of the pilot."""
    return pilot.total_cores // pilot.cores_per_task


def generation_count(n_tasks: int, pilot: PilotConfig) -> int:
    """Number of full-width waves needed to run ``n_tasks`` tasks."""
    if n_tasks < 0:
        raise ContractError("n_tasks must be >= 0")
    return math.ceil(n_tasks / slots(pilot))


class PlanKind(str, Enum):
    CONTINUE = "CONTINUE"
    APPEND = "APPEND"
    TERMINATE = "TERMINATE"


@dataclass(frozen=True)
class StagePlan:
    """Evaluator verdict after a stage completes."""

    kind: PlanKind
    stages: tuple[Stage, ...] = ()
    reason: str = ""

    @classmethod
    def proceed(cls) -> "StagePlan":
        return cls(PlanKind.CONTINUE)

    @classmethod
    def append(cls, stages: Sequence[Stage]) -> "StagePlan":
        if not stages:
            raise ContractError("APPEND plan needs at least one stage")
        return cls(PlanKind.APPEND, stages=tuple(stages))

    @classmethod
    def terminate(cls, reason: str) -> "StagePlan":
        return cls(PlanKind.TERMINATE, reason=reason)


class Evaluator(Protocol):
    """Hook invoked after every completed stage of every pipeline."""

    def on_stage_complete(self, pipeline: "PipelineRun", stage: Stage) -> StagePlan: ...


class TaskOutcome(str, Enum):
    DONE = "DONE"
    FAILED_THEN_RETRIED = "FAILED_THEN_RETRIED"


@dataclass
class TaskRecord:
    """Execution record of one task across its (at most two) attempts."""

    task: Task
    submit_time_s: float = math.nan
    start_time_s: float = math.nan
    end_time_s: float = math.nan
    duration_s: float = 0.0
    attempts: int = 0
    outcome: TaskOutcome = TaskOutcome.DONE


@dataclass(frozen=True)
class TimelineEvent:
    time_s: float
    event: str
    task_id: str
    pipeline_id: str
    stage_label: str
    generation: int


@dataclass(frozen=True)
class GenerationSummary:
    index: int
    width: int
    n_failed: int
    is_retry: bool
    exec_window_s: float


@dataclass
class CampaignTimeline:
    """Ordered event log plus the aggregates the accounting needs."""

    pilot: PilotConfig
    overhead_model: OverheadModel
    n_protocols: int
    events: list[TimelineEvent] = field(default_factory=list)
    task_records: dict[str, TaskRecord] = field(default_factory=dict)
    generations: list[GenerationSummary] = field(default_factory=list)
    end_time_s: float = 0.0
    complete: bool = False
    # accounting accumulators (seconds)
    framework_s: float = 0.0
    runtime_s: float = 0.0
    launch_s: float = 0.0
    primary_exec_s: float = 0.0
    n_attempts: int = 0
    n_retries: int = 0
    sum_task_seconds: float = 0.0

    def peak_concurrency(self) -> int:
        """Maximum number of simultaneously running tasks in the log."""
        deltas = []
        for ev in self.events:
            if ev.event == "task_start":
                deltas.append((ev.time_s, 1, 1))
            elif ev.event == "task_end":
                deltas.append((ev.time_s, 0, -1))
        deltas.sort(key=lambda d: (d[0], d[1]))
        peak = current = 0
        for _, _, delta in deltas:
            current += delta
            peak = max(peak, current)
        return peak


@dataclass(frozen=True)
class OverheadBreakdown:
    """Four-way split of a campaign's virtual time.

    ``total_time_to_completion_s`` is by definition the exact sum of the
    four categories.
    """

    task_execution_time_s: float
    framework_overhead_s: float
    runtime_overhead_s: float
    launch_overhead_s: float

    @property
    def total_time_to_completion_s(self) -> float:
        return (
            self.task_execution_time_s
            + self.framework_overhead_s
            + self.runtime_overhead_s
            + self.launch_overhead_s
        )


def measure_overheads(timeline: CampaignTimeline) -> OverheadBreakdown:
    """Partition a completed campaign's virtual time into the four categories."""
    if not timeline.complete:
        raise ContractError("cannot measure overheads of an incomplete timeline")
    return OverheadBreakdown(
        task_execution_time_s=timeline.primary_exec_s,
        framework_overhead_s=timeline.framework_s,
        runtime_overhead_s=timeline.runtime_s,
        launch_overhead_s=timeline.launch_s,
    )


@dataclass
class _RunTask:
    task: Task
    record: TaskRecord
    is_retry: bool = False


@dataclass
class PipelineRun:
    """Mutable per-pipeline execution state, also handed to evaluators."""

    id: str
    spec: object
    stages: list[Stage]
    cursor: int = 0
    terminated_reason: str | None = None

    @property
    def windows(self) -> tuple[float, ...]:
        lams = {canonical_lambda(t.lam) for s in self.stages for t in s.tasks if t.lam is not None}
        return tuple(sorted(lams))

    @property
    def done(self) -> bool:
        return self.terminated_reason is not None or self.cursor >= len(self.stages)

    def current_stage(self) -> Stage | None:
        if self.done:
            return None
        return self.stages[self.cursor]

    def completed_stage_labels(self) -> list[str]:
        return [s.label for s in self.stages[: self.cursor]]

    def cancelled_stage_labels(self) -> list[str]:
        if self.terminated_reason is None:
            return []
        return [s.label for s in self.stages[self.cursor:]]


@dataclass(frozen=True)
class PipelineSummary:
    pipeline_id: str
    completed_stages: tuple[str, ...]
    cancelled_stages: tuple[str, ...]
    windows: tuple[float, ...]
    terminated_reason: str | None


@dataclass(frozen=True)
class CampaignOutcome:
    timeline: CampaignTimeline
    overheads: OverheadBreakdown
    results: dict[str, PipelineSummary]


def _validate_plan(plan: StagePlan, pipeline: PipelineRun) -> None:
    if plan.kind is not PlanKind.APPEND:
        return
    known = set(pipeline.windows)
    introduced: set[float] = set()
    for stage in plan.stages:
        for task in stage.tasks:
            if task.lam is None:
                continue
            lam = canonical_lambda(task.lam)
            if task.kind is StageKind.PRODUCTION:
                if lam not in known and lam not in introduced:
                    raise PlanRejectedError(
                        f"plan for pipeline {pipeline.id} schedules production at unknown "
                        f"lambda {lam} with no preceding equilibration"
                    )
            else:
                introduced.add(lam)
    adaptive = getattr(pipeline.spec, "adaptive", None)
    if adaptive is not None:
        total = len(known | introduced)
        if total > adaptive.max_total_windows:
            raise PlanRejectedError(
                f"plan for pipeline {pipeline.id} grows the window set to {total}, "
                f"above max_total_windows={adaptive.max_total_windows}"
            )


def run_campaign(
    workflows: WorkflowGraph,
    pilot: PilotConfig,
    duration_model: Callable[[Task], float] | None = None,
    evaluator: Evaluator | None = None,
    seed: int = 0,
    overhead_model: OverheadModel | None = None,
) -> CampaignOutcome:
    """Execute a workflow graph on the simulated pilot.

    Deterministic for a given seed.  Raises :class:`CampaignError` (with
    the partial timeline attached) when the walltime is exceeded or a
    task fails twice.
    """
    durations = duration_model or DurationModel()
    overheads = overhead_model or OverheadModel()
    n_protocols = len(workflows.pipelines)
    if n_protocols == 0:
        raise ContractError("workflow graph has no pipelines")
    capacity = slots(pilot)
    for p in workflows.pipelines:
        for s in p.stages:
            for t in s.tasks:
                if t.cores > pilot.total_cores:
                    raise ValidationError(
                        f"task {t.id} needs {t.cores} cores, pilot has {pilot.total_cores}"
                    )

    timeline = CampaignTimeline(pilot=pilot, overhead_model=overheads, n_protocols=n_protocols)
    events = timeline.events
    clock = 0.0
    generation = 0
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xFA17]))

    pipelines = [
        PipelineRun(id=p.id, spec=p.spec, stages=list(p.stages)) for p in workflows.pipelines
    ]
    pending: dict[str, list[_RunTask]] = {}  # pipeline id -> not yet launched tasks of its current stage
    remaining: dict[str, int] = {}  # pipeline id -> unfinished tasks of its current stage

    def fail(message: str) -> CampaignError:
        timeline.end_time_s = clock
        events.sort(key=lambda e: e.time_s)  # stable: ties keep insertion order
        return CampaignError(message, timeline=timeline)

    def enter_stage(pl: PipelineRun) -> None:
        stage = pl.current_stage()
        if stage is None:
            return
        runs = []
        for t in stage.tasks:
            rec = TaskRecord(task=t)
            timeline.task_records[t.id] = rec
            runs.append(_RunTask(task=t, record=rec))
        pending[pl.id] = runs
        remaining[pl.id] = len(runs)

    events.append(TimelineEvent(0.0, "campaign_start", "", "", "", -1))
    # Framework overhead (compilation plus evaluator bookkeeping) is charged
    # up front from the protocol count.
    timeline.framework_s = overheads.framework_seconds(n_protocols)
    clock += timeline.framework_s
    events.append(TimelineEvent(clock, "framework_ready", "", "", "", -1))

    for pl in pipelines:
        enter_stage(pl)

    retry_queue: list[_RunTask] = []

    while True:
        if retry_queue:
            wave = list(retry_queue)
            retry_queue = []
            is_retry_wave = True
        else:
            wave = []
            for pl in pipelines:
                queue = pending.get(pl.id, [])
                while queue and len(wave) < capacity:
                    wave.append(queue.pop(0))
            is_retry_wave = False
        if not wave:
            break

        # Scheduling (runtime overhead) and launch delays for the wave.
        width = len(wave)
        sched = overheads.runtime_per_task * width
        timeline.runtime_s += sched
        clock += sched
        launch = pilot.launch_delay_per_task * width
        if is_retry_wave:
            # Retries pay the launch delay twice: the regular one plus the
            # relaunch penalty.
            launch += pilot.launch_delay_per_task * width
        timeline.launch_s += launch
        clock += launch
        timeline.n_attempts += width

        for rt in wave:
            rt.record.attempts += 1
            if math.isnan(rt.record.submit_time_s):
                rt.record.submit_time_s = clock
            events.append(
                TimelineEvent(clock, "task_submit", rt.task.id, rt.task.protocol_id,
                              rt.task.stage_label, generation)
            )

        # Launch failures: only generations wider than the launcher cap are
        # at risk, and then every task in the generation rolls the dice.
        if width > pilot.concurrency_cap and pilot.failure_probability_over_cap > 0.0:
            failed_mask = rng.random(width) < pilot.failure_probability_over_cap
        else:
            failed_mask = np.zeros(width, dtype=bool)

        running: list[_RunTask] = []
        for rt, failed in zip(wave, failed_mask):
            if failed:
                if rt.is_retry:
                    raise fail(f"task {rt.task.id} failed twice; campaign aborted")
                events.append(
                    TimelineEvent(clock, "task_fail", rt.task.id, rt.task.protocol_id,
                                  rt.task.stage_label, generation)
                )
                rt.record.outcome = TaskOutcome.FAILED_THEN_RETRIED
                timeline.n_retries += 1
                retry_queue.append(_RunTask(task=rt.task, record=rt.record, is_retry=True))
            else:
                running.append(rt)

        window = max((durations(rt.task) for rt in running), default=0.0)
        if window < 0.0 or not math.isfinite(window):
            raise fail("duration model returned a negative or non-finite duration")
        for rt in running:
            d = durations(rt.task)
            rt.record.start_time_s = clock
            rt.record.end_time_s = clock + d
            rt.record.duration_s = d
            timeline.sum_task_seconds += d
            events.append(
                TimelineEvent(clock, "task_start", rt.task.id, rt.task.protocol_id,
                              rt.task.stage_label, generation)
            )
        for rt in running:
            events.append(
                TimelineEvent(rt.record.end_time_s, "task_end", rt.task.id, rt.task.protocol_id,
                              rt.task.stage_label, generation)
            )
        # The execution window of a retry generation is relaunch cost, not
        # task-execution time.
        if is_retry_wave:
            timeline.launch_s += window
        else:
            timeline.primary_exec_s += window
        clock += window
        timeline.generations.append(
            GenerationSummary(
                index=generation, width=width, n_failed=int(failed_mask.sum()),
                is_retry=is_retry_wave, exec_window_s=window,
            )
        )
        generation += 1

        if clock > pilot.walltime_s:
            raise fail(
                f"walltime exceeded: virtual clock {clock:.1f}s > {pilot.walltime_s:.1f}s"
            )

        # Stage barriers: advance pipelines whose current stage fully finished.
        completed = [rt for rt in running]
        for rt in completed:
            remaining[rt.task.protocol_id] -= 1
        for pl in pipelines:
            if pl.done or remaining.get(pl.id, 0) != 0 or pending.get(pl.id):
                continue
            if retry_queue and any(rt.task.protocol_id == pl.id for rt in retry_queue):
                continue
            stage = pl.stages[pl.cursor]
            events.append(TimelineEvent(clock, "stage_complete", "", pl.id, stage.label, generation - 1))
            plan = StagePlan.proceed()
            if evaluator is not None:
                plan = evaluator.on_stage_complete(pl, stage)
            if plan.kind is PlanKind.APPEND:
                _validate_plan(plan, pl)
                for offset, new_stage in enumerate(plan.stages):
                    pl.stages.insert(pl.cursor + 1 + offset, new_stage)
                    for t in new_stage.tasks:
                        if t.id in timeline.task_records:
                            raise PlanRejectedError(
                                f"plan for pipeline {pl.id} reuses task id {t.id}"
                            )
            elif plan.kind is PlanKind.TERMINATE:
                pl.terminated_reason = plan.reason or "terminated by evaluator"
                events.append(TimelineEvent(clock, "pipeline_terminated", "", pl.id, stage.label, generation - 1))
            pl.cursor += 1
            if not pl.done:
                enter_stage(pl)

    timeline.end_time_s = clock
    timeline.complete = True
    events.append(TimelineEvent(clock, "campaign_end", "", "", "", -1))
    events.sort(key=lambda e: e.time_s)  # stable: ties keep insertion order

    results = {
        pl.id: PipelineSummary(
            pipeline_id=pl.id,
            completed_stages=tuple(pl.completed_stage_labels()),
            cancelled_stages=tuple(pl.cancelled_stage_labels()),
            windows=pl.windows,
            terminated_reason=pl.terminated_reason,
        )
        for pl in pipelines
    }
    return CampaignOutcome(timeline=timeline, overheads=measure_overheads(timeline), results=results)


def write_timeline_csv(timeline: CampaignTimeline, path) -> None:
    """Write the event log with the stable column set."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMELINE_COLUMNS)
        for ev in timeline.events:
            writer.writerow(
                [f"{ev.time_s:.6f}", ev.event, ev.task_id, ev.pipeline_id,
                 ev.stage_label, ev.generation]
            )


def overhead_row(
    run_id: str, n_protocols: int, total_cores: int, breakdown: OverheadBreakdown
) -> dict[str, str]:
    return {
        "run_id": run_id,
        "n_protocols": str(n_protocols),
        "total_cores": str(total_cores),
        "ttx_s": f"{breakdown.task_execution_time_s:.6f}",
        "framework_s": f"{breakdown.framework_overhead_s:.6f}",
        "runtime_s": f"{breakdown.runtime_overhead_s:.6f}",
        "launch_s": f"{breakdown.launch_overhead_s:.6f}",
        "ttc_s": f"{breakdown.total_time_to_completion_s:.6f}",
    }


def write_overhead_csv(rows: Iterable[Mapping[str, str]], path, extra_columns: Sequence[str] = ()) -> None:
    """Write overhead rows; ``extra_columns`` are inserted after run_id."""
    columns = list(OVERHEAD_COLUMNS)
    for i, col in enumerate(extra_columns):
        columns.insert(1 + i, col)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


@dataclass
class LocalTaskResult:
    task_id: str
    returncode: int
    attempts: int
    start_time_s: float
    end_time_s: float


def run_local(
    workflows: WorkflowGraph,
    pilot: PilotConfig,
    command_for: Callable[[Task], Sequence[str]],
) -> dict[str, LocalTaskResult]:
    """Run real task commands behind the same generation scheduling.

    Tasks of each wave run concurrently (up to the slot bound) as
    subprocesses; a non-zero exit is retried exactly once.  Timestamps are
    wall clock, relative to the call.  Intended for small genuine
    workloads, not for the simulated experiments.
    """
    capacity = slots(pilot)
    t0 = time.monotonic()
    results: dict[str, LocalTaskResult] = {}

    def execute(task: Task) -> LocalTaskResult:
        attempts = 0
        start = time.monotonic() - t0
        while True:
            attempts += 1
            proc = subprocess.run(command_for(task), capture_output=True)
            if proc.returncode == 0 or attempts >= 2:
                break
        end = time.monotonic() - t0
        if proc.returncode != 0:
            raise CampaignError(f"task {task.id} failed twice (exit {proc.returncode})")
        return LocalTaskResult(task.id, proc.returncode, attempts, start, end)

    cursors = {p.id: 0 for p in workflows.pipelines}
    with ThreadPoolExecutor(max_workers=max(capacity, 1)) as pool:
        while True:
            ready: list[Task] = []
            for p in workflows.pipelines:
                if cursors[p.id] < len(p.stages):
                    ready.extend(p.stages[cursors[p.id]].tasks)
            if not ready:
                break
            for i in range(0, len(ready), capacity):
                wave = ready[i : i + capacity]
                for task, res in zip(wave, pool.map(execute, wave)):
                    results[task.id] = res
            for p in workflows.pipelines:
                if cursors[p.id] < len(p.stages):
                    cursors[p.id] += 1
    return results
