"""Evaluator hooks implementing the two adaptive execution modes.

Both evaluators consume synthetic dU/dlambda data: in simulated mode the
engine only schedules tasks, so the data a production stage "produced" is
generated here, deterministically from (campaign seed, window, replica).

* :class:`AdaptiveQuadratureEvaluator` splits production into sub-stages;
  after each one it re-estimates every window, scores the per-interval
  integration error against the budget ``epsilon / N`` and appends
  equilibration + production stages for the proposed midpoint windows.
* :class:`AdaptiveTerminationEvaluator` slices production into
  ``tau``-long sub-stages, re-integrates at every checkpoint and
  terminates the pipeline once consecutive estimates agree within the
  termination threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .engine import PipelineRun, StagePlan
from .errors import ContractError
from .protocols import (
    MD_TIMESTEP_PS,
    AdaptiveConfig,
    ProtocolSpec,
    Stage,
    StageKind,
    simulation_stage,
)
from .quadrature import (
    FreeEnergyEstimate,
    canonical_lambda,
    integrate_with_error,
    propose_refinements,
)
from .stats import (
    DEFAULT_DISCARD_FRACTION,
    CheckpointHistory,
    DuDlSeries,
    bootstrap_delta_g_stderr,
    checkpoint_estimate,
    convergence_check,
    replica_means,
    window_estimate,
)
from .synth import SyntheticSystem, du_dl_series


def samples_per_substage(substage_timesteps: int, dt_ps: float) -> int:
    """Number of dU/dlambda samples one production sub-stage contributes."""
    n = int(round(substage_timesteps * MD_TIMESTEP_PS / dt_ps))
    if n < 1:
        raise ContractError("sub-stage too short to produce a single sample")
    return n


class SyntheticSampler:
    """Deterministic per-(window, replica) series, cached at full horizon.

    Generating the full horizon once and slicing prefixes guarantees a
    window's early samples never change as its series grows across
    sub-stages, regardless of when the window was created.
    """

    def __init__(self, system: SyntheticSystem, seed: int, dt_ps: float, horizon_samples: int):
        self.system = system
        self.seed = int(seed)
        self.dt_ps = dt_ps
        self.horizon_samples = horizon_samples
        self._cache: dict[tuple[float, int], DuDlSeries] = {}

    def series(self, lam: float, replica: int, n_samples: int) -> DuDlSeries:
        if n_samples > self.horizon_samples:
            raise ContractError(
                f"requested {n_samples} samples beyond the {self.horizon_samples}-sample horizon"
            )
        key = (canonical_lambda(lam), replica)
        full = self._cache.get(key)
        if full is None:
            full = du_dl_series(
                self.system.curve, self.system.noise, key[0],
                n_samples=self.horizon_samples, dt_ps=self.dt_ps,
                seed=self.seed, replica_index=replica,
            )
            self._cache[key] = full
        if n_samples == self.horizon_samples:
            return full
        return DuDlSeries(
            lam=full.lam, replica_index=replica, dt_ps=self.dt_ps,
            values=full.values[:n_samples].copy(),
        )


@dataclass
class AdaptiveRunResult:
    """What an adaptive pipeline produced."""

    estimate: FreeEnergyEstimate
    windows: tuple[float, ...]
    substages_by_window: dict[float, int]
    simulated_ns: float
    terminated_ns: float | None = None
    history: CheckpointHistory | None = None


def _production_spec(spec: ProtocolSpec):
    prods = [s for s in spec.sim_stages if s.kind is StageKind.PRODUCTION]
    if len(prods) != 1:
        raise ContractError("adaptive execution expects exactly one production stage")
    return prods[0]


def _equilibration_chain(spec: ProtocolSpec, pipeline_id: str, cycle: int, lams, replicas, cores):
    stages = []
    for st in spec.sim_stages:
        if st.kind is StageKind.PRODUCTION:
            continue
        stages.append(
            simulation_stage(
                pipeline_id, f"{st.label}.{cycle}", st.kind, st.timesteps,
                replicas, lams, cores,
            )
        )
    return stages


class AdaptiveQuadratureEvaluator:
    """Grows the lambda-window set where the integration error concentrates."""

    def __init__(
        self,
        system: SyntheticSystem,
        adaptive: AdaptiveConfig,
        seed: int,
        replicas: int = 5,
        dt_ps: float = 1.0,
        cores_per_task: int = 32,
        discard_fraction: float = DEFAULT_DISCARD_FRACTION,
        bootstrap_resamples: int = 1000,
    ):
        self.system = system
        self.adaptive = adaptive
        self.seed = int(seed)
        self.replicas = replicas
        self.dt_ps = dt_ps
        self.cores_per_task = cores_per_task
        self.discard_fraction = discard_fraction
        self.bootstrap_resamples = bootstrap_resamples
        self._spc = samples_per_substage(adaptive.substage_timesteps, dt_ps)
        horizon = adaptive.production_substages * self._spc
        self.sampler = SyntheticSampler(system, seed, dt_ps, horizon)
        self._substages_done: dict[str, dict[float, int]] = {}
        self._cycles_done: dict[str, int] = {}
        self.results: dict[str, AdaptiveRunResult] = {}

    def _window_series(self, lam: float, n_substages: int) -> list[DuDlSeries]:
        n = n_substages * self._spc
        return [self.sampler.series(lam, r, n) for r in range(self.replicas)]

    def _points(self, counts: dict[float, int]):
        return [
            window_estimate(self._window_series(lam, counts[lam]), self.discard_fraction)
            for lam in sorted(counts)
        ]

    def on_stage_complete(self, pipeline: PipelineRun, stage: Stage) -> StagePlan:
        if stage.kind is not StageKind.PRODUCTION:
            return StagePlan.proceed()
        counts = self._substages_done.setdefault(pipeline.id, {})
        for lam in sorted({canonical_lambda(t.lam) for t in stage.tasks if t.lam is not None}):
            counts[lam] = counts.get(lam, 0) + 1
        cycle = self._cycles_done.get(pipeline.id, 0) + 1
        self._cycles_done[pipeline.id] = cycle

        points = self._points(counts)
        spec: ProtocolSpec = pipeline.spec  # type: ignore[assignment]
        prod = _production_spec(spec)

        if cycle < self.adaptive.production_substages:
            new_lams = propose_refinements(
                points,
                self.adaptive.error_threshold_epsilon,
                max_total_windows=self.adaptive.max_total_windows,
            )
            all_lams = sorted(set(counts) | set(new_lams))
            stages = []
            if new_lams:
                stages.extend(
                    _equilibration_chain(
                        spec, pipeline.id, cycle + 1, new_lams, self.replicas, self.cores_per_task
                    )
                )
            stages.append(
                simulation_stage(
                    pipeline.id, f"{prod.label}.{cycle + 1}", StageKind.PRODUCTION,
                    self.adaptive.substage_timesteps, self.replicas, all_lams,
                    self.cores_per_task,
                )
            )
            return StagePlan.append(stages)

        # Final sub-stage: integrate and record the run's estimate.
        means = {
            lam: replica_means(self._window_series(lam, counts[lam]), self.discard_fraction)
            for lam in sorted(counts)
        }
        boot = bootstrap_delta_g_stderr(means, self.bootstrap_resamples, seed=self.seed)
        estimate = integrate_with_error(points, bootstrap_stderr=boot)
        simulated_ns = self.adaptive.production_substages * self._spc * self.dt_ps / 1000.0
        self.results[pipeline.id] = AdaptiveRunResult(
            estimate=estimate,
            windows=tuple(sorted(counts)),
            substages_by_window=dict(sorted(counts.items())),
            simulated_ns=simulated_ns,
        )
        return StagePlan.proceed()


class AdaptiveTerminationEvaluator:
    """Stops production once consecutive checkpoint estimates agree.

    A non-positive termination threshold disables early termination (the
    convergence test is never consulted), so the run always covers the
    full horizon.
    """

    def __init__(
        self,
        system: SyntheticSystem,
        adaptive: AdaptiveConfig,
        seed: int,
        replicas: int = 5,
        dt_ps: float = 1.0,
        cores_per_task: int = 32,
        discard_fraction: float = DEFAULT_DISCARD_FRACTION,
        bootstrap_resamples: int = 1000,
    ):
        self.system = system
        self.adaptive = adaptive
        self.seed = int(seed)
        self.replicas = replicas
        self.dt_ps = dt_ps
        self.cores_per_task = cores_per_task
        self.discard_fraction = discard_fraction
        self.bootstrap_resamples = bootstrap_resamples
        self._spc = samples_per_substage(adaptive.substage_timesteps, dt_ps)
        substage_ns = self._spc * dt_ps / 1000.0
        if abs(substage_ns - adaptive.termination_tau_ns) > 1e-9:
            raise ContractError(
                f"sub-stage spans {substage_ns} ns but termination_tau_ns is "
                f"{adaptive.termination_tau_ns}; checkpoints must fall on sub-stage boundaries"
            )
        self.horizon_samples = adaptive.production_substages * self._spc
        self.sampler = SyntheticSampler(system, seed, dt_ps, self.horizon_samples)
        self._substages: dict[str, int] = {}
        self.histories: dict[str, CheckpointHistory] = {}
        self.results: dict[str, AdaptiveRunResult] = {}

    def _all_series(self, lams) -> list[DuDlSeries]:
        return [
            self.sampler.series(lam, r, self.horizon_samples)
            for lam in lams
            for r in range(self.replicas)
        ]

    def _final_result(self, pipeline: PipelineRun, lams, k: int, terminated: bool) -> None:
        time_ns = k * self.adaptive.termination_tau_ns
        n = k * self._spc
        points = []
        means = {}
        for lam in lams:
            series = [self.sampler.series(lam, r, n) for r in range(self.replicas)]
            points.append(window_estimate(series, self.discard_fraction))
            means[lam] = replica_means(series, self.discard_fraction)
        boot = bootstrap_delta_g_stderr(means, self.bootstrap_resamples, seed=self.seed)
        estimate = integrate_with_error(points, bootstrap_stderr=boot)
        self.results[pipeline.id] = AdaptiveRunResult(
            estimate=estimate,
            windows=tuple(lams),
            substages_by_window={lam: k for lam in lams},
            simulated_ns=time_ns,
            terminated_ns=time_ns if terminated else None,
            history=self.histories[pipeline.id],
        )

    def on_stage_complete(self, pipeline: PipelineRun, stage: Stage) -> StagePlan:
        if stage.kind is not StageKind.PRODUCTION:
            return StagePlan.proceed()
        k = self._substages.get(pipeline.id, 0) + 1
        self._substages[pipeline.id] = k
        lams = sorted({canonical_lambda(t.lam) for t in stage.tasks if t.lam is not None})
        time_ns = k * self.adaptive.termination_tau_ns
        estimate = checkpoint_estimate(self._all_series(lams), time_ns, self.discard_fraction)
        history = self.histories.setdefault(
            pipeline.id, CheckpointHistory(self.adaptive.termination_tau_ns, [])
        )
        history.append(time_ns, estimate)

        threshold = self.adaptive.termination_threshold
        if threshold > 0.0 and convergence_check(
            history, threshold, self.adaptive.min_checkpoints_before_termination
        ):
            self._final_result(pipeline, lams, k, terminated=True)
            return StagePlan.terminate(
                f"converged at {time_ns:.1f} ns: last two estimates within {threshold}"
            )
        if k < self.adaptive.production_substages:
            spec: ProtocolSpec = pipeline.spec  # type: ignore[assignment]
            prod = _production_spec(spec)
            return StagePlan.append(
                [
                    simulation_stage(
                        pipeline.id, f"{prod.label}.{k + 1}", StageKind.PRODUCTION,
                        self.adaptive.substage_timesteps, self.replicas, lams,
                        self.cores_per_task,
                    )
                ]
            )
        self._final_result(pipeline, lams, k, terminated=False)
        return StagePlan.proceed()
