"""Synthetic dU/dlambda data with known ground truth.

Each generated series is the sum of a ground-truth curve evaluated at the
window's lambda, an exponentially decaying equilibration drift, and
stationary AR(1) noise:

    values[t] = f(lambda) + drift_amplitude * exp(-t * dt / drift_timescale)
                + eps[t],        eps[t] = phi * eps[t-1] + eta[t]

with ``eta`` i.i.d. normal with standard deviation ``sigma * sqrt(1 - phi^2)``
so that ``sigma`` is the stationary standard deviation of the noise.
Streams are seeded per (campaign seed, rounded lambda, replica index), so a
window added mid-campaign reproduces the same data no matter when it was
created.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.signal import lfilter

from .errors import ContractError, ValidationError
from .quadrature import canonical_lambda
from .stats import DuDlSeries

#: Node count of the dense-trapezoid oracle used when no closed form exists.
ORACLE_NODES = 100_000


class CurvePreset(str, Enum):
    CONSTANT = "CONSTANT"
    LINEAR = "LINEAR"
    QUADRATIC = "QUADRATIC"
    GAUSS_BUMP = "GAUSS_BUMP"
    RATIONAL = "RATIONAL"


@dataclass(frozen=True)
class GroundTruthCurve:
    """A known integrand f(lambda), finite and continuous on [0, 1].

    Presets:

    * ``CONSTANT``: f = value
    * ``LINEAR``: f = intercept + slope * lambda
    * ``QUADRATIC``: f = lambda^2
    * ``GAUSS_BUMP``: amplitude * exp(-(lambda - center)^2 / (2 width^2))
      + baseline_slope * lambda
    * ``RATIONAL``: amplitude / (1 + ((lambda - center) / width)^2)
      + baseline_slope * lambda
    """

    preset: CurvePreset
    value: float = 0.0
    intercept: float = 0.0
    slope: float = 0.0
    center: float = 0.5
    width: float = 0.1
    amplitude: float = 1.0
    baseline_slope: float = 0.0

    def __post_init__(self):
        if self.preset in (CurvePreset.GAUSS_BUMP, CurvePreset.RATIONAL):
            if not 0.0 <= self.center <= 1.0:
                raise ValidationError(f"curve.center {self.center} outside [0, 1]")
            if not self.width > 0.0:
                raise ValidationError("curve.width must be > 0")

    @classmethod
    def constant(cls, value: float) -> "GroundTruthCurve":
        return cls(CurvePreset.CONSTANT, value=value)

    @classmethod
    def linear(cls, intercept: float, slope: float) -> "GroundTruthCurve":
        return cls(CurvePreset.LINEAR, intercept=intercept, slope=slope)

    @classmethod
    def quadratic(cls) -> "GroundTruthCurve":
        return cls(CurvePreset.QUADRATIC)

    @classmethod
    def gauss_bump(
        cls, center: float = 0.5, width: float = 0.1, amplitude: float = 1.0,
        baseline_slope: float = 0.0,
    ) -> "GroundTruthCurve":
        return cls(
            CurvePreset.GAUSS_BUMP, center=center, width=width,
            amplitude=amplitude, baseline_slope=baseline_slope,
        )

    @classmethod
    def rational(
        cls, center: float = 0.5, width: float = 0.1, amplitude: float = 1.0,
        baseline_slope: float = 0.0,
    ) -> "GroundTruthCurve":
        return cls(
            CurvePreset.RATIONAL, center=center, width=width,
            amplitude=amplitude, baseline_slope=baseline_slope,
        )

    def evaluate(self, lam):
        """Evaluate f at a scalar or array of lambda values."""
        lam = np.asarray(lam, dtype=float)
        if self.preset is CurvePreset.CONSTANT:
            out = np.full_like(lam, self.value)
        elif self.preset is CurvePreset.LINEAR:
            out = self.intercept + self.slope * lam
        elif self.preset is CurvePreset.QUADRATIC:
            out = lam ** 2
        elif self.preset is CurvePreset.GAUSS_BUMP:
            out = (
                self.amplitude * np.exp(-((lam - self.center) ** 2) / (2.0 * self.width ** 2))
                + self.baseline_slope * lam
            )
        elif self.preset is CurvePreset.RATIONAL:
            out = (
                self.amplitude / (1.0 + ((lam - self.center) / self.width) ** 2)
                + self.baseline_slope * lam
            )
        else:  # pragma: no cover - enum is closed
            raise ContractError(f"unknown preset {self.preset}")
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NoiseModel:
    """AR(1) noise plus equilibration drift applied to every sample."""

    sigma: float = 0.0
    ar1_phi: float = 0.0
    drift_amplitude: float = 0.0
    drift_timescale_ps: float = 100.0

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValidationError("noise.sigma must be >= 0")
        if not 0.0 <= self.ar1_phi < 1.0:
            raise ValidationError("noise.ar1_phi must lie in [0, 1)")
        if not self.drift_timescale_ps > 0.0:
            raise ValidationError("noise.drift_timescale_ps must be > 0")

    def effective_sample_count(self, n: int) -> float:
        """AR(1)-corrected effective number of independent samples."""
        return n * (1.0 - self.ar1_phi) / (1.0 + self.ar1_phi)


ZERO_NOISE = NoiseModel()


def _stream_seed(seed: int, lam: float, replica_index: int) -> np.random.SeedSequence:
    # Stable across runs and processes: entropy is the integer triple
    # (campaign seed, lambda in milli-units, replica index).
    lam_milli = int(round(canonical_lambda(lam) * 1000))
    return np.random.SeedSequence([int(seed), lam_milli, int(replica_index)])


def du_dl_series(
    curve: GroundTruthCurve,
    noise: NoiseModel,
    lam: float,
    n_samples: int,
    dt_ps: float = 1.0,
    seed: int = 0,
    replica_index: int = 0,
) -> DuDlSeries:
    """Generate one replica's synthetic dU/dlambda series at a window.

    Parameters
    ----------
    curve, noise
        Ground truth and noise parameters.
    lam
        Window position in [0, 1].
    n_samples
        Number of samples, >= 1.
    dt_ps
        Simulated time per sample in picoseconds.
    seed, replica_index
        Together with ``lam`` these select the deterministic noise stream.
    """
    if n_samples < 1:
        raise ContractError("n_samples must be >= 1")
    if not dt_ps > 0.0:
        raise ContractError("dt_ps must be > 0")
    if not 0.0 <= lam <= 1.0:
        raise ContractError(f"lambda {lam} outside [0, 1]")
    if seed < 0 or replica_index < 0:
        raise ContractError("seed and replica_index must be >= 0")
    rng = np.random.default_rng(_stream_seed(seed, lam, replica_index))
    eta_sd = noise.sigma * math.sqrt(1.0 - noise.ar1_phi ** 2)
    eta = rng.normal(0.0, eta_sd, size=n_samples) if eta_sd > 0.0 else np.zeros(n_samples)
    if noise.ar1_phi > 0.0:
        eps = lfilter([1.0], [1.0, -noise.ar1_phi], eta)
    else:
        eps = eta
    t = np.arange(n_samples)
    drift = noise.drift_amplitude * np.exp(-t * dt_ps / noise.drift_timescale_ps)
    values = curve.evaluate(lam) + drift + eps
    return DuDlSeries(lam=canonical_lambda(lam), replica_index=replica_index, dt_ps=dt_ps, values=values)


def analytic_integral(curve: GroundTruthCurve) -> float:
    """Integral of the ground-truth curve over [0, 1].

    Closed forms for CONSTANT, LINEAR and QUADRATIC; the bump presets use
    a dense composite-trapezoid evaluation on ``ORACLE_NODES`` nodes,
    which for these smooth curves is accurate far beyond the tolerances
    used anywhere in this package.
    """
    if curve.preset is CurvePreset.CONSTANT:
        return curve.value
    if curve.preset is CurvePreset.LINEAR:
        return curve.intercept + curve.slope / 2.0
    if curve.preset is CurvePreset.QUADRATIC:
        return 1.0 / 3.0
    grid = np.linspace(0.0, 1.0, ORACLE_NODES)
    return float(np.trapezoid(curve.evaluate(grid), grid))


@dataclass(frozen=True)
class SyntheticSystem:
    """A named (curve, noise) pair standing in for a physical ligand pair."""

    label: str
    curve: GroundTruthCurve
    noise: NoiseModel


def _named_system_list() -> list[SyntheticSystem]:
    # Labels follow the usual protein/ligand-pair naming so reports read
    # like production output; the parameters are synthetic.  Bump placement
    # covers the cases the refinement loop has to handle: steep features at
    # either endpoint of the coupling path, narrow off-grid features near
    # mid-lambda, and one broad mid-path feature.  Amplitudes are scaled so
    # a uniform 13-window trapezoid misses the true integral by about
    # 0.4 kcal/mol while a 65-window one resolves it, and baseline slopes
    # keep the integrals in a familiar range.  Three systems carry a slow
    # equilibration drift sized so convergence-based early stopping fires
    # at 4.5, 5.0 and 5.5 ns respectively under the default thresholds.
    return [
        SyntheticSystem(
            label="PTP1B L1-L2",
            curve=GroundTruthCurve.gauss_bump(
                center=0.0, width=0.035, amplitude=148.29, baseline_slope=-15.0
            ),
            noise=NoiseModel(sigma=0.3, ar1_phi=0.85, drift_amplitude=1.56, drift_timescale_ps=300.0),
        ),
        SyntheticSystem(
            label="PTP1B L10-L12",
            curve=GroundTruthCurve.gauss_bump(
                center=0.0, width=0.028, amplitude=52.85, baseline_slope=6.0
            ),
            noise=NoiseModel(sigma=2.0, ar1_phi=0.8, drift_amplitude=0.0, drift_timescale_ps=200.0),
        ),
        SyntheticSystem(
            label="MCL1 L32-L38",
            curve=GroundTruthCurve.rational(
                center=0.54, width=0.035, amplitude=27.41, baseline_slope=-12.0
            ),
            noise=NoiseModel(sigma=0.3, ar1_phi=0.85, drift_amplitude=2.156, drift_timescale_ps=300.0),
        ),
        SyntheticSystem(
            label="TYK2 L4-L9",
            curve=GroundTruthCurve.gauss_bump(
                center=1.0, width=0.035, amplitude=-148.29, baseline_slope=25.0
            ),
            noise=NoiseModel(sigma=0.3, ar1_phi=0.85, drift_amplitude=2.924, drift_timescale_ps=300.0),
        ),
        SyntheticSystem(
            label="TYK2 L7-L8",
            curve=GroundTruthCurve.rational(
                center=0.5, width=0.06, amplitude=98.29, baseline_slope=-28.0
            ),
            noise=NoiseModel(sigma=2.0, ar1_phi=0.8, drift_amplitude=0.0, drift_timescale_ps=150.0),
        ),
    ]


def named_systems() -> dict[str, SyntheticSystem]:
    """The five bundled benchmark systems, keyed by label."""
    return {s.label: s for s in _named_system_list()}


def named_system(label: str) -> SyntheticSystem:
    systems = named_systems()
    try:
        return systems[label]
    except KeyError:
        raise ValidationError(
            f"unknown system label {label!r}; bundled systems: {sorted(systems)}"
        ) from None
