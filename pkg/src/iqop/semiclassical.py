"""Two-beam projection test of a single coupler.

Two equal coherent beams with relative phase ``epsilon`` enter the coupler
through its two input guides. Conditioned on a detection, the photon state
is ``(1, exp(i epsilon)) / sqrt(2)`` and the output probabilities are

    P1 = (1 + sin(2 theta) sin(epsilon)) / 2
    P2 = (1 - sin(2 theta) sin(epsilon)) / 2

Output 1 is the bar port of the input carrying the ``exp(i epsilon)`` beam
(so ``epsilon = pi/2`` on a 3 dB coupler exits entirely through output 1).
``swap_outputs=True`` exchanges the labels.

The relative phase is set by sliding a diffraction grating: orders +1 and
-1 pick up opposite phases, so a displacement ``dx`` gives
``epsilon = 4 pi dx / period``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientData, InvalidArgument
from .states import ClickCounts, WeakCoherentState, make_rng, sample_clicks, single_photon_approx
from .unitary import coupler

PATH_AGREEMENT_TOL = 1e-12
# theta = asin(V)/2 has infinite slope at V = 1; visibilities this close to 1
# are below least-squares precision and are reported as exactly 1
FULL_VISIBILITY_TOL = 1e-12


@dataclass(frozen=True)
class GratingConfig:
    period: float = 60.0  # um

    def __post_init__(self):
        p = float(self.period)
        if not (math.isfinite(p) and p > 0):
            raise InvalidArgument(f"grating period must be positive, got {self.period}")
        object.__setattr__(self, "period", p)


@dataclass(frozen=True)
class SweepRecord:
    displacement: float  # um
    epsilon: float  # rad
    P1: float
    P2: float


@dataclass(frozen=True)
class SweepFit:
    theta_est: float
    visibility: float
    epsilon_offset: float
    background: float
    residual: float

    @property
    def theta_alternative(self) -> float:
        """The complementary coupler phase giving the same visibility."""
        return math.pi / 2 - self.theta_est

    def p1(self, epsilon):
        eps = np.asarray(epsilon, dtype=float)
        return self.background + 0.5 * self.visibility * (1 + np.sin(eps + self.epsilon_offset))

    def to_dict(self) -> dict:
        return {
            "theta_est": self.theta_est,
            "theta_alternative": self.theta_alternative,
            "visibility": self.visibility,
            "epsilon_offset": self.epsilon_offset,
            "background": self.background,
            "residual": self.residual,
        }


def grating_phase(dx, g: GratingConfig = GratingConfig()):
    """Relative phase between the +1 and -1 orders after shifting the grating by ``dx``."""
    dx = np.asarray(dx, dtype=float)
    if not np.all(np.isfinite(dx)):
        raise InvalidArgument("displacement must be finite")
    eps = 4 * math.pi * (dx / g.period)
    return float(eps) if eps.ndim == 0 else eps


def sweep_probabilities(theta: float, epsilons, *, swap_outputs: bool = False) -> np.ndarray:
    """``(n, 2)`` array of (P1, P2) for each relative phase."""
    eps = np.atleast_1d(np.asarray(epsilons, dtype=float))
    if not (math.isfinite(theta) and np.all(np.isfinite(eps))):
        raise InvalidArgument("theta and epsilons must be finite")
    half = 0.5 * math.sin(2 * theta) * np.sin(eps)
    # 1 - hi is exact for hi >= 0.5, so each pair sums to exactly 1.0
    hi = 0.5 + np.abs(half)
    lo = 1.0 - hi
    up = half >= 0
    p = np.column_stack([np.where(up, hi, lo), np.where(up, lo, hi)])
    return p[:, ::-1] if swap_outputs else p


def propagated_probabilities(theta: float, epsilon: float, *, swap_outputs: bool = False) -> np.ndarray:
    """(P1, P2) from the conditional photon state pushed through the coupler."""
    state = single_photon_approx(WeakCoherentState([1.0, np.exp(1j * epsilon)]))
    out = np.abs(coupler(theta) @ state.amplitudes) ** 2
    # row 2 of the coupler is the bar port of the second input
    p = np.array([out[1], out[0]])
    return p[::-1] if swap_outputs else p


def correct_losses(p1_meas, p2_meas, p1_max, p2_max):
    """Undo the extra loss on output 1 and renormalize the pair.

    Output 1 is scaled by ``p2_max / p1_max``, the ratio of the peak powers
    seen on each output when all light exits there.
    """
    if not (p1_max > 0 and p2_max > 0):
        raise InvalidArgument("maximum powers must be positive")
    if p1_meas < 0 or p2_meas < 0:
        raise InvalidArgument("measured powers must be non-negative")
    p1 = p1_meas * p2_max / p1_max
    total = p1 + p2_meas
    if total == 0:
        raise InvalidArgument("both outputs are dark; nothing to normalize")
    return p1 / total, p2_meas / total


def correct_sweep(records: Sequence[SweepRecord]) -> list[SweepRecord]:
    """Loss-correct a raw sweep using its own peak powers."""
    p1_max = max(r.P1 for r in records)
    p2_max = max(r.P2 for r in records)
    out = []
    for r in records:
        p1, p2 = correct_losses(r.P1, r.P2, p1_max, p2_max)
        out.append(SweepRecord(r.displacement, r.epsilon, p1, p2))
    return out


def fit_sweep(records: Sequence[SweepRecord]) -> SweepFit:
    """Fit ``P1 = background + visibility * (1 + sin(eps + offset)) / 2``.

    The model is linear in ``(c, A cos offset, A sin offset)`` with
    ``c = background + visibility/2`` and ``A = visibility/2``, so ordinary
    least squares gives the exact optimum. theta is folded into (0, pi/4].
    """
    eps = np.array([r.epsilon for r in records], dtype=float)
    y = np.array([r.P1 for r in records], dtype=float)
    if len(records) < 4:
        raise InsufficientData(f"need at least 4 sweep points, got {len(records)}")
    if np.ptp(eps) < math.pi or len(np.unique(np.round(np.mod(eps, 2 * math.pi), 12))) < 3:
        raise InsufficientData("sweep must span at least half a period of epsilon")
    A = np.column_stack([np.ones_like(eps), np.sin(eps), np.cos(eps)])
    (c, s, k), *_ = np.linalg.lstsq(A, y, rcond=None)
    amp = math.hypot(s, k)
    offset = math.atan2(k, s)
    visibility = 2 * amp
    if visibility > 1.0 - FULL_VISIBILITY_TOL:
        visibility = 1.0
    background = c - amp
    residual = float(np.sqrt(np.mean((A @ [c, s, k] - y) ** 2)))
    theta = 0.5 * math.asin(visibility)
    return SweepFit(theta, visibility, offset, background, residual)


@dataclass(frozen=True)
class ProjectionShot:
    displacement: float
    epsilon: float
    probabilities: tuple[float, float]
    clicks: ClickCounts


def simulate_projection_test(
    theta: float,
    displacements: Iterable[float],
    g: GratingConfig = GratingConfig(),
    trials: int = 10_000,
    seed: int = 0,
    *,
    swap_outputs: bool = False,
) -> list[ProjectionShot]:
    """Detector clicks at each grating position.

    Displacement ``k`` draws from an independent stream derived from
    ``(seed, k)``, so positions can be simulated in any order.
    """
    shots = []
    for k, dx in enumerate(displacements):
        eps = grating_phase(dx, g)
        closed = sweep_probabilities(theta, [eps], swap_outputs=swap_outputs)[0]
        state_path = propagated_probabilities(theta, eps, swap_outputs=swap_outputs)
        gap = float(np.max(np.abs(closed - state_path)))
        if gap > PATH_AGREEMENT_TOL:
            raise RuntimeError(f"closed form and propagated state disagree by {gap:.3g} at dx={dx}")
        p = closed / closed.sum()
        clicks = sample_clicks(p, trials, seed, rng=make_rng(seed, k))
        shots.append(ProjectionShot(float(dx), eps, (float(p[0]), float(p[1])), clicks))
    return shots


def displacement_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive grid ``start, start+step, ..., stop``."""
    if not (math.isfinite(start) and math.isfinite(stop) and math.isfinite(step)):
        raise InvalidArgument("range bounds must be finite")
    if step <= 0 or stop < start:
        raise InvalidArgument(f"empty displacement range {start}..{stop} step {step}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def fitted_curve(fit: SweepFit, step_deg: float = 1.0) -> np.ndarray:
    """Columns (epsilon_deg, epsilon_rad, P1, P2) of the fitted curve over one period."""
    deg = np.arange(0.0, 360.0 + step_deg / 2, step_deg)
    rad = np.deg2rad(deg)
    p1 = fit.p1(rad)
    return np.column_stack([deg, rad, p1, 1 - p1])
