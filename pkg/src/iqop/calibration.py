"""Directional-coupler calibration from bar/cross power measurements.

Each characterization device reports the bar-port power ``P4 = cos^2(theta)``
for a coupler with waveguide separation ``d_m`` (um) and mask coupling length
``l_c`` (mm). Recovering theta from ``arccos(sqrt(P4))`` only gives the
first quadrant; the remaining fold is resolved per series of fixed ``d_m``
by demanding that theta grows linearly with ``l_c``::

    theta = a_l * l_c + b_l = kappa * (l_c + delta_l_c)

The fitted slopes ``kappa(d_m)`` then follow ``kappa0 * exp(-gamma * d_m)``,
which is inverted to design couplers for a target theta.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import curve_fit, least_squares

from .errors import FitFailure, InfeasibleDesign, InsufficientData, InvalidArgument

POWER_SUM_TOL = 0.02
CALIBRATED_DM = (3.0, 7.5)  # um
CALIBRATED_LC = (0.5, 2.0)  # mm
DEFAULT_MAX_FOLD = 4
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class CouplerMeasurement:
    d_m: float
    l_c: float
    P4: float
    P3: float

    def __post_init__(self):
        for name in ("d_m", "l_c", "P4", "P3"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidArgument(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.d_m <= 0 or self.l_c <= 0:
            raise InvalidArgument(f"d_m and l_c must be positive, got ({self.d_m}, {self.l_c})")
        if not (0 <= self.P4 <= 1 and 0 <= self.P3 <= 1):
            raise InvalidArgument(f"powers must be fractions in [0, 1], got ({self.P4}, {self.P3})")
        if abs(self.P4 + self.P3 - 1) > POWER_SUM_TOL:
            raise InvalidArgument(f"P4 + P3 = {self.P4 + self.P3:.4f} is not 1 within {POWER_SUM_TOL}")

    @classmethod
    def normalized(cls, d_m, l_c, p4, p3) -> "CouplerMeasurement":
        """Build from raw powers (fractions or percent), rescaled so P4 + P3 = 1."""
        total = float(p4) + float(p3)
        if total <= 0:
            raise InvalidArgument("P4 + P3 must be positive")
        return cls(d_m, l_c, p4 / total, p3 / total)

    @property
    def key(self) -> tuple[float, float]:
        return (self.d_m, self.l_c)


@dataclass(frozen=True)
class MeasurementTable:
    records: tuple[CouplerMeasurement, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        records = tuple(self.records)
        seen = set()
        for r in records:
            if r.key in seen:
                raise InvalidArgument(f"duplicate record at (d_m, l_c) = {r.key}")
            seen.add(r.key)
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "metadata", {str(k): str(v) for k, v in self.metadata.items()})

    def __len__(self):
        return len(self.records)

    def series(self) -> dict[float, tuple[CouplerMeasurement, ...]]:
        """Records grouped by d_m (ascending), each sorted by l_c."""
        groups = defaultdict(list)
        for r in self.records:
            groups[r.d_m].append(r)
        return {d: tuple(sorted(groups[d], key=lambda r: r.l_c)) for d in sorted(groups)}


@dataclass(frozen=True)
class SeriesFit:
    d_m: float
    a_l: float
    b_l: float
    folds: tuple[int, ...]
    residual: float
    l_c: tuple[float, ...] = ()
    theta: tuple[float, ...] = ()
    delta_l_c: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "delta_l_c", self.b_l / self.a_l)

    def to_dict(self) -> dict:
        return {
            "d_m": self.d_m,
            "a_l": self.a_l,
            "b_l": self.b_l,
            "delta_l_c": self.delta_l_c,
            "folds": list(self.folds),
            "residual": self.residual,
            "l_c": list(self.l_c),
            "theta": list(self.theta),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeriesFit":
        return cls(
            float(d["d_m"]),
            float(d["a_l"]),
            float(d["b_l"]),
            tuple(int(f) for f in d.get("folds", ())),
            float(d.get("residual", 0.0)),
            tuple(float(x) for x in d.get("l_c", ())),
            tuple(float(x) for x in d.get("theta", ())),
        )


@dataclass(frozen=True)
class LengthFit:
    """theta(d_m) = a_e * exp(-b_e * d_m) at one mask length."""

    l_c: float
    a_e: float
    b_e: float

    def to_dict(self) -> dict:
        return {"l_c": self.l_c, "a_e": self.a_e, "b_e": self.b_e}


@dataclass(frozen=True)
class CalibrationModel:
    kappa0: float  # rad/mm
    gamma: float  # 1/um
    series: tuple[SeriesFit, ...] = ()
    fit_residual: float = 0.0
    method: str = "loglinear"
    excluded: tuple[float, ...] = ()
    length_fits: tuple[LengthFit, ...] = ()
    shared_delta_l_c: float | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.kappa0) and self.kappa0 > 0):
            raise InvalidArgument(f"kappa0 must be positive, got {self.kappa0}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidArgument(f"gamma must be positive, got {self.gamma}")

    def to_dict(self) -> dict:
        return {
            "kappa0": self.kappa0,
            "gamma": self.gamma,
            "fit_residual": self.fit_residual,
            "method": self.method,
            "excluded": list(self.excluded),
            "shared_delta_l_c": self.shared_delta_l_c,
            "series": [s.to_dict() for s in self.series],
            "length_fits": [f.to_dict() for f in self.length_fits],
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationModel":
        try:
            return cls(
                kappa0=float(d["kappa0"]),
                gamma=float(d["gamma"]),
                series=tuple(SeriesFit.from_dict(s) for s in d.get("series", ())),
                fit_residual=float(d.get("fit_residual", 0.0)),
                method=str(d.get("method", "loglinear")),
                excluded=tuple(float(x) for x in d.get("excluded", ())),
                length_fits=tuple(LengthFit(**f) for f in d.get("length_fits", ())),
                shared_delta_l_c=d.get("shared_delta_l_c"),
                provenance=dict(d.get("provenance", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgument(f"malformed calibration model: {exc}") from None


#: published fit over the 633 nm soda-lime dataset
PUBLISHED_MODEL = CalibrationModel(kappa0=3.065 * math.pi, gamma=0.537, method="published")


def extract_phase(p4: float, slack: float = 1e-9) -> float:
    """First-quadrant coupling phase ``arccos(sqrt(P4))``."""
    p4 = float(p4)
    if not (-slack <= p4 <= 1 + slack):
        raise InvalidArgument(f"P4 = {p4} is not a fraction in [0, 1]")
    return math.acos(math.sqrt(min(max(p4, 0.0), 1.0)))


def fold_phase(theta0: float, fold: int) -> float:
    """Preimage of ``theta0`` under arccos-folding lying in quadrant ``fold``.

    Fold 2k maps to ``theta0 + k*pi``, fold 2k+1 to ``(k+1)*pi - theta0``.
    """
    k, odd = divmod(int(fold), 2)
    return (k + 1) * math.pi - theta0 if odd else theta0 + k * math.pi


def _line_fit(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ [slope, icpt] - y) ** 2)))
    return float(slope), float(icpt), rms


def unwrap_phases(l_c: Sequence[float], theta0: Sequence[float], max_fold: int = DEFAULT_MAX_FOLD):
    """Pick the fold of every first-quadrant phase so theta is linear in l_c.

    Exhaustive over non-decreasing fold assignments in ``0..max_fold``
    (theta must grow with l_c). The assignment with the smallest RMS
    residual and positive slope wins; near-ties go to the smallest fold sum.
    Returns ``(slope, intercept, folds, rms, theta)``.
    """
    x = np.asarray(l_c, dtype=float)
    t0 = np.asarray(theta0, dtype=float)
    order = np.argsort(x, kind="stable")
    x, t0 = x[order], t0[order]
    best = None
    for folds in itertools.combinations_with_replacement(range(max_fold + 1), len(x)):
        theta = np.array([fold_phase(t, f) for t, f in zip(t0, folds)])
        slope, icpt, rms = _line_fit(x, theta)
        if slope <= 0:
            continue
        if best is None or rms < best[3] - _TIE_TOL or (
            abs(rms - best[3]) <= _TIE_TOL and sum(folds) < sum(best[2])
        ):
            best = (slope, icpt, folds, rms, theta)
    if best is None:
        raise FitFailure(
            f"no fold assignment up to fold {max_fold} gives a positive slope "
            f"(l_c={x.tolist()}, theta0={t0.tolist()})"
        )
    # report in the caller's ordering
    inv = np.argsort(order)
    slope, icpt, folds, rms, theta = best
    return slope, icpt, tuple(int(folds[i]) for i in inv), rms, theta[inv]


def unwrap_series(records: Sequence[CouplerMeasurement], max_fold: int = DEFAULT_MAX_FOLD) -> SeriesFit:
    records = sorted(records, key=lambda r: r.l_c)
    if len(records) < 2:
        raise InsufficientData(f"a series needs at least 2 points, got {len(records)}")
    d_values = {r.d_m for r in records}
    if len(d_values) != 1:
        raise InvalidArgument(f"series mixes separations {sorted(d_values)}")
    l_c = [r.l_c for r in records]
    if len(set(l_c)) != len(l_c):
        raise InvalidArgument("series has repeated l_c values")
    slope, icpt, folds, rms, theta = unwrap_phases(l_c, [extract_phase(r.P4) for r in records], max_fold)
    return SeriesFit(records[0].d_m, slope, icpt, folds, rms, tuple(l_c), tuple(float(t) for t in theta))


def predict_kappa(model: CalibrationModel, d_m) -> float | np.ndarray:
    """Coupling coefficient (rad/mm) at separation ``d_m`` (um)."""
    return model.kappa0 * np.exp(-model.gamma * np.asarray(d_m, dtype=float))


def predict_theta(model: CalibrationModel, d_m, l_c, delta_l_c=0.0):
    return predict_kappa(model, d_m) * (np.asarray(l_c, dtype=float) + delta_l_c)


def _exp_fit(d, k, method):
    """Fit ``k = k0 exp(-g d)``; returns ``(k0, g)``."""
    slope, icpt = np.polyfit(d, np.log(k), 1)
    k0, g = math.exp(icpt), -slope
    if method == "nonlinear":
        popt, _ = curve_fit(lambda x, a, b: a * np.exp(-b * x), d, k, p0=[k0, g])
        k0, g = float(popt[0]), float(popt[1])
    elif method != "loglinear":
        raise InvalidArgument(f"unknown fit method {method!r}")
    return k0, g


def _length_fits(fits):
    by_lc = defaultdict(list)
    for s in fits:
        for lc, th in zip(s.l_c, s.theta):
            by_lc[lc].append((s.d_m, th))
    out = []
    for lc in sorted(by_lc):
        pts = by_lc[lc]
        if len(pts) < 2 or any(th <= 0 for _, th in pts):
            continue
        d, th = np.array(pts).T
        a_e, b_e = _exp_fit(d, th, "loglinear")
        out.append(LengthFit(lc, a_e, b_e))
    return tuple(out)


def fit_kappa(
    fits: Iterable[SeriesFit], exclude: Iterable[float] = (), method: str = "loglinear"
) -> CalibrationModel:
    """Fit ``kappa(d_m) = kappa0 * exp(-gamma * d_m)`` to the per-series slopes.

    The default fits a line to ``ln(a_l)`` against ``d_m``. ``method="nonlinear"``
    refines that start by least squares on ``a_l`` itself, which weights the
    strongly coupled (small ``d_m``) series more heavily.
    """
    fits = tuple(fits)
    exclude = tuple(float(x) for x in exclude)
    used = [s for s in fits if not any(math.isclose(s.d_m, x) for x in exclude)]
    if len({s.d_m for s in used}) < 2 or len(used) != len({s.d_m for s in used}):
        raise InsufficientData(f"need at least 2 series with distinct d_m, got {[s.d_m for s in used]}")
    d = np.array([s.d_m for s in used])
    a = np.array([s.a_l for s in used])
    if np.any(a <= 0):
        raise InvalidArgument(f"slopes must be positive, got {a.tolist()}")
    k0, g = _exp_fit(d, a, method)
    if not (k0 > 0 and g > 0):
        raise FitFailure(f"fitted kappa does not decay with separation (kappa0={k0}, gamma={g})")
    rel = float(np.sqrt(np.mean(((k0 * np.exp(-g * d) - a) / a) ** 2)))
    return CalibrationModel(
        kappa0=k0,
        gamma=g,
        series=fits,
        fit_residual=rel,
        method=method,
        excluded=exclude,
        length_fits=_length_fits(used),
    )


def share_delta_l_c(fits: Sequence[SeriesFit]) -> tuple[tuple[SeriesFit, ...], float]:
    """Refit every series with one common delta_l_c, keeping the chosen folds.

    Minimizes the summed squared phase residual of ``theta = a_i (l_c + delta)``
    over all points; returns the refitted series and the shared delta.
    """
    fits = tuple(fits)
    if any(not s.l_c for s in fits):
        raise InvalidArgument("shared delta_l_c needs series fits that carry their points")
    x = [np.asarray(s.l_c) for s in fits]
    y = [np.asarray(s.theta) for s in fits]

    def resid(p):
        a, delta = p[:-1], p[-1]
        return np.concatenate([ai * (xi + delta) - yi for ai, xi, yi in zip(a, x, y)])

    p0 = [s.a_l for s in fits] + [float(np.mean([s.delta_l_c for s in fits]))]
    sol = least_squares(resid, p0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    delta = float(sol.x[-1])
    out = []
    for s, ai, xi, yi in zip(fits, sol.x[:-1], x, y):
        rms = float(np.sqrt(np.mean((ai * (xi + delta) - yi) ** 2)))
        out.append(replace(s, a_l=float(ai), b_l=float(ai) * delta, residual=rms))
    return tuple(out), delta


def fit_table(
    table: MeasurementTable,
    exclude: Iterable[float] = (),
    method: str = "loglinear",
    max_fold: int = DEFAULT_MAX_FOLD,
    shared_delta: bool = False,
) -> CalibrationModel:
    """Unwrap every series of ``table`` and fit the separation law."""
    fits = tuple(unwrap_series(recs, max_fold) for recs in table.series().values())
    delta = None
    if shared_delta:
        fits, delta = share_delta_l_c(fits)
    model = fit_kappa(fits, exclude=exclude, method=method)
    return replace(model, shared_delta_l_c=delta)


@dataclass(frozen=True)
class CouplerDesign:
    d_m: float
    l_c: float
    delta_l_c: float
    target_theta: float
    extrapolated: bool

    def to_dict(self) -> dict:
        return {
            "d_m_um": self.d_m,
            "l_c_mm": self.l_c,
            "delta_l_c_mm": self.delta_l_c,
            "target_theta": self.target_theta,
            "extrapolated": self.extrapolated,
        }


def _outside(v, bounds):
    return not (bounds[0] <= v <= bounds[1])


def design_coupler(
    model: CalibrationModel,
    target_theta: float,
    *,
    d_m: float | None = None,
    l_c: float | None = None,
    delta_l_c: float = 0.0,
) -> CouplerDesign:
    """Geometry reaching ``target_theta`` with either ``d_m`` or ``l_c`` held fixed.

    ``extrapolated`` is set when either coordinate leaves the calibrated
    window of 3-7.5 um by 0.5-2 mm.
    """
    target_theta = float(target_theta)
    if not (math.isfinite(target_theta) and target_theta > 0):
        raise InvalidArgument(f"target theta must be positive, got {target_theta}")
    if (d_m is None) == (l_c is None):
        raise InvalidArgument("fix exactly one of d_m or l_c")
    if d_m is not None:
        d_m = float(d_m)
        if not d_m > 0:
            raise InvalidArgument(f"d_m must be positive, got {d_m}")
        l_c = target_theta / float(predict_kappa(model, d_m)) - delta_l_c
        if not l_c > 0:
            raise InfeasibleDesign(
                f"target {target_theta} rad at d_m={d_m} um needs l_c={l_c:.6g} mm <= 0"
            )
    else:
        l_c = float(l_c)
        if not l_c > 0:
            raise InvalidArgument(f"l_c must be positive, got {l_c}")
        length = l_c + delta_l_c
        if not length > 0:
            raise InfeasibleDesign(f"effective length l_c + delta_l_c = {length} mm is not positive")
        d_m = math.log(model.kappa0 * length / target_theta) / model.gamma
        if not d_m > 0:
            raise InfeasibleDesign(
                f"target {target_theta} rad at l_c={l_c} mm needs d_m={d_m:.6g} um <= 0"
            )
    extrapolated = _outside(d_m, CALIBRATED_DM) or _outside(l_c, CALIBRATED_LC)
    return CouplerDesign(d_m, l_c, float(delta_l_c), target_theta, extrapolated)


BALANCED = "X_pi/4"
CROSSED = "X_pi/2"


@dataclass(frozen=True)
class CouplerClass:
    record: CouplerMeasurement
    label: str | None


def classify_couplers(
    table: MeasurementTable, balance_tol: float = 0.05, cross_tol: float = 0.08
) -> list[CouplerClass]:
    """Flag devices close to a 3 dB coupler or a full-transfer coupler."""
    out = []
    for r in table.records:
        if abs(r.P4 - 0.5) <= balance_tol:
            label = BALANCED
        elif r.P3 >= 1 - cross_tol:
            label = CROSSED
        else:
            label = None
        out.append(CouplerClass(r, label))
    return out


def synthesize_table(
    kappa0: float,
    gamma: float,
    d_values: Iterable[float] = (3.0, 4.5, 6.0, 7.5),
    l_values: Iterable[float] = (0.5, 1.0, 1.5, 2.0),
    delta_l_c: float = 0.0,
    noise: float = 0.0,
    seed: int | None = None,
) -> MeasurementTable:
    """Noise-free or noisy measurement table generated from the separation law.

    ``noise`` is a relative standard deviation applied multiplicatively to
    each coupling phase before folding into ``P4 = cos^2(theta)``.
    """
    rng = np.random.default_rng(seed)
    records = []
    for d in d_values:
        for lc in l_values:
            theta = kappa0 * math.exp(-gamma * d) * (lc + delta_l_c)
            if noise:
                theta *= 1 + noise * rng.standard_normal()
            p4 = math.cos(theta) ** 2
            records.append(CouplerMeasurement(d, lc, p4, 1 - p4))
    return MeasurementTable(tuple(records), {"source": "synthetic"})
