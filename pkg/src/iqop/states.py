"""Single-photon spatial-mode states, X/Y bases and detector click sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DegenerateInput, InvalidArgument
from .unitary import _check_modes

NORM_TOL = 1e-12
PROB_SUM_TOL = 1e-9
#: recorded in every sampling output so runs can be reproduced
RNG_ALGORITHM = "numpy.random.PCG64"


class Basis(str, Enum):
    X = "X"
    Y = "Y"


_ELEMENTS = {Basis.X: ("D", "A"), Basis.Y: ("L", "R")}
# relative amplitude on the second mode of the pair
_SECOND_AMPLITUDE = {"D": 1.0, "A": -1.0, "L": 1j, "R": -1j}


@dataclass(frozen=True)
class MubLabel:
    basis: Basis
    element: str

    def __post_init__(self):
        try:
            basis = Basis(self.basis)
        except ValueError:
            raise InvalidArgument(f"unknown basis {self.basis!r}") from None
        if self.element not in _ELEMENTS[basis]:
            raise InvalidArgument(f"element {self.element!r} does not belong to basis {basis.value}")
        object.__setattr__(self, "basis", basis)

    def __str__(self):
        return f"{self.basis.value}:{self.element}"


@dataclass(frozen=True, eq=False)
class PhotonState:
    """Normalized amplitudes of one photon spread over N modes."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=np.complex128)
        if a.ndim != 1 or a.size < 1:
            raise InvalidArgument("amplitudes must be a non-empty vector")
        if not np.all(np.isfinite(a)):
            raise InvalidArgument("amplitudes must be finite")
        norm = float(np.sum(np.abs(a) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidArgument(f"state is not normalized (sum |c|^2 = {norm!r})")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PhotonState):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self.amplitudes, other.amplitudes))

    def __hash__(self):
        return hash(self.amplitudes.tobytes())

    def to_dict(self) -> dict:
        return {"dim": self.dim, "re": self.amplitudes.real.tolist(), "im": self.amplitudes.imag.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PhotonState":
        try:
            dim, re, im = int(d["dim"]), d["re"], d["im"]
        except (KeyError, TypeError, ValueError):
            raise InvalidArgument("state JSON needs 'dim', 're' and 'im'") from None
        if not (isinstance(re, list) and isinstance(im, list) and len(re) == len(im) == dim):
            raise InvalidArgument(f"'re' and 'im' must both have length dim={dim}")
        try:
            amps = np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)
        except (TypeError, ValueError):
            raise InvalidArgument("'re' and 'im' must hold numbers") from None
        return cls(amps)


@dataclass(frozen=True, eq=False)
class WeakCoherentState:
    """Multimode coherent state with small field amplitudes alpha_j."""

    alphas: np.ndarray

    def __post_init__(self):
        a = np.array(self.alphas, dtype=np.complex128)
        if a.ndim != 1 or a.size < 1 or not np.all(np.isfinite(a)):
            raise InvalidArgument("alphas must be a non-empty vector of finite numbers")
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)

    @property
    def dim(self) -> int:
        return self.alphas.shape[0]

    @property
    def mean_photon_number(self) -> float:
        return float(np.sum(np.abs(self.alphas) ** 2))


@dataclass(frozen=True)
class ClickCounts:
    counts: tuple[int, ...]
    trials: int
    seed: int
    generator: str = RNG_ALGORITHM

    @property
    def frequencies(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.trials

    def csv_rows(self):
        """Rows ``(output_index, count, trials, seed)`` with 1-based outputs."""
        return [(k + 1, c, self.trials, self.seed) for k, c in enumerate(self.counts)]


def basis_state(j: int, n: int) -> PhotonState:
    if int(n) < 1 or not 1 <= int(j) <= int(n):
        raise InvalidArgument(f"mode {j} out of range 1..{n}")
    amps = np.zeros(int(n), dtype=np.complex128)
    amps[int(j) - 1] = 1.0
    return PhotonState(amps)


def mub_state(label: MubLabel, pair: Sequence[int], n: int) -> PhotonState:
    """X basis: D = (|j> + |j'>)/sqrt2, A = (|j> - |j'>)/sqrt2.
    Y basis: L = (|j> + i|j'>)/sqrt2, R = (|j> - i|j'>)/sqrt2."""
    if int(n) < 2:
        raise InvalidArgument(f"a two-mode superposition needs n >= 2, got {n}")
    j, jp = _check_modes(pair, int(n))
    amps = np.zeros(int(n), dtype=np.complex128)
    amps[j - 1] = 1 / math.sqrt(2)
    amps[jp - 1] = _SECOND_AMPLITUDE[label.element] / math.sqrt(2)
    return PhotonState(amps)


def single_photon_approx(w: WeakCoherentState) -> PhotonState:
    """One-photon component of a weak coherent state, conditioned on detection.

    The vacuum term is dropped and the remaining amplitudes renormalized, so
    relative phases between modes survive unchanged.
    """
    if not np.any(w.alphas):
        raise DegenerateInput("all coherent amplitudes are zero; no photon to condition on")
    # rescale by the largest modulus first so tiny alphas do not underflow
    scaled = w.alphas / np.max(np.abs(w.alphas))
    return PhotonState(scaled / np.linalg.norm(scaled))


def detection_probabilities(state: PhotonState, u) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (state.dim, state.dim):
        raise InvalidArgument(f"{state.dim}-mode state cannot pass through a {u.shape} matrix")
    return np.abs(u @ state.amplitudes) ** 2


def _check_probs(probs):
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size < 1 or not np.all(np.isfinite(p)):
        raise InvalidArgument("probabilities must be a non-empty finite vector")
    if np.any(p < 0):
        raise InvalidArgument("probabilities must be non-negative")
    if abs(p.sum() - 1.0) > PROB_SUM_TOL:
        raise InvalidArgument(f"probabilities sum to {p.sum()!r}, not 1")
    return p / p.sum()


def _nonneg_int(value, name, minimum):
    ok = isinstance(value, (int, np.integer)) and not isinstance(value, bool) and value >= minimum
    if not ok:
        raise InvalidArgument(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def _check_trials(trials):
    return _nonneg_int(trials, "trials", 1)


def make_rng(seed, *spawn_key: int) -> np.random.Generator:
    """PCG64 generator for ``seed``; ``spawn_key`` derives independent sub-streams."""
    seed = _nonneg_int(seed, "seed", 0)
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.PCG64(ss))


def sample_clicks(probs, trials: int, seed: int, *, rng: np.random.Generator | None = None) -> ClickCounts:
    """Multinomial draw of ``trials`` single-photon detections."""
    p = _check_probs(probs)
    trials = _check_trials(trials)
    if rng is None:
        rng = make_rng(seed)
    counts = rng.multinomial(trials, p)
    return ClickCounts(tuple(int(c) for c in counts), trials, int(seed))
