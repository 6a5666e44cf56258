"""Transfer matrices of couplers and phase shifters, and their composition.

Matrices are dense ``complex128`` numpy arrays. Mode indices are 1-based
throughout, matching the guide labels c1..cN. A circuit is a list of
elements in propagation order; composing it multiplies later elements on
the left, so ``compose(layout) @ amplitudes`` gives the output amplitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument

UNITARY_TOL = 1e-12

COUPLER = "coupler"
PHASE_SHIFTER = "phase_shifter"
_PARAM_KEY = {COUPLER: "theta", PHASE_SHIFTER: "phi"}


def _finite(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidArgument(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value):
        raise InvalidArgument(f"{name} must be finite, got {value}")
    return value


def _frozen(a):
    a = np.asarray(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


def coupler(theta: float) -> np.ndarray:
    """2x2 directional coupler with coupling phase ``theta`` (= kappa * L)."""
    theta = _finite(theta, "theta")
    c, s = math.cos(theta), math.sin(theta)
    return _frozen([[c, 1j * s], [1j * s, c]])


def phase_shifter(phi: float) -> np.ndarray:
    """2x2 phase shifter diag(exp(-i phi/2), exp(i phi/2))."""
    phi = _finite(phi, "phi")
    return _frozen(np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)]))


def is_unitary(u, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] < 1:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def _check_modes(modes, n):
    try:
        i, j = (int(m) for m in modes)
    except (TypeError, ValueError):
        raise InvalidArgument(f"modes must be a pair of integers, got {modes!r}") from None
    if not (1 <= i <= n and 1 <= j <= n) or i == j:
        raise InvalidArgument(f"modes {modes!r} must be distinct and within 1..{n}")
    return i, j


def embed(u, modes: Sequence[int], n: int) -> np.ndarray:
    """Lift a 2x2 block onto modes ``(i, j)`` of an n-mode identity.

    ``u[0, 0]`` lands on mode i, ``u[1, 1]`` on mode j. Pairs given as
    ``(j, i)`` with j > i act on the swapped ordering.
    """
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (2, 2):
        raise InvalidArgument(f"embed expects a 2x2 block, got shape {u.shape}")
    if int(n) < 2:
        raise InvalidArgument(f"dimension must be >= 2 to embed a 2x2 block, got {n}")
    i, j = _check_modes(modes, int(n))
    out = np.eye(int(n), dtype=np.complex128)
    idx = [i - 1, j - 1]
    out[np.ix_(idx, idx)] = u
    return _frozen(out)


@dataclass(frozen=True)
class ElementPlacement:
    kind: str
    parameter: float
    modes: tuple[int, int]

    def __post_init__(self):
        if self.kind not in _PARAM_KEY:
            raise InvalidArgument(f"unknown element kind {self.kind!r}")
        object.__setattr__(self, "parameter", _finite(self.parameter, _PARAM_KEY[self.kind]))
        try:
            i, j = (int(m) for m in self.modes)
        except (TypeError, ValueError):
            raise InvalidArgument(f"modes must be a pair of integers, got {self.modes!r}") from None
        if i == j or i < 1 or j < 1:
            raise InvalidArgument(f"modes {self.modes!r} must be distinct positive indices")
        object.__setattr__(self, "modes", (i, j))

    def matrix(self) -> np.ndarray:
        if self.kind == COUPLER:
            return coupler(self.parameter)
        return phase_shifter(self.parameter)

    def to_dict(self) -> dict:
        return {"kind": self.kind, _PARAM_KEY[self.kind]: self.parameter, "modes": list(self.modes)}

    @classmethod
    def from_dict(cls, d: dict) -> "ElementPlacement":
        if not isinstance(d, dict):
            raise InvalidArgument(f"element must be an object, got {d!r}")
        kind = d.get("kind")
        if kind not in _PARAM_KEY:
            raise InvalidArgument(f"unknown element kind {kind!r}")
        key = _PARAM_KEY[kind]
        if key not in d:
            raise InvalidArgument(f"{kind} element needs a {key!r} field")
        modes = d.get("modes")
        if not isinstance(modes, (list, tuple)) or len(modes) != 2:
            raise InvalidArgument(f"element modes must be a pair, got {modes!r}")
        return cls(kind, d[key], tuple(modes))


def couple(theta: float, i: int, j: int) -> ElementPlacement:
    return ElementPlacement(COUPLER, theta, (i, j))


def shift(phi: float, i: int, j: int) -> ElementPlacement:
    return ElementPlacement(PHASE_SHIFTER, phi, (i, j))


@dataclass(frozen=True)
class CircuitLayout:
    dim: int
    elements: tuple[ElementPlacement, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if isinstance(self.dim, bool) or not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise InvalidArgument(f"dim must be a positive integer, got {self.dim!r}")
        elements = tuple(self.elements)
        for el in elements:
            if not isinstance(el, ElementPlacement):
                raise InvalidArgument(f"not an ElementPlacement: {el!r}")
            if max(el.modes) > self.dim:
                raise InvalidArgument(f"element modes {el.modes} exceed circuit dimension {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "elements", elements)

    def then(self, other: "CircuitLayout") -> "CircuitLayout":
        """Concatenate: ``other`` is traversed after ``self``."""
        if other.dim != self.dim:
            raise InvalidArgument("cannot concatenate circuits of different dimension")
        return CircuitLayout(self.dim, self.elements + other.elements)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "elements": [el.to_dict() for el in self.elements]}

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitLayout":
        if not isinstance(d, dict) or "dim" not in d:
            raise InvalidArgument("circuit must be an object with a 'dim' field")
        elements = d.get("elements", [])
        if not isinstance(elements, list):
            raise InvalidArgument("'elements' must be a list")
        return cls(d["dim"], tuple(ElementPlacement.from_dict(e) for e in elements))


def compose(layout: CircuitLayout) -> np.ndarray:
    """Transfer matrix of a layout; an empty layout gives the identity."""
    u = np.eye(layout.dim, dtype=np.complex128)
    for el in layout.elements:
        u = embed(el.matrix(), el.modes, layout.dim) @ u
    return _frozen(u)


def apply(u, amplitudes: Iterable[complex]) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(amplitudes, dtype=np.complex128)
    if v.ndim != 1 or v.shape[0] != u.shape[1]:
        raise InvalidArgument(f"vector of length {v.shape} does not match a {u.shape[0]}-mode matrix")
    return u @ v


def equal_up_to_global_phase(a, b, tol: float = UNITARY_TOL) -> tuple[bool, float]:
    """Test ``a == exp(i chi) b`` within ``tol`` (max-abs norm).

    chi is read off the entry of ``b`` with the largest magnitude and
    returned in (-pi, pi] whether or not the test passes.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        return False, 0.0
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[k]) == 0.0:
        return bool(np.max(np.abs(a), initial=0.0) <= tol), 0.0
    chi = float(np.angle(a[k] / b[k]))
    if chi <= -math.pi:
        chi += 2 * math.pi
    equal = bool(np.max(np.abs(a - np.exp(1j * chi) * b)) <= tol)
    return equal, chi
