"""Four-mode random-basis projector and its two-mode building blocks.

A photon enters on guides 1 and 3. The splitter stage spreads it over all
four guides so that guides {1, 2} carry an X-basis copy and guides {3, 4}
a Y-basis copy. The measurement stage then routes each basis element onto
its own output.

Output labels follow the printed projector matrix (``PROJECTOR_MATRIX``):
A -> 1, D -> 2, R -> 3, L -> 4. The accompanying text of the source
describes D -> 1, A -> 2, L -> 3, which the matrix contradicts; that prose
mapping is kept in ``PROSE_OUTCOMES`` for reference only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .states import (
    Basis,
    MubLabel,
    PhotonState,
    _check_trials,
    detection_probabilities,
    make_rng,
)
from .unitary import CircuitLayout, compose, couple, shift

_R2 = 1 / math.sqrt(2)

SPLITTER_MATRIX = _R2 * np.array(
    [
        [1, 1j, 0, 0],
        [0, 0, 1j, -1],
        [-1, 1j, 0, 0],
        [0, 0, 1j, 1],
    ],
    dtype=np.complex128,
)
PROJECTOR_MATRIX = 0.5 * np.array(
    [
        [1, 1j, -1, -1j],
        [1j, -1, 1j, -1],
        [-1, 1j, -1j, -1],
        [-1j, -1, -1, 1j],
    ],
    dtype=np.complex128,
)
SPLITTER_MATRIX.setflags(write=False)
PROJECTOR_MATRIX.setflags(write=False)

OUTCOMES = {
    1: MubLabel(Basis.X, "A"),
    2: MubLabel(Basis.X, "D"),
    3: MubLabel(Basis.Y, "R"),
    4: MubLabel(Basis.Y, "L"),
}
PROSE_OUTCOMES = {
    1: MubLabel(Basis.X, "D"),
    2: MubLabel(Basis.X, "A"),
    3: MubLabel(Basis.Y, "L"),
    4: MubLabel(Basis.Y, "R"),
}
INPUT_GUIDES = (1, 3)


def reference_matrices() -> dict:
    """Literal splitter and projector matrices as JSON-ready re/im lists."""

    def enc(m):
        return {"re": m.real.tolist(), "im": m.imag.tolist()}

    return {"S": enc(SPLITTER_MATRIX), "P": enc(PROJECTOR_MATRIX)}


def splitter_circuit() -> CircuitLayout:
    """Two 3 dB couplers on (1,2) and (3,4), then a full-transfer coupler on (2,3)."""
    return CircuitLayout(
        4,
        (
            couple(math.pi / 4, 1, 2),
            couple(math.pi / 4, 3, 4),
            couple(math.pi / 2, 2, 3),
        ),
    )


def measurement_stage() -> CircuitLayout:
    # X block: a bare 3 dB coupler. Y block: Z(pi/2) first, then the coupler.
    # The last two shifters add a uniform +pi/4 on guides 3,4 relative to 1,2,
    # which the printed projector carries between its two blocks.
    return CircuitLayout(
        4,
        (
            couple(math.pi / 4, 1, 2),
            shift(math.pi / 2, 3, 4),
            couple(math.pi / 4, 3, 4),
            shift(math.pi / 4, 1, 3),
            shift(math.pi / 4, 2, 4),
        ),
    )


def projector_circuit() -> CircuitLayout:
    """Splitter followed by the measurement stage; equals the printed
    projector up to a global phase of -pi/8."""
    return splitter_circuit().then(measurement_stage())


def two_mode_projector(basis) -> CircuitLayout:
    """Y: a single 3 dB coupler. X: phase shifter Z(pi/2), then the coupler."""
    basis = Basis(basis)
    if basis is Basis.Y:
        return CircuitLayout(2, (couple(math.pi / 4, 1, 2),))
    return CircuitLayout(2, (shift(math.pi / 2, 1, 2), couple(math.pi / 4, 1, 2)))


BUILTIN_CIRCUITS = {
    "splitter": splitter_circuit,
    "projector": projector_circuit,
    "px": lambda: two_mode_projector(Basis.X),
    "py": lambda: two_mode_projector(Basis.Y),
}


def classify_outcome(output: int) -> MubLabel:
    try:
        return OUTCOMES[int(output)]
    except (KeyError, TypeError, ValueError):
        raise InvalidArgument(f"output must be one of 1..4, got {output!r}") from None


@dataclass(frozen=True)
class QkdOutcome:
    output: int
    label: MubLabel
    off_protocol: bool = False

    @property
    def basis(self) -> Basis:
        return self.label.basis


@dataclass(frozen=True)
class QkdBatch:
    outputs: np.ndarray
    seed: int
    off_protocol: bool

    @property
    def trials(self) -> int:
        return int(self.outputs.shape[0])

    def counts(self) -> np.ndarray:
        return np.bincount(self.outputs - 1, minlength=4)

    def basis_frequencies(self) -> dict:
        c = self.counts() / self.trials
        return {"X": float(c[0] + c[1]), "Y": float(c[2] + c[3])}

    def csv_rows(self):
        """Rows ``(trial, output, basis, label, seed)``; trials count from 1."""
        for t, out in enumerate(self.outputs.tolist(), start=1):
            lab = OUTCOMES[out]
            yield t, out, lab.basis.value, lab.element, self.seed


def _projector_probs(state: PhotonState):
    if state.dim != 4:
        raise InvalidArgument(f"the projector acts on 4 modes, got a {state.dim}-mode state")
    p = detection_probabilities(state, PROJECTOR_MATRIX)
    outside = np.delete(state.amplitudes, [g - 1 for g in INPUT_GUIDES])
    return p / p.sum(), bool(np.any(outside != 0))


def qkd_measure(state: PhotonState, seed: int) -> QkdOutcome:
    """Detect one photon behind the random-basis projector.

    ``off_protocol`` is set when the input has amplitude outside guides 1
    and 3; the measurement itself is still well defined.
    """
    p, off = _projector_probs(state)
    out = int(make_rng(seed).choice(4, p=p)) + 1
    return QkdOutcome(out, OUTCOMES[out], off)


def qkd_measure_batch(state: PhotonState, trials: int, seed: int) -> QkdBatch:
    p, off = _projector_probs(state)
    trials = _check_trials(trials)
    outputs = make_rng(seed).choice(4, size=trials, p=p) + 1
    outputs.setflags(write=False)
    return QkdBatch(outputs, int(seed), off)
