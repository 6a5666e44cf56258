import json
import math

import numpy as np
import pytest

from iqop.errors import InvalidArgument
from iqop.unitary import (
    CircuitLayout,
    ElementPlacement,
    apply,
    compose,
    couple,
    coupler,
    embed,
    equal_up_to_global_phase,
    is_unitary,
    phase_shifter,
    shift,
)

R2 = 1 / math.sqrt(2)


def test_coupler_values():
    assert np.array_equal(coupler(0), np.eye(2))
    np.testing.assert_allclose(coupler(math.pi / 4), R2 * np.array([[1, 1j], [1j, 1]]), atol=1e-15)
    np.testing.assert_allclose(coupler(math.pi / 2), [[0, 1j], [1j, 0]], atol=1e-15)


def test_phase_shifter_values():
    assert np.array_equal(phase_shifter(0), np.eye(2))
    np.testing.assert_allclose(
        phase_shifter(math.pi / 2), np.diag([np.exp(-1j * math.pi / 4), np.exp(1j * math.pi / 4)]), atol=1e-15
    )
    np.testing.assert_allclose(phase_shifter(math.pi), np.diag([-1j, 1j]), atol=1e-15)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf, "x", None])
def test_non_finite_parameters_rejected(bad):
    with pytest.raises(InvalidArgument):
        coupler(bad)
    with pytest.raises(InvalidArgument):
        phase_shifter(bad)


def test_matrices_are_read_only():
    with pytest.raises(ValueError):
        coupler(0.3)[0, 0] = 2


def test_embed():
    assert np.array_equal(embed(np.eye(2), (1, 2), 4), np.eye(4))
    expected = np.eye(4, dtype=complex)
    expected[1:3, 1:3] = [[0, 1j], [1j, 0]]
    got = embed(coupler(math.pi / 2), (2, 3), 4)
    np.testing.assert_allclose(got, expected, atol=1e-15)
    assert is_unitary(got)
    np.testing.assert_array_equal(embed(coupler(math.pi / 4), (1, 2), 2), coupler(math.pi / 4))


def test_embed_non_adjacent_pair():
    u = embed(phase_shifter(1.0), (1, 3), 3)
    np.testing.assert_allclose(np.diag(u), [np.exp(-0.5j), 1, np.exp(0.5j)])


@pytest.mark.parametrize("modes", [(0, 1), (1, 5), (2, 2), (1,), "ab"])
def test_embed_out_of_range(modes):
    with pytest.raises(InvalidArgument):
        embed(coupler(0.1), modes, 4)


def test_compose_empty_is_identity():
    assert np.array_equal(compose(CircuitLayout(4)), np.eye(4))


def test_compose_reconstructs_splitter(s_literal):
    layout = CircuitLayout(4, (couple(math.pi / 4, 1, 2), couple(math.pi / 4, 3, 4), couple(math.pi / 2, 2, 3)))
    # oracle: explicit product of the three embedded blocks, later on the left
    b = np.zeros((4, 4), dtype=complex)
    b[:2, :2] = b[2:, 2:] = R2 * np.array([[1, 1j], [1j, 1]])
    swap23 = np.eye(4, dtype=complex)
    swap23[1:3, 1:3] = [[0, 1j], [1j, 0]]
    np.testing.assert_allclose(swap23 @ b, s_literal, atol=1e-12)
    assert np.max(np.abs(compose(layout) - s_literal)) < 1e-12


def test_propagation_order_matters():
    a = CircuitLayout(2, (shift(math.pi / 2, 1, 2), couple(math.pi / 4, 1, 2)))
    np.testing.assert_allclose(compose(a), coupler(math.pi / 4) @ phase_shifter(math.pi / 2))


def test_same_pair_couplers_add():
    layout = CircuitLayout(3, (couple(0.4, 1, 2), couple(1.1, 1, 2)))
    np.testing.assert_allclose(compose(layout), embed(coupler(1.5), (1, 2), 3), atol=1e-12)


def test_layout_rejects_modes_beyond_dim():
    with pytest.raises(InvalidArgument):
        CircuitLayout(2, (couple(0.1, 1, 3),))
    with pytest.raises(InvalidArgument):
        ElementPlacement("mirror", 0.1, (1, 2))
    with pytest.raises(InvalidArgument):
        CircuitLayout(0)


def test_apply(s_literal):
    c1, c3 = 0.6, 0.8j
    v = np.array([c1, 0, c3, 0])
    np.testing.assert_array_equal(apply(np.eye(4), v), v)
    np.testing.assert_allclose(apply(s_literal, v), R2 * np.array([c1, 1j * c3, -c1, 1j * c3]), atol=1e-15)
    np.testing.assert_allclose(apply(coupler(math.pi / 4), [1, 0]), [R2, 1j * R2], atol=1e-15)
    with pytest.raises(InvalidArgument):
        apply(np.eye(4), [1, 0])


def test_equal_up_to_global_phase():
    x4, x2 = coupler(math.pi / 4), coupler(math.pi / 2)
    assert equal_up_to_global_phase(x4, x4) == (True, 0.0)
    ok, chi = equal_up_to_global_phase(-x4, x4)
    assert ok and math.isclose(chi, math.pi)
    assert not equal_up_to_global_phase(x4, x2)[0]
    assert not equal_up_to_global_phase(np.eye(2), np.eye(3))[0]


def test_layout_json_round_trip():
    layout = CircuitLayout(4, (couple(math.pi / 4, 1, 2), shift(0.1234567890123, 3, 4)))
    text = json.dumps(layout.to_dict())
    assert json.loads(text)["elements"][1] == {"kind": "phase_shifter", "phi": 0.1234567890123, "modes": [3, 4]}
    assert CircuitLayout.from_dict(json.loads(text)) == layout


@pytest.mark.parametrize(
    "bad",
    [
        {},
        {"dim": "4"},
        {"dim": 2, "elements": "x"},
        {"dim": 2, "elements": [{"kind": "coupler", "modes": [1, 2]}]},
        {"dim": 2, "elements": [{"kind": "coupler", "theta": 1, "modes": [1]}]},
        {"dim": 2, "elements": [{"kind": "coupler", "theta": "nan", "modes": [1, 2]}]},
    ],
)
def test_layout_from_bad_dict(bad):
    with pytest.raises(InvalidArgument):
        CircuitLayout.from_dict(bad)
