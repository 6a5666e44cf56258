import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iqop.calibration import CalibrationModel, fit_table, synthesize_table
from iqop.circuits import projector_circuit
from iqop.errors import InvalidArgument, IqopError, ParseError, ValidationError
from iqop.io import (
    dumps,
    fmt,
    load_bundled_table,
    load_circuit,
    manifest,
    parse_angle,
    parse_measurement_table,
    parse_state,
    parse_sweep,
    serialize_measurement_table,
)
from iqop.states import PhotonState, basis_state
from iqop.unitary import CircuitLayout, compose

HEADER = "d_m_um,l_c_mm,P4,P3\n"


def test_bundled_table():
    t = load_bundled_table()
    assert len(t) == 16
    series = t.series()
    assert list(series) == [3.0, 4.5, 6.0, 7.5]
    assert all(len(s) == 4 for s in series.values())
    assert t.metadata["digest"].startswith("sha256:")
    r = {x.key: x for x in t.records}[(6.0, 1.5)]
    assert r.P4 == pytest.approx(0.493, abs=1e-12)
    assert r.P3 == pytest.approx(0.507, abs=1e-12)


def test_percent_and_fraction_rows():
    t = parse_measurement_table(io.StringIO(HEADER + "6.0,1.5,49.3,50.7\n6.0,2.0,0.25,0.75\n"))
    a, b = t.records
    assert (a.P4, a.P3) == pytest.approx((0.493, 0.507), abs=1e-12)
    assert (b.P4, b.P3) == pytest.approx((0.25, 0.75), abs=1e-12)


def test_comments_become_metadata():
    t = parse_measurement_table(io.StringIO("# wavelength: 633 nm\n" + HEADER + "3,1,50,50\n"))
    assert t.metadata["wavelength"] == "633 nm"


@pytest.mark.parametrize(
    "text, line",
    [
        ("", 1),
        ("\n# only a comment\n", 1),
        ("3,1,50,50\n", 1),
        ("\n" + "d_m,l_c,P4,P3\n", 2),
        (HEADER + "3,1,50\n", 2),
        (HEADER + "3,1,fifty,50\n", 2),
        (HEADER + "3,1,nan,50\n", 2),
        (HEADER, 1),
    ],
)
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as exc:
        parse_measurement_table(io.StringIO(text))
    assert exc.value.line == line
    assert str(exc.value).startswith(f"line {line}:")


def test_bad_sums_list_rows():
    text = HEADER + "3,1,50,50\n3,1.5,60,60\n3,2,0.3,0.3\n"
    with pytest.raises(ValidationError) as exc:
        parse_measurement_table(io.StringIO(text))
    assert exc.value.rows == [3, 4]


def test_duplicate_rows_rejected():
    with pytest.raises(ValidationError) as exc:
        parse_measurement_table(io.StringIO(HEADER + "3,1,50,50\n3,1,49,51\n"))
    assert exc.value.rows == [2, 3]


def test_missing_file():
    with pytest.raises(ParseError):
        parse_measurement_table("/nonexistent/table.csv")


def test_table_round_trip():
    t = synthesize_table(3.065 * math.pi, 0.537, delta_l_c=0.1, noise=0.01, seed=3)
    back = parse_measurement_table(io.StringIO(serialize_measurement_table(t)))
    assert back.records == t.records
    assert back.metadata == t.metadata


def test_circuit_round_trip(tmp_path):
    layout = projector_circuit()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(layout.to_dict()))
    back = load_circuit(path)
    assert back == layout
    assert np.array_equal(compose(back), compose(layout))


def test_bad_circuit_is_parse_error(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"dim": 2, "elements": [{"kind": "mirror"}]}')
    with pytest.raises(ParseError):
        load_circuit(path)
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_circuit(path)


def test_model_round_trip_through_json():
    m = fit_table(load_bundled_table(), exclude=[3.0])
    back = CalibrationModel.from_dict(json.loads(json.dumps(m.to_dict())))
    assert back == m


def test_parse_state_grammar(tmp_path):
    assert parse_state("mode:2", 4) == basis_state(2, 4)
    s = parse_state("X:A@(1,3)", 4)
    assert np.allclose(s.amplitudes, [1 / math.sqrt(2), 0, -1 / math.sqrt(2), 0])
    s = parse_state(" Y : R @ ( 2 , 4 ) ", 4)
    assert np.allclose(s.amplitudes, [0, 1 / math.sqrt(2), 0, -1j / math.sqrt(2)])
    path = tmp_path / "s.json"
    path.write_text(json.dumps(basis_state(1, 2).to_dict()))
    assert parse_state(str(path), 2) == PhotonState([1, 0])
    for bad in ("mode:0", "mode:5", "Z:A@(1,3)", "X:L@(1,3)", "X:A@(1,1)", "garbage"):
        with pytest.raises(InvalidArgument):
            parse_state(bad, 4)
    with pytest.raises(InvalidArgument):
        parse_state(str(path), 4)


def test_parse_angle():
    assert parse_angle("pi/4") == math.pi / 4
    assert parse_angle("3pi/2") == 3 * math.pi / 2
    assert parse_angle(" PI ") == math.pi
    assert parse_angle("0.25") == 0.25
    for bad in ("tau", "", "inf", "nan"):
        with pytest.raises(InvalidArgument):
            parse_angle(bad)


def test_parse_sweep(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("dx_um,epsilon_rad,P1,P2\n0,0,0.5,0.5\n7.5,1.5707963268,1,0\n")
    recs = parse_sweep(path)
    assert len(recs) == 2 and recs[1].P1 == 1.0
    path.write_text("dx,eps,P1,P2\n")
    with pytest.raises(ParseError):
        parse_sweep(path)


def test_number_formatting():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(1e-16) == "0"
    assert fmt(-2e-17) == "0"
    assert fmt(7) == "7"
    assert fmt(True) == "true"
    assert json.loads(dumps({"x": math.pi, "y": [1e-20]})) == {"x": 3.14159265359, "y": [0.0]}


def test_manifest_fields(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    m = manifest("fit", {"a.csv": "sha256:00"}, 5)
    assert m["command"] == "fit" and m["seed"] == 5
    assert m["inputs"] == {"a.csv": "sha256:00"}
    assert m["timestamp"] == "1970-01-01T00:00:00+00:00"
    assert m["version"]


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet=st.sampled_from("0123456789.,-+eE\n#%abn, \"P_dmuclt34"), max_size=120))
def test_table_parsing_is_total(body):
    for text in (body, HEADER + body):
        try:
            parse_measurement_table(io.StringIO(text))
        except IqopError:
            pass


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=40))
def test_state_and_angle_parsing_is_total(text):
    for call in (lambda: parse_state(text, 4), lambda: parse_angle(text)):
        try:
            call()
        except IqopError:
            pass
