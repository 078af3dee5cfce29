import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from axisym_fbp.grid import (
    DegeneratePoint,
    GridFormatError,
    PointKind,
    StreamGrid,
    VorticityModel,
    read_fbg,
    read_grid,
    read_grid_csv,
    write_fbg,
    write_grid_csv,
)

finite = st.floats(0.0, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(
    values=hnp.arrays(np.float64, st.tuples(st.integers(8, 20), st.integers(8, 20)), elements=finite),
    x_min=st.floats(0.01, 10.0),
    y_min=st.floats(-10.0, 10.0),
    dx=st.floats(1e-4, 1.0),
    dy=st.floats(1e-4, 1.0),
)
def test_fbg_round_trip_is_lossless(tmp_path, values, x_min, y_min, dx, dy):
    g = StreamGrid(values, x_min, y_min, dx, dy)
    p = tmp_path / "g.fbg"
    write_fbg(p, g)
    h = read_fbg(p)
    assert np.array_equal(h.values, g.values)
    assert (h.x_min, h.y_min, h.dx, h.dy) == (g.x_min, g.y_min, g.dx, g.dy)
    write_fbg(tmp_path / "h.fbg", h)
    assert (tmp_path / "h.fbg").read_bytes() == p.read_bytes()


def test_fbg_layout(tmp_path):
    vals = np.zeros((8, 9))
    vals[1, 0] = 1.5  # x index 1, y index 0: second value, x fastest
    vals[0, 1] = 2.5  # first value of the second row
    g = StreamGrid(vals, 0.5, -1.0, 0.25, 0.125)
    p = tmp_path / "g.fbg"
    write_fbg(p, g)
    raw = p.read_bytes()
    lines = raw.split(b"\n", 3)
    assert lines[0] == b"FBG1"
    assert lines[1] == b"8 9"
    assert [float(v) for v in lines[2].split()] == [0.5, -1.0, 0.25, 0.125]
    body = lines[3]
    assert len(body) == 8 * 72
    assert struct.unpack("<d", body[8:16])[0] == 1.5
    assert struct.unpack("<d", body[64:72])[0] == 2.5


def test_csv_round_trip(tmp_path):
    x = np.linspace(0.0, 1.0, 9)
    g = StreamGrid.from_function(lambda x, y: x * x * (1 + y * y), (0.0, 1.0), (-1.0, 0.0), (9, 11))
    p = tmp_path / "g.csv"
    write_grid_csv(p, g)
    h = read_grid_csv(p)
    assert np.array_equal(h.values, g.values)
    assert h.shape == g.shape
    assert np.allclose(h.x, x)
    assert read_grid(p).shape == g.shape


@pytest.mark.parametrize("payload,msg", [
    (b"FBG2\n8 8\n0 0 1 1\n", "magic"),
    (b"FBG1\n8\n0 0 1 1\n", "header"),
    (b"FBG1\n8 8\n0 0 1 1\n" + b"\0" * 10, "payload"),
])
def test_malformed_fbg(tmp_path, payload, msg):
    p = tmp_path / "bad.fbg"
    p.write_bytes(payload)
    with pytest.raises(GridFormatError, match=msg):
        read_fbg(p)


def test_negative_values_rejected_on_read(tmp_path):
    p = tmp_path / "neg.fbg"
    body = np.full(64, -1.0, dtype="<f8").tobytes()
    p.write_bytes(b"FBG1\n8 8\n0.5 0 1 1\n" + body)
    with pytest.raises(GridFormatError):
        read_fbg(p)


def test_unknown_extension_rejected(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("x,y,psi\n")
    with pytest.raises(GridFormatError):
        read_grid(p)


class TestStreamGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            StreamGrid(np.zeros((4, 4)), 0, 0, 1, 1)
        with pytest.raises(ValueError):
            StreamGrid(-np.ones((8, 8)), 0.5, 0, 1, 1)
        v = np.ones((8, 8))
        with pytest.raises(ValueError, match="axis"):
            StreamGrid(v, 0.0, 0, 1, 1)
        with pytest.raises(ValueError):
            StreamGrid(np.zeros((8, 8)), -1.0, 0, 1, 1)

    def test_geometry(self):
        g = StreamGrid(np.zeros((9, 9)), 0.0, -1.0, 0.125, 0.125)
        assert g.has_axis
        assert g.x_max == pytest.approx(1.0)
        assert g.y_max == pytest.approx(0.0)
        assert g.shape == (9, 9)


class TestPoints:
    @pytest.mark.parametrize("text,kind,loc", [
        ("type1:x0=1", PointKind.TYPE1, (1.0, 0.0)),
        ("type2:y0=-0.5", PointKind.TYPE2, (0.0, -0.5)),
        ("origin", PointKind.TYPE3, (0.0, 0.0)),
    ])
    def test_parse(self, text, kind, loc):
        p = DegeneratePoint.parse(text)
        assert p.kind is kind and p.location == loc
        assert DegeneratePoint.parse(p.label()) == p

    @pytest.mark.parametrize("text", ["type1:x0=-1", "type2:y0=1", "type1:y0=1", "corner"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            DegeneratePoint.parse(text)

    def test_kappa(self):
        assert [DegeneratePoint.parse(t).kappa for t in ("type1:x0=2", "type2:y0=-1", "origin")] == [1.5, 2.0, 2.5]


class TestVorticity:
    @pytest.mark.parametrize("model", [
        VorticityModel(),
        VorticityModel("constant", 0.7),
        VorticityModel("linear", -1.3),
        VorticityModel("tabulated", table_psi=(0.0, 0.5, 1.0), table_f=(1.0, 2.0, 0.5)),
    ])
    def test_primitive(self, model):
        psi = np.linspace(0.0, 1.5, 301)
        F = model.F(psi)
        assert F[0] == 0.0
        dF = np.gradient(F, psi)
        interior = np.ones_like(psi, dtype=bool)
        interior[[0, -1, 100, 200]] = False  # kinks of the tabulated model
        assert np.allclose(dF[interior], model.f(psi)[interior], atol=1e-9 + 1e-2 * (model.kind == "tabulated"))
        assert VorticityModel.from_dict(model.to_dict()) == model

    def test_parse_and_errors(self):
        assert VorticityModel.parse("constant:2").lam == 2.0
        with pytest.raises(ValueError):
            VorticityModel.parse("cubic:1")
        with pytest.raises(ValueError):
            VorticityModel.from_dict({"kind": "zero", "bogus": 1})
        with pytest.raises(ValueError):
            VorticityModel("tabulated", table_psi=(0.1, 1.0), table_f=(1.0, 1.0))
