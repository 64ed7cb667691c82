import json

import numpy as np
import pytest

from dmpflight import dmp, io, learning
from dmpflight.exceptions import DataError, ParseError

from conftest import discrete_params, smooth_weights


def _traj():
    t = np.arange(6) * 0.1
    y = np.column_stack([np.sin(t), 1e-7 * np.cos(t)])
    return dmp.Trajectory(0.1, y, 2 * y, 3 * y, ("psi", "theta"))


# ---------------------------------------------------------------------------
# trajectory CSV
# ---------------------------------------------------------------------------

def test_csv_layout(tmp_path):
    path = io.write_trajectory_csv(_traj(), tmp_path / "a.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    lines = raw.decode().splitlines()
    assert lines[0] == "t,psi,psi_dot,psi_ddot,theta,theta_dot,theta_ddot"
    assert len(lines) == 7
    # 12 significant digits
    assert lines[2].split(",")[1] == f"{np.sin(0.1):.12g}" == "0.0998334166468"
    assert lines[1].split(",")[0] == "0"


def test_csv_round_trip(tmp_path):
    tr = _traj()
    back = io.read_trajectory_csv(io.write_trajectory_csv(tr, tmp_path / "a.csv"))
    assert back.dof_names == tr.dof_names and back.dt == pytest.approx(0.1)
    for a, b in ((back.y, tr.y), (back.ydot, tr.ydot), (back.yddot, tr.yddot)):
        assert np.allclose(a, b, rtol=1e-11, atol=0)


def test_csv_is_deterministic(tmp_path):
    a = io.write_trajectory_csv(_traj(), tmp_path / "a.csv").read_bytes()
    b = io.write_trajectory_csv(_traj(), tmp_path / "b.csv").read_bytes()
    assert a == b


@pytest.mark.parametrize("body, where", [
    ("x,a\n0,1\n0.1,2\n", ":1:"),
    ("t,a\n0,1\n0.1\n0.2,3\n", ":3:"),
    ("t,a\n0,1\n0.1,2\n0.2,abc\n", ":4:"),
    ("t,a\n0,1\n0.1,nan\n", ":3:"),
    ("t,a\n0,1\n0.1,2\n0.3,2\n", "uniformly"),
    ("t,a\n1,1\n1.1,2\n", "start at 0"),
    ("t,a\n0,1\n", "two data rows"),
    ("", "empty"),
    ("t,a,a_ddot\n0,1,2\n0.1,1,2\n", ":1:"),
])
def test_csv_parse_errors(tmp_path, body, where):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(ParseError, match=where):
        io.read_demonstration_csv(p)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        io.read_trajectory_csv(tmp_path / "nope.csv")


def test_trajectory_needs_derivatives(tmp_path):
    p = tmp_path / "pos.csv"
    p.write_text("t,a\n" + "".join(f"{0.1 * k:.1f},{k}\n" for k in range(12)))
    with pytest.raises(ParseError):
        io.read_trajectory_csv(p)
    demo = io.read_demonstration_csv(p)
    assert demo.dof_names == ("a",) and demo.n_samples == 12


def test_demonstration_csv_carries_derivatives(tmp_path):
    y, yd, ydd = learning.minimum_jerk([0.0], [1.0], 1.0, 1e-2)
    demo = learning.Demonstration(1e-2, y, yd, ydd, ("x",))
    back = io.read_demonstration_csv(io.write_demonstration_csv(demo, tmp_path / "d.csv"))
    assert np.allclose(back.ydot, yd, atol=1e-11)
    assert np.allclose(back.yddot, ydd, atol=1e-10)


# ---------------------------------------------------------------------------
# params JSON
# ---------------------------------------------------------------------------

def _assert_same(p, q):
    assert p.kind == q.kind and p.dof_names == q.dof_names
    assert np.array_equal(p.basis.centers, q.basis.centers)
    assert np.array_equal(p.basis.widths, q.basis.widths)
    assert np.array_equal(p.weights, q.weights)
    for name in ("g", "y0", "ydot0", "y_m"):
        a, b = getattr(p, name), getattr(q, name)
        assert (a is None and b is None) or np.array_equal(a, b)
    for name in io._SCALARS:
        assert getattr(p, name) == getattr(q, name)


def test_params_round_trip_discrete(tmp_path):
    rng = np.random.default_rng(40)
    p = discrete_params(smooth_weights(rng, 2, 20), g=[1.0 / 3.0, -2.5], tau=1.7,
                        y0=[0.1, 0.2])
    q = io.read_params(io.write_params(p, tmp_path / "p.json"))
    _assert_same(p, q)
    doc = json.loads((tmp_path / "p.json").read_text())
    assert doc["format_version"] == 1 and doc["kind"] == "discrete"


def test_params_round_trip_rhythmic(tmp_path, sine_params):
    _assert_same(sine_params, io.read_params(io.write_params(sine_params, tmp_path / "s.json")))


def test_params_bad_version(tmp_path):
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"format_version": 2}))
    with pytest.raises(ParseError, match="format_version"):
        io.read_params(p)


def test_params_missing_field(tmp_path, sine_params):
    doc = io.params_to_dict(sine_params)
    del doc["weights"]
    with pytest.raises(ParseError, match="weights"):
        io.params_from_dict(doc)


def test_params_bad_json_line(tmp_path):
    p = tmp_path / "p.json"
    p.write_text('{\n  "format_version": 1,\n  "kind": \n}\n')
    with pytest.raises(ParseError, match=r"p\.json:4"):
        io.read_params(p)


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------

def test_bundled_scenario_loads():
    sc = io.load_scenario(io.bundled("obstacle.scenario"))
    assert sc.dof_names == ("psi", "theta") and sc.segmentation_dof == "theta"
    assert sc.waypoints_deg[-1] == [317.0, 28.0]
    assert np.allclose(sc.goal_vector("first", [0.0, 0.0]), np.deg2rad([150.0, 50.0]))
    assert np.allclose(sc.goal_vector("second", [1.0, 0.5]), [np.deg2rad(300.0), 0.5])
    assert sc.coupling.s_on == 0.85
    assert "psi" in io.bundled("obstacle.scenario").read_text().split("Label note")[1]


@pytest.mark.parametrize("doc, exc", [
    ({"colour": 1}, ParseError),
    ({"format_version": 3}, ParseError),
    ({"segmentation_dof": "phi"}, DataError),
    ({"goals_deg": {"first": {"phi": 1.0}}}, DataError),
    ({"goals_deg": {"third": {"psi": 1.0}}}, DataError),
    ({"dt": 0}, DataError),
    ({"n_basis": 1}, DataError),
    ({"coupling": {"mode": "two_way", "gain": -1}}, DataError),
    ({"coupling": {"gian": 1}}, ParseError),
    ({"heli": {"J_yy": -1}}, DataError),
    ({"demonstration": {"source": "missing.csv"}}, DataError),
    ({"demonstration": {"waypoints_deg": [[0, 0], [1, 1]], "durations": [1, 1]}}, DataError),
])
def test_scenario_validation(doc, exc, tmp_path):
    with pytest.raises(exc):
        io.scenario_from_dict(doc, tmp_path)


def test_scenario_file_demonstration_relative(tmp_path):
    (tmp_path / "d.csv").write_text("t,psi,theta\n0,0,0\n0.1,1,1\n")
    sc = io.scenario_from_dict({"demonstration": "d.csv"}, tmp_path)
    assert sc.demonstration_path == (tmp_path / "d.csv").resolve()


def test_yaml_error_has_line(tmp_path):
    p = tmp_path / "s.scenario"
    p.write_text("dt: 0.001\ncoupling: [unclosed\n")
    with pytest.raises(ParseError, match=r"s\.scenario:\d+"):
        io.load_scenario(p)
