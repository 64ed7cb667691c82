"""File formats: trajectory CSV, primitive parameter files and scenarios.

Trajectory CSV
    Header ``t,<dof>,<dof>_dot,<dof>_ddot,...``, comma separated, numbers
    with 12 significant digits, LF line endings.  A file holding only
    ``t`` and position columns is accepted as a demonstration.

Parameter files
    JSON documents with ``format_version: 1``.  Floats are written with
    ``repr`` precision so that a written file reads back equal field by
    field.

Scenario files
    YAML documents described by :class:`ScenarioConfig`.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .coupling import CouplingSpec
from .dmp import BasisSet, PrimitiveParams, Trajectory
from .exceptions import DataError, ParseError
from .heli import Gains, HeliParams
from .learning import Demonstration

FORMAT_VERSION = 1
CSV_DIGITS = 12
DT_RTOL = 1e-6


def _fmt(v: float) -> str:
    return f"{v:.{CSV_DIGITS}g}"


def trajectory_to_csv(traj: Trajectory) -> str:
    header = ["t"]
    cols = [traj.t]
    for j, name in enumerate(traj.dof_names):
        header += [name, f"{name}_dot", f"{name}_ddot"]
        cols += [traj.y[:, j], traj.ydot[:, j], traj.yddot[:, j]]
    data = np.column_stack(cols)
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in data]
    return "\n".join(lines) + "\n"


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(trajectory_to_csv(traj))
    return path


def _read_table(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    line, header = rows[0]
    header = [h.strip() for h in header]
    if not header or header[0] != "t":
        raise ParseError(f"{path}:{line}: header must start with 't'")
    if len(rows) < 3:
        raise ParseError(f"{path}: need at least two data rows")
    data = np.empty((len(rows) - 1, len(header)))
    for k, (line, row) in enumerate(rows[1:]):
        if len(row) != len(header):
            raise ParseError(f"{path}:{line}: expected {len(header)} fields, found {len(row)}")
        try:
            data[k] = [float(c) for c in row]
        except ValueError as exc:
            raise ParseError(f"{path}:{line}: {exc}") from None
        if not np.all(np.isfinite(data[k])):
            raise ParseError(f"{path}:{line}: non-finite value")
    t = data[:, 0]
    steps = np.diff(t)
    dt = float(steps.mean()) if steps.size else 0.0
    if not dt > 0 or np.max(np.abs(steps - dt)) > DT_RTOL * max(dt, 1.0):
        raise ParseError(f"{path}: time column must be uniformly increasing")
    if abs(t[0]) > DT_RTOL * dt:
        raise ParseError(f"{path}: time column must start at 0")
    return header, data, dt


def _split_columns(path, header):
    names = header[1:]
    if len(names) % 3 == 0 and names and all(
            names[3 * j + 1] == f"{names[3 * j]}_dot" and names[3 * j + 2] == f"{names[3 * j]}_ddot"
            for j in range(len(names) // 3)):
        return list(names[0::3]), True
    if any(n.endswith("_dot") or n.endswith("_ddot") for n in names):
        raise ParseError(f"{path}:1: derivative columns must follow '<dof>,<dof>_dot,<dof>_ddot'")
    return list(names), False


def read_trajectory_csv(path) -> Trajectory:
    header, data, dt = _read_table(path)
    names, full = _split_columns(path, header)
    if not full:
        raise ParseError(f"{path}:1: trajectory files need <dof>_dot and <dof>_ddot columns")
    return Trajectory(dt, data[:, 1::3], data[:, 2::3], data[:, 3::3], tuple(names))


def read_demonstration_csv(path) -> Demonstration:
    """Demonstration from either a full trajectory CSV or ``t`` plus positions."""
    header, data, dt = _read_table(path)
    names, full = _split_columns(path, header)
    if full:
        return Demonstration(dt, data[:, 1::3], data[:, 2::3], data[:, 3::3], tuple(names))
    return Demonstration(dt, data[:, 1:], dof_names=tuple(names))


def write_demonstration_csv(demo: Demonstration, path) -> Path:
    from .learning import differentiate
    return write_trajectory_csv(differentiate(demo).to_trajectory(), path)


# ---------------------------------------------------------------------------
# Parameter files
# ---------------------------------------------------------------------------

_SCALARS = ("tau", "alpha_z", "beta_z", "alpha_v", "beta_v", "mu", "r0", "a1", "a2")


def params_to_dict(p: PrimitiveParams) -> dict:
    def arr(a):
        return None if a is None else np.asarray(a, dtype=float).tolist()

    doc = {"format_version": FORMAT_VERSION, "kind": p.kind, "dof_names": list(p.dof_names),
           "basis": {"centers": arr(p.basis.centers), "widths": arr(p.basis.widths)},
           "g": arr(p.g), "y_m": arr(p.y_m), "y0": arr(p.y0), "ydot0": arr(p.ydot0)}
    for name in _SCALARS:
        doc[name] = float(getattr(p, name))
    doc["weights"] = arr(p.weights)
    return doc


def params_from_dict(doc: dict, source: str = "<params>") -> PrimitiveParams:
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: parameter document must be a mapping")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ParseError(f"{source}: unsupported format_version {version!r}")
    try:
        basis = BasisSet(np.asarray(doc["basis"]["centers"], dtype=float),
                         np.asarray(doc["basis"]["widths"], dtype=float))
        kwargs = {name: float(doc[name]) for name in _SCALARS if name in doc}
        for name in ("y_m", "y0", "ydot0"):
            if doc.get(name) is not None:
                kwargs[name] = np.asarray(doc[name], dtype=float)
        return PrimitiveParams(kind=doc["kind"], basis=basis,
                               weights=np.asarray(doc["weights"], dtype=float),
                               g=np.asarray(doc["g"], dtype=float),
                               dof_names=tuple(doc.get("dof_names", ())), **kwargs)
    except KeyError as exc:
        raise ParseError(f"{source}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise ParseError(f"{source}: {exc}") from None


def write_params(p: PrimitiveParams, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        json.dump(params_to_dict(p), fh, indent=2)
        fh.write("\n")
    return path


def read_params(path) -> PrimitiveParams:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return params_from_dict(doc, str(path))


def write_json(doc, path) -> Path:
    """Deterministic JSON (sorted keys, LF endings)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def bundled(name: str) -> Path:
    """Path of a file shipped in the package's ``data`` directory."""
    return Path(str(resources.files("dmpflight") / "data" / name))


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    """Everything the pipeline needs.

    Angles in ``waypoints_deg`` and ``goals_deg`` are degrees; everything
    is converted to radians on load.  ``demonstration`` is ``'synthetic'``
    or a CSV path (relative to the scenario file).
    """
    demonstration: str = "synthetic"
    dof_names: tuple = ("psi", "theta")
    waypoints_deg: list = field(default_factory=lambda: [[0.0, 0.0], [220.0, 60.0],
                                                         [317.0, 28.0]])
    durations: list = field(default_factory=lambda: [8.0, 8.0])
    segmentation_dof: str = "theta"
    n_basis: int = 50
    goals_deg: dict = field(default_factory=lambda: {"first": {"psi": 150.0, "theta": 50.0},
                                                     "second": {"psi": 300.0}})
    coupling: CouplingSpec = field(default_factory=CouplingSpec)
    heli: HeliParams = field(default_factory=HeliParams)
    gains: Gains = field(default_factory=Gains)
    dt: float = 1e-3
    output_dir: str = "pipeline_out"
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        self.dof_names = tuple(self.dof_names)
        if self.segmentation_dof not in self.dof_names:
            raise DataError(f"segmentation DOF {self.segmentation_dof!r} is not declared")
        for which, goals in self.goals_deg.items():
            if which not in ("first", "second"):
                raise DataError(f"goal overrides must be for 'first' or 'second', got {which!r}")
            for dof, val in (goals or {}).items():
                if dof not in self.dof_names:
                    raise DataError(f"goal override references undeclared DOF {dof!r}")
                if not math.isfinite(float(val)):
                    raise DataError(f"goal override for {dof!r} must be finite")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DataError("dt must be positive")
        if int(self.n_basis) < 2:
            raise DataError("n_basis must be at least 2")
        if self.demonstration == "synthetic":
            wp = np.asarray(self.waypoints_deg, dtype=float)
            if wp.ndim != 2 or wp.shape[1] != len(self.dof_names):
                raise DataError("waypoints must have one column per DOF")
            if len(self.durations) != len(wp) - 1 or min(self.durations) <= 0:
                raise DataError("need one positive duration per waypoint leg")
        elif not self.demonstration_path.is_file():
            raise DataError(f"demonstration file {self.demonstration_path} does not exist")

    @property
    def demonstration_path(self) -> Path:
        return (self.base_dir / self.demonstration).resolve()

    def goal_vector(self, which: str, current) -> np.ndarray:
        """Goals of one primitive in radians after applying the overrides."""
        g = np.array(current, dtype=float)
        for dof, val in (self.goals_deg.get(which) or {}).items():
            g[self.dof_names.index(dof)] = np.deg2rad(float(val))
        return g


_SCENARIO_KEYS = {"format_version", "demonstration", "segmentation_dof", "n_basis", "goals_deg",
                  "coupling", "heli", "gains", "dt", "output_dir"}


def scenario_from_dict(doc: dict, base_dir=None, source="<scenario>") -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: scenario must be a mapping")
    unknown = set(doc) - _SCENARIO_KEYS
    if unknown:
        raise ParseError(f"{source}: unknown scenario keys {sorted(unknown)}")
    if doc.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise ParseError(f"{source}: unsupported format_version {doc['format_version']!r}")
    kw = {}
    demo = doc.get("demonstration", {}) or {}
    if isinstance(demo, str):
        demo = {"source": demo}
    kw["demonstration"] = str(demo.get("source", "synthetic"))
    for key in ("dof_names", "waypoints_deg", "durations"):
        if key in demo:
            kw[key] = demo[key]
    for key in ("segmentation_dof", "output_dir"):
        if key in doc:
            kw[key] = str(doc[key])
    if "n_basis" in doc:
        kw["n_basis"] = int(doc["n_basis"])
    if "dt" in doc:
        kw["dt"] = float(doc["dt"])
    if "goals_deg" in doc:
        kw["goals_deg"] = dict(doc["goals_deg"] or {})
    try:
        if "coupling" in doc:
            kw["coupling"] = CouplingSpec(**(doc["coupling"] or {}))
        if "heli" in doc:
            kw["heli"] = HeliParams.from_dict(doc["heli"] or {})
        if "gains" in doc:
            kw["gains"] = Gains.from_dict(doc["gains"] or {})
    except TypeError as exc:
        raise ParseError(f"{source}: {exc}") from None
    kw["base_dir"] = Path(base_dir) if base_dir is not None else Path.cwd()
    return ScenarioConfig(**kw)


def read_yaml(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f":{mark.line + 1}" if mark is not None else ""
        raise ParseError(f"{path}{where}: {getattr(exc, 'problem', exc)}") from None
    return {} if doc is None else doc


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    return scenario_from_dict(read_yaml(path), path.parent, str(path))
