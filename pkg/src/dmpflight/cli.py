"""Command-line interface.

Every subcommand accepts ``--config FILE`` (YAML defaults), ``--out-dir DIR``
and ``--dt SECONDS``.  Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure (including a pipeline whose coupled system is not
certified contracting).

Data files are in SI units (radians for angles).  Angles typed on the
command line with a ``-deg`` option and angles printed in summaries are
in degrees.
"""
from __future__ import annotations

import argparse
import contextlib
import datetime
import sys
from pathlib import Path

import numpy as np

from . import __version__, dmp, io, learning
from . import coupling as cp
from .exceptions import DataError, NumericalError, ParseError
from .heli import Gains, HeliParams, simulate_tracking

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
RMS_WARNING = 0.05
BUILTINS = ("min-jerk", "obstacle", "sine", "cosine")

# Pass/fail thresholds of the pipeline summary.  They are chosen for this
# package; no reference values exist for them.
THRESHOLDS = {
    "label": "artifact-defined",
    "tracking_rms_deg": 2.0,
    "junction_position_jump_rad": 1e-3,
    "junction_velocity_jump_rad_s": 1e-2,
    "reproduction_rms_fraction": RMS_WARNING,
}

_CONFIG_KEYS = {"dt", "n_basis", "kind", "coupling", "heli", "gains", "segmentation_dof"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _info(msg: str):
    print(msg)


def _warn(msg: str):
    print(f"warning: {msg}", file=sys.stderr)


@contextlib.contextmanager
def _stage(name: str):
    """Prefix errors raised inside a pipeline stage with the stage name."""
    try:
        yield
    except (DataError, NumericalError) as exc:
        exc.args = (f"stage {name}: {exc}",)
        raise


# ---------------------------------------------------------------------------
# Shared option handling
# ---------------------------------------------------------------------------

def _load_config(args) -> dict:
    if args.config is None:
        return {}
    doc = io.read_yaml(args.config)
    if not isinstance(doc, dict):
        raise ParseError(f"{args.config}: config must be a mapping")
    if args.command != "pipeline":
        unknown = set(doc) - _CONFIG_KEYS
        if unknown:
            raise ParseError(f"{args.config}: unknown config keys {sorted(unknown)}")
    return doc


def _dt(args, default=dmp.DEFAULT_DT) -> float:
    if args.dt is not None:
        return args.dt
    return float(args.cfg.get("dt", default))


def _out(args, explicit, default_name) -> Path:
    return Path(explicit) if explicit else Path(args.out_dir) / default_name


def _coupling_spec(args, mode_default=cp.ONE_WAY) -> cp.CouplingSpec:
    values = dict(args.cfg.get("coupling") or {})
    for key in ("mode", "gain", "s_on", "stiffness"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    values.setdefault("mode", mode_default)
    try:
        return cp.CouplingSpec(**values)
    except TypeError as exc:
        raise ParseError(f"coupling: {exc}") from None


def builtin_demonstration(name: str, dt: float = dmp.DEFAULT_DT) -> learning.Demonstration:
    """Synthetic demonstrations shipped with the package.

    ``min-jerk``: rest-to-rest 0 to 1 in 1 s.  ``obstacle``: piecewise
    minimum-jerk through the obstacle maneuver waypoints (radians).
    ``sine`` and ``cosine``: one period of ``sin t`` / ``cos t``.
    """
    if name == "min-jerk":
        y, yd, ydd = learning.minimum_jerk([0.0], [1.0], 1.0, dt)
        return learning.Demonstration(dt, y, yd, ydd, ("y",))
    if name == "obstacle":
        sc = io.ScenarioConfig()
        return learning.waypoint_demonstration(np.deg2rad(sc.waypoints_deg), sc.durations, dt,
                                               sc.dof_names)
    if name in ("sine", "cosine"):
        t = np.arange(dmp.n_samples_for(2 * np.pi, dt)) * dt
        fn, d1, d2 = ((np.sin, np.cos, lambda u: -np.sin(u)) if name == "sine"
                      else (np.cos, lambda u: -np.sin(u), lambda u: -np.cos(u)))
        return learning.Demonstration(dt, fn(t), d1(t), d2(t), ("y",))
    raise DataError(f"unknown built-in demonstration {name!r}; choose from {BUILTINS}")


def _demonstration(args, source: str) -> learning.Demonstration:
    if source.startswith("builtin:"):
        return builtin_demonstration(source.split(":", 1)[1], _dt(args))
    demo = io.read_demonstration_csv(source)
    if args.dt is not None and not np.isclose(args.dt, demo.dt, rtol=1e-9):
        t = np.arange(demo.n_samples) * demo.dt
        demo = learning.Demonstration(args.dt, learning.resample(t, demo.y, args.dt),
                                      dof_names=demo.dof_names)
    return demo


def _report_rms(params, demo) -> np.ndarray:
    rms = learning.reproduction_rms(params, demo)
    for name, r in zip(params.dof_names, rms):
        _info(f"reproduction RMS {name}: {100 * r:.3f}% of range")
        if r > RMS_WARNING:
            _warn(f"reproduction RMS of {name} is {100 * r:.2f}% of range, "
                  f"above {100 * RMS_WARNING:g}%; consider more basis functions")
    return rms


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_learn(args) -> int:
    demo = _demonstration(args, args.demo)
    n_basis = args.n_basis if args.n_basis is not None else int(args.cfg.get("n_basis", 50))
    kind = args.kind or args.cfg.get("kind", dmp.DISCRETE)
    params = learning.learn(demo, n_basis=n_basis, kind=kind)
    path = io.write_params(params, _out(args, args.out, "params.json"))
    _report_rms(params, demo)
    _info(f"wrote {path}")
    return EXIT_OK


def cmd_rollout(args) -> int:
    params = io.read_params(args.params)
    if args.goal is not None and args.goal_deg is not None:
        raise DataError("give either --goal or --goal-deg")
    goal = args.goal if args.goal is not None else (
        None if args.goal_deg is None else np.deg2rad(args.goal_deg))
    if goal is not None:
        params = params.with_goal(goal)
    traj = dmp.rollout(params, args.y0, dt=_dt(args), duration=args.duration)
    path = io.write_trajectory_csv(traj, _out(args, args.out, "rollout.csv"))
    _info(f"wrote {path} ({traj.n_samples} samples)")
    return EXIT_OK


def cmd_segment(args) -> int:
    demo = _demonstration(args, args.demo)
    dof = args.dof or args.cfg.get("segmentation_dof") or demo.dof_names[0]
    if dof not in demo.dof_names:
        raise DataError(f"demonstration has no DOF {dof!r}")
    seg = learning.segment_at_peak(demo, dof)
    out = Path(args.out_dir)
    io.write_demonstration_csv(seg.first, out / "first.csv")
    io.write_demonstration_csv(seg.second, out / "second.csv")
    _info(f"split {dof} at sample {seg.split_index} (t = {seg.split_index * demo.dt:.6g} s); "
          f"wrote {out / 'first.csv'} and {out / 'second.csv'}")
    return EXIT_OK


def _prefixed(traj: dmp.Trajectory, prefix: str) -> dmp.Trajectory:
    return dmp.Trajectory(traj.dt, traj.y, traj.ydot, traj.yddot,
                          tuple(f"{prefix}_{n}" for n in traj.dof_names))


def _joined(a: dmp.Trajectory, b: dmp.Trajectory) -> dmp.Trajectory:
    return dmp.Trajectory(a.dt, np.hstack([a.y, b.y]), np.hstack([a.ydot, b.ydot]),
                          np.hstack([a.yddot, b.yddot]), a.dof_names + b.dof_names)


def cmd_couple(args) -> int:
    p1, p2 = io.read_params(args.first), io.read_params(args.second)
    spec = _coupling_spec(args)
    dt = _dt(args)
    report = {"mode": spec.mode, "gain": spec.gain, "stiffness": spec.stiffness}
    if spec.mode == cp.ONE_WAY:
        run = cp.one_way_rollout(p1, p2, spec, dt, args.duration)
        names = ("leader", "follower")
        report["s_on"] = spec.s_on
        if run.activation_index is None:
            report["certificate"] = None
            report["decay_rate"] = None
        else:
            report["certificate"] = cp.one_way_certificate(run).to_dict()
            report["decay_rate"] = cp.gap_decay_rate(run)
    else:
        run = cp.two_way_rollout(p1, p2, spec, dt, args.duration)
        names = ("first", "second")
        report["certificate"] = cp.two_way_certificate(run).to_dict()
    report["final_gap"] = float(run.gap[-1])
    report["settled_gap"] = cp.settled_gap(run)
    traj = _joined(_prefixed(run.leader, names[0]), _prefixed(run.follower, names[1]))
    path = io.write_trajectory_csv(traj, _out(args, args.out, "couple.csv"))
    io.write_json(report, Path(args.out_dir) / "couple_report.json")
    cert = report["certificate"]
    verdict = "not checked (coupling never active)" if cert is None else (
        "contracting" if cert["contracting"] else "NOT contracting")
    _info(f"wrote {path}; certificate: {verdict}; settled gap {report['settled_gap']:.3g}")
    return EXIT_OK


def cmd_blend(args) -> int:
    a, b = io.read_params(args.first), io.read_params(args.second)
    blended = cp.blend_primitives(a, b, args.alpha, args.beta)
    io.write_params(blended, _out(args, args.params_out, "blend.json"))
    traj = dmp.rollout(blended, dt=_dt(args), duration=args.duration)
    path = io.write_trajectory_csv(traj, _out(args, args.out, "blend.csv"))
    _info(f"wrote {path}")
    return EXIT_OK


def cmd_check(args) -> int:
    params = io.read_params(args.params)
    dt = _dt(args)
    report = {"hierarchy": cp.hierarchy_certificate(params, dt).to_dict()}
    verdict = report["hierarchy"]["contracting"]
    if args.partner is not None:
        partner = io.read_params(args.partner)
        spec = _coupling_spec(args)
        if spec.mode == cp.ONE_WAY:
            run = cp.one_way_rollout(partner, params, spec, dt)
            if run.activation_index is None:
                raise DataError("coupling never activates (s_on = 1); nothing to certify")
            cert = cp.one_way_certificate(run)
        else:
            cert = cp.two_way_certificate(cp.two_way_rollout(params, partner, spec, dt))
        report["coupling"] = dict(cert.to_dict(), mode=spec.mode, gain=spec.gain)
        verdict = verdict and cert.verdict
    report["contracting"] = bool(verdict)
    path = io.write_json(report, _out(args, args.out, "contraction.json"))
    _info(f"contracting: {'yes' if verdict else 'no'}; wrote {path}")
    return EXIT_OK


def _heli_setup(cfg):
    try:
        return HeliParams.from_dict(cfg.get("heli") or {}), Gains.from_dict(cfg.get("gains") or {})
    except TypeError as exc:
        raise ParseError(f"config: {exc}") from None


def cmd_simulate(args) -> int:
    reference = io.read_trajectory_csv(args.reference)
    p, gains = _heli_setup(args.cfg)
    result = simulate_tracking(reference, p, gains, dt=_dt(args, reference.dt))
    path = io.write_trajectory_csv(result.actual, _out(args, args.out, "actual.csv"))
    rms_deg = {k: float(np.rad2deg(v)) for k, v in result.rms.items()}
    io.write_json({"tracking_rms_deg": rms_deg}, Path(args.out_dir) / "tracking.json")
    _info(f"wrote {path}; RMS psi {rms_deg['psi']:.4f} deg, theta {rms_deg['theta']:.4f} deg")
    return EXIT_OK


def _scenario(args) -> io.ScenarioConfig:
    path = args.scenario or args.config or io.bundled("obstacle.scenario")
    doc = io.read_yaml(path)
    if args.dt is not None:
        doc = dict(doc, dt=args.dt)
    return io.scenario_from_dict(doc, Path(path).parent, str(path))


def run_pipeline(sc: io.ScenarioConfig, out_dir: Path, timestamp: bool = False) -> dict:
    """Run the full demonstration-to-tracking pipeline and write its artifacts.

    Returns the summary dictionary (also written to ``summary.json``).
    """
    out_dir = Path(out_dir)
    dt = sc.dt
    with _stage("demonstration"):
        if sc.demonstration == "synthetic":
            demo = learning.waypoint_demonstration(np.deg2rad(sc.waypoints_deg), sc.durations,
                                                   dt, sc.dof_names)
        else:
            demo = io.read_demonstration_csv(sc.demonstration_path)
            if tuple(demo.dof_names) != sc.dof_names:
                demo = learning.Demonstration(demo.dt, demo.y, demo.ydot, demo.yddot,
                                              sc.dof_names)
        io.write_demonstration_csv(demo, out_dir / "demonstration.csv")
    with _stage("segment"):
        seg = learning.segment_at_peak(demo, sc.segmentation_dof)
    with _stage("learn"):
        learned = [learning.learn(part, n_basis=sc.n_basis) for part in (seg.first, seg.second)]
        learn_rms = [learning.reproduction_rms(p, part)
                     for p, part in zip(learned, (seg.first, seg.second))]
    with _stage("retarget"):
        first = learned[0].with_goal(sc.goal_vector("first", learned[0].g))
        second = learned[1].with_goal(sc.goal_vector("second", learned[1].g))
        io.write_params(first, out_dir / "primitive1.json")
        io.write_params(second, out_dir / "primitive2.json")
    with _stage("concatenate"):
        cat = cp.concatenate_detailed(first, second, sc.coupling, dt)
        io.write_trajectory_csv(cat.merged, out_dir / "merged.csv")
    with _stage("check"):
        contraction = {"hierarchy": {"primitive1": cp.hierarchy_certificate(first, dt).to_dict(),
                                     "primitive2": cp.hierarchy_certificate(second, dt).to_dict()}}
        verdict = all(h["contracting"] for h in contraction["hierarchy"].values())
        if cat.coupled is not None:
            cert = cp.one_way_certificate(cat.coupled)
            contraction["coupling"] = dict(cert.to_dict(), gain=sc.coupling.gain,
                                           stiffness=sc.coupling.stiffness)
            verdict = verdict and cert.verdict
        else:
            contraction["coupling"] = None
        contraction["contracting"] = bool(verdict)
        io.write_json(contraction, out_dir / "contraction.json")
    flags = []
    if not verdict:
        flags.append("coupled system is not certified contracting")
    junction = cat.junction.to_dict()
    junction["continuous"] = cat.junction.is_continuous(THRESHOLDS["junction_position_jump_rad"],
                                                        THRESHOLDS["junction_velocity_jump_rad_s"])
    if not junction["continuous"]:
        flags.append("merged trajectory is discontinuous at the junction")
    summary = {
        "thresholds": THRESHOLDS,
        "split_index": seg.split_index,
        "split_time_s": seg.split_index * dt,
        "goals_deg": {"primitive1": dict(zip(sc.dof_names, np.rad2deg(first.g).tolist())),
                      "primitive2": dict(zip(sc.dof_names, np.rad2deg(second.g).tolist()))},
        "reproduction_rms_fraction": {f"primitive{i + 1}": dict(zip(sc.dof_names, r.tolist()))
                                      for i, r in enumerate(learn_rms)},
        "coupling": {"mode": sc.coupling.mode, "gain": sc.coupling.gain,
                     "s_on": sc.coupling.s_on, "stiffness": sc.coupling.stiffness},
        "junction": junction,
        "contracting": bool(verdict),
    }
    try:
        with _stage("simulate"):
            p = sc.heli
            track = simulate_tracking(cat.merged, p, sc.gains, dt)
            io.write_trajectory_csv(track.actual, out_dir / "actual.csv")
    except (DataError, NumericalError):
        summary["tracking_rms_deg"] = None
        summary["flags"] = flags + ["tracking simulation failed"]
        summary["passed"] = False
        _write_summary(summary, out_dir, timestamp)
        raise
    rms_deg = {k: float(np.rad2deg(v)) for k, v in track.rms.items()}
    summary["tracking_rms_deg"] = rms_deg
    if max(rms_deg.values()) > THRESHOLDS["tracking_rms_deg"]:
        flags.append("tracking RMS above threshold")
    if max(max(r) for r in learn_rms) > THRESHOLDS["reproduction_rms_fraction"]:
        flags.append("reproduction RMS above threshold")
    summary["flags"] = flags
    summary["passed"] = not flags
    _write_summary(summary, out_dir, timestamp)
    return summary


def _write_summary(summary: dict, out_dir: Path, timestamp: bool):
    io.write_json(summary, out_dir / "summary.json")
    lines = []
    if timestamp:
        now = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        lines.append(f"# generated {now}")
    j = summary["junction"]
    lines += [f"thresholds: {THRESHOLDS['label']}",
              f"junction position jump: {j['position_jump']:.3e} rad",
              f"junction velocity jump: {j['velocity_jump']:.3e} rad/s",
              f"junction continuous: {'yes' if j['continuous'] else 'no'}",
              f"contracting: {'yes' if summary['contracting'] else 'no'}"]
    rms = summary.get("tracking_rms_deg")
    if rms:
        lines += [f"tracking RMS {k}: {v:.4f} deg" for k, v in sorted(rms.items())]
    lines += [f"flag: {f}" for f in summary["flags"]]
    lines.append(f"passed: {'yes' if summary['passed'] else 'no'}")
    with open(out_dir / "summary.txt", "w", newline="\n", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_pipeline(args) -> int:
    sc = _scenario(args)
    out_dir = Path(args.out_dir) if args.out_dir_given else Path(sc.output_dir)
    summary = run_pipeline(sc, out_dir, args.timestamp)
    with open(out_dir / "summary.txt", encoding="ascii") as fh:
        sys.stdout.write(fh.read())
    for flag in summary["flags"]:
        _warn(flag)
    if not summary["contracting"]:
        return EXIT_NUMERICAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML file with default settings")
    common.add_argument("--out-dir", default=None, help="output directory (default: .)")
    common.add_argument("--dt", type=float, default=None, help="time step in seconds")

    parser = _Parser(prog="dmpflight", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("learn", parents=[common], help="learn a primitive from a demonstration")
    p.add_argument("demo", help=f"demonstration CSV or builtin:NAME with NAME in {BUILTINS}")
    p.add_argument("--n-basis", type=int)
    p.add_argument("--kind", choices=dmp.KINDS)
    p.add_argument("--out", help="params file (default: OUT_DIR/params.json)")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("rollout", parents=[common], help="integrate a primitive to a CSV")
    p.add_argument("params")
    p.add_argument("--duration", type=float)
    p.add_argument("--y0", type=_vector, help="start position, comma separated")
    p.add_argument("--goal", type=_vector, help="new goal in file units")
    p.add_argument("--goal-deg", type=_vector, help="new goal in degrees")
    p.add_argument("--out", help="CSV path (default: OUT_DIR/rollout.csv)")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("segment", parents=[common], help="split a demonstration at a peak")
    p.add_argument("demo")
    p.add_argument("--dof", help="DOF whose maximum splits the demonstration")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("couple", parents=[common], help="run two coupled primitives")
    p.add_argument("first", help="leader (one-way) or first primitive (two-way)")
    p.add_argument("second", help="follower (one-way) or second primitive (two-way)")
    _coupling_options(p)
    p.add_argument("--duration", type=float)
    p.add_argument("--out", help="CSV path (default: OUT_DIR/couple.csv)")
    p.set_defaults(func=cmd_couple)

    p = sub.add_parser("blend", parents=[common], help="blend two primitives' weights")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--duration", type=float)
    p.add_argument("--out", help="CSV path (default: OUT_DIR/blend.csv)")
    p.add_argument("--params-out", help="params path (default: OUT_DIR/blend.json)")
    p.set_defaults(func=cmd_blend)

    p = sub.add_parser("check", parents=[common], help="contraction checks of a primitive")
    p.add_argument("params")
    p.add_argument("--partner", help="second primitive; adds a coupling certificate")
    _coupling_options(p)
    p.add_argument("--out", help="report path (default: OUT_DIR/contraction.json)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", parents=[common], help="track a psi/theta reference")
    p.add_argument("reference", help="trajectory CSV with psi and theta columns")
    p.add_argument("--out", help="CSV path (default: OUT_DIR/actual.csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", parents=[common], help="run a scenario end to end")
    p.add_argument("scenario", nargs="?",
                   help="scenario YAML (default: --config, else the bundled obstacle.scenario)")
    p.add_argument("--timestamp", action="store_true",
                   help="add a timestamp header line to summary.txt")
    p.set_defaults(func=cmd_pipeline)
    return parser


def _coupling_options(p):
    p.add_argument("--mode", choices=cp.MODES)
    p.add_argument("--gain", type=float, help="coupling gain K")
    p.add_argument("--s-on", dest="s_on", type=float, help="activation phase in [0, 1]")
    p.add_argument("--stiffness", type=float, help="extra coupling stiffness c")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.out_dir_given = args.out_dir is not None
    if args.out_dir is None:
        args.out_dir = "."
    if args.dt is not None and not args.dt > 0:
        parser.error("--dt must be positive")
    try:
        args.cfg = _load_config(args)
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
