"""Command line front end.

Subcommands: ``synth``, ``gen-scenarios``, ``baseline``, ``eval``, ``report``.
Exit codes: 0 ok, 2 validation error, 3 I/O error. Every failure prints one
line starting with ``error:`` on stderr.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import baselines, bench
from .metrics import (
    MetricConfig,
    aggregate,
    parse_report_csv,
    report_csv,
    report_markdown,
)
from .priors import PriorError, PriorParams, RegimeConfig, parse_scenarios
from .scene_io import SceneFormatError, Split, load_manifest, write_text_atomic

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 2, 3
SEED_ENV = "MAPCOMP_SEED"


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise ValidationError(message.replace("\n", " "))


def _thresholds(text: str):
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid threshold list {text!r}") from None


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--help", action="help", help="show this help and exit")
    p.add_argument("--config", type=Path, help="key=value file; flags override it")
    p.add_argument("--seed", type=int, default=0)


def _add_baseline_flags(p: argparse.ArgumentParser, required: bool):
    p.add_argument("--baseline" if not required else "--kind", dest="baseline",
                   choices=[k.value for k in baselines.Kind], required=required)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--drop-rate", type=float, default=0.0)
    p.add_argument("--points", type=int, default=20, help="points per predicted element")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mapcomp", add_help=False, description=__doc__.splitlines()[0])
    parser.add_argument("--help", action="help", help="show this help and exit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", add_help=False, help="write synthetic scenes and a manifest")
    _add_common(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--lane-count-min", type=int, default=1)
    p.add_argument("--lane-count-max", type=int, default=4)
    p.add_argument("--curvature-max", type=float, default=0.02)
    p.add_argument("--crossing-count-min", type=int, default=0)
    p.add_argument("--crossing-count-max", type=int, default=2)
    p.add_argument("--dash-probability", type=float, default=0.5)
    p.add_argument("--lane-width", type=float, default=3.5)
    p.add_argument("--split", choices=[s.value for s in Split], default="val")

    p = sub.add_parser("gen-scenarios", add_help=False, help="derive prior/complement pairs")
    _add_common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--scenarios", default="benchmark",
                   help="'all', 'benchmark' or a comma separated list")
    p.add_argument("--regime", choices=["augmentation", "naive"], default="augmentation")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--lane-width", type=float, default=3.5)
    p.add_argument("--margin", type=float, default=0.5)

    p = sub.add_parser("baseline", add_help=False, help="write reference predictions")
    _add_common(p)
    p.add_argument("--scenario-dir", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_baseline_flags(p, required=True)

    p = sub.add_parser("eval", add_help=False, help="score predictions, write reports")
    _add_common(p)
    p.add_argument("--scenario-dir", type=Path, required=True)
    p.add_argument("--predictions", type=Path)
    _add_baseline_flags(p, required=False)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--thresholds", type=_thresholds, default=(0.5, 1.0, 1.5))
    p.add_argument("--resample-n", type=int, default=100)
    p.add_argument("--prior-handling", choices=["exclude", "all"], default="exclude")
    p.add_argument("--scenarios", default=None, help="restrict to these scenarios")
    p.add_argument("--svg-dir", type=Path, help="write per-pair SVG overlays here")

    p = sub.add_parser("report", add_help=False, help="merge report rows and recompute means")
    p.add_argument("--help", action="help", help="show this help and exit")
    p.add_argument("--merge", type=Path, nargs="+", required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    return parser


def _read_config(path: Path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value.strip('"')
    return out


def _config_path(argv) -> Path | None:
    path = None
    for i, a in enumerate(argv):
        if a == "--config":
            if i + 1 >= len(argv):
                raise ValidationError("argument --config: expected one argument")
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    return None if path is None else Path(path)


def _apply_config(parser, command: str, path: Path) -> None:
    """Install config values as subcommand defaults so explicit flags win."""
    subparser = parser._subparsers._group_actions[0].choices[command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in _read_config(path).items():
        if key not in actions or key in ("config", "help"):
            raise ValidationError(f"unknown config key {key!r}")
        act = actions[key]
        try:
            if act.nargs == "+":
                defaults[key] = [act.type(v) if act.type else v for v in value.split()]
            else:
                defaults[key] = act.type(value) if act.type else value
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ValidationError(f"config key {key}: {exc}") from None
        if act.choices is not None and defaults[key] not in act.choices:
            raise ValidationError(f"config key {key}: invalid choice {value!r}")
        act.required = False
    subparser.set_defaults(**defaults)


def parse_args(argv):
    parser = build_parser()
    config = _config_path(argv)
    if config is not None:
        command = next((a for a in argv if a in COMMANDS), None)
        if command is not None:
            _apply_config(parser, command, config)
    args = parser.parse_args(argv)
    explicit_seed = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    if hasattr(args, "seed") and not explicit_seed and os.environ.get(SEED_ENV):
        try:
            args.seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ValidationError(f"{SEED_ENV} must be an integer") from None
    return args


def _baseline_kind(args) -> baselines.BaselineKind:
    try:
        return baselines.BaselineKind(args.baseline, args.sigma, args.drop_rate)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def cmd_synth(args) -> int:
    if args.count < 0:
        raise ValidationError("--count must be non-negative")
    try:
        ranges = bench.SynthRanges(
            lane_count=(args.lane_count_min, args.lane_count_max),
            curvature_max=args.curvature_max,
            crossing_count=(args.crossing_count_min, args.crossing_count_max),
            dash_probability=args.dash_probability,
            lane_width=args.lane_width,
        )
        bench.synth_dataset(args.count, args.out_dir, ranges, args.seed, Split(args.split))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    return EXIT_OK


def cmd_gen_scenarios(args) -> int:
    try:
        manifest = load_manifest(args.manifest, seed=args.seed)
        regime = RegimeConfig(args.regime, tuple(parse_scenarios(args.scenarios)), args.seed)
        bench.generate_scenarios(manifest, regime, args.out_dir,
                                 PriorParams(args.lane_width, args.margin))
    except (PriorError, SceneFormatError) as exc:
        raise ValidationError(str(exc)) from None
    return EXIT_OK


def cmd_baseline(args) -> int:
    kind = _baseline_kind(args)
    text = bench.baseline_predictions(args.scenario_dir, kind, args.seed, args.points)
    write_text_atomic(args.out, text)
    return EXIT_OK


def cmd_eval(args) -> int:
    if (args.predictions is None) == (args.baseline is None):
        raise ValidationError("give exactly one of --predictions or --baseline")
    if args.workers < 1:
        raise ValidationError("--workers must be at least 1")
    try:
        config = MetricConfig(args.thresholds, args.resample_n, args.prior_handling)
        scenarios = parse_scenarios(args.scenarios) if args.scenarios else None
    except (ValueError, PriorError) as exc:
        raise ValidationError(str(exc)) from None
    preds = kind = None
    if args.predictions is not None:
        try:
            preds = baselines.parse_predictions(args.predictions.read_text(encoding="utf-8"))
        except baselines.PredictionFormatError as exc:
            raise ValidationError(f"{args.predictions}: {exc}") from None
    else:
        kind = _baseline_kind(args)
    try:
        result = bench.evaluate(args.scenario_dir, preds, kind, args.seed, config,
                                args.workers, args.points, scenarios)
    except (PriorError, SceneFormatError) as exc:
        raise ValidationError(str(exc)) from None
    bench.write_reports(result, args.out_dir, config)
    if args.svg_dir is not None:
        _write_overlays(args, preds, kind)
    if result.errors:
        write_text_atomic(args.out_dir / "errors.txt", "".join(e + "\n" for e in result.errors))
        raise ValidationError(
            f"{len(result.errors)} prediction group(s) reference unknown scene/scenario; "
            f"see {args.out_dir / 'errors.txt'}"
        )
    return EXIT_OK


def _write_overlays(args, preds, kind):
    for sid, s in bench.load_scenario_index(args.scenario_dir):
        ps = bench.load_pair(args.scenario_dir, sid, s)
        if kind is not None:
            mine = baselines.predict(kind, ps, args.seed, args.points)
        else:
            mine = preds.get((sid, s.value), [])
        write_text_atomic(args.svg_dir / f"{sid}__{s.value}.svg", bench.overlay_svg(ps, mine))


def cmd_report(args) -> int:
    rows = []
    for path in args.merge:
        try:
            rows.extend(parse_report_csv(path.read_text(encoding="utf-8")))
        except ValueError as exc:
            raise ValidationError(f"{path}: {exc}") from None
    if not rows:
        raise ValidationError("no report rows to merge")
    mean = aggregate(rows)
    write_text_atomic(args.out_dir / "report.csv", report_csv(rows, mean))
    write_text_atomic(args.out_dir / "report.md", report_markdown(rows, mean))
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "gen-scenarios": cmd_gen_scenarios,
    "baseline": cmd_baseline,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        detail = f"{exc.strerror}: {exc.filename}" if exc.filename else str(exc)
        print(f"error: {detail}".replace("\n", " "), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
