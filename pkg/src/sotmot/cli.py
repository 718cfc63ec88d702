"""Command line: ``sotmot track | evaluate | synth``.

Exit codes: 0 success, 1 usage, 2 I/O, 3 parse, 4 config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from . import KERNEL_BACKEND, __version__
from .appearance import MissingEmbedding
from .config import ConfigError, load_config
from .metrics import MalformedInput, evaluate
from .motio import DuplicateEntry, Kind, MotParseError, atomic_write_text, parse_mot_file, read_trajectories
from .sot import IncompatibleBackend
from .synth import InvalidScenario, ScenarioSpec, SpecOutOfBounds, generate

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_PARSE, EXIT_CONFIG = 0, 1, 2, 3, 4

log = logging.getLogger("sotmot")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _track_one(config_path: str, overrides: list[str], overlays: str | None) -> dict:
    from .overlay import dump_overlays
    from .pipeline import load_frames, run

    cfg = load_config(config_path, overrides)
    if cfg.output is None:
        raise ConfigError("output = <file> is required for track")
    result = run(cfg)
    if overlays:
        frames = load_frames(cfg)
        if frames is None:
            raise ConfigError("--dump-overlays needs frames = <dir>")
        dump_overlays(frames, result.trajectories, overlays)
    summary = dict(result.summary)
    summary["config"] = str(config_path)
    summary["output"] = str(cfg.output)
    return summary


def cmd_track(args) -> int:
    configs = args.config
    if args.dump_overlays and len(configs) > 1:
        raise UsageError("--dump-overlays takes a single config")
    if len(configs) == 1:
        summaries = [_track_one(configs[0], args.set, args.dump_overlays)]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_track_one, c, args.set, None) for c in configs]
            summaries = [f.result() for f in futures]
    for s in summaries:
        print(f"[{s['config']}] -> {s['output']}")
        for key in (
            "detections_in",
            "after_threshold",
            "after_nms",
            "sot_added",
            "after_sot",
            "post_sot_suppressed",
            "mot_input",
            "tracklets",
            "trajectories",
            "output_boxes",
        ):
            print(f"  {key:>20}: {s.get(key, 0)}")
        print(f"  {'seconds':>20}: {s['seconds']:.2f}")
    if args.summary:
        atomic_write_text(args.summary, json.dumps(summaries, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    gt = read_trajectories(args.gt, Kind.GROUND_TRUTH)
    hyp = read_trajectories(args.result, Kind.RESULTS)
    ignore = None
    if args.ignore:
        rows = parse_mot_file(args.ignore, Kind.DETECTIONS)
        ignore = [(r.frame, r.box) for frame_rows in rows.values() for r in frame_rows]
    report = evaluate(gt, hyp, iou_gate=args.iou, ignore=ignore)
    sys.stdout.write(report.to_table(args.name or Path(args.result).stem))
    if args.report:
        atomic_write_text(args.report, report.to_keyvalue())
    return EXIT_OK


def bundled_example() -> Path:
    return Path(str(resources.files("sotmot") / "data" / "example_scenario.json"))


def cmd_synth(args) -> int:
    path = bundled_example() if args.spec == "example" else Path(args.spec)
    spec = ScenarioSpec.load(path)
    seq = generate(spec)
    out = seq.write(args.out)
    print(f"wrote {len(seq.frames)} frames, {len(seq.detections)} detections, {sum(len(t) for t in seq.gt)} gt boxes to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sotmot", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} (kernels: {KERNEL_BACKEND})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    t = sub.add_parser("track", help="run the tracker on one or more sequences")
    t.add_argument("config", nargs="+", help="key = value config file(s); several run concurrently")
    t.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    t.add_argument("--dump-overlays", metavar="DIR", help="write PPM frames with identity-coloured boxes")
    t.add_argument("--summary", metavar="FILE", help="write stage counts as JSON")
    t.add_argument("-j", "--jobs", type=int, default=None, help="worker processes for several sequences")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("evaluate", help="CLEAR-MOT metrics of a result file")
    e.add_argument("gt")
    e.add_argument("result")
    e.add_argument("--ignore", help="MOT-format file of ignore regions")
    e.add_argument("--iou", type=float, default=0.5, help="match gate (default 0.5)")
    e.add_argument("--report", help="write key=value metrics here")
    e.add_argument("--name", default="", help="row label in the printed table")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("synth", help="generate a synthetic sequence")
    s.add_argument("spec", help="scenario JSON, or 'example' for the bundled one")
    s.add_argument("out", help="output directory")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sotmot: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MotParseError, MalformedInput, DuplicateEntry, MissingEmbedding, InvalidScenario) as exc:
        print(f"sotmot: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigError, IncompatibleBackend, SpecOutOfBounds) as exc:
        print(f"sotmot: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"sotmot: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
