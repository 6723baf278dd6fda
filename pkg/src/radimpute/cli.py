"""Command-line front end: ``radimpute <subcommand> ...``.

Progress goes to stderr and data goes to files; only ``locate`` writes to
stdout (one JSON object per query). Exit codes: 0 success, 2 usage or
validation error, 1 anything else.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .survey import ValidationError

log = logging.getLogger("radimpute")


def parse_gammas(text: str) -> list[float]:
    """``"1..20"`` (inclusive integer range) or a comma list such as ``"1,2,5"``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return [float(g) for g in range(int(lo), int(hi) + 1)]
        return [float(g) for g in text.split(",") if g]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad gamma list {text!r}") from None


def _load_topology(source: str):
    from .geometry import MultiPolygon
    from .simulator import VENUES, VenueSpec

    if source in VENUES:
        return VENUES[source]().walls
    obj = json.loads(Path(source).read_text())
    if "aps" in obj:
        return VenueSpec.from_json(obj).walls
    return MultiPolygon.from_geojson(obj)


# subcommands -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .simulator import VenueSpec, generate_survey
    from .survey import write_survey

    spec = VenueSpec.load(args.venue)
    records, truth = generate_survey(spec, args.seed, p_mar=args.p_mar)
    write_survey(records, args.out_survey)
    if args.out_truth:
        truth.to_jsonl(args.out_truth)
    if args.out_venue:
        Path(args.out_venue).write_text(json.dumps(spec.to_json(), indent=1) + "\n")
    log.info("simulated %d survey records on %s", len(records), spec.name)
    return 0


def cmd_build_map(args) -> int:
    from .mapbuild import build_radio_map
    from .survey import read_survey, write_radio_map

    rmap = build_radio_map(read_survey(args.input), args.epsilon, n_aps=args.n_aps)
    write_radio_map(rmap, args.output)
    log.info("built radio map with %d records over %d APs", len(rmap), rmap.n_aps)
    return 0


def cmd_differentiate(args) -> int:
    from .differentiator import differentiate_map
    from .survey import read_radio_map, write_mask

    rmap = read_radio_map(args.map)
    topology = _load_topology(args.topology) if args.topology else None
    if args.method == "tac" and topology is None:
        raise ValidationError("--method tac needs --topology")
    mask = differentiate_map(rmap, args.method, args.eta, topology=topology, k_upper=args.k_upper,
                             gammas=args.gammas, seed=args.seed)
    write_mask(mask, args.output)
    log.info("mask: %d MAR, %d MNAR cells", int((mask == 0).sum()), int((mask == -1).sum()))
    return 0


def cmd_impute(args) -> int:
    from . import bisim
    from .survey import read_mask, read_radio_map, write_radio_map

    rmap = read_radio_map(args.map)
    mask = read_mask(args.mask)
    config = bisim.BiSimConfig(hidden=args.H, seq_len=args.T, batch_size=args.batch_size, epochs=args.epochs,
                               lr=args.lr, seed=args.seed, plateau_tol=args.plateau_tol)
    model = bisim.BiSimModel.load(args.load) if args.load else None
    dense, model, losses = bisim.fit_impute(rmap, mask, config, model)
    write_radio_map(dense, args.output)
    if args.checkpoint and model is not None:
        model.save(args.checkpoint)
    if losses:
        log.info("trained %d epochs, final loss %.6f", len(losses), losses[-1])
    return 0


def cmd_locate(args) -> int:
    from .positioning import locate_all
    from .survey import MNAR_FILL, read_radio_map

    ref = read_radio_map(args.map)
    queries = read_radio_map(args.queries)
    fps = np.where(np.isnan(queries.fingerprints), MNAR_FILL, queries.fingerprints)
    est = locate_all(ref, fps, args.alg, args.k)
    out = sys.stdout
    for t, (x, y) in zip(queries.times, est):
        out.write(json.dumps({"t": float(t), "x": round(float(x), 6), "y": round(float(y), 6)}) + "\n")
    return 0


def cmd_evaluate(args) -> int:
    from .evaluation import ExperimentConfig, run_experiment

    obj = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.seed_given and "seeds" not in obj:
        obj["seeds"] = [args.seed]
    cfg = ExperimentConfig.from_json(obj)
    report = run_experiment(cfg, args.out)
    log.info("wrote %d sweep tables to %s", len(report["sweeps"]), args.out)
    return 0


# parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radimpute", description="Radio map differentiation, imputation and positioning.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=int, default=None, help="global random seed (default 0)")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more progress output on stderr")
    p.add_argument("--config", dest="global_config", default=None,
                   help="JSON file of option defaults, keyed by option name (command-line flags win)")
    # --seed and --verbose are also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)
    sub.add_parser = add_parser

    s = sub.add_parser("simulate", help="generate a synthetic walking survey")
    s.add_argument("--venue", required=True, help="venue JSON file or a built-in venue (four_rooms, mall)")
    s.add_argument("--p-mar", type=float, default=None, help="MAR drop probability (default from venue)")
    s.add_argument("--out-survey", required=True)
    s.add_argument("--out-truth", default=None)
    s.add_argument("--out-venue", default=None, help="also write the venue as JSON")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("build-map", help="merge a survey table into a radio map")
    s.add_argument("--input", required=True)
    s.add_argument("--epsilon", type=float, default=1.0)
    s.add_argument("--n-aps", type=int, default=None, help="fingerprint dimension (default: largest AP index + 1)")
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_build_map)

    s = sub.add_parser("differentiate", help="label null RSSIs as MAR or MNAR")
    s.add_argument("--map", required=True)
    s.add_argument("--method", choices=["elkm", "akm", "tac", "mar-only", "mnar-only"], default="tac")
    s.add_argument("--eta", type=float, default=0.1)
    s.add_argument("--topology", default=None, help="GeoJSON walls, venue JSON or built-in venue name")
    s.add_argument("--k-upper", "--U", dest="k_upper", type=int, default=200)
    s.add_argument("--gammas", type=parse_gammas, default=parse_gammas("1..20"))
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_differentiate)

    s = sub.add_parser("impute", help="fill a radio map with the bidirectional imputer")
    s.add_argument("--map", required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--epochs", type=int, default=500)
    s.add_argument("--T", "--seq-len", dest="T", type=int, default=5)
    s.add_argument("--H", "--hidden", dest="H", type=int, default=64)
    s.add_argument("--batch-size", type=int, default=32)
    s.add_argument("--lr", type=float, default=0.001)
    s.add_argument("--plateau-tol", type=float, default=None)
    s.add_argument("--checkpoint", default=None, help="save the trained model here")
    s.add_argument("--load", default=None, help="skip training and use this saved model")
    s.set_defaults(func=cmd_impute)

    s = sub.add_parser("locate", help="estimate query locations against a dense radio map")
    s.add_argument("--map", required=True)
    s.add_argument("--queries", required=True, help="radio map JSONL whose fingerprints are the queries")
    s.add_argument("--alg", choices=["knn", "wknn"], default="wknn")
    s.add_argument("--k", type=int, default=3)
    s.set_defaults(func=cmd_locate)

    s = sub.add_parser("evaluate", help="run the experiment sweeps")
    s.add_argument("--config", default=None, help="experiment JSON")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)
    return p


def _apply_config_file(parser, argv, args):
    """Fill options the user did not type from the ``--config`` defaults file."""
    defaults = json.loads(Path(args.global_config).read_text())
    if not isinstance(defaults, dict):
        raise ValidationError("--config file must hold a JSON object")
    typed = {a.split("=")[0] for a in argv if a.startswith("--")}
    for key, value in defaults.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ValidationError(f"--config names unknown option {key!r}")
        if f"--{key.replace('_', '-')}" not in typed:
            setattr(args, dest, value)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.global_config:
            args = _apply_config_file(parser, argv, args)
        args.seed_given = args.seed is not None
        if args.seed is None:
            args.seed = 0
        return args.func(args)
    except BrokenPipeError:
        # downstream reader closed early (e.g. `| head`); not an error
        sys.stdout = open(os.devnull, "w")
        return 0
    except (ValidationError, ValueError, KeyError) as exc:
        print(f"radimpute: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report, then a generic failure code
        print(f"radimpute: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
