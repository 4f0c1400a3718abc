"""Command-line entry points for every pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Machine-readable artifacts go to files; a short human summary goes to
standard output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .baselines import evaluation_report
from .dataset import load_csv, save_csv, split
from .errors import NumericalError, PracticeGPError
from .gp import BACKEND, Family, from_json, to_json
from .policy import optimize_scaffold, policy_accuracy, policy_map
from .score_perf import evaluate_performance, parse_score, parse_smf
from .simulator import ImprovementModel, TeacherRule, simulate_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are 1 here
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _family(name: str) -> Family:
    try:
        return Family(name.lower())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown kernel family {name!r} (expected rbf, ratquad, matern52)"
        ) from None


def _rule(name: str) -> TeacherRule:
    from .dataset import PracticeMode

    table = {
        "reference": TeacherRule.reference,
        "always-pitch": lambda: TeacherRule.always(PracticeMode.PITCH),
        "always-timing": lambda: TeacherRule.always(PracticeMode.TIMING),
    }
    if name not in table:
        raise argparse.ArgumentTypeError(
            f"unknown rule {name!r} (expected reference, always-pitch, always-timing)"
        )
    return table[name]()


def cmd_features(args) -> int:
    score = parse_score(Path(args.score).read_text(encoding="utf-8"))
    perf = parse_smf(Path(args.midi).read_bytes())
    result = evaluate_performance(score, perf)
    print(f"{result.pitch!r},{result.timing!r}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    rule = _rule(args.rule)
    model = ImprovementModel(
        direct_gain=args.direct_gain,
        transfer_gain=args.transfer_gain,
        noise_sd=args.noise_sd,
    )
    dataset = simulate_dataset(
        rule, model, n=args.n, bpm_choices=tuple(args.bpm), seed=args.seed
    )
    save_csv(dataset, args.out)
    print(f"wrote {len(dataset)} tuples to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    dataset = load_csv(args.dataset)
    holdout = None
    if args.holdout > 0:
        dataset, holdout = split(dataset, args.holdout, seed=args.seed)
    params, model, trace = optimize_scaffold(
        dataset, args.family, budget=args.budget, seed=args.seed, n_jobs=args.jobs
    )
    Path(args.out).write_text(to_json(model), encoding="utf-8")
    if args.trace:
        Path(args.trace).write_text(trace.to_csv(), encoding="utf-8")
    best = trace.iterations[trace.best_index()]
    print(
        f"best a={params.a!r} u_mu={params.u_mu!r} cv_accuracy={best.objective:.4f} "
        f"({len(trace.iterations)} evaluations)"
    )
    print(f"train accuracy {policy_accuracy(model, dataset):.4f} on {len(dataset)} tuples")
    if holdout is not None:
        print(f"held-out accuracy {policy_accuracy(model, holdout):.4f} on {len(holdout)} tuples")
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    dataset = load_csv(args.dataset)
    model = from_json(Path(args.model).read_text(encoding="utf-8"))
    gp_accuracy = policy_accuracy(model, dataset)
    if args.holdout > 0:
        train, test = split(dataset, args.holdout, seed=args.seed)
        report = evaluation_report(train, test)
    else:
        report = evaluation_report(dataset)
    report["gp"] = {"accuracy": gp_accuracy, "family": model.kernel.family.value}
    print(f"GP policy accuracy          {gp_accuracy:8.4f}")
    for name, acc in report["accuracy_in_sample"].items():
        print(f"{name:<22}in-sample {acc:8.4f}")
    for name, acc in report.get("accuracy_held_out", {}).items():
        print(f"{name:<22}held-out  {acc:8.4f}")
    print(
        f"linear: R2={report['linear']['r_squared_at_best_a']:.4f} "
        f"best-a interval {report['linear']['best_a_interval']}"
    )
    if args.report:
        Path(args.report).write_text(
            json.dumps(report, indent=2, sort_keys=True), encoding="utf-8"
        )
        print(f"report written to {args.report}")
    return EXIT_OK


def cmd_policy_map(args) -> int:
    model = from_json(Path(args.model).read_text(encoding="utf-8"))
    grid = policy_map(model, bpm=args.bpm, resolution=args.resolution)
    Path(args.out).write_text(grid.to_csv(), encoding="utf-8")
    timing = grid.timing_cell_count()
    total = args.resolution * args.resolution
    print(f"bpm={args.bpm}: {timing}/{total} cells recommend timing practice; wrote {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    app = create_app(
        ServiceConfig(
            data_dir=args.data_dir,
            default_family=args.family,
            default_bpm_candidates=tuple(args.bpm),
            frontend_dir=args.frontend,
        )
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="practicegp", description=__doc__)
    parser.add_argument("--version", action="version", version=f"practicegp {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="compute pitch/timing error of a MIDI performance")
    p.add_argument("--score", required=True, help="score JSON document")
    p.add_argument("--midi", required=True, help="Standard MIDI File of the performance")
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("simulate", help="generate a synthetic practice dataset")
    p.add_argument("--rule", default="reference", type=str, choices=["reference", "always-pitch", "always-timing"])
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bpm", type=float, nargs="+", default=[50.0, 80.0, 100.0])
    p.add_argument("--direct-gain", type=float, default=ImprovementModel.direct_gain)
    p.add_argument("--transfer-gain", type=float, default=ImprovementModel.transfer_gain)
    p.add_argument("--noise-sd", type=float, default=ImprovementModel.noise_sd)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("train", help="Bayesian-optimize utility weights and fit the policy GP")
    p.add_argument("--dataset", required=True)
    p.add_argument("--family", type=_family, default=Family.RATQUAD)
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", type=float, default=0.0, help="fraction held out for reporting")
    p.add_argument("--jobs", type=int, default=None, help="fold-evaluation worker processes")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.add_argument("--trace", default=None, help="output BO trace CSV path")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="score a model and the regression baselines on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None, help="write the full report JSON here")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("policy-map", help="emit the recommendation grid at one tempo as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--bpm", type=float, default=80.0)
    p.add_argument("--resolution", type=int, default=41)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_policy_map)

    p = sub.add_parser("serve", help="run the practice-session HTTP service")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--family", type=_family, default=Family.RATQUAD)
    p.add_argument("--bpm", type=float, nargs="+", default=[50.0, 80.0, 100.0])
    p.add_argument("--frontend", default=None, help="directory of built UI assets to serve at /")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (PracticeGPError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
