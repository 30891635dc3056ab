"""Command line front end wiring the pipeline together.

One binary with subcommands: simulate -> label -> train -> filter / profile
-> evaluate / compare. Every output file begins with a provenance header
(tool version, effective seed, digest of the configuration), and nothing
time- or path-dependent leaks into the bytes, so a fixed seed and config
reproduce outputs exactly.

Exit codes: 0 success, 1 usage error, 2 data or invariant error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DriveloadError, InsufficientDataError, ParseError
from .filtering import (
    ROAD_PRESETS,
    builtin_matrices,
    decide,
    fixed_policy,
    init_filter,
    policy_from_awp,
    policy_from_road_types,
    run_filter,
)
from .journey import ROAD_TAGS, default_schema, read_journey, write_journey
from .labeling import (
    AWP_CLASSES,
    HIGH,
    LOW,
    LabelWindow,
    awp_from_lwr,
    label_prompts,
    lwr,
    window_spans,
)
from .likelihood import read_tables, train_likelihoods, write_tables
from .metrics import best_f1_threshold, binary_metrics, compare_policies, roc
from .profiling import decide_awp, run_profiling
from .simulator import SimConfig, road_cycle, simulate_population, write_truth, read_truth

# default output directory for subcommands that write one
ENV_OUT = "DRIVELOAD_OUT"

_SIM_DEFAULTS = {
    "n_per_class": "2",
    "duration_s": "600",
    "seed": "0",
    "separation": "3.0",
    "style_offset": "1.0",
    "channel_rate_hz": "10.0",
    "rate_jitter": "0.3",
    "prompt_min_s": "5.0",
    "prompt_max_s": "10.0",
    "road_cycle": "",
    "adapt_roads": "0",
}


class _UsageError(Exception):
    """Bad flag values that argparse's grammar cannot catch."""


def _fmt(x) -> str:
    return repr(float(x))


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def _provenance(cmd: str, seed: int, config_text: str) -> str:
    return f"driveload {__version__} {cmd} seed={seed} config={_digest(config_text)}"


def _canon(pairs) -> str:
    return "\n".join(f"{k}={v}" for k, v in sorted(pairs))


def _write_report(lines, out_path) -> None:
    text = "\n".join(lines) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        Path(out_path).write_text(text, encoding="utf-8")


def _read_journey_dir(path):
    d = Path(path)
    files = sorted(d.glob("*.journey"))
    if not files:
        raise InsufficientDataError(f"no .journey files in {d}")
    return [read_journey(f) for f in files]


def _read_sim_config(path):
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    merged = dict(_SIM_DEFAULTS)
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(p, line_no, "expected key=value")
        key = key.strip()
        if key not in _SIM_DEFAULTS:
            raise ParseError(p, line_no, f"unknown config key {key!r}")
        merged[key] = value.strip()
    return text, merged


def _parse_road_cycle(spec: str, duration_s: float):
    segments = []
    for part in spec.split(","):
        tag, sep, length = part.partition(":")
        tag = tag.strip()
        if not sep or tag not in ROAD_TAGS:
            raise ValueError(
                f"bad road_cycle segment {part!r}: expected <tag>:<seconds> "
                f"with tag one of {', '.join(ROAD_TAGS)}"
            )
        segments.append((tag, float(length)))
    return road_cycle(duration_s, segments)


def _parse_policy(text: str):
    if text == "road":
        return policy_from_road_types()
    kind, sep, arg = text.partition(":")
    if sep and kind == "fixed":
        names = builtin_matrices()
        if arg not in names:
            raise _UsageError(
                f"unknown preset {arg!r}; choose from {', '.join(sorted(names))}"
            )
        return fixed_policy(arg)
    if sep and kind == "awp":
        if arg not in AWP_CLASSES:
            raise _UsageError(f"awp class must be one of {', '.join(AWP_CLASSES)}")
        return policy_from_awp(arg)
    raise _UsageError(
        f"bad policy {text!r}: use fixed:<name>, road, or awp:<L|M|H>"
    )


def _cmd_simulate(args) -> int:
    config_text, kv = _read_sim_config(args.config)
    seed = args.seed if args.seed is not None else int(kv["seed"])
    duration_s = float(kv["duration_s"])
    contexts = ()
    context_matrices = {}
    if kv["road_cycle"]:
        contexts = _parse_road_cycle(kv["road_cycle"], duration_s)
        if kv["adapt_roads"] not in ("0", "1"):
            raise ValueError("adapt_roads must be 0 or 1")
        if kv["adapt_roads"] == "1":
            presets = builtin_matrices()
            context_matrices = {
                tag: presets[name] for tag, name in ROAD_PRESETS.items()
            }
    schema = default_schema()
    rate = float(kv["channel_rate_hz"])
    cfg = SimConfig(
        duration_s=duration_s,
        channel_rates={c.channel_id: rate for c in schema},
        rate_jitter=float(kv["rate_jitter"]),
        prompt_min_s=float(kv["prompt_min_s"]),
        prompt_max_s=float(kv["prompt_max_s"]),
        contexts=contexts,
        context_matrices=context_matrices,
        seed=seed,
    )
    population = simulate_population(
        int(kv["n_per_class"]),
        cfg,
        separation=float(kv["separation"]),
        style_offset=float(kv["style_offset"]),
        schema=schema,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    prov = _provenance("simulate", seed, config_text)
    for journey, truth in population:
        write_journey(journey, out_dir / f"{journey.journey_id}.journey", prov)
        write_truth(truth, out_dir / f"{journey.journey_id}.truth", prov)
    print(f"wrote {len(population)} journeys to {out_dir}")
    return 0


def _cmd_label(args) -> int:
    journey = read_journey(args.journey)
    window = LabelWindow(args.pre, args.post)
    labels = label_prompts(journey)
    if not labels:
        raise InsufficientDataError(f"{args.journey}: journey has no prompts")
    spans = window_spans([p.t_prompt for p in journey.prompts], window)
    ratio = lwr(labels)
    seed = args.seed or 0
    prov = _provenance(
        "label",
        seed,
        _canon([("journey", args.journey), ("pre", args.pre), ("post", args.post)]),
    )
    lines = [f"# {prov}"]
    for lab, (lo, hi, hi_open) in zip(labels, spans):
        edge = "open" if hi_open else "closed"
        lines.append(f"L {_fmt(lab.t)} {lab.label} {_fmt(lo)} {_fmt(hi)} {edge}")
    lines.append(f"R {_fmt(ratio)} {awp_from_lwr(ratio)}")
    _write_report(lines, args.out)
    return 0


def _cmd_train(args) -> int:
    journeys = _read_journey_dir(args.journeys)
    exclude = tuple(args.exclude or ())
    known = {j.journey_id for j in journeys}
    for jid in exclude:
        if jid not in known:
            raise ValueError(f"--exclude {jid!r}: no such journey in {args.journeys}")
    tables = train_likelihoods(journeys, exclude=exclude)
    seed = args.seed or 0
    prov = _provenance(
        "train",
        seed,
        _canon([("journeys", args.journeys), ("exclude", ",".join(exclude))]),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_tables(tables, out_dir, prov)
    print(f"wrote {len(tables)} tables to {out_dir}")
    return 0


def _cmd_filter(args) -> int:
    if args.threshold is not None and not 0.0 < args.threshold < 1.0:
        raise _UsageError("--threshold must lie strictly between 0 and 1")
    if args.prior_low is not None and not 0.0 < args.prior_low < 1.0:
        raise _UsageError("--prior-low must lie strictly between 0 and 1")
    journey = read_journey(args.journey)
    tables = read_tables(args.tables)
    policy = _parse_policy(args.policy)
    state = init_filter(policy, tables, args.prior_low)
    posteriors = run_filter(journey, state)
    seed = args.seed or 0
    prov = _provenance(
        "filter",
        seed,
        _canon(
            [
                ("journey", args.journey),
                ("tables", args.tables),
                ("policy", args.policy),
                ("threshold", args.threshold),
                ("prior_low", args.prior_low),
            ]
        ),
    )
    lines = [f"# {prov}"]
    for p in posteriors:
        line = f"{_fmt(p.t)} {_fmt(p.pi_low)} {_fmt(p.pi_high)}"
        if args.threshold is not None:
            line += f" {decide(p, args.threshold)}"
        lines.append(line)
    _write_report(lines, args.out)
    if args.out is not None:
        print(f"wrote {len(posteriors)} posteriors to {args.out}")
    return 0


def _cmd_profile(args) -> int:
    journeys = _read_journey_dir(args.journeys)
    seed = args.seed if args.seed is not None else 7
    report = run_profiling(
        journeys,
        length=args.length,
        seed=seed,
        split=args.split,
        n_features=args.n_features,
    )
    prov = _provenance(
        "profile",
        seed,
        _canon(
            [
                ("journeys", args.journeys),
                ("length", args.length),
                ("split", args.split),
                ("n_features", args.n_features),
            ]
        ),
    )
    lines = [f"# {prov}"]
    lines.append(f"length {report.length}")
    lines.append(f"split {report.split}")
    lines.append(f"n_features {report.n_features}")
    lines.append(f"n_train_windows {report.n_train_windows}")
    lines.append(f"n_test_windows {report.n_test_windows}")
    lines.append(f"window_accuracy {_fmt(report.window_accuracy)}")
    lines.append(f"window_macro_f1 {_fmt(report.window_macro_f1)}")
    lines.append(f"fused_accuracy {_fmt(report.fused_accuracy)}")
    lines.append(f"fused_macro_f1 {_fmt(report.fused_macro_f1)}")
    lines.append(f"unscored_journeys {report.n_unscored_journeys}")
    for row in report.rows:
        lines.append(
            f"J {row.journey_id} label={row.label} test_windows={row.n_test_windows}"
        )
        for k in range(row.window_scores.shape[0]):
            s = row.window_scores[k]
            cls = decide_awp(s)
            lines.append(f"W {_fmt(s[0])} {_fmt(s[1])} {_fmt(s[2])} {cls}")
        f = row.fused
        lines.append(f"F {_fmt(f[0])} {_fmt(f[1])} {_fmt(f[2])} {row.decision}")
    cm = report.confusion
    lines.append("confusion truth\\pred " + " ".join(cm.labels))
    for i, lab in enumerate(cm.labels):
        counts = " ".join(str(int(c)) for c in cm.counts[i])
        lines.append(f"{lab} {counts}")
    _write_report(lines, args.out)
    return 0


def _read_predictions(path):
    p = Path(path)
    times: list[float] = []
    scores: list[float] = []
    decisions: list[str] = []
    with p.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (3, 4):
                raise ParseError(p, line_no, "expected: <t> <pi_low> <pi_high> [decision]")
            try:
                t, _, hi = (float(v) for v in parts[:3])
            except ValueError:
                raise ParseError(p, line_no, "bad number") from None
            if len(parts) == 4:
                if parts[3] not in (LOW, HIGH):
                    raise ParseError(p, line_no, f"bad decision {parts[3]!r}")
                decisions.append(parts[3])
            times.append(t)
            scores.append(hi)
    if not times:
        raise ParseError(p, 0, "no posterior lines")
    if decisions and len(decisions) != len(times):
        raise ParseError(p, 0, "mixed lines with and without a decision column")
    return np.asarray(times), np.asarray(scores), decisions or None


def _read_scores(path, n_expected: int):
    p = Path(path)
    scores: list[float] = []
    with p.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(p, line_no, "expected: <t> <score>")
            try:
                scores.append(float(parts[1]))
            except ValueError:
                raise ParseError(p, line_no, "bad number") from None
    if len(scores) != n_expected:
        raise ParseError(
            p, 0, f"{len(scores)} scores do not match {n_expected} predictions"
        )
    return np.asarray(scores)


def _cmd_evaluate(args) -> int:
    if args.threshold is not None and not 0.0 < args.threshold < 1.0:
        raise _UsageError("--threshold must lie strictly between 0 and 1")
    times, scores, decisions = _read_predictions(args.pred)
    if args.scores is not None:
        scores = _read_scores(args.scores, times.size)
    truth = read_truth(args.truth)
    y_true = truth.labels_at(times)
    if decisions is None or args.threshold is not None:
        thr = args.threshold if args.threshold is not None else 0.5
        decisions = [HIGH if s >= thr else LOW for s in scores]
    m = binary_metrics(y_true, decisions)
    seed = args.seed or 0
    prov = _provenance(
        "evaluate",
        seed,
        _canon(
            [
                ("pred", args.pred),
                ("truth", args.truth),
                ("scores", args.scores),
                ("threshold", args.threshold),
            ]
        ),
    )
    lines = [f"# {prov}"]
    lines.append(f"n {times.size}")
    lines.append(f"accuracy {_fmt(m.accuracy)}")
    lines.append(f"precision {_fmt(m.precision)}")
    lines.append(f"recall {_fmt(m.recall)}")
    lines.append(f"f1 {_fmt(m.f1)}")
    lines.append("flags " + (",".join(m.flags) if m.flags else "-"))
    if len(set(y_true)) == 2:
        lines.append(f"auc {_fmt(roc(y_true, scores).auc)}")
        thr, f1 = best_f1_threshold(y_true, scores)
        lines.append(f"best_f1 {_fmt(f1)} threshold {_fmt(thr)}")
    else:
        lines.append("auc nan")
        lines.append("best_f1 nan threshold nan")
    _write_report(lines, args.out)
    return 0


def _cmd_compare(args) -> int:
    journeys = _read_journey_dir(args.journeys)
    policies = {}
    for name in args.policies.split(","):
        name = name.strip()
        if not name:
            raise _UsageError("--policies has an empty entry")
        policies[name] = _parse_policy(name)
    if args.tables is None and not args.loo:
        raise _UsageError("pass --tables <dir> or --loo")
    if args.tables is not None and args.loo:
        raise _UsageError("--tables and --loo are mutually exclusive")
    per_journey = None
    tables = None
    if args.loo:
        per_journey = {
            j.journey_id: train_likelihoods(journeys, exclude=(j.journey_id,))
            for j in journeys
        }
    else:
        tables = read_tables(args.tables)
    report = compare_policies(
        journeys, tables, policies, per_journey_tables=per_journey
    )
    seed = args.seed or 0
    prov = _provenance(
        "compare",
        seed,
        _canon(
            [
                ("journeys", args.journeys),
                ("tables", args.tables),
                ("loo", int(bool(args.loo))),
                ("policies", args.policies),
            ]
        ),
    )
    lines = [f"# {prov}"]
    lines.append(f"journeys {report.n_journeys}")
    table_rows = ["policy,journey,n,auc,f1,threshold"]
    for pol in report.policies:
        lines.append(
            f"P {pol.name} n={pol.n_instances} auc={_fmt(pol.auc)} "
            f"f1={_fmt(pol.f1)} threshold={_fmt(pol.threshold)}"
        )
        table_rows.append(
            f"{pol.name},ALL,{pol.n_instances},{_fmt(pol.auc)},"
            f"{_fmt(pol.f1)},{_fmt(pol.threshold)}"
        )
        for row in pol.per_journey:
            auc = "none" if row.auc is None else _fmt(row.auc)
            lines.append(
                f"PJ {pol.name} {row.journey_id} n={row.n_instances} "
                f"auc={auc} f1={_fmt(row.f1)} threshold={_fmt(row.threshold)}"
            )
            table_rows.append(
                f"{pol.name},{row.journey_id},{row.n_instances},{auc},"
                f"{_fmt(row.f1)},{_fmt(row.threshold)}"
            )
    _write_report(lines, args.out)
    if args.table is not None:
        Path(args.table).write_text("\n".join(table_rows) + "\n", encoding="utf-8")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driveload",
        description="Workload estimation and driver profiling pipeline.",
    )
    parser.add_argument(
        "--version", action="version", version=f"driveload {__version__}"
    )
    sub = parser.add_subparsers(dest="cmd", metavar="<command>")
    default_dir = os.environ.get(ENV_OUT, ".")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--seed", type=int, default=None, help="seed recorded in output headers"
    )

    p = sub.add_parser(
        "simulate", parents=[common], help="generate journeys plus truth sidecars"
    )
    p.add_argument("--config", required=True, help="flat key=value config file")
    p.add_argument("--out", default=default_dir, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser(
        "label", parents=[common], help="prompt labels and the journey's profile"
    )
    p.add_argument("--journey", required=True)
    p.add_argument("--pre", type=float, default=2.0, help="window seconds before a prompt")
    p.add_argument("--post", type=float, default=3.0, help="window seconds after a prompt")
    p.add_argument("--out", default=None, help="report path (default stdout)")
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser(
        "train", parents=[common], help="fit likelihood tables from labeled journeys"
    )
    p.add_argument("--journeys", required=True, help="directory of .journey files")
    p.add_argument(
        "--exclude", action="append", default=None, help="journey id to hold out (repeatable)"
    )
    p.add_argument("--out", default=default_dir, help="output directory for .lik tables")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser(
        "filter", parents=[common], help="posterior workload trajectory for a journey"
    )
    p.add_argument("--journey", required=True)
    p.add_argument("--tables", required=True, help="directory of .lik tables")
    p.add_argument(
        "--policy", default="fixed:Standard", help="fixed:<name>, road, or awp:<L|M|H>"
    )
    p.add_argument(
        "--threshold", type=float, default=None, help="append a decision column at this threshold"
    )
    p.add_argument("--prior-low", type=float, default=None, help="override the initial prior")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser(
        "profile", parents=[common], help="train and evaluate the profile classifier"
    )
    p.add_argument("--journeys", required=True, help="directory of .journey files")
    p.add_argument("--length", type=int, default=400, help="window length in grid samples")
    p.add_argument("--split", choices=("window", "journey"), default="window")
    p.add_argument("--n-features", type=int, default=2000)
    p.add_argument("--out", default=None, help="report path (default stdout)")
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser(
        "evaluate", parents=[common], help="score a posterior file against a truth sidecar"
    )
    p.add_argument("--pred", required=True, help="filter output file")
    p.add_argument("--truth", required=True, help="truth sidecar file")
    p.add_argument("--scores", default=None, help="optional replacement scores file")
    p.add_argument(
        "--threshold", type=float, default=None, help="re-derive decisions at this threshold"
    )
    p.add_argument("--out", default=None, help="report path (default stdout)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser(
        "compare", parents=[common], help="evaluate several policies on the same journeys"
    )
    p.add_argument("--journeys", required=True, help="directory of .journey files")
    p.add_argument("--tables", default=None, help="directory of .lik tables")
    p.add_argument(
        "--loo", action="store_true", help="train leave-one-out tables instead of --tables"
    )
    p.add_argument("--policies", required=True, help="comma-separated policy specs")
    p.add_argument("--out", default=None, help="report path (default stdout)")
    p.add_argument("--table", default=None, help="optional CSV table for plotting")
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems and 0 on --help/--version;
        # fold the former onto this tool's usage code
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"driveload: {exc}", file=sys.stderr)
        return 1
    except (DriveloadError, ValueError, OSError) as exc:
        print(f"driveload: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
